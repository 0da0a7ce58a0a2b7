//! Plain-text dataset manifests and the CSV event converter.
//!
//! A manifest is UTF-8 text with optional `# key: value` header lines
//! (`num_channels`, `num_classes`, `split`) followed by `path<TAB>label`
//! lines. Relative paths resolve against the manifest's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::evsq::{read_evsq_file, write_evsq_file};
use super::preprocess::{bin_events, pool_channels, PoolMode};
use super::{Dataset, EventSequence, Input, Label, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestItem {
    pub path: PathBuf,
    pub label: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub items: Vec<ManifestItem>,
    pub num_channels: usize,
    pub num_classes: usize,
    pub split: String,
    /// Directory relative paths resolve against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.items.iter().find(|i| i.label as usize >= self.num_classes) {
            return Err(Error::input(format!(
                "label {} of {} outside [0, {})",
                bad.label,
                bad.path.display(),
                self.num_classes
            )));
        }
        Ok(())
    }

    pub fn resolve(&self, item: &ManifestItem) -> PathBuf {
        if item.path.is_absolute() {
            item.path.clone()
        } else {
            self.root.join(&item.path)
        }
    }

    /// Read every listed EVSQ file. Labels come from the manifest.
    pub fn load(&self) -> Result<Dataset> {
        self.validate()?;
        let samples = self
            .items
            .iter()
            .map(|item| {
                let seq = read_evsq_file(self.resolve(item))?;
                Ok(Sample { input: Input::Events(seq.raster), label: Label::Class(item.label) })
            })
            .collect::<Result<Vec<_>>>()?;
        let num_channels = match samples.first() {
            Some(s) if self.num_channels == 0 => s.input.channels(),
            _ => self.num_channels,
        };
        Dataset::new(samples, num_channels, self.num_classes)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut m = DatasetManifest {
        root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ..Default::default()
    };
    let mut max_label = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            if let Some((k, v)) = h.split_once(':') {
                let (k, v) = (k.trim(), v.trim());
                let num = || v.parse::<usize>().map_err(|_| Error::format(format!("line {}: bad {k}", n + 1)));
                match k {
                    "num_channels" => m.num_channels = num()?,
                    "num_classes" => m.num_classes = num()?,
                    "split" => m.split = v.to_string(),
                    _ => {}
                }
            }
            continue;
        }
        let (p, l) = line
            .rsplit_once('\t')
            .ok_or_else(|| Error::format(format!("line {}: expected path<TAB>label", n + 1)))?;
        let label: u16 = l.trim().parse().map_err(|_| Error::format(format!("line {}: bad label {l:?}", n + 1)))?;
        max_label = max_label.max(Some(label));
        m.items.push(ManifestItem { path: PathBuf::from(p), label });
    }
    if m.num_classes == 0 {
        m.num_classes = max_label.map_or(0, |k| k as usize + 1);
    }
    m.validate()?;
    Ok(m)
}

pub fn write_manifest(m: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "# num_channels: {}", m.num_channels).ok();
    writeln!(s, "# num_classes: {}", m.num_classes).ok();
    if !m.split.is_empty() {
        writeln!(s, "# split: {}", m.split).ok();
    }
    for item in &m.items {
        let p = item.path.to_str().ok_or_else(|| Error::input("manifest paths must be UTF-8"))?;
        if p.contains(['\t', '\n']) {
            return Err(Error::input(format!("path {p:?} contains a tab or newline")));
        }
        writeln!(s, "{p}\t{}", item.label).ok();
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Options of the CSV to EVSQ converter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvertOptions {
    /// Recording length in microseconds.
    pub duration_us: f64,
    pub bins: usize,
    pub channels: usize,
    /// Optional channel pooling applied after binning.
    pub pool_factor: usize,
    pub pool_mode: PoolMode,
    pub label: Option<u16>,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions { duration_us: 1e6, bins: 250, channels: 700, pool_factor: 1, pool_mode: PoolMode::Or, label: None }
    }
}

/// Parse `time_us,channel` rows. A non-numeric first row is taken as a header.
pub fn read_event_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, u32)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path.as_ref())
        .map_err(|e| Error::format(e.to_string()))?;
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::format(format!("row {}: expected time,channel", n + 1)));
        }
        let t = rec[0].parse::<f64>();
        let c = rec[1].parse::<u32>();
        match (t, c) {
            (Ok(t), Ok(c)) => out.push((t, c)),
            _ if n == 0 => continue,
            _ => return Err(Error::format(format!("row {}: cannot parse {:?}", n + 1, rec.as_slice()))),
        }
    }
    Ok(out)
}

/// Bin (and optionally pool) a CSV event recording and write it as EVSQ.
pub fn convert_csv(input: impl AsRef<Path>, output: impl AsRef<Path>, opts: &ConvertOptions) -> Result<EventSequence> {
    let raw = read_event_csv(input.as_ref())?;
    let mut seq = bin_events(&raw, opts.bins, opts.duration_us, opts.channels)?;
    if opts.pool_factor > 1 {
        seq = pool_channels(&seq, opts.pool_factor, opts.pool_mode)?;
    }
    seq.label = opts.label.map(Label::Class);
    seq.meta.source_id = input.as_ref().display().to_string();
    write_evsq_file(&seq, output)?;
    Ok(seq)
}
