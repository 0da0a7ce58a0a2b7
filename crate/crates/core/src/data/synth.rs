//! Frequency-coded event task: class `k` fires Bernoulli events at rate
//! `p_max · ½(1 + sin(ω_k t + φ))` on every channel, with `φ` drawn per
//! sample and channel.

use std::f64::consts::TAU;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use super::evsq::write_evsq_file;
use super::manifest::{write_manifest, DatasetManifest, ManifestItem};
use super::{EventSequence, Label, SeqMeta};
use crate::error::{Error, Result};
use crate::{exec, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub length: usize,
    pub channels: usize,
    pub samples: usize,
    pub seed: u64,
    /// Peak firing probability per step.
    pub p_max: f64,
    /// Lowest and highest class frequency in cycles per step.
    pub freq_range: (f64, f64),
}

impl SynthConfig {
    pub fn new(classes: usize, length: usize, channels: usize, samples: usize, seed: u64) -> Self {
        SynthConfig { classes, length, channels, samples, seed, p_max: 0.5, freq_range: (0.05, 0.5) }
    }

    /// Angular frequency of class `k` in radians per step, evenly spaced.
    pub fn omega(&self, k: usize) -> f64 {
        let (lo, hi) = self.freq_range;
        let f = if self.classes <= 1 { lo } else { lo + (hi - lo) * k as f64 / (self.classes - 1) as f64 };
        TAU * f
    }
}

/// Generate `samples` labelled rasters; sample `i` has class `i mod K`.
pub fn gen_synthetic_freq_task(cfg: &SynthConfig) -> Result<Vec<EventSequence>> {
    if cfg.classes < 2 {
        return Err(Error::config("synthetic task needs at least 2 classes"));
    }
    if cfg.length == 0 || cfg.channels == 0 {
        return Err(Error::config("length and channels must be positive"));
    }
    if !(cfg.p_max > 0.0 && cfg.p_max <= 1.0) {
        return Err(Error::config("p_max must lie in (0, 1]"));
    }
    Ok(exec::map_range(cfg.samples, |i| {
        let class = i % cfg.classes;
        let omega = cfg.omega(class);
        let mut r = rng::stream(cfg.seed, &[0x5F, i as u64]);
        let phases: Vec<f64> = (0..cfg.channels).map(|_| r.random::<f64>() * TAU).collect();
        let mut raster = Array2::zeros((cfg.length, cfg.channels));
        for t in 0..cfg.length {
            for (c, &phi) in phases.iter().enumerate() {
                let rate = cfg.p_max * 0.5 * (1.0 + (omega * t as f64 + phi).sin());
                raster[[t, c]] = u8::from(r.random::<f64>() < rate);
            }
        }
        EventSequence {
            raster,
            label: Some(Label::Class(class as u16)),
            meta: SeqMeta { source_id: format!("synth-freq-{}-{i}", cfg.seed), original_length: cfg.length },
        }
    }))
}

/// Write labelled sequences as `dir/NNNNNN.evsq` plus `dir/manifest.tsv`.
pub fn write_dataset(seqs: &[EventSequence], num_classes: usize, dir: impl AsRef<Path>, split: &str) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut items = Vec::with_capacity(seqs.len());
    for (i, s) in seqs.iter().enumerate() {
        let label = match s.label {
            Some(Label::Class(k)) => k,
            _ => return Err(Error::input("dataset export needs class labels")),
        };
        let name = format!("{split}_{i:06}.evsq");
        write_evsq_file(s, dir.join(&name))?;
        items.push(ManifestItem { path: name.into(), label });
    }
    let m = DatasetManifest {
        items,
        num_channels: seqs.first().map_or(0, EventSequence::channels),
        num_classes,
        split: split.to_string(),
        root: dir.to_path_buf(),
    };
    write_manifest(&m, dir.join(format!("{split}.tsv")))?;
    Ok(m)
}
