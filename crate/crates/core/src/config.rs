//! Run configuration files (TOML): `[model]`, `[train]` and `[data]` tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::mnist::load_pixel_stream;
use crate::data::synth::{gen_synthetic_freq_task, SynthConfig};
use crate::data::{load_manifest, random_permutation, Dataset};
use crate::error::{Error, Result};
use crate::metrics::SopConvention;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

fn d_length() -> usize {
    128
}
fn d_channels() -> usize {
    8
}
fn d_train() -> usize {
    2000
}
fn d_test() -> usize {
    400
}
fn d_p_max() -> f64 {
    0.5
}
fn d_images() -> String {
    "digits-images-idx3-ubyte".into()
}
fn d_labels() -> String {
    "digits-labels-idx1-ubyte".into()
}

/// Where training and validation samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Frequency-coded event task generated in memory.
    Synth {
        classes: usize,
        #[serde(default = "d_length")]
        length: usize,
        #[serde(default = "d_channels")]
        channels: usize,
        #[serde(default = "d_train")]
        train_samples: usize,
        #[serde(default = "d_test")]
        test_samples: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "d_p_max")]
        p_max: f64,
    },
    /// EVSQ files listed in manifests.
    Manifest { train: PathBuf, test: PathBuf },
    /// Pixel streams from IDX files; test samples follow the training ones.
    PixelStream {
        dir: PathBuf,
        #[serde(default = "d_images")]
        images: String,
        #[serde(default = "d_labels")]
        labels: String,
        train_samples: usize,
        test_samples: usize,
        /// Seed of a fixed pixel permutation; none keeps raster order.
        #[serde(default)]
        permute_seed: Option<u64>,
    },
}

impl DataConfig {
    /// `(train, test)` datasets. Relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<(Dataset, Dataset)> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        match self {
            DataConfig::Synth { classes, length, channels, train_samples, test_samples, seed, p_max } => {
                let mk = |n: usize, s: u64| -> Result<Dataset> {
                    let mut c = SynthConfig::new(*classes, *length, *channels, n, s);
                    c.p_max = *p_max;
                    Dataset::from_events(gen_synthetic_freq_task(&c)?, *classes)
                };
                Ok((mk(*train_samples, *seed)?, mk(*test_samples, seed.wrapping_add(0x7E57))?))
            }
            DataConfig::Manifest { train, test } => {
                let tr = load_manifest(resolve(train))?.load()?;
                let te = load_manifest(resolve(test))?.load()?;
                Ok((tr, te))
            }
            DataConfig::PixelStream { dir, images, labels, train_samples, test_samples, permute_seed } => {
                let dir = resolve(dir);
                let perm = permute_seed.map(|s| random_permutation(784, s));
                let load = |off, n| load_pixel_stream(dir.join(images), dir.join(labels), off, n, perm.as_deref());
                Ok((load(0, *train_samples)?, load(*train_samples, *test_samples)?))
            }
        }
    }
}

fn d_every() -> usize {
    1
}

/// Output options of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write a checkpoint every this many epochs (the last one is always written).
    #[serde(default = "d_every")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub sop_convention: SopConvention,
    /// Stop once validation accuracy reaches this value.
    #[serde(default)]
    pub target_accuracy: Option<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { checkpoint_every: 1, sop_convention: SopConvention::SpikeCount, target_accuracy: None }
    }
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.model.resolve_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.output.checkpoint_every == 0 {
            return Err(Error::config("checkpoint_every must be positive"));
        }
        if let DataConfig::Synth { classes, length, channels, .. } = &self.data {
            if *classes != self.model.num_classes || *channels != self.model.input_dim || *length == 0 {
                return Err(Error::config("synthetic data shape does not match the model"));
            }
        }
        Ok(())
    }

    /// Model config with training ablations applied.
    pub fn effective_model(&self) -> ModelConfig {
        self.train.apply_to(&self.model)
    }
}
