//! Event-stream data: rasters, labels, file formats, preprocessing,
//! augmentation and dataset generation.

pub mod augment;
pub mod evsq;
pub mod manifest;
pub mod mnist;
pub mod pixels;
pub mod preprocess;
pub mod synth;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use augment::{channel_shift, cutmix_events, cutmix_interval, Augmentation};
pub use evsq::{read_evsq, read_evsq_file, write_evsq, write_evsq_file};
pub use manifest::{convert_csv, load_manifest, write_manifest, ConvertOptions, DatasetManifest, ManifestItem};
pub use pixels::{permute_pixels, random_permutation, rasterize_pixel_stream};
pub use preprocess::{bin_events, pool_channels, PoolMode};
pub use synth::{gen_synthetic_freq_task, write_dataset, SynthConfig};

/// Target of a sample: a class index or a distribution over classes.
#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Class(u16),
    Soft(Vec<f32>),
}

impl Label {
    /// Dense probability vector of length `k`.
    pub fn to_dense(&self, k: usize) -> Result<Vec<f64>> {
        match self {
            Label::Class(c) if (*c as usize) < k => {
                let mut v = vec![0.0; k];
                v[*c as usize] = 1.0;
                Ok(v)
            }
            Label::Class(c) => Err(Error::input(format!("label {c} out of range for {k} classes"))),
            Label::Soft(p) if p.len() == k => Ok(p.iter().map(|&x| x as f64).collect()),
            Label::Soft(p) => Err(Error::input(format!("soft label has {} entries, expected {k}", p.len()))),
        }
    }

    /// Class used for accuracy: the index itself, or the argmax of a soft label
    /// (first index on ties).
    pub fn argmax(&self) -> usize {
        match self {
            Label::Class(c) => *c as usize,
            Label::Soft(p) => p
                .iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
                .0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeqMeta {
    pub source_id: String,
    /// Length before binning or cropping.
    pub original_length: usize,
}

/// Binary spike raster `[L, C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    pub raster: Array2<u8>,
    pub label: Option<Label>,
    pub meta: SeqMeta,
}

impl EventSequence {
    pub fn new(raster: Array2<u8>, label: Option<Label>) -> Result<Self> {
        let seq = EventSequence { meta: SeqMeta { source_id: String::new(), original_length: raster.nrows() }, raster, label };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.raster.nrows() == 0 || self.raster.ncols() == 0 {
            return Err(Error::input("raster must have L > 0 and C > 0"));
        }
        if self.raster.iter().any(|&v| v > 1) {
            return Err(Error::input("raster entries must be 0 or 1"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.raster.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.raster.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.raster.ncols()
    }

    pub fn event_count(&self) -> usize {
        self.raster.iter().filter(|&&v| v != 0).count()
    }
}

/// Model input of one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Events(Array2<u8>),
    Dense(Array2<f32>),
}

impl Input {
    pub fn len(&self) -> usize {
        match self {
            Input::Events(r) => r.nrows(),
            Input::Dense(x) => x.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        match self {
            Input::Events(r) => r.ncols(),
            Input::Dense(x) => x.ncols(),
        }
    }

    pub fn to_real<T: crate::Real>(&self) -> Array2<T> {
        match self {
            Input::Events(r) => r.mapv(|v| if v != 0 { T::one() } else { T::zero() }),
            Input::Dense(x) => x.mapv(|v| T::of(v as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Input,
    pub label: Label,
}

/// In-memory labelled dataset with a common channel count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub num_channels: usize,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, num_channels: usize, num_classes: usize) -> Result<Self> {
        let ds = Dataset { samples, num_channels, num_classes };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.input.channels() != self.num_channels {
                return Err(Error::input(format!(
                    "sample {i} has {} channels, expected {}",
                    s.input.channels(),
                    self.num_channels
                )));
            }
            s.label.to_dense(self.num_classes)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn from_events(seqs: Vec<EventSequence>, num_classes: usize) -> Result<Self> {
        let num_channels = seqs.first().map_or(0, EventSequence::channels);
        let samples = seqs
            .into_iter()
            .map(|s| {
                let label = s.label.ok_or_else(|| Error::input("unlabelled sequence in dataset"))?;
                Ok(Sample { input: Input::Events(s.raster), label })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples, num_channels, num_classes)
    }

    /// First `n` samples.
    pub fn take(&self, n: usize) -> Dataset {
        Dataset {
            samples: self.samples.iter().take(n).cloned().collect(),
            num_channels: self.num_channels,
            num_classes: self.num_classes,
        }
    }
}
