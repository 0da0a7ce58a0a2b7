//! Spiking-operation and parameter accounting, raster export and evaluation.

use std::fmt;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ParamGroup};
use crate::real::Real;
use crate::spike::SpikeMode;
use crate::train::loss::softmax_cross_entropy;
use crate::train::trainer::argmax;
use crate::exec;

/// What one spike costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SopConvention {
    /// One operation per emitted spike.
    #[default]
    SpikeCount,
    /// One operation per spike and receiving unit downstream.
    FanOut,
}

impl fmt::Display for SopConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SopConvention::SpikeCount => "spike_count",
            SopConvention::FanOut => "fanout",
        })
    }
}

/// Mean spiking operations per sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SopReport {
    /// Mean spikes per sample, per RF layer.
    pub per_layer_spikes: Vec<f64>,
    /// Per-layer contribution under `convention`; sums to `total_sops`.
    pub per_layer_sops: Vec<f64>,
    pub total_sops: f64,
    pub convention: SopConvention,
    pub samples: usize,
}

/// Units receiving each layer's spikes: the next layer, or the readout.
pub fn fan_outs(config: &ModelConfig) -> Vec<usize> {
    let n = config.layer_sizes.len();
    (0..n).map(|l| if l + 1 < n { config.layer_sizes[l + 1] } else { config.num_classes }).collect()
}

/// Report from exact integer spike totals over `samples` sequences.
pub fn sop_report(totals: &[u64], fan_out: &[usize], samples: usize, convention: SopConvention) -> SopReport {
    let n = samples.max(1) as f64;
    let per_layer_spikes: Vec<f64> = totals.iter().map(|&t| t as f64 / n).collect();
    let per_layer_sops: Vec<f64> = totals
        .iter()
        .zip(fan_out)
        .map(|(&t, &f)| match convention {
            SopConvention::SpikeCount => t as f64 / n,
            SopConvention::FanOut => (t * f as u64) as f64 / n,
        })
        .collect();
    SopReport { total_sops: per_layer_sops.iter().sum(), per_layer_spikes, per_layer_sops, convention, samples }
}

/// Tally binary rasters (one per layer) of a single sample.
pub fn count_sops_rasters(rasters: &[Array2<u8>], fan_out: &[usize], convention: SopConvention) -> SopReport {
    let totals: Vec<u64> = rasters.iter().map(|r| r.iter().filter(|&&v| v != 0).count() as u64).collect();
    sop_report(&totals, fan_out, 1, convention)
}

/// Result of [`evaluate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub loss: f64,
    pub sops: SopReport,
    /// Spikes per neuron and step.
    pub spike_rate: f64,
}

/// Hard-spike forward pass over every sample. Soft labels are scored against
/// their argmax.
pub fn evaluate<T: Real>(model: &Model<T>, data: &Dataset, convention: SopConvention) -> Result<EvalReport> {
    let k = model.config.num_classes;
    let n_layers = model.config.layer_sizes.len();
    let per_sample = exec::map_range(data.len(), |i| -> Result<(bool, f64, Vec<u64>, u64)> {
        let s = &data.samples[i];
        let u = s.input.to_real::<T>();
        let trace = model.forward(u.view(), SpikeMode::Hard)?;
        let target: Array1<T> = s.label.to_dense(k)?.into_iter().map(T::of).collect();
        let (loss, _) = softmax_cross_entropy(trace.logits.view(), target.view());
        let pred = argmax(trace.logits.iter().map(|v| v.f64()));
        let steps = (u.nrows() * model.config.layer_sizes.iter().sum::<usize>()) as u64;
        Ok((pred == s.label.argmax(), loss.f64(), trace.spikes_per_layer(), steps))
    });
    let (mut correct, mut loss, mut totals, mut steps) = (0usize, 0.0, vec![0u64; n_layers], 0u64);
    for r in per_sample {
        let (c, l, spikes, st) = r?;
        correct += usize::from(c);
        loss += l;
        totals.iter_mut().zip(spikes).for_each(|(t, s)| *t += s);
        steps += st;
    }
    let n = data.len().max(1) as f64;
    let sum: u64 = totals.iter().sum();
    Ok(EvalReport {
        accuracy: correct as f64 / n,
        loss: loss / n,
        sops: sop_report(&totals, &fan_outs(&model.config), data.len(), convention),
        spike_rate: if steps == 0 { 0.0 } else { sum as f64 / steps as f64 },
    })
}

/// [`evaluate`] keeping only the operation count.
pub fn count_sops<T: Real>(model: &Model<T>, data: &Dataset, convention: SopConvention) -> Result<SopReport> {
    Ok(evaluate(model, data, convention)?.sops)
}

/// Learnable real scalars; complex entries count twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamCount {
    pub total: usize,
    pub by_group: Vec<(ParamGroup, usize)>,
}

impl fmt::Display for ParamCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, n) in &self.by_group {
            writeln!(f, "{:<12} {n}", g.name())?;
        }
        write!(f, "{:<12} {}", "total", self.total)
    }
}

/// Count from the configuration alone. Fixed eigenbases and thresholds are
/// not learnable and are excluded.
pub fn count_params(config: &ModelConfig) -> ParamCount {
    let mut by = [0usize; 4];
    let h0 = config.layer_sizes[0];
    by[2] = h0 * config.input_dim + if config.encoder_bias { h0 } else { 0 };
    for (l, &h) in config.layer_sizes.iter().enumerate() {
        by[1] += 3 * h;
        by[0] += 2 * h * config.layer_input_dim(l);
    }
    let last = *config.layer_sizes.last().expect("non-empty layers");
    let k = config.num_classes;
    by[3] = k * last + if config.readout_bias { k } else { 0 };
    by[1] += k;
    let by_group: Vec<_> = ParamGroup::ALL.iter().copied().zip(by).collect();
    ParamCount { total: by.iter().sum(), by_group }
}

/// Count by walking the parameter tensors of a built model.
pub fn count_model_params<T: Real>(model: &Model<T>) -> ParamCount {
    let tensors = model.params.tensors();
    let by_group: Vec<_> = ParamGroup::ALL
        .iter()
        .map(|&g| (g, tensors.iter().filter(|(_, gg, _)| *gg == g).map(|(_, _, t)| t.len()).sum()))
        .collect();
    ParamCount { total: by_group.iter().map(|(_, n)| n).sum(), by_group }
}

/// Spike coordinates as CSV text with a `step,neuron` header.
pub fn raster_to_csv(spikes: &Array2<u8>) -> String {
    let mut s = String::from("step,neuron\n");
    for ((k, i), &v) in spikes.indexed_iter() {
        if v != 0 {
            s.push_str(&format!("{k},{i}\n"));
        }
    }
    s
}

/// Rebuild a `[steps, neurons]` raster from [`raster_to_csv`] output.
pub fn raster_from_csv(text: &str, steps: usize, neurons: usize) -> Result<Array2<u8>> {
    let mut r = Array2::zeros((steps, neurons));
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (k, i) = line.split_once(',').ok_or_else(|| Error::format(format!("line {}: expected step,neuron", n + 1)))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::format(format!("line {}: bad index", n + 1)));
        let (k, i) = (parse(k)?, parse(i)?);
        if k >= steps || i >= neurons {
            return Err(Error::format(format!("line {}: ({k}, {i}) outside raster", n + 1)));
        }
        r[[k, i]] = 1;
    }
    Ok(r)
}

/// Write `<stem>.csv` and `<stem>.png` (time left to right, neurons top to
/// bottom, spikes black).
pub fn export_raster(spikes: &Array2<u8>, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    let mut f = std::fs::File::create(stem.with_extension("csv"))?;
    f.write_all(raster_to_csv(spikes).as_bytes())?;
    let (l, h) = spikes.dim();
    let img = image::GrayImage::from_fn(l.max(1) as u32, h.max(1) as u32, |x, y| {
        let on = (x as usize) < l && (y as usize) < h && spikes[[x as usize, y as usize]] != 0;
        image::Luma([if on { 0 } else { 255 }])
    });
    img.save(stem.with_extension("png")).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}
