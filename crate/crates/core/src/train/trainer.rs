use std::time::Instant;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::softmax_cross_entropy;
use super::optim::{adam_step, cosine_lr, AdamConfig, AdamState, GroupHyper};
use crate::data::augment::{channel_shift, cutmix_events, Augmentation};
use crate::data::{Dataset, EventSequence, Input, Label};
use crate::error::{Error, Result};
use crate::model::{InitScheme, Model, ModelConfig, ModelParams, ParamGroup};
use crate::real::Real;
use crate::spike::SpikeMode;
use crate::{exec, rng};

/// Lower bound on `-Re λ` when positive decay is enforced.
pub const MIN_DECAY: f64 = 1e-4;

/// Ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ablation {
    /// Keep `log η` at its initial value.
    #[serde(default)]
    pub fix_eta: bool,
    /// Random eigenvalues instead of the HiPPO spectrum.
    #[serde(default)]
    pub random_init: bool,
    /// Clamp `-Re λ ≥ MIN_DECAY` after every step.
    #[serde(default)]
    pub enforce_positive_decay: bool,
}

fn d_lr_conn() -> f64 {
    1e-3
}
fn d_lr_neuron() -> f64 {
    1e-4
}
fn d_wd() -> f64 {
    1e-2
}
fn d_epochs() -> usize {
    10
}
fn d_batch() -> usize {
    32
}
fn d_min_ratio() -> f64 {
    0.01
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Rate of the connection, encoder and readout groups.
    #[serde(default = "d_lr_conn")]
    pub lr_connections: f64,
    /// Rate of decays, frequencies, `η` and readout time constants.
    #[serde(default = "d_lr_neuron")]
    pub lr_neuron: f64,
    /// Decoupled weight decay; never applied to the neuron group.
    #[serde(default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    /// Cosine schedule floor as a fraction of each group's peak rate.
    #[serde(default = "d_min_ratio")]
    pub min_lr_ratio: f64,
    #[serde(default)]
    pub seed: u64,
    /// Global gradient-norm clip; off unless set.
    #[serde(default)]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub augmentation: Augmentation,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_connections: d_lr_conn(),
            lr_neuron: d_lr_neuron(),
            weight_decay: d_wd(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            min_lr_ratio: d_min_ratio(),
            seed: 0,
            grad_clip: None,
            ablation: Ablation::default(),
            augmentation: Augmentation::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_neuron >= 0.0) || !(self.lr_connections >= self.lr_neuron) {
            return Err(Error::config("learning rates must satisfy lr_connections >= lr_neuron >= 0"));
        }
        if !(self.weight_decay >= 0.0) || !(0.0..=1.0).contains(&self.min_lr_ratio) {
            return Err(Error::config("weight_decay must be >= 0 and min_lr_ratio in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return Err(Error::config("grad_clip must be positive"));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::config("adam betas must lie in [0, 1) and eps > 0"));
        }
        self.augmentation.validate()
    }

    /// Group hyperparameters at schedule factor `scale`.
    pub fn group(&self, g: ParamGroup, scale: f64) -> GroupHyper {
        match g {
            ParamGroup::Neuron => GroupHyper { lr: self.lr_neuron * scale, weight_decay: 0.0 },
            _ => GroupHyper { lr: self.lr_connections * scale, weight_decay: self.weight_decay },
        }
    }

    /// Model config with the init ablation applied.
    pub fn apply_to(&self, model: &ModelConfig) -> ModelConfig {
        let mut m = model.clone();
        if self.ablation.random_init {
            m.init = InitScheme::Random;
        }
        m
    }
}

/// Summary of one pass over the training set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    /// Mean spikes per sample over all RF layers.
    pub sops: f64,
    /// Spikes per neuron and step.
    pub spike_rate: f64,
    /// Peak-normalized schedule factor at the end of the epoch, times `lr_connections`.
    pub lr: f64,
    pub seconds: f64,
}

struct SampleResult<T> {
    grads: ModelParams<T>,
    loss: f64,
    correct: bool,
    spikes: u64,
    neuron_steps: u64,
}

/// Owns the model and optimizer state; one step per mini-batch.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: Model<T>,
    pub config: TrainConfig,
    pub state: AdamState,
    pub epoch: usize,
}

/// Per-group gradient norms, for diagnostics.
pub fn group_norms<T: Real>(g: &ModelParams<T>) -> Vec<(ParamGroup, f64)> {
    ParamGroup::ALL
        .iter()
        .map(|&grp| {
            let ss: f64 = g
                .tensors()
                .iter()
                .filter(|(_, gg, _)| *gg == grp)
                .flat_map(|(_, _, t)| t.iter())
                .map(|v| v.f64() * v.f64())
                .sum();
            (grp, ss.sqrt())
        })
        .collect()
}

fn describe_norms(norms: &[(ParamGroup, f64)]) -> String {
    norms.iter().map(|(g, n)| format!("{}={n:.3e}", g.name())).collect::<Vec<_>>().join(", ")
}

impl<T: Real> Trainer<T> {
    pub fn new(model: Model<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        model.config.validate()?;
        let state = AdamState::new(&model.params);
        Ok(Trainer { model, config, state, epoch: 0 })
    }

    fn steps_per_epoch(&self, n: usize) -> u64 {
        n.div_ceil(self.config.batch_size) as u64
    }

    fn prepare(&self, data: &Dataset, idx: usize, train: bool) -> Result<(Input, Label)> {
        let s = &data.samples[idx];
        let aug = &self.config.augmentation;
        let Input::Events(raster) = &s.input else {
            return Ok((s.input.clone(), s.label.clone()));
        };
        if !train || !aug.is_active() {
            return Ok((s.input.clone(), s.label.clone()));
        }
        let mut r = rng::stream(self.config.seed, &[0xA6, self.epoch as u64, idx as u64]);
        let mut seq = EventSequence { raster: raster.clone(), label: Some(s.label.clone()), meta: Default::default() };
        if aug.channel_shift {
            seq = channel_shift(&seq, aug.max_shift, aug.shift_prob, &mut r);
        }
        if aug.cutmix_prob > 0.0 && r.random::<f64>() < aug.cutmix_prob {
            let j = r.random_range(0..data.len());
            if let Input::Events(other) = &data.samples[j].input {
                if other.dim() == seq.raster.dim() {
                    let b = EventSequence { raster: other.clone(), label: Some(data.samples[j].label.clone()), meta: Default::default() };
                    seq = cutmix_events(&seq, &b, data.num_classes, &mut r)?;
                }
            }
        }
        let label = seq.label.take().expect("label set above");
        Ok((Input::Events(seq.raster), label))
    }

    fn sample_step(&self, data: &Dataset, idx: usize) -> Result<SampleResult<T>> {
        let (input, label) = self.prepare(data, idx, true)?;
        let target: Array1<T> = label.to_dense(data.num_classes)?.into_iter().map(T::of).collect();
        let u = input.to_real::<T>();
        let trace = self.model.forward(u.view(), SpikeMode::Hard)?;
        let (loss, d_logits) = softmax_cross_entropy(trace.logits.view(), target.view());
        let pred = argmax(trace.logits.iter().map(|v| v.f64()));
        let grads = self.model.backward(&trace, d_logits.view(), SpikeMode::Hard);
        let spikes = trace.spikes_per_layer().iter().sum();
        let neuron_steps = (u.nrows() * self.model.config.layer_sizes.iter().sum::<usize>()) as u64;
        Ok(SampleResult { grads, loss: loss.f64(), correct: pred == label.argmax(), spikes, neuron_steps })
    }

    /// One shuffled pass over `data` with a parameter update per mini-batch.
    pub fn train_epoch(&mut self, data: &Dataset) -> Result<EpochMetrics> {
        let start = Instant::now();
        if data.is_empty() {
            return Err(Error::input("empty training set"));
        }
        if data.num_channels != self.model.config.input_dim || data.num_classes != self.model.config.num_classes {
            return Err(Error::input(format!(
                "dataset has {} channels / {} classes, model expects {} / {}",
                data.num_channels, data.num_classes, self.model.config.input_dim, self.model.config.num_classes
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng::stream(self.config.seed, &[0x5A, self.epoch as u64]));

        let total_steps = self.steps_per_epoch(data.len()) * self.config.epochs.max(1) as u64;
        let freeze_eta = self.config.ablation.fix_eta;
        let (mut loss_sum, mut correct, mut spikes, mut neuron_steps) = (0.0, 0usize, 0u64, 0u64);
        let mut scale = 1.0;
        for batch in order.chunks(self.config.batch_size) {
            let len0 = data.samples[batch[0]].input.len();
            if batch.iter().any(|&i| data.samples[i].input.len() != len0) {
                return Err(Error::input("sequences in a batch must have equal length"));
            }
            let results = exec::map_range(batch.len(), |j| self.sample_step(data, batch[j]));
            let mut grads = self.model.params.zeros_like();
            let mut batch_loss = 0.0;
            for r in results {
                let r = r?;
                grads.add_assign(&r.grads);
                batch_loss += r.loss;
                correct += usize::from(r.correct);
                spikes += r.spikes;
                neuron_steps += r.neuron_steps;
            }
            grads.scale(T::of(1.0 / batch.len() as f64));
            let step = self.state.t;
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::NumericFailure {
                    message: format!(
                        "non-finite loss or gradient at step {step} (epoch {}): {}",
                        self.epoch,
                        describe_norms(&group_norms(&grads))
                    ),
                    residual: batch_loss,
                });
            }
            loss_sum += batch_loss;
            if let Some(clip) = self.config.grad_clip {
                let norm = group_norms(&grads).iter().map(|(_, n)| n * n).sum::<f64>().sqrt();
                if norm > clip {
                    grads.scale(T::of(clip / norm));
                }
            }
            scale = cosine_lr(step, total_steps, 1.0, self.config.min_lr_ratio);
            let cfg = &self.config;
            adam_step(
                &mut self.model.params,
                &grads,
                &mut self.state,
                &cfg.adam,
                |g| cfg.group(g, scale),
                |name| freeze_eta && name.ends_with(".log_eta"),
            );
            if cfg.ablation.enforce_positive_decay {
                let floor = T::of(MIN_DECAY.ln());
                for l in &mut self.model.params.layers {
                    l.log_neg_real.mapv_inplace(|v| v.max(floor));
                }
            }
            if !self.model.params.is_finite() {
                return Err(Error::NumericFailure {
                    message: format!("non-finite parameter after step {step}"),
                    residual: f64::NAN,
                });
            }
        }
        let n = data.len() as f64;
        let metrics = EpochMetrics {
            epoch: self.epoch,
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
            sops: spikes as f64 / n,
            spike_rate: if neuron_steps == 0 { 0.0 } else { spikes as f64 / neuron_steps as f64 },
            lr: self.config.lr_connections * scale,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.epoch += 1;
        Ok(metrics)
    }
}

/// Index of the largest value, first on ties.
pub fn argmax(values: impl Iterator<Item = f64>) -> usize {
    values.enumerate().fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b }).0
}
