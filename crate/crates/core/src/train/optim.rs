use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, ParamGroup};
use crate::real::Real;

/// Cosine annealing from `lr_max` at step 0 to `lr_min` at `total`.
pub fn cosine_lr(step: u64, total: u64, lr_max: f64, lr_min: f64) -> f64 {
    if total == 0 {
        return lr_max;
    }
    let x = step.min(total) as f64 / total as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * x).cos())
}

/// Learning rate and decoupled weight decay of one parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupHyper {
    pub lr: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments, one flat buffer per learnable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<T: Real>(params: &ModelParams<T>) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|(_, _, t)| t.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// One AdamW step with bias correction. `hyper` gives each group's rate and
/// decay; tensors whose name is in `frozen` are left untouched, moments
/// included.
pub fn adam_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut AdamState,
    cfg: &AdamConfig,
    hyper: impl Fn(ParamGroup) -> GroupHyper,
    frozen: impl Fn(&str) -> bool,
) {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (idx, ((name, group, p), (_, _, g))) in params.tensors_mut().into_iter().zip(grads.tensors()).enumerate() {
        if frozen(&name) {
            continue;
        }
        let h = hyper(group);
        let (m, v) = (&mut state.m[idx], &mut state.v[idx]);
        for i in 0..p.len() {
            let gi = g[i].f64();
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let update = (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.eps);
            let mut x = p[i].f64();
            x -= h.lr * h.weight_decay * x;
            x -= h.lr * update;
            p[i] = T::of(x);
        }
    }
}
