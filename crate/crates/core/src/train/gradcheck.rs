use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;

use super::loss::softmax_cross_entropy;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng;
use crate::spike::SpikeMode;

/// Gradients below this magnitude are compared in absolute terms.
pub const GRADCHECK_FLOOR: f64 = 1e-8;

/// Finite-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(x+ε) - f(x-ε)) / 2ε`, error `O(ε²)`.
    #[default]
    Central,
    /// Five-point central stencil, error `O(ε⁴)`.
    Central4,
}

/// Outcome of a central-difference comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Name and flat index of the worst entry.
    pub worst: (String, usize),
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

fn loss_of(model: &Model<f64>, input: ArrayView2<f64>, target: ArrayView1<f64>, mode: SpikeMode) -> Result<f64> {
    let logits = model.forward(input, mode)?.logits;
    Ok(softmax_cross_entropy(logits.view(), target).0)
}

/// Compare backpropagated gradients with central differences on a random
/// subset of `count` learnable scalars. Requires a differentiable forward
/// mode ([`SpikeMode::Smooth`] or [`SpikeMode::Identity`]).
pub fn grad_check(
    model: &Model<f64>,
    input: ArrayView2<f64>,
    target: ArrayView1<f64>,
    mode: SpikeMode,
    epsilon: f64,
    count: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    grad_check_with(model, input, target, mode, epsilon, Stencil::Central, GRADCHECK_FLOOR, count, seed)
}

/// [`grad_check`] with an explicit stencil and small-gradient floor.
#[allow(clippy::too_many_arguments)]
pub fn grad_check_with(
    model: &Model<f64>,
    input: ArrayView2<f64>,
    target: ArrayView1<f64>,
    mode: SpikeMode,
    epsilon: f64,
    stencil: Stencil,
    floor: f64,
    count: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if mode == SpikeMode::Hard {
        return Err(Error::config("gradient check needs a differentiable spike mode"));
    }
    let trace = model.forward(input, mode)?;
    let (_, d_logits) = softmax_cross_entropy(trace.logits.view(), target);
    let grads = model.backward(&trace, d_logits.view(), mode);

    let names: Vec<(String, usize)> = model.params.tensors().iter().map(|(n, _, t)| (n.clone(), t.len())).collect();
    let flat_grads: Vec<f64> = grads.tensors().iter().flat_map(|(_, _, t)| t.iter().copied()).collect();
    let total = flat_grads.len();
    let mut r = rng::stream(seed, &[0x6C]);
    let mut picks: Vec<usize> = sample(&mut r, total, count.min(total)).into_vec();
    picks.sort_unstable();

    let locate = |mut flat: usize| -> (usize, usize) {
        for (t, (_, len)) in names.iter().enumerate() {
            if flat < *len {
                return (t, flat);
            }
            flat -= len;
        }
        unreachable!("index within parameter count")
    };

    let mut work = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: (String::new(), 0),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for &flat in &picks {
        let (t, i) = locate(flat);
        let orig = model.params.tensors()[t].2[i];
        let mut eval_at = |v: f64| -> Result<f64> {
            work.params.tensors_mut()[t].2[i] = v;
            loss_of(&work, input, target, mode)
        };
        let numeric = match stencil {
            Stencil::Central => (eval_at(orig + epsilon)? - eval_at(orig - epsilon)?) / (2.0 * epsilon),
            Stencil::Central4 => {
                let (p1, m1) = (eval_at(orig + epsilon)?, eval_at(orig - epsilon)?);
                let (p2, m2) = (eval_at(orig + 2.0 * epsilon)?, eval_at(orig - 2.0 * epsilon)?);
                (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * epsilon)
            }
        };
        work.params.tensors_mut()[t].2[i] = orig;
        let analytic = flat_grads[flat];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(floor);
        report.checked += 1;
        if rel > report.max_rel_error || report.checked == 1 {
            report.max_rel_error = rel.max(report.max_rel_error);
            report.worst = (names[t].0.clone(), i);
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}
