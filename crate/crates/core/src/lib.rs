//! Deep resonate-and-fire networks built from diagonal state space layers.
//!
//! Each layer is a bank of complex oscillators `dx/dt = λ x + B u` with
//! HiPPO-derived eigenvalues, discretized exactly for spike inputs (or by
//! zero-order hold for continuous inputs), evaluated with an associative
//! scan, and thresholded on `Re(x)` to emit spikes. Training uses
//! backpropagation through time with a multi-Gaussian surrogate gradient.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod discretization;
pub mod error;
pub mod exec;
pub mod hippo;
pub mod metrics;
pub mod model;
pub mod real;
pub mod rng;
pub mod scan;
pub mod spike;
pub mod ssm;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
