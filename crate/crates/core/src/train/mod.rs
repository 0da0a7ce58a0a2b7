//! Loss, optimizer, schedule, BPTT training loop and gradient checking.

pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, Stencil};
pub use loss::{cross_entropy_loss, softmax_cross_entropy};
pub use optim::{adam_step, cosine_lr, AdamConfig, AdamState, GroupHyper};
pub use trainer::{Ablation, EpochMetrics, TrainConfig, Trainer};
