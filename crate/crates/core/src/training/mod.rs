//! Surrogate-gradient training through time for [`SpikingNet`](crate::snn::SpikingNet)
//! and the evaluation metrics.

mod bptt;
mod config;
mod eval;
mod fit;
mod grads;
mod loss;
mod optim;
mod regularize;

pub use bptt::{
    batch_gradient, deterministic_input, spike_input, BatchGradient, SpikeMode, StepInput,
};
pub use config::TrainConfig;
pub use eval::{evaluate, predict, ClassMetrics, EvalReport};
pub use fit::{fit, init_net, write_history_csv, EpochRecord, FitResult};
pub use grads::Grads;
pub use loss::{class_weights, softmax, weighted_cross_entropy};
pub use optim::{clip_global_norm, cosine_lr, rmaxprop_step, RMaxPropState, RMAXPROP_EPS};
pub use regularize::{balancing_penalty, eligibility_modulate, eligibility_traces};
