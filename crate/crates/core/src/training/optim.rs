use super::grads::{params_mut, Grads};
use crate::snn::SpikingNet;
use crate::{Error, Result};

pub const RMAXPROP_EPS: f64 = 1e-8;

/// Running elementwise maximum of squared gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct RMaxPropState {
    pub v_max: Vec<f64>,
    pub rho: f64,
    /// Steps dropped because the gradient was not finite.
    pub skipped: u64,
}

impl RMaxPropState {
    pub fn new(n_params: usize, rho: f64) -> Self {
        Self {
            v_max: vec![0.0; n_params],
            rho,
            skipped: 0,
        }
    }
}

/// `v ← max(ρ·v, g²)`, `θ ← θ − lr·g/√(v + ε)`. A non-finite gradient leaves
/// both parameters and state untouched and bumps `state.skipped`.
///
/// Returns whether the step was applied.
pub fn rmaxprop_step(
    net: &mut SpikingNet,
    grads: &Grads,
    state: &mut RMaxPropState,
    lr: f64,
) -> Result<bool> {
    if grads.len() != state.v_max.len() || grads.len() != net.param_count() {
        return Err(Error::Shape(format!(
            "rmaxprop: {} grads, {} state slots, {} params",
            grads.len(),
            state.v_max.len(),
            net.param_count()
        )));
    }
    if !grads.is_finite() {
        state.skipped += 1;
        return Ok(false);
    }
    let rho = state.rho;
    for ((p, &g), v) in params_mut(net)
        .zip(grads.iter())
        .zip(state.v_max.iter_mut())
    {
        *v = (rho * *v).max(g * g);
        *p -= lr * g / (*v + RMAXPROP_EPS).sqrt();
    }
    Ok(true)
}

/// `lr_init · (1 + cos(π·epoch/epochs_max)) / 2`.
pub fn cosine_lr(epoch: usize, epochs_max: usize, lr_init: f64) -> f64 {
    lr_init * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs_max as f64).cos()) / 2.0
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut Grads, max_norm: f64) -> f64 {
    let n = grads.norm();
    if n > max_norm {
        grads.scale(max_norm / n);
    }
    n
}
