use serde::{Deserialize, Serialize};

use super::ParameterStore;
use crate::error::{Error, Result};

/// How the clip threshold is applied to the gradient accumulators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipNorm {
    /// Rescale all gradients together when their joint L2 norm exceeds the threshold.
    #[default]
    GlobalL2,
    /// Clamp every gradient element into `[-clip, clip]`.
    Elementwise,
}

/// Result of one update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Clips the accumulated gradients, applies `param -= lr * grad`, then zeroes
/// the accumulators.
pub fn clip_and_step(store: &mut ParameterStore, lr: f64, clip: f64, mode: ClipNorm) -> Result<StepInfo> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if !(clip > 0.0) {
        return Err(Error::InvalidArgument(format!("clip threshold must be positive, got {clip}")));
    }
    let grad_norm = store.grad_norm();
    if !grad_norm.is_finite() {
        return Err(Error::NonFinite("gradient norm".into()));
    }
    let ids: Vec<_> = store.ids().collect();
    let mut clipped = false;
    match mode {
        ClipNorm::GlobalL2 => {
            let scale = if grad_norm > clip {
                clipped = true;
                clip / grad_norm
            } else {
                1.0
            };
            for id in ids {
                let grad = store.grad(id).values().to_vec();
                for (p, g) in store.value_mut(id).values_mut().iter_mut().zip(&grad) {
                    *p -= lr * (g * scale);
                }
            }
        }
        ClipNorm::Elementwise => {
            for id in ids {
                let grad = store.grad(id).values().to_vec();
                for (p, &g) in store.value_mut(id).values_mut().iter_mut().zip(&grad) {
                    let c = g.clamp(-clip, clip);
                    clipped |= c != g;
                    *p -= lr * c;
                }
            }
        }
    }
    store.zero_grad();
    Ok(StepInfo { grad_norm, clipped })
}
