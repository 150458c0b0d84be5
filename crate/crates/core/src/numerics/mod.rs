//! Dense tensors, a reverse-mode tape, parameter stores and the SGD update.

mod checkpoint;
mod graph;
mod optim;
mod store;
mod tensor;

pub use checkpoint::{Checkpoint, RngState, FORMAT_VERSION};
pub use graph::{Graph, NodeId};
pub use optim::{clip_and_step, ClipNorm, StepInfo};
pub use store::{GradBuffer, ParamId, ParameterStore};
pub use tensor::Tensor;

/// Relative error used by every finite-difference comparison in this crate:
/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Numerically stable `log Σ exp(xs)`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
