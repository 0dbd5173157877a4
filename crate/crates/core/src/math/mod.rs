//! Dense numerical kernel: parameter vectors, seeded random streams and a
//! small multi-layer perceptron with hand-written reverse mode.

mod mlp;
mod param;
mod rng;

pub use mlp::{mlp_backward, mlp_backward_into, mlp_forward, Activation, MlpSpec};
pub use param::{ParamVector, Segment};
pub use rng::{gaussian_sample, RngStream};
pub(crate) use rng::clamped_uniform;

/// `log sum exp(xs)`, stable for large inputs.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = logsumexp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}
