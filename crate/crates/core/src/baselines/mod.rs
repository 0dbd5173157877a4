//! Score-function baselines and the exact enumeration gradient.
//!
//! Gradients here are of the negative ELBO with the exact KL term, laid out
//! like the model parameters (`[decoder; encoder]`). Decoder gradients are
//! taken pathwise at the sampled structure; encoder gradients use the
//! Gumbel score `d log G(gamma; h) / d phi`.

mod reinforce;
mod train;
mod unbiased;

pub use reinforce::{reinforce_batch_gradient, reinforce_gradient, ControlVariate, ControlVariateKind, SampleTerms, sample_terms};
pub use train::{baseline_train_loop, BaselineConfig, BaselineMethod};
pub use unbiased::{log_posterior, unbiased_gradient, unbiased_gradient_at};
