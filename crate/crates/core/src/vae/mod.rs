//! The discrete structured VAE: encoder scores, decoder likelihood, sampled and
//! exact negative ELBO.

mod checkpoint;
mod elbo;
mod model;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use elbo::{bounded_loss, elbo_sample, elbo_sample_at, exact_elbo, exact_elbo_at, kl_term, ElboEstimate};
pub use model::{Architecture, ModelShape, VaeModel, DECODER, ENCODER};
