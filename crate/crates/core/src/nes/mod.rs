//! Natural evolution strategies over the flat parameter vector.

mod config;
mod estimator;
mod optim;
mod trace;
mod train;

pub use config::{LossTransform, NesConfig, OptimizerKind};
pub use estimator::{estimate, mirrored_pairs, nes_gradient_estimate, standardize, Generation};
pub use optim::{apply_step, nes_update, OptimizerState};
pub use trace::{TraceMeta, TraceRecord, TrainingTrace, TRACE_HEADER};
pub use train::{batch_loss, check_data, minibatch, train_loop, train_loop_observed};
