//! Gradient-free training of discrete structured variational auto-encoders.
//!
//! The crate is organised bottom-up:
//!
//! * [`math`]: parameter vectors, addressable random streams, a small MLP.
//! * [`structures`]: structure families, MAP solvers (Kruskal, Chu-Liu-Edmonds,
//!   Eisner) and brute-force enumeration oracles.
//! * [`gumbel`]: Gumbel noise and perturb-and-MAP sampling.
//! * [`vae`]: the discrete VAE, its sampled and exact negative ELBO.
//! * [`nes`]: the evolution-strategies training loop.
//! * [`baselines`]: REINFORCE estimators with control variates and the exact
//!   enumeration gradient.
//! * [`diagnostics`]: smoothing, convergence-bound checks and wall-clock benchmarks.
//! * [`data`]: synthetic datasets and their binary file format.

pub mod baselines;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gumbel;
pub mod math;
pub mod nes;
pub mod structures;
pub mod vae;

pub use error::{Error, Result};
pub use math::{Activation, MlpSpec, ParamVector, RngStream};
pub use structures::{EdgeScores, Graph, LatentSpace, StructureFamily, StructureIndicator};
pub use nes::{Generation, NesConfig, OptimizerKind, TrainingTrace};
pub use vae::{ElboEstimate, VaeModel};
