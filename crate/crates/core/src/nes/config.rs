use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        }
    }
}

/// What the fitness of a perturbation is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossTransform {
    /// Negative ELBO as is.
    Raw,
    /// Negative ELBO divided by the output dimension and clipped at `bound`
    /// (no clipping when `bound` is absent).
    Bounded { bound: Option<f64> },
}

impl LossTransform {
    pub fn apply(&self, loss: f64, output_dim: usize) -> f64 {
        match *self {
            LossTransform::Raw => loss,
            LossTransform::Bounded { bound } => {
                crate::vae::bounded_loss(loss, output_dim, bound.unwrap_or(f64::INFINITY))
            }
        }
    }

    pub fn bound(&self) -> Option<f64> {
        match *self {
            LossTransform::Bounded { bound } => bound,
            LossTransform::Raw => None,
        }
    }
}

/// Hyper-parameters of the evolution-strategies loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NesConfig {
    /// Perturbation scale.
    pub sigma: f64,
    /// Perturbations per iteration (both members of a mirrored pair count).
    pub population: usize,
    /// Step size.
    pub eta: f64,
    pub mirrored: bool,
    pub standardize: bool,
    pub optimizer: OptimizerKind,
    pub iterations: usize,
    pub batch_size: usize,
    /// Gumbel draws averaged per fitness evaluation.
    pub gumbel_samples: usize,
    /// Reuse the same Gumbel noise for every perturbation of an iteration.
    pub shared_gumbel: bool,
    pub loss: LossTransform,
}

impl Default for NesConfig {
    fn default() -> Self {
        Self {
            sigma: 0.01,
            population: 600,
            eta: 1e-3,
            mirrored: true,
            standardize: true,
            optimizer: OptimizerKind::Sgd,
            iterations: 100,
            batch_size: 32,
            gumbel_samples: 1,
            shared_gumbel: true,
            loss: LossTransform::Raw,
        }
    }
}

impl NesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be finite and positive, got {}", self.sigma)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be finite and positive, got {}", self.eta)));
        }
        if self.population == 0 {
            return Err(Error::InvalidConfig("population must be positive".into()));
        }
        if self.mirrored && self.population % 2 == 1 {
            return Err(Error::OddPopulation(self.population));
        }
        if self.batch_size == 0 || self.gumbel_samples == 0 {
            return Err(Error::InvalidConfig("batch_size and gumbel_samples must be positive".into()));
        }
        if let Some(b) = self.loss.bound() {
            if !(b > 0.0) {
                return Err(Error::InvalidConfig(format!("loss bound must be positive, got {b}")));
            }
        }
        Ok(())
    }
}
