use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reinforce::{reinforce_batch_gradient, ControlVariate, ControlVariateKind};
use super::unbiased::unbiased_gradient_at;
use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::nes::{apply_step, check_data, minibatch, LossTransform, OptimizerKind, OptimizerState, TraceMeta, TraceRecord, TrainingTrace};
use crate::vae::VaeModel;

const TAG_SAMPLES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineMethod {
    ReinforceNone,
    ReinforceEma { decay: f64 },
    ReinforceBatch,
    ReinforceMultisample { r: usize },
    Unbiased,
}

impl BaselineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::ReinforceNone => "reinforce_none",
            BaselineMethod::ReinforceEma { .. } => "reinforce_ema",
            BaselineMethod::ReinforceBatch => "reinforce_batch",
            BaselineMethod::ReinforceMultisample { .. } => "reinforce_multisample",
            BaselineMethod::Unbiased => "unbiased",
        }
    }

    fn control_variate(&self) -> Option<ControlVariateKind> {
        match *self {
            BaselineMethod::ReinforceNone => Some(ControlVariateKind::None),
            BaselineMethod::ReinforceEma { decay } => Some(ControlVariateKind::Ema { decay }),
            BaselineMethod::ReinforceBatch => Some(ControlVariateKind::BatchMean),
            BaselineMethod::ReinforceMultisample { r } => Some(ControlVariateKind::MultiSample { r }),
            BaselineMethod::Unbiased => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub eta: f64,
    pub optimizer: OptimizerKind,
    pub iterations: usize,
    pub batch_size: usize,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be finite and positive, got {}", self.eta)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Gradient-based training with a baseline estimator. Mini-batches follow the
/// same schedule as the NES loop for a given seed.
pub fn baseline_train_loop(
    model: &VaeModel,
    data: &[Vec<f64>],
    method: BaselineMethod,
    cfg: &BaselineConfig,
    rng: &RngStream,
) -> Result<(VaeModel, TrainingTrace)> {
    cfg.validate()?;
    check_data(model, data)?;
    let mut cv = method.control_variate().map(ControlVariate::new).transpose()?;
    let mut current = model.clone();
    let mut state = OptimizerState::new(model.num_params());
    let mut trace = TrainingTrace::new(TraceMeta {
        method: method.name().into(),
        optimizer: cfg.optimizer,
        standardize: false,
        loss: LossTransform::Raw,
    });
    for t in 0..cfg.iterations {
        let start = Instant::now();
        let idx = minibatch(data.len(), cfg.batch_size, t, rng);
        let batch: Vec<&[f64]> = idx.iter().map(|&k| data[k].as_slice()).collect();
        let params = current.params.values();
        let (grad, loss) = match cv.as_mut() {
            Some(cv) => reinforce_batch_gradient(&current, params, &batch, cv, &rng.child2(TAG_SAMPLES, t as u64))?,
            None => {
                let parts: Vec<_> = batch
                    .par_iter()
                    .map(|x| unbiased_gradient_at(&current, params, x))
                    .collect::<Result<_>>()?;
                let n = parts.len() as f64;
                let mut grad = vec![0.0; params.len()];
                let mut loss = 0.0;
                for (est, g) in &parts {
                    loss += est.total / n;
                    for (a, b) in grad.iter_mut().zip(g) {
                        *a += b / n;
                    }
                }
                (grad, loss)
            }
        };
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("{} gradient at iteration {t}", method.name())));
        }
        let mut values = params.to_vec();
        apply_step(&mut values, &grad, cfg.eta, &cfg.optimizer, &mut state)?;
        current.params = current.params.with_values(values)?;
        trace.push(TraceRecord {
            iter: t,
            mean_fitness: loss,
            grad_sq_norm: grad.iter().map(|g| g * g).sum(),
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
            eta: cfg.eta,
        })?;
    }
    Ok((current, trace))
}
