use super::config::{NesConfig, OptimizerKind};
use super::estimator::Generation;
use crate::error::{Error, Result};
use crate::math::ParamVector;

/// Moment buffers for Adam; unused by SGD.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(d: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; d],
            v: vec![0.0; d],
        }
    }
}

/// Applies one descent step with `gradient` to `mu` in place.
pub fn apply_step(mu: &mut [f64], gradient: &[f64], eta: f64, optimizer: &OptimizerKind, state: &mut OptimizerState) -> Result<()> {
    if mu.len() != gradient.len() {
        return Err(Error::DimensionMismatch {
            context: "optimizer step",
            expected: mu.len(),
            got: gradient.len(),
        });
    }
    match *optimizer {
        OptimizerKind::Sgd => {
            for (p, g) in mu.iter_mut().zip(gradient) {
                *p -= eta * g;
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            if state.m.len() != mu.len() {
                *state = OptimizerState::new(mu.len());
            }
            state.step += 1;
            let c1 = 1.0 - beta1.powi(state.step as i32);
            let c2 = 1.0 - beta2.powi(state.step as i32);
            for k in 0..mu.len() {
                let g = gradient[k];
                state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g;
                state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g;
                let m_hat = state.m[k] / c1;
                let v_hat = state.v[k] / c2;
                mu[k] -= eta * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    Ok(())
}

/// New mean after one step along the generation's gradient estimate.
pub fn nes_update(mu: &ParamVector, gen: &Generation, cfg: &NesConfig, state: &mut OptimizerState) -> Result<ParamVector> {
    let mut values = mu.values().to_vec();
    apply_step(&mut values, &gen.gradient, cfg.eta, &cfg.optimizer, state)?;
    mu.with_values(values)
}
