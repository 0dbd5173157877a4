use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::unbiased::log_posterior;
use crate::error::{Error, Result};
use crate::gumbel::{gumbel_log_density_dlocation, perturb_and_map_with_noise};
use crate::math::RngStream;
use crate::vae::VaeModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlVariateKind {
    None,
    /// Moving average of past mini-batch mean signals.
    Ema { decay: f64 },
    /// Mean signal of the other mini-batch samples.
    BatchMean,
    /// `r` samples per input; each uses the mean signal of the other `r - 1`.
    MultiSample { r: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlVariate {
    pub kind: ControlVariateKind,
    /// Running value of the EMA baseline, `None` before the first update.
    pub state: Option<f64>,
}

impl ControlVariate {
    pub fn new(kind: ControlVariateKind) -> Result<Self> {
        match kind {
            ControlVariateKind::Ema { decay } if !(decay > 0.0 && decay < 1.0) => {
                return Err(Error::InvalidConfig(format!("EMA decay must lie in (0, 1), got {decay}")));
            }
            ControlVariateKind::MultiSample { r } if r < 2 => {
                return Err(Error::InvalidConfig(format!("multi-sample baseline needs r >= 2, got {r}")));
            }
            _ => {}
        }
        Ok(Self { kind, state: None })
    }

    fn samples_per_input(&self) -> usize {
        match self.kind {
            ControlVariateKind::MultiSample { r } => r,
            _ => 1,
        }
    }
}

/// Per-draw ingredients of the score-function estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTerms {
    /// `-f(x, z*) + log q(z* | x) + log |Z|`.
    pub signal: f64,
    /// Gradient of `-f(x, z*)` over the decoder segment.
    pub decoder_grad: Vec<f64>,
    /// Gradient of `log G(gamma; h(x))` over the encoder segment.
    pub score_grad: Vec<f64>,
}

/// One perturb-and-MAP draw at `params` and its estimator terms.
pub fn sample_terms(model: &VaeModel, params: &[f64], x: &[f64], rng: &RngStream) -> Result<SampleTerms> {
    let scores = model.encode_scores_at(params, x)?;
    let (z, noise) = perturb_and_map_with_noise(&model.space, &scores, rng)?;
    let (f, g) = model.decoder_loglik_grad(params, x, &z)?;
    let log_q = log_posterior(model, &scores, &z)?;
    let dlog: Vec<f64> = noise
        .values
        .iter()
        .zip(&scores.0)
        .map(|(&v, &h)| gumbel_log_density_dlocation(v, h))
        .collect();
    Ok(SampleTerms {
        signal: -f + log_q + model.log_num_structures()?,
        decoder_grad: g.iter().map(|v| -v).collect(),
        score_grad: model.encoder_vjp(params, x, &dlog)?,
    })
}

/// Single-input REINFORCE gradient; see [`reinforce_batch_gradient`].
pub fn reinforce_gradient(model: &VaeModel, x: &[f64], cv: &mut ControlVariate, rng: &RngStream) -> Result<Vec<f64>> {
    Ok(reinforce_batch_gradient(model, model.params.values(), &[x], cv, rng)?.0)
}

/// Mini-batch mean REINFORCE gradient at `params` and the mean learning signal.
///
/// Input `k`, draw `j` uses stream `rng.child2(k, j)`. An EMA baseline is
/// read before and updated after the batch.
pub fn reinforce_batch_gradient(
    model: &VaeModel,
    params: &[f64],
    batch: &[&[f64]],
    cv: &mut ControlVariate,
    rng: &RngStream,
) -> Result<(Vec<f64>, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("reinforce needs a non-empty batch"));
    }
    let r = cv.samples_per_input();
    let terms: Vec<Vec<SampleTerms>> = batch
        .par_iter()
        .enumerate()
        .map(|(k, x)| (0..r).map(|j| sample_terms(model, params, x, &rng.child2(k as u64, j as u64))).collect())
        .collect::<Result<_>>()?;

    let per_input: Vec<f64> = terms.iter().map(|ts| ts.iter().map(|t| t.signal).sum::<f64>() / r as f64).collect();
    let n = batch.len() as f64;
    let batch_mean = per_input.iter().sum::<f64>() / n;
    let dec_len = model.decoder_len();
    let mut grad = vec![0.0; params.len()];
    for (k, ts) in terms.iter().enumerate() {
        for t in ts {
            let baseline = match cv.kind {
                ControlVariateKind::None => 0.0,
                ControlVariateKind::Ema { .. } => cv.state.unwrap_or(0.0),
                ControlVariateKind::BatchMean if batch.len() > 1 => (batch_mean * n - per_input[k]) / (n - 1.0),
                ControlVariateKind::BatchMean => 0.0,
                ControlVariateKind::MultiSample { .. } => {
                    (ts.iter().map(|o| o.signal).sum::<f64>() - t.signal) / (r - 1) as f64
                }
            };
            let w = 1.0 / (n * r as f64);
            for (a, b) in grad[..dec_len].iter_mut().zip(&t.decoder_grad) {
                *a += w * b;
            }
            let c = w * (t.signal - baseline);
            for (a, b) in grad[dec_len..].iter_mut().zip(&t.score_grad) {
                *a += c * b;
            }
        }
    }
    if let ControlVariateKind::Ema { decay } = cv.kind {
        cv.state = Some(match cv.state {
            Some(s) => decay * s + (1.0 - decay) * batch_mean,
            None => batch_mean,
        });
    }
    Ok((grad, batch_mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::LatentSpace;
    use crate::vae::{Architecture, ModelShape, ENCODER};

    #[test]
    fn constant_signal_with_matching_ema_has_no_encoder_gradient() {
        let mut m = VaeModel::new(Architecture::Dense { input_dim: 3 }, LatentSpace::categorical(3), &ModelShape::default(), &RngStream::new(1)).unwrap();
        m.params.values_mut().fill(0.0);
        let x = [0.3, -0.2, 0.1];
        // Zero decoder and uniform posterior: signal is the constant -f(x, .).
        let t = sample_terms(&m, m.params.values(), &x, &RngStream::new(2)).unwrap();
        let mut cv = ControlVariate::new(ControlVariateKind::Ema { decay: 0.9 }).unwrap();
        cv.state = Some(t.signal);
        let g = reinforce_gradient(&m, &x, &mut cv, &RngStream::new(3)).unwrap();
        let off = m.params.find(ENCODER).unwrap().offset;
        assert!(g[off..].iter().all(|v| v.abs() < 1e-12));
        assert!((cv.state.unwrap() - t.signal).abs() < 1e-12);
    }

    #[test]
    fn invalid_control_variates() {
        assert!(ControlVariate::new(ControlVariateKind::Ema { decay: 1.0 }).is_err());
        assert!(ControlVariate::new(ControlVariateKind::MultiSample { r: 1 }).is_err());
        assert!(ControlVariate::new(ControlVariateKind::BatchMean).is_ok());
    }

    #[test]
    fn deterministic_under_fixed_stream() {
        let m = VaeModel::new(Architecture::Dense { input_dim: 3 }, LatentSpace::categorical(4), &ModelShape::default(), &RngStream::new(4)).unwrap();
        let x = [0.3, -0.2, 0.1];
        let run = || {
            let mut cv = ControlVariate::new(ControlVariateKind::MultiSample { r: 3 }).unwrap();
            reinforce_gradient(&m, &x, &mut cv, &RngStream::new(5)).unwrap()
        };
        assert_eq!(run(), run());
    }
}
