use serde::{Deserialize, Serialize};

use super::model::VaeModel;
use crate::error::{Error, Result};
use crate::gumbel::perturb_and_map;
use crate::math::{logsumexp, RngStream};
use crate::structures::{EdgeScores, StructureIndicator};

/// Negative ELBO split into its two terms: `total = -reconstruction + kl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboEstimate {
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
    pub samples_used: usize,
    /// Standard error of `total` (zero for exact values and single draws).
    pub std_error: f64,
}

/// Sampled KL to the uniform prior: mean of `z* . h` over the draws plus `log |Z|`.
pub fn kl_term(model: &VaeModel, scores: &EdgeScores, sampled: &[StructureIndicator]) -> Result<f64> {
    if sampled.is_empty() {
        return Err(Error::EmptyInput("kl_term needs at least one sampled structure"));
    }
    let log_count = model.log_num_structures()?;
    let mean = sampled.iter().map(|z| z.score(&scores.0)).sum::<f64>() / sampled.len() as f64;
    Ok(mean + log_count)
}

/// Monte-Carlo negative ELBO from `samples` perturb-and-MAP draws; draw `s`
/// uses stream `rng.child(s)`.
pub fn elbo_sample(model: &VaeModel, x: &[f64], rng: &RngStream, samples: usize) -> Result<ElboEstimate> {
    elbo_sample_at(model, model.params.values(), x, rng, samples)
}

pub fn elbo_sample_at(
    model: &VaeModel,
    params: &[f64],
    x: &[f64],
    rng: &RngStream,
    samples: usize,
) -> Result<ElboEstimate> {
    if samples == 0 {
        return Err(Error::InvalidConfig("elbo_sample needs S >= 1".into()));
    }
    let scores = model.encode_scores_at(params, x)?;
    let log_count = model.log_num_structures()?;
    let mut recon = Vec::with_capacity(samples);
    let mut kls = Vec::with_capacity(samples);
    for s in 0..samples {
        let z = perturb_and_map(&model.space, &scores, &rng.child(s as u64))?;
        recon.push(model.decoder_loglik_at(params, x, &z)?);
        kls.push(z.score(&scores.0) + log_count);
    }
    let n = samples as f64;
    let reconstruction = recon.iter().sum::<f64>() / n;
    let kl = kls.iter().sum::<f64>() / n;
    let total = -reconstruction + kl;
    let std_error = if samples > 1 {
        let var = recon
            .iter()
            .zip(&kls)
            .map(|(r, k)| (-r + k - total).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(ElboEstimate {
        reconstruction,
        kl,
        total,
        samples_used: samples,
        std_error,
    })
}

/// Exact negative ELBO: `q(z|x) = softmax(z . h)` over every structure and the
/// exact KL divergence to the uniform prior.
pub fn exact_elbo(model: &VaeModel, x: &[f64]) -> Result<ElboEstimate> {
    exact_elbo_at(model, model.params.values(), x)
}

pub fn exact_elbo_at(model: &VaeModel, params: &[f64], x: &[f64]) -> Result<ElboEstimate> {
    let all = model.structures()?;
    let scores = model.encode_scores_at(params, x)?;
    let logits: Vec<f64> = all.iter().map(|z| z.score(&scores.0)).collect();
    let log_z = logsumexp(&logits);
    let log_count = (all.len() as f64).ln();
    let mut reconstruction = 0.0;
    let mut kl = 0.0;
    for (z, &l) in all.iter().zip(&logits) {
        let log_q = l - log_z;
        let q = log_q.exp();
        if q > 0.0 {
            reconstruction += q * model.decoder_loglik_at(params, x, z)?;
            kl += q * (log_q + log_count);
        }
    }
    Ok(ElboEstimate {
        reconstruction,
        kl,
        total: -reconstruction + kl,
        samples_used: all.len(),
        std_error: 0.0,
    })
}

/// `min(loss / output_dim, M)`; pass `f64::INFINITY` for an unclipped, scaled loss.
pub fn bounded_loss(loss: f64, output_dim: usize, bound: f64) -> f64 {
    assert!(output_dim >= 1, "bounded_loss needs output_dim >= 1");
    assert!(bound > 0.0, "bounded_loss needs M > 0");
    (loss / output_dim as f64).min(bound)
}
