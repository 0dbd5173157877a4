use crate::error::Result;
use crate::math::logsumexp;
use crate::structures::{EdgeScores, StructureIndicator};
use crate::vae::{ElboEstimate, VaeModel};

/// `log q(z | x)`; see [`LatentSpace::log_partition_of`](crate::structures::LatentSpace::log_partition_of).
pub fn log_posterior(model: &VaeModel, scores: &EdgeScores, z: &StructureIndicator) -> Result<f64> {
    Ok(z.score(&scores.0) - model.space.log_partition_of(scores)?)
}

/// Exact gradient of the exact negative ELBO at the model's parameters.
pub fn unbiased_gradient(model: &VaeModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(unbiased_gradient_at(model, model.params.values(), x)?.1)
}

/// Exact negative ELBO and its gradient at `params`.
///
/// With `s_z = z . h` and `F_z = -f(x, z) + log q_z + log |Z|`, the loss is
/// `sum_z q_z F_z` and `dL / ds_z = q_z (F_z - sum_z' q_z' F_z')`.
pub fn unbiased_gradient_at(model: &VaeModel, params: &[f64], x: &[f64]) -> Result<(ElboEstimate, Vec<f64>)> {
    let all = model.structures()?;
    let scores = model.encode_scores_at(params, x)?;
    let logits: Vec<f64> = all.iter().map(|z| z.score(&scores.0)).collect();
    let log_z = logsumexp(&logits);
    let log_count = (all.len() as f64).ln();
    let dec_len = model.decoder_len();

    let mut grad = vec![0.0; params.len()];
    let mut q = Vec::with_capacity(all.len());
    let mut signal = Vec::with_capacity(all.len());
    let (mut recon, mut kl) = (0.0, 0.0);
    for (z, &l) in all.iter().zip(&logits) {
        let log_q = l - log_z;
        let qz = log_q.exp();
        let (f, g) = model.decoder_loglik_grad(params, x, z)?;
        for (a, b) in grad[..dec_len].iter_mut().zip(&g) {
            *a -= qz * b;
        }
        recon += qz * f;
        kl += qz * (log_q + log_count);
        q.push(qz);
        signal.push(-f + log_q + log_count);
    }
    let mean: f64 = q.iter().zip(&signal).map(|(a, b)| a * b).sum();
    let mut dh = vec![0.0; scores.len()];
    for ((z, &qz), &s) in all.iter().zip(&q).zip(&signal) {
        let ds = qz * (s - mean);
        for e in z.ones() {
            dh[e] += ds;
        }
    }
    let enc = model.encoder_vjp(params, x, &dh)?;
    grad[dec_len..].copy_from_slice(&enc);
    let est = ElboEstimate {
        reconstruction: recon,
        kl,
        total: -recon + kl,
        samples_used: all.len(),
        std_error: 0.0,
    };
    Ok((est, grad))
}
