use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{gaussian_sample, RngStream};
use crate::nes::LossTransform;
use crate::vae::{elbo_sample_at, VaeModel};

const TAG_POINT: u64 = 1;
const TAG_PERTURB: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedEstimate {
    pub g_value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl SmoothedEstimate {
    pub(crate) fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            g_value: mean,
            std_error: (var / n).sqrt(),
            samples: values.len(),
        }
    }
}

/// Monte-Carlo estimate of `g(mu) = E[k(mu + sigma w)]`; draw `s` is
/// `gaussian_sample(rng.child(s))`.
pub fn estimate_g<F>(objective: F, mu: &[f64], sigma: f64, samples: usize, rng: &RngStream) -> Result<SmoothedEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if samples < 2 {
        return Err(Error::InvalidConfig(format!("estimate_g needs S >= 2, got {samples}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be finite and positive, got {sigma}")));
    }
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let w = gaussian_sample(&rng.child(s as u64), mu.len())?;
            let p: Vec<f64> = mu.iter().zip(&w).map(|(m, w)| m + sigma * w).collect();
            let v = objective(&p);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("objective at draw {s}")))
            }
        })
        .collect::<Result<_>>()?;
    Ok(SmoothedEstimate::from_values(&values))
}

/// Mean over `data` of `|k(mu; x) - g_hat(mu; x)|`, with `k` the sampled
/// negative ELBO under a fixed Gumbel stream per point and `g_hat` its average
/// over `samples` parameter perturbations of scale `sigma`. The perturbation
/// directions depend only on `rng`, so calls with different `sigma` share them.
pub fn g_k_distance(
    model: &VaeModel,
    data: &[Vec<f64>],
    sigma: f64,
    samples: usize,
    loss: LossTransform,
    rng: &RngStream,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("g_k_distance needs test points"));
    }
    if samples < 2 || !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig("g_k_distance needs S >= 2 and sigma > 0".into()));
    }
    let mu = model.params.values();
    let dim = model.output_dim();
    let noise: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| gaussian_sample(&rng.child2(TAG_PERTURB, s as u64), mu.len()))
        .collect::<Result<_>>()?;
    let dists: Vec<f64> = data
        .par_iter()
        .enumerate()
        .map(|(j, x)| {
            let stream = rng.child2(TAG_POINT, j as u64);
            let k = |p: &[f64]| -> Result<f64> { Ok(loss.apply(elbo_sample_at(model, p, x, &stream, 1)?.total, dim)) };
            let at_mu = k(mu)?;
            let mut acc = 0.0;
            for w in &noise {
                let p: Vec<f64> = mu.iter().zip(w).map(|(m, w)| m + sigma * w).collect();
                acc += k(&p)?;
            }
            Ok((at_mu - acc / samples as f64).abs())
        })
        .collect::<Result<_>>()?;
    Ok(dists.iter().sum::<f64>() / dists.len() as f64)
}
