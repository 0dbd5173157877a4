use rayon::prelude::*;

use super::config::NesConfig;
use crate::error::{Error, Result};
use crate::math::{gaussian_sample, RngStream};

/// One population: noise, fitnesses and the resulting gradient estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Base noise vectors: `N / 2` when mirrored, `N` otherwise.
    pub noise: Vec<Vec<f64>>,
    pub mirrored: bool,
    /// Raw fitness of perturbation `i`.
    pub fitnesses: Vec<f64>,
    /// Fitnesses after optional standardisation; these weight the noise.
    pub scores: Vec<f64>,
    pub gradient: Vec<f64>,
}

impl Generation {
    pub fn population(&self) -> usize {
        self.fitnesses.len()
    }

    /// Noise vector index and sign of perturbation `i`.
    pub fn perturbation(&self, i: usize) -> (usize, f64) {
        if self.mirrored {
            (i / 2, if i % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (i, 1.0)
        }
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitnesses.iter().sum::<f64>() / self.fitnesses.len() as f64
    }

    pub fn grad_sq_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum()
    }
}

/// `N / 2` standard normal vectors, each emitted as the pair `(+w, -w)`.
/// Base draw `j` comes from stream `rng.child(j)`.
pub fn mirrored_pairs(rng: &RngStream, d: usize, population: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if population % 2 == 1 {
        return Err(Error::OddPopulation(population));
    }
    (0..population / 2)
        .map(|j| {
            let w = gaussian_sample(&rng.child(j as u64), d)?;
            let neg = w.iter().map(|v| -v).collect();
            Ok((w, neg))
        })
        .collect()
}

/// Standard scores of `values`; all-equal input yields all zeros.
pub fn standardize(values: &[f64]) -> Vec<f64> {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return vec![0.0; values.len()];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// NES gradient of the Gaussian-smoothed objective at `mu`.
///
/// `objective(params, i)` is called once per perturbation `i`, possibly
/// concurrently. Noise comes from `rng.child(j)`; the reduction always runs in
/// perturbation order, so the result does not depend on the thread count.
pub fn nes_gradient_estimate<F>(objective: F, mu: &[f64], cfg: &NesConfig, rng: &RngStream) -> Result<Generation>
where
    F: Fn(&[f64], usize) -> f64 + Sync,
{
    estimate(|p, i| Ok(objective(p, i)), mu, cfg, rng)
}

/// As [`nes_gradient_estimate`] for fallible objectives.
pub fn estimate<F>(objective: F, mu: &[f64], cfg: &NesConfig, rng: &RngStream) -> Result<Generation>
where
    F: Fn(&[f64], usize) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let d = mu.len();
    let n = cfg.population;
    let base = if cfg.mirrored { n / 2 } else { n };
    let noise: Vec<Vec<f64>> = (0..base)
        .into_par_iter()
        .map(|j| gaussian_sample(&rng.child(j as u64), d))
        .collect::<Result<_>>()?;

    let mut gen = Generation {
        noise,
        mirrored: cfg.mirrored,
        fitnesses: Vec::new(),
        scores: Vec::new(),
        gradient: Vec::new(),
    };

    let fitnesses: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (j, sign) = gen.perturbation(i);
            let w = &gen.noise[j];
            let params: Vec<f64> = mu.iter().zip(w).map(|(m, w)| m + sign * cfg.sigma * w).collect();
            let u = objective(&params, i)?;
            if u.is_finite() {
                Ok(u)
            } else {
                Err(Error::PoisonedFitness { iteration: 0, index: i })
            }
        })
        .collect::<Result<_>>()?;

    let scores = if cfg.standardize {
        standardize(&fitnesses)
    } else {
        fitnesses.clone()
    };

    let mut gradient = vec![0.0; d];
    for (i, &s) in scores.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let (j, sign) = gen.perturbation(i);
        let c = sign * s / cfg.sigma;
        for (g, w) in gradient.iter_mut().zip(&gen.noise[j]) {
            *g += c * w;
        }
    }
    for g in gradient.iter_mut() {
        *g /= n as f64;
    }

    gen.fitnesses = fitnesses;
    gen.scores = scores;
    gen.gradient = gradient;
    Ok(gen)
}
