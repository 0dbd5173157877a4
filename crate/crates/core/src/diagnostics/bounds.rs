use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{gaussian_sample, RngStream};
use crate::nes::{LossTransform, OptimizerKind, TrainingTrace};

const TAG_GRAD: u64 = 1;
const TAG_CURV: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Satisfied,
    Violated,
    /// Monte-Carlo error stayed above the tolerance at the sample cap.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub quantity: f64,
    pub std_error: f64,
    pub bound: f64,
    pub status: BoundStatus,
    /// Standard errors of slack allowed before calling a violation.
    pub slack_se: f64,
    pub samples: usize,
    pub d: usize,
    pub m: f64,
    pub sigma: f64,
}

impl BoundReport {
    pub fn satisfied(&self) -> bool {
        self.status == BoundStatus::Satisfied
    }
}

/// `d M^3 / sigma^4`.
pub fn lemma_bound(d: usize, m: f64, sigma: f64) -> f64 {
    d as f64 * m.powi(3) / sigma.powi(4)
}

/// `M / (eta T) + eta d M^3 / (2 sigma^4)`.
pub fn theorem_rhs(d: usize, m: f64, sigma: f64, eta: f64, t: usize) -> f64 {
    m / (eta * t as f64) + eta * d as f64 * m.powi(3) / (2.0 * sigma.powi(4))
}

/// Step size minimising [`theorem_rhs`]: `sqrt(2 sigma^4 / (T d M^2))`.
pub fn eta_star(t: usize, d: usize, m: f64, sigma: f64) -> f64 {
    (2.0 * sigma.powi(4) / (t as f64 * d as f64 * m * m)).sqrt()
}

/// [`theorem_rhs`] at [`eta_star`]: `sqrt(2 d M^4 / (T sigma^4))`.
pub fn optimal_rate_bound(t: usize, d: usize, m: f64, sigma: f64) -> f64 {
    (2.0 * d as f64 * m.powi(4) / (t as f64 * sigma.powi(4))).sqrt()
}

/// Iterations after which the average squared gradient norm is at most
/// `delta`: `2 d M^4 / (delta^2 sigma^4)`.
pub fn step_bound(d: usize, m: f64, sigma: f64, delta: f64) -> f64 {
    2.0 * d as f64 * m.powi(4) / (delta * delta * sigma.powi(4))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianCheckConfig {
    pub initial_samples: usize,
    pub max_samples: usize,
    /// Target standard error as a fraction of the bound.
    pub rel_error: f64,
    pub slack_se: f64,
}

impl Default for HessianCheckConfig {
    fn default() -> Self {
        Self {
            initial_samples: 4096,
            max_samples: 1 << 24,
            rel_error: 0.05,
            slack_se: 3.0,
        }
    }
}

fn checked(objective: &(impl Fn(&[f64]) -> f64 + Sync), p: &[f64], m: f64) -> Result<f64> {
    let v = objective(p);
    if !(0.0..=m).contains(&v) {
        return Err(Error::InvalidConfig(format!("objective value {v} outside [0, {m}]")));
    }
    Ok(v)
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Measures `grad g(mu1)^T Hess g(mu2) grad g(mu1)` for an objective bounded
/// in `[0, M]` and compares it with `d M^3 / sigma^4`.
///
/// `grad g(mu1) = v` is estimated with mirrored Gaussian draws. The curvature
/// along `u = v / |v|` is a central second difference of `g` at `mu2` with
/// step `sigma / 100`, all three points sharing the same draws. Sample sizes
/// double until the standard error is below `rel_error` times the bound.
pub fn hessian_quadform_check<F>(
    objective: F,
    m: f64,
    mu1: &[f64],
    mu2: &[f64],
    sigma: f64,
    cfg: &HessianCheckConfig,
    rng: &RngStream,
) -> Result<BoundReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if mu1.len() != mu2.len() || mu1.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "hessian check points",
            expected: mu1.len(),
            got: mu2.len(),
        });
    }
    if !(sigma > 0.0 && m > 0.0) || cfg.initial_samples < 2 {
        return Err(Error::InvalidConfig("hessian check needs sigma > 0, M > 0 and >= 2 samples".into()));
    }
    let d = mu1.len();
    let bound = lemma_bound(d, m, sigma);
    let h = sigma / 100.0;
    let mut samples = cfg.initial_samples;
    loop {
        let grads: Vec<Vec<f64>> = (0..samples)
            .into_par_iter()
            .map(|s| {
                let w = gaussian_sample(&rng.child2(TAG_GRAD, s as u64), d)?;
                let plus: Vec<f64> = mu1.iter().zip(&w).map(|(a, b)| a + sigma * b).collect();
                let minus: Vec<f64> = mu1.iter().zip(&w).map(|(a, b)| a - sigma * b).collect();
                let c = (checked(&objective, &plus, m)? - checked(&objective, &minus, m)?) / (2.0 * sigma);
                Ok(w.iter().map(|wi| wi * c).collect())
            })
            .collect::<Result<_>>()?;
        let mut v = vec![0.0; d];
        let mut se2 = vec![0.0; d];
        for i in 0..d {
            let col: Vec<f64> = grads.iter().map(|g| g[i]).collect();
            let (mean, se) = mean_se(&col);
            v[i] = mean;
            se2[i] = se * se;
        }
        let v_sq: f64 = v.iter().map(|a| a * a).sum();
        let (quantity, std_error) = if v_sq == 0.0 {
            (0.0, 0.0)
        } else {
            let norm = v_sq.sqrt();
            let u: Vec<f64> = v.iter().map(|a| a / norm).collect();
            let curv: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|s| {
                    let w = gaussian_sample(&rng.child2(TAG_CURV, s as u64), d)?;
                    let at = |t: f64| -> Result<f64> {
                        let p: Vec<f64> = (0..d).map(|i| mu2[i] + t * u[i] + sigma * w[i]).collect();
                        checked(&objective, &p, m)
                    };
                    Ok((at(h)? - 2.0 * at(0.0)? + at(-h)?) / (h * h))
                })
                .collect::<Result<_>>()?;
            let (d2, d2_se) = mean_se(&curv);
            let v_sq_se = 2.0 * v.iter().zip(&se2).map(|(a, s)| a * a * s).sum::<f64>().sqrt();
            (v_sq * d2, ((v_sq * d2_se).powi(2) + (d2 * v_sq_se).powi(2)).sqrt())
        };
        let precise = std_error <= cfg.rel_error * bound;
        if precise || samples >= cfg.max_samples {
            let status = if !precise {
                BoundStatus::Inconclusive
            } else if quantity - cfg.slack_se * std_error <= bound {
                BoundStatus::Satisfied
            } else {
                BoundStatus::Violated
            };
            return Ok(BoundReport {
                quantity,
                std_error,
                bound,
                status,
                slack_se: cfg.slack_se,
                samples,
                d,
                m,
                sigma,
            });
        }
        samples = (samples * 2).min(cfg.max_samples);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub d: usize,
    pub m: f64,
    pub sigma: f64,
    pub eta: f64,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    /// Average squared gradient-estimate norm against the bound at the used step size.
    pub report: BoundReport,
    pub eta_star: f64,
    pub optimal_bound: f64,
    /// Iterations needed for the requested `delta`, when one was given.
    pub step_bound: Option<f64>,
    pub delta: Option<f64>,
}

/// Checks a bounded-loss SGD trace against the convergence bound.
///
/// The trace holds norms of the sampled gradient estimates, which are noisy
/// stand-ins for the exact smoothed gradients the bound is about; the
/// standard error over iterations is reported alongside.
pub fn theorem_bound_check(trace: &TrainingTrace, c: &TheoremConstants, delta: Option<f64>) -> Result<TheoremReport> {
    if let OptimizerKind::Adam { .. } = trace.meta.optimizer {
        return Err(Error::TheoryMismatch("trace was produced with Adam; the bound assumes plain gradient steps".into()));
    }
    if trace.meta.standardize {
        return Err(Error::TheoryMismatch("trace used standardized fitness; the bound assumes raw bounded fitness".into()));
    }
    match trace.meta.loss {
        LossTransform::Bounded { bound: Some(m) } if m == c.m => {}
        LossTransform::Bounded { bound: Some(m) } => {
            return Err(Error::TheoryMismatch(format!("trace was bounded at M = {m}, constants say {}", c.m)));
        }
        _ => return Err(Error::TheoryMismatch("trace was produced without a bounded loss".into())),
    }
    if trace.len() != c.t || c.t == 0 {
        return Err(Error::InvalidConfig(format!("trace has {} iterations, constants say T = {}", trace.len(), c.t)));
    }
    if trace.records.iter().any(|r| r.eta != c.eta) {
        return Err(Error::InvalidConfig(format!("trace step sizes differ from eta = {}", c.eta)));
    }
    let norms: Vec<f64> = trace.records.iter().map(|r| r.grad_sq_norm).collect();
    let (quantity, std_error) = if norms.len() > 1 { mean_se(&norms) } else { (norms[0], 0.0) };
    let bound = theorem_rhs(c.d, c.m, c.sigma, c.eta, c.t);
    let status = if quantity <= bound {
        BoundStatus::Satisfied
    } else {
        BoundStatus::Violated
    };
    Ok(TheoremReport {
        report: BoundReport {
            quantity,
            std_error,
            bound,
            status,
            slack_se: 0.0,
            samples: c.t,
            d: c.d,
            m: c.m,
            sigma: c.sigma,
        },
        eta_star: eta_star(c.t, c.d, c.m, c.sigma),
        optimal_bound: optimal_rate_bound(c.t, c.d, c.m, c.sigma),
        step_bound: delta.map(|dl| step_bound(c.d, c.m, c.sigma, dl)),
        delta,
    })
}
