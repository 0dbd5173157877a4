//! Gumbel noise, perturb-and-MAP sampling and the Gumbel log-density.
//!
//! Draws follow the mean convention: a Gumbel variable with location `h`
//! has mean `h`, i.e. `gamma = h - c - ln(-ln U)` with `c` the Euler-Mascheroni
//! constant. The shift is common to all coordinates, so argmax results are
//! the same as with the mode convention.

use crate::error::Result;
use crate::math::{clamped_uniform, RngStream};
use crate::structures::{argmax, EdgeScores, LatentSpace, StructureIndicator};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Uniform draws are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const UNIFORM_EPS: f64 = 1e-12;

/// Gumbel draws `values` with the location they were shifted by.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise {
    pub values: Vec<f64>,
    pub location: EdgeScores,
}

/// Independent Gumbel variables with mean `location[e]` for every coordinate.
pub fn sample_gumbel(rng: &RngStream, location: &EdgeScores) -> GumbelNoise {
    let mut g = rng.rng();
    let values = location
        .0
        .iter()
        .map(|&h| {
            let u = clamped_uniform(&mut g, UNIFORM_EPS);
            h - EULER_GAMMA - (-u.ln()).ln()
        })
        .collect();
    GumbelNoise {
        values,
        location: location.clone(),
    }
}

/// `log g(value)` for the Gumbel density with mean `location`:
/// `-(t + exp(-t))` with `t = value + c - location`.
pub fn gumbel_log_density(value: f64, location: f64) -> f64 {
    let t = value + EULER_GAMMA - location;
    -(t + (-t).exp())
}

/// Derivative of [`gumbel_log_density`] with respect to `location`.
pub fn gumbel_log_density_dlocation(value: f64, location: f64) -> f64 {
    let t = value + EULER_GAMMA - location;
    1.0 - (-t).exp()
}

/// Samples a structure by running the MAP solver on Gumbel-perturbed scores.
pub fn perturb_and_map(space: &LatentSpace, scores: &EdgeScores, rng: &RngStream) -> Result<StructureIndicator> {
    Ok(perturb_and_map_with_noise(space, scores, rng)?.0)
}

/// As [`perturb_and_map`], also returning the noise that produced the sample.
pub fn perturb_and_map_with_noise(
    space: &LatentSpace,
    scores: &EdgeScores,
    rng: &RngStream,
) -> Result<(StructureIndicator, GumbelNoise)> {
    let noise = sample_gumbel(rng, scores);
    let z = space.map(&EdgeScores(noise.values.clone()))?;
    Ok((z, noise))
}

/// Gumbel-max sample of a categorical variable: distributed as `softmax(scores)`.
pub fn categorical_gumbel_argmax(scores: &EdgeScores, rng: &RngStream) -> usize {
    argmax(&sample_gumbel(rng, scores).values)
}
