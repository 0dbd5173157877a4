use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Addressable random stream.
///
/// A stream is identified by `(seed, stream)`. Child streams are derived by
/// hashing a tag into the stream id, so e.g. perturbation `i` of generation
/// `t` always draws the same numbers no matter which thread evaluates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Derives an independent child stream tagged by `tag`.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))),
        }
    }

    /// Shorthand for nested children, e.g. `(iteration, perturbation)`.
    pub fn child2(&self, a: u64, b: u64) -> Self {
        self.child(a).child(b)
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `d` i.i.d. standard normal draws from the start of `rng`.
pub fn gaussian_sample(rng: &RngStream, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension("gaussian_sample requires d >= 1".into()));
    }
    let mut g = rng.rng();
    Ok((0..d).map(|_| g.sample::<f64, _>(StandardNormal)).collect())
}

/// Uniform draw in the open interval, clamped to `[eps, 1 - eps]`.
pub(crate) fn clamped_uniform<R: Rng>(rng: &mut R, eps: f64) -> f64 {
    rng.gen::<f64>().clamp(eps, 1.0 - eps)
}
