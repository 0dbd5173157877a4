use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Fully connected network shape.
///
/// `widths[0]` is the input width, each following entry one affine layer.
/// Hidden layers use `activations[l]`; the last layer is linear.
/// Each layer stores its `out x in` weight matrix row-major, then its biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    /// Spec with the same activation on every hidden layer.
    pub fn new(widths: &[usize], activation: Activation) -> Result<Self> {
        let hidden = widths.len().saturating_sub(2);
        let spec = Self {
            widths: widths.to_vec(),
            activations: vec![activation; hidden],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::InvalidDimension("an MLP needs at least one layer".into()));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidDimension("layer widths must be positive".into()));
        }
        if self.activations.len() != self.widths.len() - 2 {
            return Err(Error::DimensionMismatch {
                context: "MlpSpec activations",
                expected: self.widths.len() - 2,
                got: self.activations.len(),
            });
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Index range of the final layer's weight matrix in the flat parameters.
    pub fn output_weights(&self) -> std::ops::Range<usize> {
        let n = self.widths.len();
        let (fan_in, out) = (self.widths[n - 2], self.widths[n - 1]);
        let end = self.param_count() - out;
        end - fan_in * out..end
    }

    fn check(&self, params: &[f64], input: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "MLP parameters",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if input.len() != self.input_width() {
            return Err(Error::DimensionMismatch {
                context: "MLP input",
                expected: self.input_width(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Gaussian initialisation scaled by `gain / sqrt(fan_in)`, zero biases.
    pub fn init_params(&self, rng: &RngStream, gain: f64) -> Vec<f64> {
        let mut g = rng.rng();
        let mut out = Vec::with_capacity(self.param_count());
        for w in self.widths.windows(2) {
            let scale = gain / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                out.push(scale * g.sample::<f64, _>(StandardNormal));
            }
            out.extend(std::iter::repeat(0.0).take(w[1]));
        }
        out
    }
}

/// Pre- and post-activation values of every layer from one forward pass.
struct Tape {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

fn forward_tape(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Tape {
    let mut pre = Vec::with_capacity(spec.num_layers());
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(spec.num_layers() + 1);
    post.push(input.to_vec());
    let mut offset = 0;
    for l in 0..spec.num_layers() {
        let (n_in, n_out) = (spec.widths[l], spec.widths[l + 1]);
        let weights = &params[offset..offset + n_in * n_out];
        let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let x = &post[l];
        let z: Vec<f64> = (0..n_out)
            .map(|o| {
                let row = &weights[o * n_in..(o + 1) * n_in];
                biases[o] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
            })
            .collect();
        let y = if l + 1 < spec.num_layers() {
            let act = spec.activations[l];
            z.iter().map(|&v| act.apply(v)).collect()
        } else {
            z.clone()
        };
        pre.push(z);
        post.push(y);
    }
    Tape { pre, post }
}

pub fn mlp_forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    spec.check(params, input)?;
    let mut tape = forward_tape(spec, params, input);
    Ok(tape.post.pop().expect("at least one layer"))
}

/// Gradient of `cotangent . output` with respect to the parameters.
pub fn mlp_backward(spec: &MlpSpec, params: &[f64], input: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; spec.param_count()];
    mlp_backward_into(spec, params, input, cotangent, &mut grad)?;
    Ok(grad)
}

/// Accumulates the parameter gradient into `grad` and returns the input gradient.
pub fn mlp_backward_into(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    cotangent: &[f64],
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    spec.check(params, input)?;
    if cotangent.len() != spec.output_width() {
        return Err(Error::DimensionMismatch {
            context: "MLP output cotangent",
            expected: spec.output_width(),
            got: cotangent.len(),
        });
    }
    if grad.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            context: "MLP gradient buffer",
            expected: spec.param_count(),
            got: grad.len(),
        });
    }
    let tape = forward_tape(spec, params, input);

    let mut offsets = Vec::with_capacity(spec.num_layers());
    let mut offset = 0;
    for w in spec.widths.windows(2) {
        offsets.push(offset);
        offset += w[0] * w[1] + w[1];
    }

    // delta holds d(cotangent . output) / d(pre-activation) of the current layer.
    let mut delta = cotangent.to_vec();
    for l in (0..spec.num_layers()).rev() {
        let (n_in, n_out) = (spec.widths[l], spec.widths[l + 1]);
        if l + 1 < spec.num_layers() {
            let act = spec.activations[l];
            for o in 0..n_out {
                delta[o] *= act.derivative(tape.pre[l][o], tape.post[l + 1][o]);
            }
        }
        let base = offsets[l];
        let x = &tape.post[l];
        for o in 0..n_out {
            let d = delta[o];
            if d != 0.0 {
                let row = &mut grad[base + o * n_in..base + (o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            grad[base + n_in * n_out + o] += d;
        }
        let weights = &params[base..base + n_in * n_out];
        let mut prev = vec![0.0; n_in];
        for o in 0..n_out {
            let d = delta[o];
            if d != 0.0 {
                for (p, w) in prev.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                    *p += d * w;
                }
            }
        }
        delta = prev;
    }
    Ok(delta)
}
