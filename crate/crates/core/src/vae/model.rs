use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mlp_backward_into, mlp_forward, Activation, MlpSpec, ParamVector, RngStream};
use crate::structures::{EdgeScores, LatentSpace, StructureFamily, StructureIndicator};

pub const DECODER: &str = "decoder";
pub const ENCODER: &str = "encoder";

/// How encoder and decoder networks are wired around the latent structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// The encoder maps `x` to all scores at once; the decoder maps the
    /// indicator vector `z` to a reconstruction of the whole of `x`.
    Dense { input_dim: usize },
    /// `x` is a `nodes x steps x feat` trajectory (node-major).
    ///
    /// The encoder is one MLP shared by all edges, applied to features of the
    /// pairwise difference trajectory `d(t) = x_u(t) - x_v(t)`:
    /// `|d(t)|^2` for every step and `d(t) . (d(t+1) - d(t))` for every transition.
    /// The decoder rolls the first timestep forward: at each step every node
    /// feeds `[state, sum over z-neighbours of (neighbour state - state)]`
    /// through a shared MLP whose output is added to its state.
    Trajectory { nodes: usize, steps: usize, feat: usize },
}

impl Architecture {
    /// Length of an input vector `x`.
    pub fn input_dim(&self) -> usize {
        match *self {
            Architecture::Dense { input_dim } => input_dim,
            Architecture::Trajectory { nodes, steps, feat } => nodes * steps * feat,
        }
    }

    /// Number of reconstructed values (the Gaussian likelihood dimension).
    pub fn output_dim(&self) -> usize {
        match *self {
            Architecture::Dense { input_dim } => input_dim,
            Architecture::Trajectory { nodes, steps, feat } => nodes * (steps - 1) * feat,
        }
    }

    fn encoder_io(&self, latent_dim: usize) -> (usize, usize) {
        match *self {
            Architecture::Dense { input_dim } => (input_dim, latent_dim),
            Architecture::Trajectory { steps, .. } => (2 * steps - 1, 1),
        }
    }

    fn decoder_io(&self, latent_dim: usize) -> (usize, usize) {
        match *self {
            Architecture::Dense { input_dim } => (latent_dim, input_dim),
            Architecture::Trajectory { feat, .. } => (2 * feat, feat),
        }
    }
}

/// Discrete structured VAE. All weights live in one [`ParamVector`] laid out
/// as `[decoder; encoder]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VaeModel {
    pub arch: Architecture,
    pub space: LatentSpace,
    pub encoder: MlpSpec,
    pub decoder: MlpSpec,
    pub params: ParamVector,
    #[serde(skip)]
    cache: ModelCache,
}

#[derive(Debug, Clone, Default)]
struct ModelCache {
    structures: OnceLock<Result<Vec<StructureIndicator>, String>>,
    log_count: OnceLock<Result<f64, String>>,
}

impl PartialEq for VaeModel {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self.space == other.space
            && self.encoder == other.encoder
            && self.decoder == other.decoder
            && self.params == other.params
    }
}

/// Hidden-layer widths and initialisation for [`VaeModel::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub activation: Activation,
    pub init_gain: f64,
    /// Extra factor on the initial output-layer weights of both networks.
    #[serde(default = "default_output_gain")]
    pub output_gain: f64,
}

fn default_output_gain() -> f64 {
    0.1
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            activation: Activation::Relu,
            init_gain: 1.0,
            output_gain: default_output_gain(),
        }
    }
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl VaeModel {
    pub fn new(arch: Architecture, space: LatentSpace, shape: &ModelShape, rng: &RngStream) -> Result<Self> {
        if let Architecture::Trajectory { nodes, steps, feat } = arch {
            if steps < 2 || feat == 0 {
                return Err(Error::InvalidConfig("trajectories need >= 2 steps and >= 1 feature".into()));
            }
            if space.graph.n != nodes || matches!(space.family, StructureFamily::Categorical { .. }) {
                return Err(Error::InvalidConfig("trajectory model needs a graph over its nodes".into()));
            }
        }
        if arch.input_dim() == 0 {
            return Err(Error::InvalidDimension("model input has width 0".into()));
        }
        let (ei, eo) = arch.encoder_io(space.dim());
        let (di, dout) = arch.decoder_io(space.dim());
        let encoder = MlpSpec::new(&widths(ei, &shape.encoder_hidden, eo), shape.activation)?;
        let decoder = MlpSpec::new(&widths(di, &shape.decoder_hidden, dout), shape.activation)?;
        let init = |spec: &MlpSpec, r: RngStream| {
            let mut p = spec.init_params(&r, shape.init_gain);
            for w in &mut p[spec.output_weights()] {
                *w *= shape.output_gain;
            }
            p
        };
        let params = ParamVector::flatten(&[(DECODER, init(&decoder, rng.child(1))), (ENCODER, init(&encoder, rng.child(2)))])?;
        Ok(Self::from_parts(arch, space, encoder, decoder, params))
    }

    pub fn from_parts(
        arch: Architecture,
        space: LatentSpace,
        encoder: MlpSpec,
        decoder: MlpSpec,
        params: ParamVector,
    ) -> Self {
        Self {
            arch,
            space,
            encoder,
            decoder,
            params,
            cache: ModelCache::default(),
        }
    }

    /// Structural consistency check, used after deserialisation.
    pub fn check(&self) -> Result<()> {
        self.params.check()?;
        self.encoder.validate()?;
        self.decoder.validate()?;
        let (ei, eo) = self.arch.encoder_io(self.space.dim());
        let (di, dout) = self.arch.decoder_io(self.space.dim());
        if self.encoder.input_width() != ei || self.encoder.output_width() != eo {
            return Err(Error::InvalidConfig("encoder widths do not fit the architecture".into()));
        }
        if self.decoder.input_width() != di || self.decoder.output_width() != dout {
            return Err(Error::InvalidConfig("decoder widths do not fit the architecture".into()));
        }
        if self.params.find(DECODER)?.len != self.decoder.param_count()
            || self.params.find(ENCODER)?.len != self.encoder.param_count()
            || self.params.find(DECODER)?.offset != 0
        {
            return Err(Error::InvalidConfig("parameter layout does not match the networks".into()));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn decoder_len(&self) -> usize {
        self.decoder.param_count()
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    /// Copy of the model with a new parameter vector.
    pub fn with_params(&self, values: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.params = self.params.with_values(values)?;
        Ok(m)
    }

    pub(crate) fn split<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        params.split_at(self.decoder_len())
    }

    fn check_input(&self, params: &[f64], x: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "model parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        if x.len() != self.arch.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "model input",
                expected: self.arch.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Every structure of the latent space, enumerated once and cached.
    pub fn structures(&self) -> Result<&[StructureIndicator]> {
        match self.cache.structures.get_or_init(|| self.space.enumerate().map_err(|e| e.to_string())) {
            Ok(v) => Ok(v),
            Err(e) => Err(Error::Unsupported(e.clone())),
        }
    }

    /// `log |Z|`, cached.
    pub fn log_num_structures(&self) -> Result<f64> {
        match self.cache.log_count.get_or_init(|| self.space.count().map(|c| c.log).map_err(|e| e.to_string())) {
            Ok(v) => Ok(*v),
            Err(e) => Err(Error::Unsupported(e.clone())),
        }
    }

    // ---- encoder ---------------------------------------------------------

    pub fn encode_scores(&self, x: &[f64]) -> Result<EdgeScores> {
        self.encode_scores_at(self.params.values(), x)
    }

    /// Edge scores `h_phi(x)` under an arbitrary parameter vector.
    ///
    /// Raw network outputs are centred. Every structure of a family has the
    /// same number of ones, so this leaves `q(z|x)` unchanged, but it removes
    /// the common shift along which the sampled `z* . h` term of the KL is
    /// unbounded below.
    pub fn encode_scores_at(&self, params: &[f64], x: &[f64]) -> Result<EdgeScores> {
        self.check_input(params, x)?;
        let (_, enc) = self.split(params);
        let mut out = match self.arch {
            Architecture::Dense { .. } => mlp_forward(&self.encoder, enc, x)?,
            Architecture::Trajectory { .. } => {
                let mut out = Vec::with_capacity(self.space.dim());
                for &(u, v) in &self.space.graph.edges {
                    let f = self.edge_features(x, u, v);
                    out.push(mlp_forward(&self.encoder, enc, &f)?[0]);
                }
                out
            }
        };
        centre(&mut out);
        Ok(EdgeScores(out))
    }

    /// Gradient of `cotangent . h_phi(x)` with respect to the encoder segment.
    pub fn encoder_vjp(&self, params: &[f64], x: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.check_input(params, x)?;
        let (_, enc) = self.split(params);
        if cotangent.len() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                context: "encoder cotangent",
                expected: self.space.dim(),
                got: cotangent.len(),
            });
        }
        let mut cot = cotangent.to_vec();
        centre(&mut cot);
        let mut grad = vec![0.0; self.encoder.param_count()];
        match self.arch {
            Architecture::Dense { .. } => {
                mlp_backward_into(&self.encoder, enc, x, &cot, &mut grad)?;
            }
            Architecture::Trajectory { .. } => {
                for (&(u, v), &c) in self.space.graph.edges.iter().zip(&cot) {
                    if c != 0.0 {
                        let f = self.edge_features(x, u, v);
                        mlp_backward_into(&self.encoder, enc, &f, &[c], &mut grad)?;
                    }
                }
            }
        }
        Ok(grad)
    }

    fn edge_features(&self, x: &[f64], u: usize, v: usize) -> Vec<f64> {
        let Architecture::Trajectory { steps, feat, .. } = self.arch else {
            unreachable!("edge features only exist for trajectories")
        };
        let at = |node: usize, t: usize| &x[(node * steps + t) * feat..(node * steps + t + 1) * feat];
        let diff: Vec<Vec<f64>> = (0..steps)
            .map(|t| at(u, t).iter().zip(at(v, t)).map(|(a, b)| a - b).collect())
            .collect();
        let mut f = Vec::with_capacity(2 * steps - 1);
        for d in &diff {
            f.push(d.iter().map(|a| a * a).sum());
        }
        for t in 0..steps - 1 {
            f.push(diff[t].iter().zip(&diff[t + 1]).map(|(a, b)| a * (b - a)).sum());
        }
        f
    }

    // ---- decoder ---------------------------------------------------------

    /// Gaussian log-likelihood `f_theta(x, z)` with unit variance.
    pub fn decoder_loglik(&self, x: &[f64], z: &StructureIndicator) -> Result<f64> {
        if !self.space.validate(z) {
            return Err(Error::InvalidStructure(self.space.family.name().to_string()));
        }
        self.decoder_loglik_at(self.params.values(), x, z)
    }

    /// [`VaeModel::decoder_loglik`] under arbitrary parameters, without
    /// re-validating `z` (callers pass solver output).
    pub fn decoder_loglik_at(&self, params: &[f64], x: &[f64], z: &StructureIndicator) -> Result<f64> {
        self.check_input(params, x)?;
        if z.len() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                context: "structure indicator",
                expected: self.space.dim(),
                got: z.len(),
            });
        }
        let (dec, _) = self.split(params);
        let (target, recon) = match self.arch {
            Architecture::Dense { .. } => (x, mlp_forward(&self.decoder, dec, &z.as_f64())?),
            Architecture::Trajectory { .. } => {
                let roll = self.rollout(dec, x, z)?;
                let target = self.trajectory_targets(x);
                return Ok(gaussian_loglik(&target, &roll.flat_predictions()));
            }
        };
        Ok(gaussian_loglik(target, &recon))
    }

    /// `f_theta(x, z)` and its gradient with respect to the decoder segment.
    pub fn decoder_loglik_grad(&self, params: &[f64], x: &[f64], z: &StructureIndicator) -> Result<(f64, Vec<f64>)> {
        self.check_input(params, x)?;
        let (dec, _) = self.split(params);
        let mut grad = vec![0.0; self.decoder.param_count()];
        match self.arch {
            Architecture::Dense { .. } => {
                let input = z.as_f64();
                let recon = mlp_forward(&self.decoder, dec, &input)?;
                let cot: Vec<f64> = x.iter().zip(&recon).map(|(t, r)| t - r).collect();
                mlp_backward_into(&self.decoder, dec, &input, &cot, &mut grad)?;
                Ok((gaussian_loglik(x, &recon), grad))
            }
            Architecture::Trajectory { nodes, steps, feat } => {
                let roll = self.rollout(dec, x, z)?;
                let value = gaussian_loglik(&self.trajectory_targets(x), &roll.flat_predictions());
                let neighbours = self.neighbours(z);
                let idx = |v: usize, t: usize| (v * steps + t) * feat;
                // adj[v] = d f / d state_t(v), accumulated backwards in time.
                let mut adj = vec![vec![0.0; feat]; nodes];
                for t in (0..steps - 1).rev() {
                    for v in 0..nodes {
                        let target = &x[idx(v, t + 1)..idx(v, t + 1) + feat];
                        for (a, (tv, p)) in adj[v].iter_mut().zip(target.iter().zip(&roll.states[t + 1][v])) {
                            *a += tv - p;
                        }
                    }
                    let mut next = adj.clone();
                    let mut agg_adj = vec![vec![0.0; feat]; nodes];
                    for v in 0..nodes {
                        let input_grad = mlp_backward_into(&self.decoder, dec, &roll.inputs[t][v], &adj[v], &mut grad)?;
                        for f in 0..feat {
                            next[v][f] += input_grad[f];
                            agg_adj[v][f] = input_grad[feat + f];
                        }
                    }
                    for v in 0..nodes {
                        for &u in &neighbours[v] {
                            for f in 0..feat {
                                next[u][f] += agg_adj[v][f];
                                next[v][f] -= agg_adj[v][f];
                            }
                        }
                    }
                    adj = next;
                }
                Ok((value, grad))
            }
        }
    }

    fn neighbours(&self, z: &StructureIndicator) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.space.graph.n];
        for e in z.ones() {
            let (u, v) = self.space.graph.edges[e];
            nb[u].push(v);
            nb[v].push(u);
        }
        nb
    }

    fn trajectory_targets(&self, x: &[f64]) -> Vec<f64> {
        let Architecture::Trajectory { nodes, steps, feat } = self.arch else {
            unreachable!()
        };
        let mut out = Vec::with_capacity(self.output_dim());
        for t in 1..steps {
            for v in 0..nodes {
                out.extend_from_slice(&x[(v * steps + t) * feat..(v * steps + t + 1) * feat]);
            }
        }
        out
    }

    fn rollout(&self, dec: &[f64], x: &[f64], z: &StructureIndicator) -> Result<Rollout> {
        let Architecture::Trajectory { nodes, steps, feat } = self.arch else {
            unreachable!()
        };
        let neighbours = self.neighbours(z);
        let mut states = Vec::with_capacity(steps);
        states.push(
            (0..nodes)
                .map(|v| x[v * steps * feat..v * steps * feat + feat].to_vec())
                .collect::<Vec<_>>(),
        );
        let mut inputs = Vec::with_capacity(steps - 1);
        for t in 0..steps - 1 {
            let cur = &states[t];
            let mut step_inputs = Vec::with_capacity(nodes);
            let mut next = Vec::with_capacity(nodes);
            for v in 0..nodes {
                let mut input = cur[v].clone();
                let mut agg = vec![0.0; feat];
                for &u in &neighbours[v] {
                    for f in 0..feat {
                        agg[f] += cur[u][f] - cur[v][f];
                    }
                }
                input.extend_from_slice(&agg);
                let delta = mlp_forward(&self.decoder, dec, &input)?;
                next.push(cur[v].iter().zip(&delta).map(|(s, d)| s + d).collect());
                step_inputs.push(input);
            }
            inputs.push(step_inputs);
            states.push(next);
        }
        Ok(Rollout { states, inputs })
    }
}

struct Rollout {
    /// `states[t][v]`, `t = 0` is the observed first step.
    states: Vec<Vec<Vec<f64>>>,
    /// Decoder input of node `v` at transition `t -> t + 1`.
    inputs: Vec<Vec<Vec<f64>>>,
}

impl Rollout {
    /// Predictions for steps `1..`, step-major to match `trajectory_targets`.
    fn flat_predictions(&self) -> Vec<f64> {
        self.states[1..].iter().flat_map(|s| s.iter().flatten().copied()).collect()
    }
}

/// `-1/2 |target - recon|^2 - (dim / 2) log(2 pi)`.
fn centre(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for a in v.iter_mut() {
        *a -= mean;
    }
}

pub(crate) fn gaussian_loglik(target: &[f64], recon: &[f64]) -> f64 {
    let sq: f64 = target.iter().zip(recon).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * sq - 0.5 * target.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::gaussian_sample;
    use crate::structures::kruskal_mst;

    pub(crate) fn tiny_tree_model(seed: u64) -> VaeModel {
        let arch = Architecture::Trajectory { nodes: 4, steps: 3, feat: 2 };
        VaeModel::new(arch, LatentSpace::spanning_trees(4), &ModelShape::default(), &RngStream::new(seed)).unwrap()
    }

    #[test]
    fn zero_encoder_gives_zero_scores() {
        let space = LatentSpace::categorical(3);
        let mut m = VaeModel::new(Architecture::Dense { input_dim: 5 }, space, &ModelShape::default(), &RngStream::new(1)).unwrap();
        m.params.segment_mut(ENCODER).unwrap().fill(0.0);
        assert_eq!(m.encode_scores(&[1.0; 5]).unwrap().0, vec![0.0; 3]);
    }

    #[test]
    fn dense_encoder_is_the_centred_mlp() {
        let space = LatentSpace::categorical(4);
        let m = VaeModel::new(Architecture::Dense { input_dim: 6 }, space, &ModelShape::default(), &RngStream::new(2)).unwrap();
        let x = gaussian_sample(&RngStream::new(3), 6).unwrap();
        let direct = mlp_forward(&m.encoder, m.params.segment(ENCODER).unwrap(), &x).unwrap();
        let mean = direct.iter().sum::<f64>() / 4.0;
        let h = m.encode_scores(&x).unwrap().0;
        for (a, b) in h.iter().zip(&direct) {
            assert!((a - (b - mean)).abs() < 1e-15);
        }
        assert_eq!(m.encode_scores(&x).unwrap(), m.encode_scores(&x).unwrap());
    }

    #[test]
    fn perfect_reconstruction_loglik() {
        // decoder: identity-like linear map from one-hot z to x
        let space = LatentSpace::categorical(2);
        let shape = ModelShape { decoder_hidden: vec![], ..ModelShape::default() };
        let mut m = VaeModel::new(Architecture::Dense { input_dim: 2 }, space, &shape, &RngStream::new(4)).unwrap();
        let dec = m.params.segment_mut(DECODER).unwrap();
        dec.fill(0.0);
        dec[0] = 3.0; // out0 <- z0
        dec[3] = -1.0; // out1 <- z1
        let x = [3.0, 0.0];
        let ll = m.decoder_loglik(&x, &StructureIndicator::one_hot(2, 0)).unwrap();
        assert!((ll + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn trajectory_decoder_depends_on_structure() {
        let m = tiny_tree_model(5);
        let x = gaussian_sample(&RngStream::new(6), m.arch.input_dim()).unwrap();
        let all = m.structures().unwrap();
        let a = m.decoder_loglik(&x, &all[0]).unwrap();
        let b = m.decoder_loglik(&x, &all[7]).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, m.decoder_loglik(&x, &all[0]).unwrap());
    }

    #[test]
    fn invalid_structure_is_rejected() {
        let m = tiny_tree_model(7);
        let x = vec![0.0; m.arch.input_dim()];
        assert!(matches!(
            m.decoder_loglik(&x, &StructureIndicator::empty(6)),
            Err(Error::InvalidStructure(_))
        ));
    }

    fn fd_decoder(m: &VaeModel, x: &[f64], z: &StructureIndicator) {
        let p = m.params.values().to_vec();
        let (_, g) = m.decoder_loglik_grad(&p, x, z).unwrap();
        let h = 1e-6;
        for i in 0..m.decoder_len() {
            let mut q = p.clone();
            q[i] += h;
            let fp = m.decoder_loglik_at(&q, x, z).unwrap();
            q[i] -= 2.0 * h;
            let fm = m.decoder_loglik_at(&q, x, z).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * fd.abs().max(1.0), "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn decoder_gradients_match_finite_differences() {
        let m = tiny_tree_model(8).with_params(gaussian_sample(&RngStream::new(9), tiny_tree_model(8).num_params()).unwrap()).unwrap();
        let x = gaussian_sample(&RngStream::new(10), m.arch.input_dim()).unwrap();
        let z = kruskal_mst(&m.space.graph, &m.encode_scores(&x).unwrap()).unwrap();
        fd_decoder(&m, &x, &z);

        let dense = VaeModel::new(Architecture::Dense { input_dim: 3 }, LatentSpace::categorical(4), &ModelShape::default(), &RngStream::new(11)).unwrap();
        fd_decoder(&dense, &[0.5, -1.0, 2.0], &StructureIndicator::one_hot(4, 2));
    }

    #[test]
    fn encoder_vjp_matches_finite_differences() {
        for m in [
            tiny_tree_model(12),
            VaeModel::new(Architecture::Dense { input_dim: 3 }, LatentSpace::categorical(4), &ModelShape::default(), &RngStream::new(13)).unwrap(),
        ] {
            let p = gaussian_sample(&RngStream::new(14), m.num_params()).unwrap();
            let x = gaussian_sample(&RngStream::new(15), m.arch.input_dim()).unwrap();
            let cot = gaussian_sample(&RngStream::new(16), m.space.dim()).unwrap();
            let g = m.encoder_vjp(&p, &x, &cot).unwrap();
            let f = |q: &[f64]| -> f64 { m.encode_scores_at(q, &x).unwrap().0.iter().zip(&cot).map(|(a, b)| a * b).sum() };
            let h = 1e-6;
            for i in 0..m.encoder.param_count() {
                let j = m.decoder_len() + i;
                let mut q = p.clone();
                q[j] += h;
                let fp = f(&q);
                q[j] -= 2.0 * h;
                let fd = (fp - f(&q)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }
}
