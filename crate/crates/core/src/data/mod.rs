//! Synthetic datasets with a known latent structure.

mod io;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::structures::{Graph, LatentSpace, StructureIndicator};
use crate::vae::{Architecture, VaeModel};

pub use io::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};

/// Diffusion rate of the node dynamics.
pub const DIFFUSION_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    /// `nodes x steps x feat`, node-major.
    pub x: Vec<f64>,
    /// Spanning tree over the complete graph that drove the dynamics.
    pub truth: StructureIndicator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub nodes: usize,
    pub steps: usize,
    pub feat: usize,
    pub noise: f64,
    pub seed: u64,
    pub samples: Vec<TrajectorySample>,
}

impl TrajectoryDataset {
    pub fn space(&self) -> LatentSpace {
        LatentSpace::spanning_trees(self.nodes)
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::Trajectory {
            nodes: self.nodes,
            steps: self.steps,
            feat: self.feat,
        }
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.x.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let space = self.space();
        let len = self.nodes * self.steps * self.feat;
        for (i, s) in self.samples.iter().enumerate() {
            if s.x.len() != len || s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::CorruptFile(format!("sample {i}: bad trajectory")));
            }
            if !space.validate(&s.truth) {
                return Err(Error::InvalidStructure(format!("sample {i}: truth is not a spanning tree")));
            }
        }
        Ok(())
    }
}

/// Labelled tree with the given Prüfer sequence, as `(u, v)` pairs with `u < v`.
pub fn prufer_decode(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Uniformly random spanning tree of the complete graph on `n` vertices.
pub fn uniform_spanning_tree(n: usize, rng: &RngStream) -> Result<StructureIndicator> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("need n >= 2 vertices, got {n}")));
    }
    let g = Graph::complete(n);
    if n == 2 {
        return Ok(StructureIndicator(vec![true]));
    }
    let mut r = rng.rng();
    let seq: Vec<usize> = (0..n - 2).map(|_| r.gen_range(0..n)).collect();
    let idx = g.index_matrix();
    let on = prufer_decode(&seq, n).into_iter().map(|(u, v)| idx[u * n + v].expect("complete graph"));
    Ok(StructureIndicator::from_indices(g.num_edges(), on))
}

/// Trajectories of `n` diffusing nodes coupled along a hidden uniform tree.
/// Sample `i` draws from `rng.child(i)`.
pub fn gen_latent_tree_dataset(
    n: usize,
    steps: usize,
    samples: usize,
    noise: f64,
    feat: usize,
    rng: &RngStream,
) -> Result<TrajectoryDataset> {
    if n < 2 || steps < 2 || feat == 0 {
        return Err(Error::InvalidDimension(format!("need n >= 2, steps >= 2, feat >= 1; got {n}, {steps}, {feat}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise must be finite and non-negative, got {noise}")));
    }
    let g = Graph::complete(n);
    let out = (0..samples)
        .into_par_iter()
        .map(|i| {
            let s = rng.child(i as u64);
            let truth = uniform_spanning_tree(n, &s.child(0))?;
            let mut nbrs = vec![Vec::new(); n];
            for e in truth.ones() {
                let (u, v) = g.edges[e];
                nbrs[u].push(v);
                nbrs[v].push(u);
            }
            let mut r = s.child(1).rng();
            let mut state: Vec<Vec<f64>> = (0..n).map(|_| (0..feat).map(|_| r.sample(StandardNormal)).collect()).collect();
            let mut x = vec![0.0; n * steps * feat];
            for t in 0..steps {
                for v in 0..n {
                    let at = (v * steps + t) * feat;
                    x[at..at + feat].copy_from_slice(&state[v]);
                }
                if t + 1 == steps {
                    break;
                }
                let next: Vec<Vec<f64>> = (0..n)
                    .map(|v| {
                        (0..feat)
                            .map(|f| {
                                let pull: f64 = nbrs[v].iter().map(|&u| state[u][f] - state[v][f]).sum();
                                let xi: f64 = r.sample(StandardNormal);
                                state[v][f] + DIFFUSION_RATE * pull + noise * xi
                            })
                            .collect()
                    })
                    .collect();
                state = next;
            }
            Ok(TrajectorySample { x, truth })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryDataset {
        nodes: n,
        steps,
        feat,
        noise,
        seed: rng.seed,
        samples: out,
    })
}

/// Harmonic mean of edge precision and recall.
pub fn edge_f1(predicted: &StructureIndicator, truth: &StructureIndicator) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "edge_f1",
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    let tp = predicted.0.iter().zip(&truth.0).filter(|(a, b)| **a && **b).count() as f64;
    let (np, nt) = (predicted.count_ones() as f64, truth.count_ones() as f64);
    if np == 0.0 && nt == 0.0 {
        return Ok(1.0);
    }
    if tp == 0.0 {
        return Ok(0.0);
    }
    let (p, r) = (tp / np, tp / nt);
    Ok(2.0 * p * r / (p + r))
}

/// Mean edge F1 of the MAP structure under the encoder scores.
pub fn mean_edge_f1(model: &VaeModel, data: &TrajectoryDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("mean_edge_f1 needs samples"));
    }
    let scores: Vec<f64> = data
        .samples
        .par_iter()
        .map(|s| {
            let z = model.space.map(&model.encode_scores(&s.x)?)?;
            edge_f1(&z, &s.truth)
        })
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Mean edge F1 of uniformly random trees against the dataset's true trees,
/// `draws` trees per sample.
pub fn random_tree_f1(data: &TrajectoryDataset, draws: usize, rng: &RngStream) -> Result<f64> {
    if data.is_empty() || draws == 0 {
        return Err(Error::EmptyInput("random_tree_f1 needs samples and draws"));
    }
    let mut acc = 0.0;
    for (i, s) in data.samples.iter().enumerate() {
        for d in 0..draws {
            acc += edge_f1(&uniform_spanning_tree(data.nodes, &rng.child2(i as u64, d as u64))?, &s.truth)?;
        }
    }
    Ok(acc / (data.len() * draws) as f64)
}

/// Gaussian clusters: `k` centres drawn with scale `spread`, each sample a
/// uniformly chosen centre plus `noise`-scaled standard normal noise.
/// Returns the samples and their cluster labels.
pub fn gen_cluster_dataset(
    k: usize,
    dim: usize,
    samples: usize,
    spread: f64,
    noise: f64,
    rng: &RngStream,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if k == 0 || dim == 0 {
        return Err(Error::InvalidDimension(format!("need k, dim >= 1; got {k}, {dim}")));
    }
    let mut r = rng.child(0).rng();
    let centres: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| spread * r.sample::<f64, _>(StandardNormal)).collect()).collect();
    let mut xs = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    let mut r = rng.child(1).rng();
    for _ in 0..samples {
        let c = r.gen_range(0..k);
        xs.push(centres[c].iter().map(|m| m + noise * r.sample::<f64, _>(StandardNormal)).collect());
        labels.push(c);
    }
    Ok((xs, labels))
}
