//! Combinatorial structure families, their MAP solvers and brute-force oracles.

mod cle;
mod count;
mod eisner;
mod enumerate;
pub mod io;
mod kruskal;
mod types;

use serde::{Deserialize, Serialize};

pub use cle::cle_arborescence;
pub use count::{count_structures, log_partition_function, StructureCount};
pub use eisner::{eisner_parse, eisner_parse_with};
pub use enumerate::{validate_structure, ENUMERATION_CAP};
pub use kruskal::kruskal_mst;
pub use types::{EdgeScores, Graph, StructureFamily, StructureIndicator};

use crate::error::{Error, Result};
use crate::math::logsumexp;

/// All valid structures of `family` over `g`, under the default cap.
pub fn enumerate_structures(family: StructureFamily, g: &Graph) -> Result<Vec<StructureIndicator>> {
    enumerate_structures_capped(family, g, ENUMERATION_CAP)
}

pub fn enumerate_structures_capped(family: StructureFamily, g: &Graph, cap: u64) -> Result<Vec<StructureIndicator>> {
    if let Ok(count) = count_structures(family, g) {
        let too_big = match count.exact {
            Some(c) => c > cap as u128,
            None => count.log > (cap as f64).ln(),
        };
        if too_big {
            return Err(Error::TooLarge {
                count: count.exact.map_or_else(|| format!("e^{:.1}", count.log), |c| c.to_string()),
                cap,
            });
        }
    }
    enumerate::enumerate(family, g, cap)
}

/// A structure family bound to its graph: the latent space of a VAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSpace {
    pub family: StructureFamily,
    pub graph: Graph,
}

impl LatentSpace {
    pub fn new(family: StructureFamily, graph: Graph) -> Result<Self> {
        graph.validate()?;
        match family {
            StructureFamily::SpanningTree if graph.directed => {
                return Err(Error::InvalidConfig("spanning trees need an undirected graph".into()))
            }
            StructureFamily::Arborescence if !graph.directed || graph.root.is_none() => {
                return Err(Error::InvalidConfig("arborescences need a rooted directed graph".into()))
            }
            StructureFamily::ProjectiveTree { .. } if graph.n < 2 || graph != Graph::parse_arcs(graph.n - 1) => {
                return Err(Error::InvalidConfig("projective trees need Graph::parse_arcs".into()))
            }
            StructureFamily::Categorical { k } if k == 0 => {
                return Err(Error::InvalidConfig("categorical family needs k >= 1".into()))
            }
            _ => {}
        }
        Ok(Self { family, graph })
    }

    pub fn spanning_trees(n: usize) -> Self {
        Self {
            family: StructureFamily::SpanningTree,
            graph: Graph::complete(n),
        }
    }

    pub fn categorical(k: usize) -> Self {
        Self {
            family: StructureFamily::Categorical { k },
            graph: Graph::empty(k),
        }
    }

    pub fn projective(len: usize, single_root: bool) -> Self {
        Self {
            family: StructureFamily::ProjectiveTree { single_root },
            graph: Graph::parse_arcs(len),
        }
    }

    pub fn arborescences(n: usize, root: usize) -> Self {
        Self {
            family: StructureFamily::Arborescence,
            graph: Graph::complete_directed(n, root),
        }
    }

    /// Number of score coordinates.
    pub fn dim(&self) -> usize {
        match self.family {
            StructureFamily::Categorical { k } => k,
            _ => self.graph.num_edges(),
        }
    }

    /// Maximum-score structure under `scores`.
    pub fn map(&self, scores: &EdgeScores) -> Result<StructureIndicator> {
        if scores.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "MAP scores",
                expected: self.dim(),
                got: scores.len(),
            });
        }
        match self.family {
            StructureFamily::SpanningTree => kruskal_mst(&self.graph, scores),
            StructureFamily::Arborescence => cle_arborescence(&self.graph, scores),
            StructureFamily::ProjectiveTree { single_root } => {
                eisner_parse_with(self.graph.n - 1, scores, single_root)
            }
            StructureFamily::EdgeSubset { size } => {
                if size > scores.len() {
                    return Err(Error::InvalidConfig(format!("cannot choose {size} of {} edges", scores.len())));
                }
                let mut order: Vec<usize> = (0..scores.len()).collect();
                order.sort_by(|&a, &b| scores.0[b].total_cmp(&scores.0[a]).then(a.cmp(&b)));
                Ok(StructureIndicator::from_indices(scores.len(), order.into_iter().take(size)))
            }
            StructureFamily::Categorical { k } => Ok(StructureIndicator::one_hot(k, argmax(&scores.0))),
        }
    }

    pub fn validate(&self, z: &StructureIndicator) -> bool {
        validate_structure(self.family, &self.graph, z)
    }

    pub fn enumerate(&self) -> Result<Vec<StructureIndicator>> {
        enumerate_structures(self.family, &self.graph)
    }

    pub fn count(&self) -> Result<StructureCount> {
        count_structures(self.family, &self.graph)
    }

    /// `log sum_z exp(z . scores)` over the whole space.
    pub fn log_partition_of(&self, scores: &EdgeScores) -> Result<f64> {
        log_partition_function(self.family, &self.graph, &scores.0)
    }

    /// `log sum_z exp(z . scores)` over an explicit structure list.
    pub fn log_partition(structures: &[StructureIndicator], scores: &[f64]) -> f64 {
        let s: Vec<f64> = structures.iter().map(|z| z.score(scores)).collect();
        logsumexp(&s)
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
