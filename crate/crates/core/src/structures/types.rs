use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Family of admissible latent structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureFamily {
    /// Undirected spanning trees of the graph.
    SpanningTree,
    /// Spanning arborescences rooted at the graph root.
    Arborescence,
    /// Projective dependency trees over a sentence; vertex 0 is the artificial root.
    ProjectiveTree { single_root: bool },
    /// Arbitrary subsets of exactly `size` edges.
    EdgeSubset { size: usize },
    /// One of `k` categories.
    Categorical { k: usize },
}

impl StructureFamily {
    pub fn name(&self) -> &'static str {
        match self {
            StructureFamily::SpanningTree => "spanning-tree",
            StructureFamily::Arborescence => "arborescence",
            StructureFamily::ProjectiveTree { .. } => "projective-tree",
            StructureFamily::EdgeSubset { .. } => "edge-subset",
            StructureFamily::Categorical { .. } => "categorical",
        }
    }
}

/// A graph whose edge list order is the canonical coordinate order of
/// [`EdgeScores`] and [`StructureIndicator`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub directed: bool,
    pub root: Option<usize>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, directed: bool, root: Option<usize>) -> Result<Self> {
        let g = Self { n, edges, directed, root };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for &(u, v) in &self.edges {
            if u >= self.n || v >= self.n {
                return Err(Error::InvalidDimension(format!("edge ({u}, {v}) out of range for n = {}", self.n)));
            }
            if u == v {
                return Err(Error::InvalidDimension(format!("self-loop at vertex {u}")));
            }
        }
        if let Some(r) = self.root {
            if r >= self.n {
                return Err(Error::InvalidDimension(format!("root {r} out of range")));
            }
        }
        Ok(())
    }

    /// Complete undirected graph, edges `(u, v)` with `u < v` in lexicographic order.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Self {
            n,
            edges,
            directed: false,
            root: None,
        }
    }

    /// Complete digraph without arcs into `root`, lexicographic `(head, dependent)` order.
    pub fn complete_directed(n: usize, root: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && v != root {
                    edges.push((u, v));
                }
            }
        }
        Self {
            n,
            edges,
            directed: true,
            root: Some(root),
        }
    }

    /// Arc set for parsing a sentence of `len` words: vertex 0 is the root,
    /// arcs `(head, modifier)` in lexicographic order.
    pub fn parse_arcs(len: usize) -> Self {
        let mut g = Self::complete_directed(len + 1, 0);
        g.root = Some(0);
        g
    }

    /// Vertex-free placeholder used by the categorical family.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            directed: false,
            root: None,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_complete_undirected(&self) -> bool {
        if self.directed || self.edges.len() != self.n * self.n.saturating_sub(1) / 2 {
            return false;
        }
        let mut seen = vec![false; self.n * self.n];
        for &(u, v) in &self.edges {
            let (a, b) = (u.min(v), u.max(v));
            if seen[a * self.n + b] {
                return false;
            }
            seen[a * self.n + b] = true;
        }
        true
    }

    /// Dense `(head, dependent) -> edge index` lookup.
    pub(crate) fn index_matrix(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.n * self.n];
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if idx[u * self.n + v].is_none() {
                idx[u * self.n + v] = Some(i);
            }
            if !self.directed && idx[v * self.n + u].is_none() {
                idx[v * self.n + u] = Some(i);
            }
        }
        idx
    }
}

/// One real score per edge (or category), in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeScores(pub Vec<f64>);

impl EdgeScores {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Binary indicator over canonical edges (or categories).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StructureIndicator(pub Vec<bool>);

impl StructureIndicator {
    pub fn empty(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_indices(len: usize, on: impl IntoIterator<Item = usize>) -> Self {
        let mut z = Self::empty(len);
        for i in on {
            z.0[i] = true;
        }
        z
    }

    pub fn one_hot(len: usize, i: usize) -> Self {
        Self::from_indices(len, [i])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// `z . scores`.
    pub fn score(&self, scores: &[f64]) -> f64 {
        self.ones().map(|i| scores[i]).sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}
