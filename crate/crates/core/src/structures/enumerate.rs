//! Exhaustive structure enumeration (the brute-force oracle) and the
//! family validity predicates.

use super::types::{DisjointSet, Graph, StructureFamily, StructureIndicator};
use crate::error::{Error, Result};

/// Default limit on enumerated structures.
pub const ENUMERATION_CAP: u64 = 1_000_000;

struct Collector {
    out: Vec<StructureIndicator>,
    cap: u64,
}

impl Collector {
    fn push(&mut self, z: StructureIndicator) -> Result<()> {
        if self.out.len() as u64 >= self.cap {
            return Err(Error::TooLarge {
                count: format!(">{}", self.cap),
                cap: self.cap,
            });
        }
        self.out.push(z);
        Ok(())
    }
}

pub(crate) fn enumerate(family: StructureFamily, g: &Graph, cap: u64) -> Result<Vec<StructureIndicator>> {
    let mut c = Collector { out: Vec::new(), cap };
    match family {
        StructureFamily::SpanningTree => {
            if g.directed {
                return Err(Error::Unsupported("spanning trees need an undirected graph".into()));
            }
            let mut chosen = Vec::new();
            spanning_trees(g, 0, &DisjointSet::new(g.n), &mut chosen, &mut c)?;
        }
        StructureFamily::Arborescence => {
            let root = g
                .root
                .ok_or_else(|| Error::InvalidConfig("arborescence graph has no root".into()))?;
            let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); g.n];
            for (i, &(_, v)) in g.edges.iter().enumerate() {
                incoming[v].push(i);
            }
            let vertices: Vec<usize> = (0..g.n).filter(|&v| v != root).collect();
            let mut parent = vec![None; g.n];
            arborescences(g, root, &vertices, 0, &incoming, &mut parent, &mut c)?;
        }
        StructureFamily::ProjectiveTree { single_root } => {
            let len = g.n.checked_sub(1).ok_or(Error::EmptyInput("parse graph has no vertices"))?;
            let expected = Graph::parse_arcs(len);
            if *g != expected {
                return Err(Error::Unsupported("projective family requires Graph::parse_arcs".into()));
            }
            let index = g.index_matrix();
            let mut heads = vec![0usize; g.n];
            projective(g, &index, 1, &mut heads, single_root, &mut c)?;
        }
        StructureFamily::EdgeSubset { size } => {
            let mut chosen = Vec::new();
            subsets(g.num_edges(), size, 0, &mut chosen, &mut c)?;
        }
        StructureFamily::Categorical { k } => {
            for i in 0..k {
                c.push(StructureIndicator::one_hot(k, i))?;
            }
        }
    }
    Ok(c.out)
}

fn spanning_trees(
    g: &Graph,
    next: usize,
    dsu: &DisjointSet,
    chosen: &mut Vec<usize>,
    c: &mut Collector,
) -> Result<()> {
    let need = g.n.saturating_sub(1);
    if chosen.len() == need {
        return c.push(StructureIndicator::from_indices(g.num_edges(), chosen.iter().copied()));
    }
    if g.num_edges() - next < need - chosen.len() {
        return Ok(());
    }
    let (u, v) = g.edges[next];
    let mut with = dsu.clone();
    if with.union(u, v) {
        chosen.push(next);
        spanning_trees(g, next + 1, &with, chosen, c)?;
        chosen.pop();
    }
    spanning_trees(g, next + 1, dsu, chosen, c)
}

fn arborescences(
    g: &Graph,
    root: usize,
    vertices: &[usize],
    pos: usize,
    incoming: &[Vec<usize>],
    parent: &mut Vec<Option<usize>>,
    c: &mut Collector,
) -> Result<()> {
    if pos == vertices.len() {
        return c.push(StructureIndicator::from_indices(g.num_edges(), parent.iter().flatten().copied()));
    }
    let v = vertices[pos];
    for &e in &incoming[v] {
        let u = g.edges[e].0;
        // Reject arcs that close a cycle through already assigned parents.
        let mut w = u;
        let mut cyclic = false;
        while let Some(pe) = parent[w] {
            if w == v {
                cyclic = true;
                break;
            }
            w = g.edges[pe].0;
        }
        if cyclic || w == v {
            continue;
        }
        parent[v] = Some(e);
        arborescences(g, root, vertices, pos + 1, incoming, parent, c)?;
        parent[v] = None;
    }
    Ok(())
}

fn crosses(a: (usize, usize), b: (usize, usize)) -> bool {
    let (l1, r1) = (a.0.min(a.1), a.0.max(a.1));
    let (l2, r2) = (b.0.min(b.1), b.0.max(b.1));
    (l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1)
}

fn projective(
    g: &Graph,
    index: &[Option<usize>],
    m: usize,
    heads: &mut Vec<usize>,
    single_root: bool,
    c: &mut Collector,
) -> Result<()> {
    let n = g.n;
    if m == n {
        if single_root && (1..n).filter(|&v| heads[v] == 0).count() != 1 {
            return Ok(());
        }
        // acyclic: every word reaches the root within n steps
        for v in 1..n {
            let mut w = v;
            let mut steps = 0;
            while w != 0 && steps < n {
                w = heads[w];
                steps += 1;
            }
            if w != 0 {
                return Ok(());
            }
        }
        let arcs = (1..n).map(|v| index[heads[v] * n + v].expect("parse arc"));
        return c.push(StructureIndicator::from_indices(g.num_edges(), arcs));
    }
    for h in 0..n {
        if h == m {
            continue;
        }
        if (1..m).any(|v| crosses((heads[v], v), (h, m))) {
            continue;
        }
        heads[m] = h;
        projective(g, index, m + 1, heads, single_root, c)?;
    }
    Ok(())
}

fn subsets(m: usize, size: usize, next: usize, chosen: &mut Vec<usize>, c: &mut Collector) -> Result<()> {
    if chosen.len() == size {
        return c.push(StructureIndicator::from_indices(m, chosen.iter().copied()));
    }
    if m - next < size - chosen.len() {
        return Ok(());
    }
    chosen.push(next);
    subsets(m, size, next + 1, chosen, c)?;
    chosen.pop();
    subsets(m, size, next + 1, chosen, c)
}

/// Whether `z` belongs to `family` over `g`.
pub fn validate_structure(family: StructureFamily, g: &Graph, z: &StructureIndicator) -> bool {
    match family {
        StructureFamily::Categorical { k } => z.len() == k && z.count_ones() == 1,
        StructureFamily::EdgeSubset { size } => z.len() == g.num_edges() && z.count_ones() == size,
        StructureFamily::SpanningTree => {
            if g.directed || z.len() != g.num_edges() || z.count_ones() + 1 != g.n.max(1) {
                return false;
            }
            let mut dsu = DisjointSet::new(g.n);
            z.ones().all(|e| dsu.union(g.edges[e].0, g.edges[e].1))
        }
        StructureFamily::Arborescence => match (g.root, z.len() == g.num_edges()) {
            (Some(root), true) => parents(g, root, z).is_some(),
            _ => false,
        },
        StructureFamily::ProjectiveTree { single_root } => {
            if z.len() != g.num_edges() || !g.directed || g.root != Some(0) {
                return false;
            }
            let Some(parent) = parents(g, 0, z) else {
                return false;
            };
            if single_root && (1..g.n).filter(|&v| parent[v] == Some(0)).count() != 1 {
                return false;
            }
            // Projectivity: every word strictly between a head and its
            // dependent is dominated by that head.
            let dominated_by = |mut w: usize, h: usize| -> bool {
                while let Some(p) = parent[w] {
                    if p == h {
                        return true;
                    }
                    w = p;
                }
                false
            };
            (1..g.n).all(|m| {
                let h = parent[m].expect("non-root vertex has a parent");
                let (lo, hi) = (h.min(m), h.max(m));
                (lo + 1..hi).all(|w| dominated_by(w, h))
            })
        }
    }
}

/// Parent vertex of every vertex if `z` is a spanning arborescence rooted at `root`.
fn parents(g: &Graph, root: usize, z: &StructureIndicator) -> Option<Vec<Option<usize>>> {
    let mut parent = vec![None; g.n];
    for e in z.ones() {
        let (u, v) = g.edges[e];
        if v == root || parent[v].is_some() {
            return None;
        }
        parent[v] = Some(u);
    }
    for v in 0..g.n {
        if v == root {
            continue;
        }
        parent[v]?;
        let mut w = v;
        let mut steps = 0;
        while let Some(p) = parent[w] {
            w = p;
            steps += 1;
            if steps > g.n {
                return None;
            }
        }
        if w != root {
            return None;
        }
    }
    Some(parent)
}
