use super::types::{DisjointSet, EdgeScores, Graph, StructureIndicator};
use crate::error::{Error, Result};

/// Maximum-score spanning tree of an undirected graph.
///
/// Edges are visited by descending score, ties broken by lower edge index.
pub fn kruskal_mst(g: &Graph, s: &EdgeScores) -> Result<StructureIndicator> {
    if g.directed {
        return Err(Error::Unsupported("Kruskal requires an undirected graph".into()));
    }
    if s.len() != g.num_edges() {
        return Err(Error::DimensionMismatch {
            context: "kruskal_mst scores",
            expected: g.num_edges(),
            got: s.len(),
        });
    }
    if g.n == 0 {
        return Err(Error::EmptyInput("graph has no vertices"));
    }
    let mut order: Vec<usize> = (0..g.num_edges()).collect();
    order.sort_by(|&a, &b| s.0[b].total_cmp(&s.0[a]).then(a.cmp(&b)));

    let mut dsu = DisjointSet::new(g.n);
    let mut z = StructureIndicator::empty(g.num_edges());
    let mut taken = 0;
    for e in order {
        if taken + 1 == g.n {
            break;
        }
        let (u, v) = g.edges[e];
        if dsu.union(u, v) {
            z.0[e] = true;
            taken += 1;
        }
    }
    if taken + 1 != g.n {
        return Err(Error::NoSpanningTree);
    }
    Ok(z)
}
