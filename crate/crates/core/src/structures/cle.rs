//! Chu-Liu-Edmonds maximum spanning arborescence on an edge list.
//!
//! Every vertex picks its best incoming arc. If this creates cycles, each
//! cycle is contracted into a single vertex, arcs entering a cycle are
//! re-scored relative to the arc they would replace, and the contracted
//! graph is solved recursively. Parallel arcs are kept, so no contraction
//! bookkeeping beyond an origin map is needed.

use std::collections::VecDeque;

use super::types::{EdgeScores, Graph, StructureIndicator};
use crate::error::{Error, Result};

pub fn cle_arborescence(g: &Graph, s: &EdgeScores) -> Result<StructureIndicator> {
    if !g.directed {
        return Err(Error::Unsupported("Chu-Liu-Edmonds requires a directed graph".into()));
    }
    let root = g
        .root
        .ok_or_else(|| Error::InvalidConfig("arborescence graph has no root".into()))?;
    if s.len() != g.num_edges() {
        return Err(Error::DimensionMismatch {
            context: "cle_arborescence scores",
            expected: g.num_edges(),
            got: s.len(),
        });
    }

    let mut reached = vec![false; g.n];
    reached[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &(a, b) in &g.edges {
            if a == u && !reached[b] {
                reached[b] = true;
                queue.push_back(b);
            }
        }
    }
    if let Some(vertex) = reached.iter().position(|&r| !r) {
        return Err(Error::NoArborescence { root, vertex });
    }

    let arcs: Vec<(usize, usize, f64)> = g.edges.iter().zip(&s.0).map(|(&(u, v), &w)| (u, v, w)).collect();
    let chosen = solve(g.n, root, &arcs)?;
    Ok(StructureIndicator::from_indices(g.num_edges(), chosen))
}

/// Returns the indices (into `arcs`) of a maximum arborescence.
fn solve(n: usize, root: usize, arcs: &[(usize, usize, f64)]) -> Result<Vec<usize>> {
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (i, &(u, v, w)) in arcs.iter().enumerate() {
        if v == root || u == v {
            continue;
        }
        match best[v] {
            Some(j) if arcs[j].2 >= w => {}
            _ => best[v] = Some(i),
        }
    }
    let mut parent_arc = vec![usize::MAX; n];
    for v in 0..n {
        if v == root {
            continue;
        }
        parent_arc[v] = best[v].ok_or(Error::NoArborescence { root, vertex: v })?;
    }

    // 0 = unvisited, 1 = on the current walk, 2 = finished
    let mut state = vec![0u8; n];
    state[root] = 2;
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = arcs[parent_arc[v]].0;
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&p| p == v).expect("vertex on current walk");
            cycles.push(path[pos..].to_vec());
        }
        for p in path {
            state[p] = 2;
        }
    }

    if cycles.is_empty() {
        return Ok((0..n).filter(|&v| v != root).map(|v| parent_arc[v]).collect());
    }

    let mut component = vec![usize::MAX; n];
    let mut in_cycle = vec![false; n];
    let mut next = 0;
    for cycle in &cycles {
        for &v in cycle {
            component[v] = next;
            in_cycle[v] = true;
        }
        next += 1;
    }
    for c in component.iter_mut() {
        if *c == usize::MAX {
            *c = next;
            next += 1;
        }
    }

    let mut contracted = Vec::with_capacity(arcs.len());
    let mut origin = Vec::with_capacity(arcs.len());
    for (i, &(u, v, w)) in arcs.iter().enumerate() {
        let (cu, cv) = (component[u], component[v]);
        if cu == cv {
            continue;
        }
        let w = if in_cycle[v] { w - arcs[parent_arc[v]].2 } else { w };
        contracted.push((cu, cv, w));
        origin.push(i);
    }

    let mut result: Vec<usize> = solve(next, component[root], &contracted)?
        .into_iter()
        .map(|j| origin[j])
        .collect();

    for cycle in &cycles {
        let entry = result
            .iter()
            .map(|&i| arcs[i].1)
            .find(|v| cycle.contains(v))
            .expect("every contracted cycle has one entering arc");
        result.extend(cycle.iter().filter(|&&v| v != entry).map(|&v| parent_arc[v]));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_graph() -> Graph {
        // r = 0, arcs r->1, r->2, 1->2, 2->1
        Graph::new(3, vec![(0, 1), (0, 2), (1, 2), (2, 1)], true, Some(0)).unwrap()
    }

    #[test]
    fn small_example() {
        let z = cle_arborescence(&example_graph(), &EdgeScores(vec![5.0, 1.0, 3.0, 2.0])).unwrap();
        assert_eq!(z, StructureIndicator(vec![true, false, true, false]));
    }

    #[test]
    fn single_non_root_vertex() {
        let g = Graph::new(2, vec![(0, 1)], true, Some(0)).unwrap();
        let z = cle_arborescence(&g, &EdgeScores(vec![-4.0])).unwrap();
        assert_eq!(z.0, vec![true]);
    }

    #[test]
    fn cycle_is_broken_at_the_cheapest_point() {
        // 1 <-> 2 strongly, root only weakly attached.
        let g = example_graph();
        let z = cle_arborescence(&g, &EdgeScores(vec![1.0, 0.5, 10.0, 9.0])).unwrap();
        assert_eq!(z, StructureIndicator(vec![true, false, true, false]));
    }

    #[test]
    fn unreachable_vertex_fails() {
        let g = Graph::new(3, vec![(0, 1), (2, 1)], true, Some(0)).unwrap();
        assert!(matches!(
            cle_arborescence(&g, &EdgeScores(vec![1.0, 1.0])),
            Err(Error::NoArborescence { root: 0, vertex: 2 })
        ));
    }
}
