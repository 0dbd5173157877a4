//! Line-oriented text format for graphs and score vectors.
//!
//! ```text
//! n m kind root        kind: undirected | directed, root: index or "-"
//! u v                  one line per edge, canonical order
//! ```
//!
//! Score files hold one float per line.

use std::fmt::Write as _;

use super::types::{EdgeScores, Graph};
use crate::error::{Error, Result};

pub fn write_graph(g: &Graph) -> String {
    let mut out = String::new();
    let kind = if g.directed { "directed" } else { "undirected" };
    let root = g.root.map_or_else(|| "-".to_string(), |r| r.to_string());
    writeln!(out, "{} {} {} {}", g.n, g.edges.len(), kind, root).expect("write to String");
    for &(u, v) in &g.edges {
        writeln!(out, "{u} {v}").expect("write to String");
    }
    out
}

fn parse_usize(tok: Option<&str>, what: &str, line: usize) -> Result<usize> {
    tok.ok_or_else(|| Error::Parse(format!("line {line}: missing {what}")))?
        .parse()
        .map_err(|e| Error::Parse(format!("line {line}: bad {what}: {e}")))
}

pub fn read_graph(text: &str) -> Result<Graph> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
    let mut tok = header.split_whitespace();
    let n = parse_usize(tok.next(), "vertex count", 1)?;
    let m = parse_usize(tok.next(), "edge count", 1)?;
    let directed = match tok.next() {
        Some("directed") => true,
        Some("undirected") => false,
        other => return Err(Error::Parse(format!("line 1: unknown graph kind {other:?}"))),
    };
    let root = match tok.next() {
        Some("-") => None,
        r => Some(parse_usize(r, "root", 1)?),
    };
    let mut edges = Vec::with_capacity(m);
    for (i, line) in lines {
        let mut tok = line.split_whitespace();
        let u = parse_usize(tok.next(), "edge tail", i + 1)?;
        let v = parse_usize(tok.next(), "edge head", i + 1)?;
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(Error::Parse(format!("header announces {m} edges, found {}", edges.len())));
    }
    Graph::new(n, edges, directed, root)
}

pub fn write_scores(s: &EdgeScores) -> String {
    s.0.iter().map(|v| format!("{v:?}\n")).collect()
}

pub fn read_scores(text: &str) -> Result<EdgeScores> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()
        .map(EdgeScores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn graph_text_layout() {
        let g = Graph::new(3, vec![(0, 1), (0, 2), (1, 2), (2, 1)], true, Some(0)).unwrap();
        let text = write_graph(&g);
        assert_eq!(text, "3 4 directed 0\n0 1\n0 2\n1 2\n2 1\n");
        assert_eq!(read_graph(&text).unwrap(), g);
        assert_eq!(read_graph(&write_graph(&Graph::complete(4))).unwrap(), Graph::complete(4));
    }

    #[test]
    fn malformed_graphs_are_rejected() {
        assert!(read_graph("").is_err());
        assert!(read_graph("3 2 sideways -\n0 1\n1 2\n").is_err());
        assert!(read_graph("3 3 undirected -\n0 1\n1 2\n").is_err());
        assert!(read_graph("3 1 undirected -\n1 1\n").is_err());
    }

    proptest! {
        #[test]
        fn scores_roundtrip_exactly(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..50)) {
            let s = EdgeScores(v);
            prop_assert_eq!(read_scores(&write_scores(&s)).unwrap(), s);
        }
    }
}
