//! First-order projective dependency parsing (Eisner's O(n^3) chart).
//!
//! Vertex 0 is the artificial root. Spans are indexed by their endpoints
//! `s < t`; `LEFT` spans are headed by `t`, `RIGHT` spans by `s`.

use super::types::{EdgeScores, Graph, StructureIndicator};
use crate::error::{Error, Result};

const LEFT: usize = 0;
const RIGHT: usize = 1;

/// Maximum-score projective tree over `sentence_len` words; the root may take
/// several children.
pub fn eisner_parse(sentence_len: usize, s: &EdgeScores) -> Result<StructureIndicator> {
    eisner_parse_with(sentence_len, s, false)
}

/// As [`eisner_parse`], optionally restricting the root to exactly one child.
pub fn eisner_parse_with(sentence_len: usize, s: &EdgeScores, single_root: bool) -> Result<StructureIndicator> {
    if sentence_len == 0 {
        return Err(Error::EmptyInput("sentence has no words"));
    }
    let g = Graph::parse_arcs(sentence_len);
    if s.len() != g.num_edges() {
        return Err(Error::DimensionMismatch {
            context: "eisner_parse scores",
            expected: g.num_edges(),
            got: s.len(),
        });
    }
    let n = g.n;
    let mut score = vec![f64::NEG_INFINITY; n * n];
    for (&(h, m), &w) in g.edges.iter().zip(&s.0) {
        score[h * n + m] = w;
    }
    let heads = parse_heads(n, &score, single_root);
    let index = g.index_matrix();
    Ok(StructureIndicator::from_indices(
        g.num_edges(),
        (1..n).map(|m| index[heads[m] * n + m].expect("parse arc exists")),
    ))
}

struct Chart {
    n: usize,
    complete: Vec<[f64; 2]>,
    incomplete: Vec<[f64; 2]>,
    complete_split: Vec<[usize; 2]>,
    incomplete_split: Vec<[usize; 2]>,
}

impl Chart {
    fn at(&self, s: usize, t: usize) -> usize {
        s * self.n + t
    }
}

/// Head of every vertex (`heads[0]` is unused) for the dense `n x n` score matrix.
pub(crate) fn parse_heads(n: usize, score: &[f64], single_root: bool) -> Vec<usize> {
    let mut c = Chart {
        n,
        complete: vec![[f64::NEG_INFINITY; 2]; n * n],
        incomplete: vec![[f64::NEG_INFINITY; 2]; n * n],
        complete_split: vec![[0; 2]; n * n],
        incomplete_split: vec![[0; 2]; n * n],
    };
    for s in 0..n {
        let i = c.at(s, s);
        c.complete[i] = [0.0, 0.0];
    }

    for width in 1..n {
        for s in 0..n - width {
            let t = s + width;
            let st = c.at(s, t);

            let mut best = f64::NEG_INFINITY;
            let mut arg = s;
            for r in s..t {
                let v = c.complete[c.at(s, r)][RIGHT] + c.complete[c.at(r + 1, t)][LEFT];
                if v > best {
                    best = v;
                    arg = r;
                }
            }
            // The root is never a modifier.
            c.incomplete[st][LEFT] = if s == 0 { f64::NEG_INFINITY } else { best + score[t * n + s] };
            c.incomplete[st][RIGHT] = best + score[s * n + t];
            c.incomplete_split[st] = [arg, arg];

            let mut best = f64::NEG_INFINITY;
            let mut arg = s;
            for r in s..t {
                let v = c.complete[c.at(s, r)][LEFT] + c.incomplete[c.at(r, t)][LEFT];
                if v > best {
                    best = v;
                    arg = r;
                }
            }
            c.complete[st][LEFT] = best;
            c.complete_split[st][LEFT] = arg;

            let mut best = f64::NEG_INFINITY;
            let mut arg = s + 1;
            for r in s + 1..=t {
                let v = c.incomplete[c.at(s, r)][RIGHT] + c.complete[c.at(r, t)][RIGHT];
                if v > best {
                    best = v;
                    arg = r;
                }
            }
            c.complete[st][RIGHT] = best;
            c.complete_split[st][RIGHT] = arg;
        }
    }

    let mut heads = vec![0; n];
    let last = n - 1;
    if single_root {
        let mut best = f64::NEG_INFINITY;
        let mut child = 1;
        for m in 1..n {
            let v = score[m] + c.complete[c.at(1, m)][LEFT] + c.complete[c.at(m, last)][RIGHT];
            if v > best {
                best = v;
                child = m;
            }
        }
        heads[child] = 0;
        backtrack_complete(&c, 1, child, LEFT, &mut heads);
        backtrack_complete(&c, child, last, RIGHT, &mut heads);
    } else {
        backtrack_complete(&c, 0, last, RIGHT, &mut heads);
    }
    heads
}

fn backtrack_complete(c: &Chart, s: usize, t: usize, dir: usize, heads: &mut [usize]) {
    if s >= t {
        return;
    }
    let r = c.complete_split[c.at(s, t)][dir];
    if dir == LEFT {
        backtrack_complete(c, s, r, LEFT, heads);
        backtrack_incomplete(c, r, t, LEFT, heads);
    } else {
        backtrack_incomplete(c, s, r, RIGHT, heads);
        backtrack_complete(c, r, t, RIGHT, heads);
    }
}

fn backtrack_incomplete(c: &Chart, s: usize, t: usize, dir: usize, heads: &mut [usize]) {
    if dir == LEFT {
        heads[s] = t;
    } else {
        heads[t] = s;
    }
    let r = c.incomplete_split[c.at(s, t)][dir];
    backtrack_complete(c, s, r, RIGHT, heads);
    backtrack_complete(c, r + 1, t, LEFT, heads);
}
