use serde::{Deserialize, Serialize};

use super::enumerate::{enumerate, ENUMERATION_CAP};
use super::types::{Graph, StructureFamily};
use crate::error::{Error, Result};

/// Size of a structure space: exact when representable, always as a log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureCount {
    pub exact: Option<u128>,
    pub log: f64,
}

impl StructureCount {
    fn exact(n: u128) -> Self {
        Self {
            exact: Some(n),
            log: (n as f64).ln(),
        }
    }
}

/// `|Z|` for the family on `g`.
///
/// Spanning trees use Cayley's formula on complete graphs and the
/// matrix-tree theorem elsewhere; arborescences use the directed matrix-tree
/// theorem; projective trees fall back to enumeration under the cap.
pub fn count_structures(family: StructureFamily, g: &Graph) -> Result<StructureCount> {
    match family {
        StructureFamily::Categorical { k } => Ok(StructureCount::exact(k as u128)),
        StructureFamily::EdgeSubset { size } => {
            let m = g.num_edges();
            if size > m {
                return Ok(StructureCount { exact: Some(0), log: f64::NEG_INFINITY });
            }
            let mut c: u128 = 1;
            let mut log = 0.0;
            let mut overflow = false;
            for i in 0..size {
                log += ((m - i) as f64).ln() - ((i + 1) as f64).ln();
                match c.checked_mul((m - i) as u128) {
                    Some(v) => c = v / (i + 1) as u128,
                    None => overflow = true,
                }
            }
            Ok(StructureCount {
                exact: (!overflow).then_some(c),
                log,
            })
        }
        StructureFamily::SpanningTree => {
            if g.directed {
                return Err(Error::Unsupported("spanning trees need an undirected graph".into()));
            }
            if g.is_complete_undirected() && g.n >= 1 {
                let n = g.n as u128;
                if g.n <= 2 {
                    return Ok(StructureCount::exact(1));
                }
                let exact = n.checked_pow(g.n as u32 - 2);
                return Ok(StructureCount {
                    exact,
                    log: (g.n as f64 - 2.0) * (g.n as f64).ln(),
                });
            }
            let mut lap = vec![vec![0.0; g.n]; g.n];
            for &(u, v) in &g.edges {
                lap[u][u] += 1.0;
                lap[v][v] += 1.0;
                lap[u][v] -= 1.0;
                lap[v][u] -= 1.0;
            }
            Ok(from_determinant(minor_determinant(&lap, 0)))
        }
        StructureFamily::Arborescence => {
            let root = g
                .root
                .ok_or_else(|| Error::InvalidConfig("arborescence graph has no root".into()))?;
            let mut lap = vec![vec![0.0; g.n]; g.n];
            for &(u, v) in &g.edges {
                lap[v][v] += 1.0;
                lap[u][v] -= 1.0;
            }
            Ok(from_determinant(minor_determinant(&lap, root)))
        }
        StructureFamily::ProjectiveTree { .. } => match enumerate(family, g, ENUMERATION_CAP) {
            Ok(all) => Ok(StructureCount::exact(all.len() as u128)),
            Err(Error::TooLarge { .. }) => Err(Error::Unsupported(format!(
                "counting projective trees above the enumeration cap ({ENUMERATION_CAP})"
            ))),
            Err(e) => Err(e),
        },
    }
}

/// `log sum_z exp(z . scores)` over the whole family.
///
/// Spanning trees and arborescences use the weighted matrix-tree theorem,
/// categorical spaces a log-sum-exp; other families are enumerated.
pub fn log_partition_function(family: StructureFamily, g: &Graph, scores: &[f64]) -> Result<f64> {
    let directed = match family {
        StructureFamily::Categorical { .. } => return Ok(crate::math::logsumexp(scores)),
        StructureFamily::SpanningTree if !g.directed => false,
        StructureFamily::Arborescence => true,
        _ => {
            let all = enumerate(family, g, ENUMERATION_CAP)?;
            let s: Vec<f64> = all.iter().map(|z| z.score(scores)).collect();
            return Ok(crate::math::logsumexp(&s));
        }
    };
    if scores.len() != g.num_edges() {
        return Err(Error::DimensionMismatch {
            context: "partition scores",
            expected: g.num_edges(),
            got: scores.len(),
        });
    }
    if g.n == 1 {
        return Ok(0.0);
    }
    let shift = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lap = vec![vec![0.0; g.n]; g.n];
    for (&(u, v), &s) in g.edges.iter().zip(scores) {
        let w = (s - shift).exp();
        if directed {
            lap[v][v] += w;
            lap[u][v] -= w;
        } else {
            lap[u][u] += w;
            lap[v][v] += w;
            lap[u][v] -= w;
            lap[v][u] -= w;
        }
    }
    let skip = if directed {
        g.root.ok_or_else(|| Error::InvalidConfig("arborescence graph has no root".into()))?
    } else {
        0
    };
    let (sign, log_det) = minor_log_determinant(&lap, skip);
    if sign <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_det + (g.n - 1) as f64 * shift)
}

fn from_determinant(det: f64) -> StructureCount {
    let rounded = det.round();
    let exact = (rounded.abs() < 2f64.powi(52) && (det - rounded).abs() < 1e-6 * rounded.abs().max(1.0))
        .then_some(rounded.max(0.0) as u128);
    match exact {
        Some(e) => StructureCount::exact(e),
        None => StructureCount { exact: None, log: det.ln() },
    }
}

fn minor_determinant(m: &[Vec<f64>], skip: usize) -> f64 {
    let (sign, log_det) = minor_log_determinant(m, skip);
    sign * log_det.exp()
}

/// Sign and log-magnitude of the determinant of `m` with row and column
/// `skip` removed (partial pivoting).
fn minor_log_determinant(m: &[Vec<f64>], skip: usize) -> (f64, f64) {
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, row)| row.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, &v)| v).collect())
        .collect();
    let n = a.len();
    let (mut sign, mut log_det) = (1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col] == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if pivot != col {
            a.swap(pivot, col);
            sign = -sign;
        }
        sign *= a[col][col].signum();
        log_det += a[col][col].abs().ln();
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (sign, log_det)
}
