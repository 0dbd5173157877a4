use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{LossTransform, OptimizerKind};
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "iter,mean_fitness,grad_sq_norm,wallclock_ms,eta";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Mean fitness of the population, an estimate of the smoothed objective.
    pub mean_fitness: f64,
    /// Squared norm of the gradient estimate used for the step.
    pub grad_sq_norm: f64,
    pub wallclock_ms: f64,
    pub eta: f64,
}

/// How a trace was produced; the theory checks read this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub method: String,
    pub optimizer: OptimizerKind,
    pub standardize: bool,
    pub loss: LossTransform,
}

impl Default for TraceMeta {
    fn default() -> Self {
        Self {
            method: "nes".into(),
            optimizer: OptimizerKind::Sgd,
            standardize: false,
            loss: LossTransform::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl TrainingTrace {
    pub fn new(meta: TraceMeta) -> Self {
        Self { meta, records: Vec::new() }
    }

    pub fn push(&mut self, rec: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if rec.iter <= last.iter {
                return Err(Error::InvalidConfig(format!("trace iteration {} after {}", rec.iter, last.iter)));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(1/T) sum_t |grad_t|^2` over the recorded iterations.
    pub fn mean_grad_sq_norm(&self) -> Result<f64> {
        if self.records.is_empty() {
            return Err(Error::EmptyInput("trace has no records"));
        }
        Ok(self.records.iter().map(|r| r.grad_sq_norm).sum::<f64>() / self.records.len() as f64)
    }

    /// Equality ignoring wall-clock times.
    pub fn deterministic_eq(&self, other: &Self) -> bool {
        self.meta == other.meta
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.iter == b.iter
                    && a.mean_fitness.to_bits() == b.mean_fitness.to_bits()
                    && a.grad_sq_norm.to_bits() == b.grad_sq_norm.to_bits()
                    && a.eta.to_bits() == b.eta.to_bits()
            })
    }

    pub fn clear_wallclock(&mut self) {
        for r in &mut self.records {
            r.wallclock_ms = 0.0;
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{:?},{:?},{:?},{:?}", r.iter, r.mean_fitness, r.grad_sq_norm, r.wallclock_ms, r.eta);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses records from CSV text; metadata is not part of the file.
    pub fn from_csv(text: &str, meta: TraceMeta) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == TRACE_HEADER => {}
            other => return Err(Error::Parse(format!("bad trace header {other:?}"))),
        }
        let mut trace = TrainingTrace::new(meta);
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Parse(format!("trace line {}: expected 5 columns", k + 2)));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("trace line {}: {e}", k + 2)));
            trace.push(TraceRecord {
                iter: cols[0].trim().parse().map_err(|e| Error::Parse(format!("trace line {}: {e}", k + 2)))?,
                mean_fitness: num(cols[1])?,
                grad_sq_norm: num(cols[2])?,
                wallclock_ms: num(cols[3])?,
                eta: num(cols[4])?,
            })?;
        }
        Ok(trace)
    }

    pub fn read_csv(path: &Path, meta: TraceMeta) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?, meta)
    }
}
