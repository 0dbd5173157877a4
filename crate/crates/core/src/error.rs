use std::io;

/// Errors produced by every module of this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("graph has no spanning tree (disconnected)")]
    NoSpanningTree,

    #[error("vertex {vertex} is unreachable from root {root}; no arborescence exists")]
    NoArborescence { root: usize, vertex: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("structure space too large to enumerate: {count} structures exceeds cap {cap}")]
    TooLarge { count: String, cap: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid structure for {0}")]
    InvalidStructure(String),

    #[error("non-finite fitness at iteration {iteration}, perturbation {index}")]
    PoisonedFitness { iteration: usize, index: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("population size {0} must be even when mirrored sampling is enabled")]
    OddPopulation(usize),

    #[error("theory mismatch: {0}")]
    TheoryMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
