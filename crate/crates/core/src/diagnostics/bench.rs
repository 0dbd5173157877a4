use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_train_loop, BaselineConfig, BaselineMethod};
use crate::data::gen_latent_tree_dataset;
use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::nes::{train_loop, NesConfig, OptimizerKind, TrainingTrace};
use crate::vae::{ModelShape, VaeModel};

pub const BENCH_HEADER: &str = "method,input_size,seed,mean_iter_ms,std_iter_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchTask {
    Nes,
    /// Score-function gradient with the expectation summed over every structure.
    ReinforceEnum,
    /// Single-sample score-function gradient with an EMA baseline.
    ReinforceSampled,
}

impl BenchTask {
    pub fn name(&self) -> &'static str {
        match self {
            BenchTask::Nes => "nes",
            BenchTask::ReinforceEnum => "reinforce_enum",
            BenchTask::ReinforceSampled => "reinforce_sampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub population: usize,
    pub sigma: f64,
    /// Timed iterations per (task, size, seed).
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub feat: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            population: 600,
            sigma: 0.01,
            iterations: 5,
            seeds: vec![0],
            steps: 10,
            feat: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    /// Number of graph vertices of the latent-tree task.
    pub input_size: usize,
    pub seed: u64,
    /// NaN when the size is out of reach for the method.
    pub mean_iter_ms: f64,
    pub std_iter_ms: f64,
}

fn timing(trace: &TrainingTrace) -> (f64, f64) {
    let t: Vec<f64> = trace.records.iter().map(|r| r.wallclock_ms).collect();
    let n = t.len() as f64;
    let mean = t.iter().sum::<f64>() / n;
    let std = if t.len() > 1 {
        (t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Per-iteration wall-clock time of each task on single-sample latent-tree
/// problems with `n` vertices for every `n` in `sizes`. Measurements run one
/// after another.
pub fn wallclock_bench(tasks: &[BenchTask], sizes: &[usize], settings: &BenchSettings) -> Result<Vec<BenchRow>> {
    if settings.iterations == 0 || settings.seeds.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs iterations and seeds".into()));
    }
    let mut rows = Vec::new();
    for &task in tasks {
        for &n in sizes {
            for &seed in &settings.seeds {
                let rng = RngStream::new(seed);
                let data = gen_latent_tree_dataset(n, settings.steps, 1, 0.05, settings.feat, &rng.child(0))?;
                let model = VaeModel::new(data.architecture(), data.space(), &ModelShape::default(), &rng.child(1))?;
                let xs = data.inputs();
                let baseline = |method| {
                    let cfg = BaselineConfig {
                        eta: 1e-6,
                        optimizer: OptimizerKind::Sgd,
                        iterations: settings.iterations,
                        batch_size: 1,
                    };
                    baseline_train_loop(&model, &xs, method, &cfg, &rng.child(2))
                };
                let run = match task {
                    BenchTask::Nes => {
                        let cfg = NesConfig {
                            sigma: settings.sigma,
                            population: settings.population,
                            eta: 1e-6,
                            iterations: settings.iterations,
                            batch_size: 1,
                            ..NesConfig::default()
                        };
                        train_loop(&model, &xs, &cfg, &rng.child(2))
                    }
                    BenchTask::ReinforceEnum => baseline(BaselineMethod::Unbiased),
                    BenchTask::ReinforceSampled => baseline(BaselineMethod::ReinforceEma { decay: 0.9 }),
                };
                let (mean, std) = match run {
                    Ok((_, trace)) => timing(&trace),
                    Err(Error::TooLarge { .. }) | Err(Error::Unsupported(_)) => (f64::NAN, f64::NAN),
                    Err(e) => return Err(e),
                };
                rows.push(BenchRow {
                    method: task.name().into(),
                    input_size: n,
                    seed,
                    mean_iter_ms: mean,
                    std_iter_ms: std,
                });
            }
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.method, r.input_size, r.seed, r.mean_iter_ms, r.std_iter_ms);
    }
    out
}
