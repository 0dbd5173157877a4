use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nesvae_core::baselines::baseline_train_loop;
use nesvae_core::data::{gen_cluster_dataset, gen_latent_tree_dataset, load_dataset, mean_edge_f1, random_tree_f1, TrajectoryDataset};
use nesvae_core::nes::{train_loop, TrainingTrace};
use nesvae_core::vae::{elbo_sample, exact_elbo, save_checkpoint, Architecture, VaeModel};
use nesvae_core::{Error, RngStream};

use crate::config::{RunConfig, Task};
use crate::CliError;

const TAG_DATA: u64 = 1;
const TAG_INIT: u64 = 2;
const TAG_TRAIN: u64 = 3;
const TAG_EVAL: u64 = 4;

/// Draws used for the negative ELBO when the structure space cannot be enumerated.
const EVAL_DRAWS: usize = 256;

pub struct TaskData {
    pub arch: Architecture,
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    /// Held-out trajectories with their true trees (tree task only).
    pub test_trees: Option<TrajectoryDataset>,
}

pub fn root_rng(cfg: &RunConfig) -> RngStream {
    RngStream::new(cfg.seed)
}

pub fn build_data(cfg: &RunConfig) -> Result<TaskData, CliError> {
    let total = cfg.samples + cfg.test_samples;
    let rng = root_rng(cfg).child(TAG_DATA);
    match cfg.task {
        Task::Tree => {
            let data = match &cfg.dataset {
                Some(path) => load_dataset(Path::new(path)).map_err(|e| match e {
                    Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{path}: {io}"))),
                    e => e,
                })?,
                None => gen_latent_tree_dataset(cfg.size(), cfg.steps, total, cfg.noise, cfg.feat, &rng)?,
            };
            if data.nodes != cfg.size() {
                return Err(CliError::Config(format!("dataset has {} nodes but size is {}", data.nodes, cfg.size())));
            }
            if data.len() <= cfg.test_samples {
                return Err(CliError::Config(format!(
                    "dataset has {} samples, need more than test_samples = {}",
                    data.len(),
                    cfg.test_samples
                )));
            }
            let cut = data.len() - cfg.test_samples;
            let test = TrajectoryDataset { samples: data.samples[cut..].to_vec(), ..data.clone() };
            let train = TrajectoryDataset { samples: data.samples[..cut].to_vec(), ..data.clone() };
            Ok(TaskData {
                arch: data.architecture(),
                train: train.inputs(),
                test: test.inputs(),
                test_trees: Some(test),
            })
        }
        Task::Toy => {
            let (mut xs, _) = gen_cluster_dataset(cfg.clusters, cfg.dim, total, cfg.spread, cfg.noise, &rng)?;
            let test = xs.split_off(cfg.samples);
            Ok(TaskData {
                arch: Architecture::Dense { input_dim: cfg.dim },
                train: xs,
                test,
                test_trees: None,
            })
        }
    }
}

pub fn initial_model(cfg: &RunConfig, data: &TaskData) -> Result<VaeModel, CliError> {
    Ok(VaeModel::new(data.arch, cfg.space(), &cfg.shape(), &root_rng(cfg).child(TAG_INIT))?)
}

pub fn train(cfg: &RunConfig, model: &VaeModel, train: &[Vec<f64>]) -> Result<(VaeModel, TrainingTrace), CliError> {
    let rng = root_rng(cfg).child(TAG_TRAIN);
    Ok(match cfg.baseline_method() {
        None => train_loop(model, train, &cfg.nes_config(), &rng)?,
        Some(method) => baseline_train_loop(model, train, method, &cfg.baseline_config(), &rng)?,
    })
}

/// Mean negative ELBO over `points`: exact when the structures can be
/// enumerated, otherwise a Monte-Carlo estimate with common draws.
pub fn mean_neg_elbo(cfg: &RunConfig, model: &VaeModel, points: &[Vec<f64>]) -> Result<(f64, &'static str), CliError> {
    let exact: Result<Vec<f64>, Error> = points.iter().map(|x| exact_elbo(model, x).map(|e| e.total)).collect();
    let (vals, kind) = match exact {
        Ok(v) => (v, "exact"),
        Err(Error::TooLarge { .. }) => {
            let rng = root_rng(cfg).child(TAG_EVAL);
            let v = points
                .iter()
                .enumerate()
                .map(|(i, x)| elbo_sample(model, x, &rng.child(i as u64), EVAL_DRAWS).map(|e| e.total))
                .collect::<Result<Vec<_>, _>>()?;
            (v, "sampled")
        }
        Err(e) => return Err(e.into()),
    };
    Ok((vals.iter().sum::<f64>() / vals.len() as f64, kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub method: String,
    pub params: usize,
    pub iterations: usize,
    pub neg_elbo_kind: String,
    pub initial_neg_elbo: f64,
    pub final_neg_elbo: f64,
    pub edge_f1: Option<f64>,
    pub random_tree_f1: Option<f64>,
}

pub struct RunOutput {
    pub model: VaeModel,
    pub trace: TrainingTrace,
    pub metrics: Metrics,
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let data = build_data(cfg)?;
    let init = initial_model(cfg, &data)?;
    let (model, trace) = train(cfg, &init, &data.train)?;
    let eval = &data.test[..cfg.eval_samples.min(data.test.len())];
    let (before, kind) = mean_neg_elbo(cfg, &init, eval)?;
    let (after, _) = mean_neg_elbo(cfg, &model, eval)?;
    let (edge_f1, random) = match &data.test_trees {
        Some(t) => (
            Some(mean_edge_f1(&model, t)?),
            Some(random_tree_f1(t, 20, &root_rng(cfg).child(TAG_EVAL).child2(1, 0))?),
        ),
        None => (None, None),
    };
    let metrics = Metrics {
        method: cfg.method_name().into(),
        params: model.num_params(),
        iterations: trace.len(),
        neg_elbo_kind: kind.into(),
        initial_neg_elbo: before,
        final_neg_elbo: after,
        edge_f1,
        random_tree_f1: random,
    };
    Ok(RunOutput { model, trace, metrics })
}

pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// File name to SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(Error::from)?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

/// Writes config, trace, checkpoint, metrics and a manifest hashing them.
/// Wall-clock columns are zeroed unless `timing`, so that reruns hash equal.
pub fn write_run(dir: &Path, cfg: &RunConfig, out: &RunOutput, timing: bool) -> Result<Manifest, CliError> {
    fs::create_dir_all(dir).map_err(Error::from)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let mut trace = out.trace.clone();
    if !timing {
        trace.clear_wallclock();
    }
    trace.write_csv(&dir.join(TRACE_FILE))?;
    save_checkpoint(&out.model, &dir.join(CHECKPOINT_FILE))?;
    write_json(&dir.join(METRICS_FILE), &out.metrics)?;
    let files = [CONFIG_FILE, TRACE_FILE, CHECKPOINT_FILE, METRICS_FILE]
        .iter()
        .map(|f| Ok((f.to_string(), sha256_file(&dir.join(f))?)))
        .collect::<Result<BTreeMap<_, _>, CliError>>()?;
    let manifest = Manifest { files };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(Error::from)?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

/// Names of files whose hash differs from (or is missing in) `got`.
pub fn manifest_mismatches(want: &Manifest, got: &Manifest) -> Vec<String> {
    want.files
        .iter()
        .filter(|(name, hash)| got.files.get(*name) != Some(*hash))
        .map(|(name, _)| name.clone())
        .collect()
}

pub fn default_out_root() -> PathBuf {
    std::env::var_os("NESVAE_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}
