use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use nesvae_core::baselines::{BaselineConfig, BaselineMethod};
use nesvae_core::nes::{LossTransform, NesConfig, OptimizerKind, TraceMeta};
use nesvae_core::structures::LatentSpace;
use nesvae_core::vae::ModelShape;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Latent spanning tree behind diffusing node trajectories.
    Tree,
    /// Gaussian clusters through a dense encoder and decoder.
    Toy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SpanningTree,
    Arborescence,
    Projective,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nes,
    ReinforceNone,
    ReinforceEma,
    ReinforceBatch,
    ReinforceMultisample,
    Unbiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Raw,
    Bounded,
}

/// Everything that determines a run, apart from the bytes of an external
/// dataset file. Keys are flat so that `--set key=value` can reach all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub family: Family,
    /// Vertices (spanning tree, arborescence), sentence length (projective)
    /// or categories (categorical). Filled from the task when absent.
    pub size: Option<usize>,

    pub dataset: Option<String>,
    pub samples: usize,
    pub test_samples: usize,
    pub noise: f64,
    pub steps: usize,
    pub feat: usize,
    pub dim: usize,
    pub clusters: usize,
    pub spread: f64,

    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub output_gain: f64,

    pub method: Method,
    /// Filled from the family when absent.
    pub sigma: Option<f64>,
    pub population: Option<usize>,
    pub eta: f64,
    pub mirrored: bool,
    pub standardize: bool,
    pub optimizer: Optimizer,
    pub iterations: usize,
    pub batch_size: usize,
    pub gumbel_samples: usize,
    pub shared_gumbel: bool,
    pub loss: Loss,
    pub loss_bound: Option<f64>,
    pub ema_decay: f64,
    pub multisample_r: usize,

    pub seed: u64,
    /// Test points used for the exact negative ELBO.
    pub eval_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Tree,
            family: Family::SpanningTree,
            size: None,
            dataset: None,
            samples: 1000,
            test_samples: 200,
            noise: 0.05,
            steps: 10,
            feat: 4,
            dim: 8,
            clusters: 10,
            spread: 2.0,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            output_gain: 0.1,
            method: Method::Nes,
            sigma: None,
            population: None,
            eta: 0.01,
            mirrored: true,
            standardize: true,
            optimizer: Optimizer::Adam,
            iterations: 200,
            batch_size: 16,
            gumbel_samples: 1,
            shared_gumbel: true,
            loss: Loss::Raw,
            loss_bound: None,
            ema_decay: 0.9,
            multisample_r: 2,
            seed: 0,
            eval_samples: 50,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides in order, fills
    /// defaults that depend on other keys and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self, CliError> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))? {
                    Value::Object(m) => m,
                    _ => return Err(config_err(format!("{}: expected a JSON object", p.display()))),
                }
            }
            None => Map::new(),
        };
        for (key, v) in overrides {
            map.insert(key.clone(), v.clone());
        }
        let cfg: RunConfig = serde_json::from_value(Value::Object(map)).map_err(|e| config_err(e.to_string()))?;
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills `size`, `sigma` and `population` from the task and family.
    pub fn resolved(mut self) -> Self {
        let (size, sigma, population) = match (self.task, self.family) {
            (_, Family::SpanningTree) => (6, 0.01, 600),
            (_, Family::Arborescence | Family::Projective) => (6, 0.1, 400),
            (_, Family::Categorical) => (10, 0.1, 300),
        };
        self.size.get_or_insert(size);
        self.sigma.get_or_insert(sigma);
        self.population.get_or_insert(population);
        if self.loss_bound.is_some() {
            self.loss = Loss::Bounded;
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.task == Task::Tree && self.family != Family::SpanningTree {
            return Err(config_err("task `tree` needs family `spanning_tree`"));
        }
        let min = if self.family == Family::Projective { 1 } else { 2 };
        if self.size() < min {
            return Err(config_err(format!("size must be at least {min}, got {}", self.size())));
        }
        if self.samples == 0 || self.test_samples == 0 || self.eval_samples == 0 {
            return Err(config_err("samples, test_samples and eval_samples must be positive"));
        }
        if self.iterations == 0 {
            return Err(config_err("iterations must be positive"));
        }
        self.nes_config().validate().map_err(|e| config_err(e.to_string()))?;
        if self.method != Method::Nes {
            self.baseline_config().validate().map_err(|e| config_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size.unwrap_or(6)
    }

    pub fn space(&self) -> LatentSpace {
        let n = self.size();
        match self.family {
            Family::SpanningTree => LatentSpace::spanning_trees(n),
            Family::Arborescence => LatentSpace::arborescences(n, 0),
            Family::Projective => LatentSpace::projective(n, false),
            Family::Categorical => LatentSpace::categorical(n),
        }
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
            output_gain: self.output_gain,
            ..ModelShape::default()
        }
    }

    pub fn optimizer_kind(&self) -> OptimizerKind {
        match self.optimizer {
            Optimizer::Sgd => OptimizerKind::Sgd,
            Optimizer::Adam => OptimizerKind::adam(),
        }
    }

    pub fn loss_transform(&self) -> LossTransform {
        match self.loss {
            Loss::Raw => LossTransform::Raw,
            Loss::Bounded => LossTransform::Bounded { bound: self.loss_bound },
        }
    }

    pub fn nes_config(&self) -> NesConfig {
        NesConfig {
            sigma: self.sigma.unwrap_or(0.01),
            population: self.population.unwrap_or(600),
            eta: self.eta,
            mirrored: self.mirrored,
            standardize: self.standardize,
            optimizer: self.optimizer_kind(),
            iterations: self.iterations,
            batch_size: self.batch_size,
            gumbel_samples: self.gumbel_samples,
            shared_gumbel: self.shared_gumbel,
            loss: self.loss_transform(),
        }
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            eta: self.eta,
            optimizer: self.optimizer_kind(),
            iterations: self.iterations,
            batch_size: self.batch_size,
        }
    }

    pub fn baseline_method(&self) -> Option<BaselineMethod> {
        Some(match self.method {
            Method::Nes => return None,
            Method::ReinforceNone => BaselineMethod::ReinforceNone,
            Method::ReinforceEma => BaselineMethod::ReinforceEma { decay: self.ema_decay },
            Method::ReinforceBatch => BaselineMethod::ReinforceBatch,
            Method::ReinforceMultisample => BaselineMethod::ReinforceMultisample { r: self.multisample_r },
            Method::Unbiased => BaselineMethod::Unbiased,
        })
    }

    pub fn method_name(&self) -> &'static str {
        self.baseline_method().map_or("nes", |m| m.name())
    }

    /// Provenance the theory checks read back from a trace file.
    pub fn trace_meta(&self) -> TraceMeta {
        match self.method {
            Method::Nes => TraceMeta {
                method: "nes".into(),
                optimizer: self.optimizer_kind(),
                standardize: self.standardize,
                loss: self.loss_transform(),
            },
            _ => TraceMeta {
                method: self.method_name().into(),
                optimizer: self.optimizer_kind(),
                standardize: false,
                loss: LossTransform::Raw,
            },
        }
    }

    pub fn run_name(&self) -> String {
        let task = match self.task {
            Task::Tree => "tree",
            Task::Toy => "toy",
        };
        format!("{task}-{}-seed{}", self.method_name(), self.seed)
    }
}

/// Splits `key=value`; the value is JSON where it parses as such and a plain
/// string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => {
            let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            Ok((k.trim().to_string(), value))
        }
        _ => Err(format!("expected key=value, got `{s}`")),
    }
}
