//! `nesvae`: generate data, train discrete structured VAEs with NES or a
//! score-function baseline, check the theory on finished runs, and time methods.

mod config;
mod diagnose;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use nesvae_core::data::{gen_latent_tree_dataset, save_dataset};
use nesvae_core::diagnostics::{bench_csv, wallclock_bench, BenchSettings, BenchTask};
use nesvae_core::{Error, RngStream};

use config::{parse_override, RunConfig};
use diagnose::Check;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or config values.
    Config(String),
    Core(Error),
    /// A rerun did not reproduce the recorded hashes.
    Manifest(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(Error::InvalidConfig(_) | Error::OddPopulation(_)) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Manifest(_) => "manifest_mismatch",
            CliError::Core(e) => match e {
                Error::InvalidDimension(_) | Error::DimensionMismatch { .. } => "dimension",
                Error::NoSpanningTree | Error::NoArborescence { .. } => "no_structure",
                Error::EmptyInput(_) => "empty_input",
                Error::TooLarge { .. } => "too_large",
                Error::Unsupported(_) => "unsupported",
                Error::InvalidStructure(_) => "invalid_structure",
                Error::PoisonedFitness { .. } | Error::NonFinite(_) => "non_finite",
                Error::OddPopulation(_) | Error::InvalidConfig(_) => "config",
                Error::TheoryMismatch(_) => "theory_mismatch",
                Error::VersionMismatch { .. } => "version_mismatch",
                Error::CorruptFile(_) => "corrupt_file",
                Error::Parse(_) => "parse",
                Error::Io(_) => "io",
                Error::Json(_) => "json",
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::Manifest(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "nesvae", version, about = "Gradient-free training of discrete structured VAEs")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a latent-tree trajectory dataset file.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        nodes: usize,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 1200)]
        samples: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 4)]
        feat: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model and write config, trace, checkpoint, metrics and manifest.
    Train(TrainArgs),
    /// Run a theory or robustness check on a finished run directory.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum)]
        check: Check,
        /// Target gradient norm for the iteration-count bound (theorem).
        #[arg(long)]
        delta: Option<f64>,
        /// Loss bound used by the lemma check when the run had none.
        #[arg(long, default_value_t = 9.0)]
        bound: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
        sigmas: Vec<f64>,
        /// Parameter perturbations per smoothed estimate (proximity).
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Test points used by the lemma and proximity checks.
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Loss bounds compared against the unbounded loss (bounded).
        #[arg(long, value_delimiter = ',', default_value = "1,9")]
        bounds: Vec<f64>,
    },
    /// Time one training iteration per method and graph size; writes CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "nes,reinforce_enum,reinforce_sampled")]
        tasks: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "4,5,6")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 600)]
        population: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct TrainArgs {
    /// JSON run config; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set noise=0.1`.
    #[arg(long = "set", value_parser = parse_override)]
    sets: Vec<(String, Value)>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    loss_bound: Option<f64>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `$NESVAE_OUT/<task>-<method>-seed<seed>` (`runs/` when unset).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Keep wall-clock times in the trace (they make reruns hash differently).
    #[arg(long)]
    timing: bool,
    /// Fail unless the written files hash as recorded in this manifest.
    #[arg(long)]
    check_manifest: Option<PathBuf>,
}

impl TrainArgs {
    fn overrides(&self) -> Vec<(String, Value)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        put("task", self.task.clone().map(Value::from));
        put("family", self.family.clone().map(Value::from));
        put("size", self.size.map(Value::from));
        put("method", self.method.clone().map(Value::from));
        put("sigma", self.sigma.map(Value::from));
        put("population", self.population.map(Value::from));
        put("eta", self.eta.map(Value::from));
        put("iterations", self.iterations.map(Value::from));
        put("batch_size", self.batch_size.map(Value::from));
        put("optimizer", self.optimizer.clone().map(Value::from));
        put("loss_bound", self.loss_bound.map(Value::from));
        put("dataset", self.dataset.clone().map(Value::from));
        put("seed", self.seed.map(Value::from));
        // `--set` comes last so it wins over the named flags.
        out.extend(self.sets.iter().cloned());
        out
    }
}

fn cmd_gen(out: &Path, nodes: usize, steps: usize, samples: usize, noise: f64, feat: usize, seed: u64) -> Result<(), CliError> {
    let data = gen_latent_tree_dataset(nodes, steps, samples, noise, feat, &RngStream::new(seed))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(Error::from)?;
    }
    save_dataset(&data, out)?;
    println!("wrote {} samples={} sha256={}", out.display(), data.len(), run::sha256_file(out)?);
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides())?;
    let dir = args.out_dir.clone().unwrap_or_else(|| run::default_out_root().join(cfg.run_name()));
    let out = run::execute(&cfg)?;
    let manifest = run::write_run(&dir, &cfg, &out, args.timing)?;
    let m = &out.metrics;
    let f1 = match (m.edge_f1, m.random_tree_f1) {
        (Some(f), Some(r)) => format!(" edge_f1={f:.4} random_tree_f1={r:.4}"),
        _ => String::new(),
    };
    println!("run {}", dir.display());
    println!(
        "final method={} neg_elbo={:.4} ({}; initial {:.4}){f1}",
        m.method, m.final_neg_elbo, m.neg_elbo_kind, m.initial_neg_elbo
    );
    if let Some(path) = &args.check_manifest {
        let want = run::read_manifest(path)?;
        let bad = run::manifest_mismatches(&want, &manifest);
        if !bad.is_empty() {
            return Err(CliError::Manifest(format!("hashes differ from {}: {}", path.display(), bad.join(", "))));
        }
        println!("manifest reproduced ({} files)", want.files.len());
    }
    Ok(())
}

fn parse_task(name: &str) -> Result<BenchTask, CliError> {
    serde_json::from_value(Value::from(name)).map_err(|_| CliError::Config(format!("unknown bench task `{name}`")))
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    tasks: &[String],
    sizes: &[usize],
    population: usize,
    sigma: f64,
    iterations: usize,
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<(), CliError> {
    let tasks = tasks.iter().map(|t| parse_task(t)).collect::<Result<Vec<_>, _>>()?;
    let settings = BenchSettings {
        population,
        sigma,
        iterations,
        seeds: seeds.to_vec(),
        ..BenchSettings::default()
    };
    let rows = wallclock_bench(&tasks, sizes, &settings)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| run::default_out_root().join("bench.csv"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(Error::from)?;
    }
    let csv = bench_csv(&rows);
    std::fs::write(&path, &csv).map_err(Error::from)?;
    print!("{csv}");
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Gen { out, nodes, steps, samples, noise, feat, seed } => cmd_gen(&out, nodes, steps, samples, noise, feat, seed),
        Command::Train(args) => cmd_train(&args),
        Command::Diagnose { run, check, delta, bound, sigmas, samples, points, bounds } => {
            let opts = diagnose::Options { delta, bound, sigmas, samples, points, bounds };
            diagnose::diagnose(&run, check, &opts)
        }
        Command::Bench { tasks, sizes, population, sigma, iterations, seeds, out } => {
            cmd_bench(&tasks, &sizes, population, sigma, iterations, &seeds, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.message().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
