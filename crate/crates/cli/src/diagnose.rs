use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use nesvae_core::diagnostics::{
    g_k_distance, hessian_quadform_check, theorem_bound_check, HessianCheckConfig, TheoremConstants,
};
use nesvae_core::nes::{LossTransform, TrainingTrace};
use nesvae_core::vae::{elbo_sample_at, load_checkpoint, VaeModel};
use nesvae_core::Error;

use crate::config::{Loss, RunConfig};
use crate::run::{self, CHECKPOINT_FILE, CONFIG_FILE, TRACE_FILE};
use crate::CliError;

const TAG_LEMMA: u64 = 5;
const TAG_PROXIMITY: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Check {
    /// Average squared gradient norm of an SGD trace against the convergence bound.
    Theorem,
    /// Smoothed-Hessian quadratic form between the initial and trained parameters.
    Lemma,
    /// Distance between the sampled loss and its Gaussian smoothing per sigma.
    Proximity,
    /// Retrain with several loss bounds and compare final negative ELBO.
    Bounded,
}

pub struct Options {
    pub delta: Option<f64>,
    pub bound: f64,
    pub sigmas: Vec<f64>,
    pub samples: usize,
    pub points: usize,
    pub bounds: Vec<f64>,
}

struct Run {
    cfg: RunConfig,
    trace: TrainingTrace,
    model: VaeModel,
}

fn load_run(dir: &Path) -> Result<Run, CliError> {
    let cfg = RunConfig::load(Some(&dir.join(CONFIG_FILE)), &[])?;
    let trace = TrainingTrace::read_csv(&dir.join(TRACE_FILE), cfg.trace_meta())?;
    let model = load_checkpoint(&dir.join(CHECKPOINT_FILE))?;
    Ok(Run { cfg, trace, model })
}

fn write_report<T: Serialize>(dir: &Path, check: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(dir.join(format!("diagnose-{check}.json")), text).map_err(Error::from)?;
    Ok(())
}

pub fn diagnose(dir: &Path, check: Check, opts: &Options) -> Result<(), CliError> {
    let run = load_run(dir)?;
    match check {
        Check::Theorem => theorem(dir, &run, opts),
        Check::Lemma => lemma(dir, &run, opts),
        Check::Proximity => proximity(dir, &run, opts),
        Check::Bounded => bounded(dir, &run, opts),
    }
}

fn theorem(dir: &Path, run: &Run, opts: &Options) -> Result<(), CliError> {
    let cfg = &run.cfg;
    let c = TheoremConstants {
        d: run.model.num_params(),
        m: cfg.loss_bound.unwrap_or(f64::INFINITY),
        sigma: cfg.nes_config().sigma,
        eta: cfg.eta,
        t: cfg.iterations,
    };
    let report = theorem_bound_check(&run.trace, &c, opts.delta)?;
    write_report(dir, "theorem", &report)?;
    let r = &report.report;
    println!(
        "theorem status={:?} mean_grad_sq_norm={:e} se={:e} bound={:e} eta_star={:e} optimal_bound={:e}",
        r.status, r.quantity, r.std_error, r.bound, report.eta_star, report.optimal_bound
    );
    Ok(())
}

fn lemma(dir: &Path, run: &Run, opts: &Options) -> Result<(), CliError> {
    let cfg = &run.cfg;
    let m = cfg.loss_bound.unwrap_or(opts.bound);
    let data = run::build_data(cfg)?;
    let init = run::initial_model(cfg, &data)?;
    let points = &data.test[..opts.points.min(data.test.len())];
    let loss = LossTransform::Bounded { bound: Some(m) };
    let rng = run::root_rng(cfg).child(TAG_LEMMA);
    let model = &run.model;
    // Fixed Gumbel draws per point make the objective a function of the parameters alone.
    let objective = |p: &[f64]| {
        let mut acc = 0.0;
        for (j, x) in points.iter().enumerate() {
            match elbo_sample_at(model, p, x, &rng.child2(1, j as u64), 1) {
                Ok(e) => acc += loss.apply(e.total, model.output_dim()).max(0.0),
                Err(_) => return f64::NAN,
            }
        }
        acc / points.len() as f64
    };
    let report = hessian_quadform_check(
        objective,
        m,
        init.params.values(),
        model.params.values(),
        cfg.nes_config().sigma,
        &HessianCheckConfig::default(),
        &rng.child(2),
    )?;
    write_report(dir, "lemma", &report)?;
    println!(
        "lemma status={:?} quadform={:e} se={:e} bound={:e} samples={}",
        report.status, report.quantity, report.std_error, report.bound, report.samples
    );
    Ok(())
}

fn proximity(dir: &Path, run: &Run, opts: &Options) -> Result<(), CliError> {
    let cfg = &run.cfg;
    let data = run::build_data(cfg)?;
    let points = &data.test[..opts.points.min(data.test.len())];
    let rng = run::root_rng(cfg).child(TAG_PROXIMITY);
    let distances = opts
        .sigmas
        .iter()
        .map(|&s| g_k_distance(&run.model, points, s, opts.samples, cfg.loss_transform(), &rng))
        .collect::<Result<Vec<_>, _>>()?;
    let nondecreasing = distances.windows(2).all(|w| w[0] <= w[1]);
    write_report(
        dir,
        "proximity",
        &json!({ "sigma": opts.sigmas, "distance": distances, "samples": opts.samples, "points": points.len(), "nondecreasing": nondecreasing }),
    )?;
    let pairs: Vec<String> = opts.sigmas.iter().zip(&distances).map(|(s, d)| format!("{s}:{d:.6}")).collect();
    println!("proximity nondecreasing={nondecreasing} {}", pairs.join(" "));
    Ok(())
}

fn bounded(dir: &Path, run: &Run, opts: &Options) -> Result<(), CliError> {
    let base = &run.cfg;
    let data = run::build_data(base)?;
    let init = run::initial_model(base, &data)?;
    let eval = &data.test[..base.eval_samples.min(data.test.len())];
    let dim = init.output_dim() as f64;
    let mut bounds: Vec<Option<f64>> = opts.bounds.iter().map(|&b| Some(b)).collect();
    bounds.push(None);
    let mut csv = String::from("bound,final_neg_elbo,final_neg_elbo_per_dim\n");
    let mut rows = Vec::new();
    for b in bounds {
        let cfg = RunConfig { loss: Loss::Bounded, loss_bound: b, ..base.clone() };
        cfg.validate()?;
        let (model, _) = run::train(&cfg, &init, &data.train)?;
        let (v, _) = run::mean_neg_elbo(&cfg, &model, eval)?;
        let label = b.map_or("none".to_string(), |b| b.to_string());
        csv.push_str(&format!("{label},{v:?},{:?}\n", v / dim));
        rows.push(json!({ "bound": b, "final_neg_elbo": v, "final_neg_elbo_per_dim": v / dim }));
        println!("bounded bound={label} final_neg_elbo={v:.6} per_dim={:.6}", v / dim);
    }
    fs::write(dir.join("diagnose-bounded.csv"), csv).map_err(Error::from)?;
    write_report(dir, "bounded", &rows)
}
