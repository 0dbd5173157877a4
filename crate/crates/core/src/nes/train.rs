use std::time::Instant;

use rand::seq::SliceRandom;

use super::config::{LossTransform, NesConfig};
use super::estimator::{estimate, Generation};
use super::optim::{nes_update, OptimizerState};
use super::trace::{TraceMeta, TraceRecord, TrainingTrace};
use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::vae::{elbo_sample_at, VaeModel};

const TAG_NOISE: u64 = 1;
const TAG_BATCH: u64 = 2;
const TAG_GUMBEL: u64 = 3;

/// Indices of mini-batch `t`. Each epoch is a fresh permutation of the data.
pub fn minibatch(len: usize, batch_size: usize, t: usize, rng: &RngStream) -> Vec<usize> {
    let b = batch_size.min(len).max(1);
    let per_epoch = len.div_ceil(b);
    let epoch = t / per_epoch;
    let j = t % per_epoch;
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut rng.child2(TAG_BATCH, epoch as u64).rng());
    perm[j * b..((j + 1) * b).min(len)].to_vec()
}

pub fn check_data(model: &VaeModel, data: &[Vec<f64>]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training needs a non-empty dataset"));
    }
    let d = model.arch.input_dim();
    for x in data {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                context: "training sample",
                expected: d,
                got: x.len(),
            });
        }
    }
    Ok(())
}

/// Gumbel stream for sample `k` of the batch at iteration `t`, seen by perturbation `i`.
fn gumbel_stream(rng: &RngStream, t: usize, k: usize, perturbation: Option<usize>) -> RngStream {
    let base = rng.child(TAG_GUMBEL).child2(t as u64, k as u64);
    match perturbation {
        None => base,
        Some(i) => base.child2(u64::MAX, i as u64),
    }
}

/// Mini-batch mean of the (transformed) sampled negative ELBO at `params`.
pub fn batch_loss(
    model: &VaeModel,
    params: &[f64],
    batch: &[&[f64]],
    streams: &[RngStream],
    samples: usize,
    loss: &LossTransform,
) -> Result<f64> {
    let dim = model.output_dim();
    let mut acc = 0.0;
    for (x, s) in batch.iter().zip(streams) {
        acc += loss.apply(elbo_sample_at(model, params, x, s, samples)?.total, dim);
    }
    Ok(acc / batch.len() as f64)
}

pub fn train_loop(model: &VaeModel, data: &[Vec<f64>], cfg: &NesConfig, rng: &RngStream) -> Result<(VaeModel, TrainingTrace)> {
    train_loop_observed(model, data, cfg, rng, |_, _, _| Ok(()))
}

/// As [`train_loop`]; `observer(t, model, generation)` sees the parameters
/// each generation was drawn around, before the step is applied.
pub fn train_loop_observed<O>(
    model: &VaeModel,
    data: &[Vec<f64>],
    cfg: &NesConfig,
    rng: &RngStream,
    mut observer: O,
) -> Result<(VaeModel, TrainingTrace)>
where
    O: FnMut(usize, &VaeModel, &Generation) -> Result<()>,
{
    cfg.validate()?;
    check_data(model, data)?;
    let mut current = model.clone();
    let mut state = OptimizerState::new(model.num_params());
    let mut trace = TrainingTrace::new(TraceMeta {
        method: "nes".into(),
        optimizer: cfg.optimizer,
        standardize: cfg.standardize,
        loss: cfg.loss,
    });

    for t in 0..cfg.iterations {
        let start = Instant::now();
        let idx = minibatch(data.len(), cfg.batch_size, t, rng);
        let batch: Vec<&[f64]> = idx.iter().map(|&k| data[k].as_slice()).collect();
        let shared: Vec<RngStream> = (0..batch.len()).map(|k| gumbel_stream(rng, t, k, None)).collect();

        let objective = |p: &[f64], i: usize| -> Result<f64> {
            if cfg.shared_gumbel {
                batch_loss(&current, p, &batch, &shared, cfg.gumbel_samples, &cfg.loss)
            } else {
                let own: Vec<RngStream> = (0..batch.len()).map(|k| gumbel_stream(rng, t, k, Some(i))).collect();
                batch_loss(&current, p, &batch, &own, cfg.gumbel_samples, &cfg.loss)
            }
        };
        let gen = estimate(objective, current.params.values(), cfg, &rng.child2(TAG_NOISE, t as u64)).map_err(|e| match e {
            Error::PoisonedFitness { index, .. } => Error::PoisonedFitness { iteration: t, index },
            other => other,
        })?;
        observer(t, &current, &gen)?;
        current.params = nes_update(&current.params, &gen, cfg, &mut state)?;

        trace.push(TraceRecord {
            iter: t,
            mean_fitness: gen.mean_fitness(),
            grad_sq_norm: gen.grad_sq_norm(),
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
            eta: cfg.eta,
        })?;
    }
    Ok((current, trace))
}
