//! Acceptance suite: one PASS/FAIL line per criterion, run sequentially so the
//! timing budgets are measured without other tests competing for cores.
//!
//! `cargo test -p nesvae-core --test acceptance -- --nocapture` shows the lines.

use std::time::{Duration, Instant};

use nesvae_core::baselines::{
    baseline_train_loop, reinforce_batch_gradient, unbiased_gradient_at, BaselineConfig, BaselineMethod, ControlVariate,
    ControlVariateKind,
};
use nesvae_core::data::{gen_cluster_dataset, gen_latent_tree_dataset, mean_edge_f1, random_tree_f1, TrajectoryDataset};
use nesvae_core::diagnostics::{
    eta_star, g_k_distance, hessian_quadform_check, theorem_bound_check, BoundStatus, HessianCheckConfig, TheoremConstants,
};
use nesvae_core::gumbel::categorical_gumbel_argmax;
use nesvae_core::math::{gaussian_sample, softmax};
use nesvae_core::nes::{nes_gradient_estimate, train_loop, train_loop_observed, LossTransform, NesConfig, OptimizerKind};
use nesvae_core::structures::{enumerate_structures, LatentSpace};
use nesvae_core::vae::{elbo_sample_at, exact_elbo, exact_elbo_at, Architecture, ModelShape, VaeModel};
use nesvae_core::{EdgeScores, RngStream};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Suite {
    failures: Vec<usize>,
}

impl Suite {
    fn run(&mut self, id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let (ok, mut detail) = match out {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let in_time = took <= budget;
        if !in_time {
            detail.push_str(&format!("; over budget {:.0?}", budget));
        }
        let pass = ok && in_time;
        if !pass {
            self.failures.push(id);
        }
        println!(
            "{} criterion {id} ({name}): {detail} [{:.1?}]",
            if pass { "PASS" } else { "FAIL" },
            took
        );
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mean_exact(m: &VaeModel, xs: &[Vec<f64>]) -> f64 {
    mean(&xs.iter().map(|x| exact_elbo(m, x).unwrap().total).collect::<Vec<_>>())
}

// ---- 1 -------------------------------------------------------------------

fn map_exactness() -> Outcome {
    let mut checked = 0;
    for i in 0..200u64 {
        let rng = RngStream::with_stream(101, i);
        let spaces = [
            LatentSpace::spanning_trees(2 + (i as usize % 5)),
            LatentSpace::arborescences(2 + (i as usize % 4), (i as usize / 4) % (2 + (i as usize % 4))),
            LatentSpace::projective(1 + (i as usize % 7), i % 2 == 0),
        ];
        for (j, space) in spaces.iter().enumerate() {
            let s = EdgeScores(gaussian_sample(&rng.child(j as u64), space.dim()).unwrap());
            let z = space.map(&s).map_err(|e| e.to_string())?;
            if !space.validate(&z) {
                return Err(format!("instance {i}: {} solver returned an invalid structure", space.family.name()));
            }
            let best = enumerate_structures(space.family, &space.graph)
                .unwrap()
                .iter()
                .map(|c| c.score(&s.0))
                .fold(f64::NEG_INFINITY, f64::max);
            if z.score(&s.0) != best {
                return Err(format!("instance {i}: {} solver score {} != brute force {best}", space.family.name(), z.score(&s.0)));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} instances (200 per family) match brute force exactly"))
}

// ---- 2 -------------------------------------------------------------------

fn gumbel_max_identity() -> Outcome {
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for v in 0..20u64 {
        let k = 2 + (v as usize % 9);
        let scores = EdgeScores(gaussian_sample(&RngStream::with_stream(201, v), k).unwrap());
        let p = softmax(&scores.0);
        let mut counts = vec![0usize; k];
        for d in 0..draws {
            counts[categorical_gumbel_argmax(&scores, &RngStream::with_stream(202 + v, d))] += 1;
        }
        for (c, &pi) in counts.iter().zip(&p) {
            let se = (pi * (1.0 - pi) / draws as f64).sqrt();
            let z = (*c as f64 / draws as f64 - pi).abs() / se;
            worst = worst.max(z);
        }
    }
    check(worst < 4.0, format!("20 score vectors, worst deviation {worst:.2} binomial SE (limit 4)"))
}

// ---- 3 -------------------------------------------------------------------

fn nes_calibration() -> Outcome {
    let quad = |p: &[f64], _: usize| p.iter().map(|v| v * v).sum::<f64>();
    let cfg = NesConfig {
        sigma: 0.1,
        population: 100_000,
        mirrored: true,
        standardize: false,
        ..NesConfig::default()
    };
    let g = nes_gradient_estimate(quad, &[1.0, 0.0], &cfg, &RngStream::new(301)).unwrap();
    let err = ((g.gradient[0] - 2.0).powi(2) + g.gradient[1].powi(2)).sqrt() / 2.0;

    let gens = 200;
    let small = |mirrored: bool| {
        let c = NesConfig { population: 100, mirrored, ..cfg.clone() };
        let ests: Vec<Vec<f64>> = (0..gens)
            .map(|t| nes_gradient_estimate(quad, &[1.0, 0.0], &c, &RngStream::with_stream(302, t)).unwrap().gradient)
            .collect();
        (0..2)
            .map(|i| {
                let col: Vec<f64> = ests.iter().map(|e| e[i]).collect();
                let m = mean(&col);
                col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (gens - 1) as f64
            })
            .collect::<Vec<_>>()
    };
    let (vm, vu) = (small(true), small(false));
    let lower = vm.iter().zip(&vu).all(|(a, b)| a < b);
    check(
        err < 0.02 && lower,
        format!(
            "estimate ({:.4}, {:.4}) rel. error {:.3}% (limit 2%); variance mirrored {:.3e}/{:.3e} vs plain {:.3e}/{:.3e}",
            g.gradient[0],
            g.gradient[1],
            100.0 * err,
            vm[0],
            vm[1],
            vu[0],
            vu[1]
        ),
    )
}

// ---- 4 -------------------------------------------------------------------

fn toy_k3() -> (VaeModel, Vec<f64>) {
    let shape = ModelShape {
        encoder_hidden: vec![4],
        decoder_hidden: vec![4],
        output_gain: 1.0,
        ..ModelShape::default()
    };
    let m = VaeModel::new(Architecture::Dense { input_dim: 2 }, LatentSpace::categorical(3), &shape, &RngStream::new(401)).unwrap();
    (m, vec![0.7, -0.4])
}

fn gradient_chain() -> Outcome {
    let (m, x) = toy_k3();
    let p = m.params.values().to_vec();
    let (_, exact) = unbiased_gradient_at(&m, &p, &x).unwrap();

    let mut worst_fd: f64 = 0.0;
    let eps = 1e-6;
    let mut q = p.clone();
    for i in 0..p.len() {
        q[i] = p[i] + eps;
        let up = exact_elbo_at(&m, &q, &x).unwrap().total;
        q[i] = p[i] - eps;
        let down = exact_elbo_at(&m, &q, &x).unwrap().total;
        q[i] = p[i];
        let fd = (up - down) / (2.0 * eps);
        let scale = fd.abs().max(exact[i].abs()).max(1e-3);
        worst_fd = worst_fd.max((fd - exact[i]).abs() / scale);
    }

    let total = 100_000;
    let kinds = [
        ControlVariateKind::None,
        ControlVariateKind::Ema { decay: 0.9 },
        ControlVariateKind::BatchMean,
        ControlVariateKind::MultiSample { r: 2 },
    ];
    let mut worst_z: f64 = 0.0;
    for (ci, kind) in kinds.iter().enumerate() {
        let mut cv = ControlVariate::new(*kind).unwrap();
        // Each call consumes `per_call` draws; BatchMean needs a batch to leave one out of.
        let (batch, per_call) = match kind {
            ControlVariateKind::BatchMean => (10, 10),
            ControlVariateKind::MultiSample { r } => (1, *r),
            _ => (1, 1),
        };
        let inputs: Vec<&[f64]> = vec![x.as_slice(); batch];
        let calls = total / per_call;
        let mut sum = vec![0.0; p.len()];
        let mut sum_sq = vec![0.0; p.len()];
        for c in 0..calls {
            let (g, _) = reinforce_batch_gradient(&m, &p, &inputs, &mut cv, &RngStream::with_stream(402 + ci as u64, c as u64)).unwrap();
            for i in 0..p.len() {
                sum[i] += g[i];
                sum_sq[i] += g[i] * g[i];
            }
        }
        let n = calls as f64;
        for i in 0..p.len() {
            let mean = sum[i] / n;
            let var = (sum_sq[i] / n - mean * mean).max(0.0) * n / (n - 1.0);
            let se = (var / n).sqrt();
            let diff = (mean - exact[i]).abs();
            if diff > 0.0 {
                worst_z = worst_z.max(if se > 0.0 { diff / se } else { f64::INFINITY });
            }
        }
    }
    check(
        worst_fd < 1e-5 && worst_z < 4.0,
        format!(
            "finite differences rel. error {worst_fd:.2e} (limit 1e-5); REINFORCE (4 control variates, 1e5 samples) worst deviation {worst_z:.2} SE (limit 4)"
        ),
    )
}

// ---- 5 -------------------------------------------------------------------

fn categorical_toy(seed: u64) -> (VaeModel, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (xs, _) = gen_cluster_dataset(10, 8, 600, 2.0, 0.5, &RngStream::new(seed)).unwrap();
    let m = VaeModel::new(Architecture::Dense { input_dim: 8 }, LatentSpace::categorical(10), &ModelShape::default(), &RngStream::new(seed + 1)).unwrap();
    let test = xs[500..].to_vec();
    (m, xs[..500].to_vec(), test)
}

fn nes_vs_unbiased() -> Outcome {
    let (m, train, test) = categorical_toy(501);
    let (epochs, batch) = (150, 25);
    let iterations = epochs * train.len() / batch;
    let nes = NesConfig {
        sigma: 0.1,
        population: 300,
        eta: 0.01,
        optimizer: OptimizerKind::adam(),
        iterations,
        batch_size: batch,
        ..NesConfig::default()
    };
    let (mn, _) = train_loop(&m, &train, &nes, &RngStream::new(502)).unwrap();
    let cfg = BaselineConfig {
        eta: 0.01,
        optimizer: OptimizerKind::adam(),
        iterations,
        batch_size: batch,
    };
    let (mu, _) = baseline_train_loop(&m, &train, BaselineMethod::Unbiased, &cfg, &RngStream::new(502)).unwrap();
    let (init, ln, lu) = (mean_exact(&m, &test), mean_exact(&mn, &test), mean_exact(&mu, &test));
    let rel = (ln - lu) / lu.abs();
    check(
        rel <= 0.10,
        format!("exact negative ELBO after {epochs} epochs: NES {ln:.3}, unbiased {lu:.3} (init {init:.3}); NES is {:.1}% above (limit 10%)", 100.0 * rel),
    )
}

// ---- 6 -------------------------------------------------------------------

// The drop from initialisation depends on how far the random initial decoder
// sits from the data, so the criterion is taken over several training seeds
// (model init and NES noise) on fixed train and test sets.
fn structure_recovery() -> Outcome {
    let train = gen_latent_tree_dataset(6, 10, 1000, 0.05, 4, &RngStream::new(601)).unwrap();
    let test = gen_latent_tree_dataset(6, 10, 200, 0.05, 4, &RngStream::new(602)).unwrap();
    let random = random_tree_f1(&test, 20, &RngStream::new(605)).unwrap();
    let elbo_set = TrajectoryDataset { samples: test.samples[..50].to_vec(), ..test.clone() }.inputs();
    let cfg = NesConfig {
        sigma: 0.01,
        population: 600,
        eta: 0.01,
        optimizer: OptimizerKind::adam(),
        iterations: 200,
        batch_size: 16,
        ..NesConfig::default()
    };
    let (mut f1s, mut befores, mut afters, mut rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for run in 0..3u64 {
        let m0 = VaeModel::new(train.architecture(), train.space(), &ModelShape::default(), &RngStream::new(603 + 10 * run)).unwrap();
        let (m, _) = train_loop(&m0, &train.inputs(), &cfg, &RngStream::new(604 + 10 * run)).unwrap();
        let f1 = mean_edge_f1(&m, &test).unwrap();
        let (before, after) = (mean_exact(&m0, &elbo_set), mean_exact(&m, &elbo_set));
        rows.push(format!("F1 {f1:.3}, {before:.1} -> {after:.1}"));
        f1s.push(f1);
        befores.push(before);
        afters.push(after);
    }
    let (f1, before, after) = (mean(&f1s), mean(&befores), mean(&afters));
    let drop = (before - after) / before;
    check(
        f1 >= 0.75 && f1 >= 2.0 * random && drop >= 0.20,
        format!(
            "mean over 3 seeds: edge F1 {f1:.3} (limit 0.75), random trees {random:.3} (ratio {:.2}, limit 2); exact negative ELBO {before:.2} -> {after:.2} ({:.1}% drop, limit 20%); per seed [{}]",
            f1 / random,
            100.0 * drop,
            rows.join("; ")
        ),
    )
}

// ---- 7 -------------------------------------------------------------------

fn bounded_toy(seed: u64) -> (VaeModel, Vec<Vec<f64>>) {
    let shape = ModelShape {
        encoder_hidden: vec![8],
        decoder_hidden: vec![8],
        ..ModelShape::default()
    };
    let (xs, _) = gen_cluster_dataset(4, 4, 64, 1.0, 0.3, &RngStream::new(seed)).unwrap();
    let m = VaeModel::new(Architecture::Dense { input_dim: 4 }, LatentSpace::categorical(4), &shape, &RngStream::new(seed + 1)).unwrap();
    (m, xs)
}

/// Mean bounded loss on `batch` under fixed Gumbel streams, clamped to `[0, M]`.
fn bounded_objective<'a>(m: &'a VaeModel, batch: &'a [Vec<f64>], bound: f64, seed: u64) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    let loss = LossTransform::Bounded { bound: Some(bound) };
    move |p: &[f64]| {
        let mut acc = 0.0;
        for (j, x) in batch.iter().enumerate() {
            let e = elbo_sample_at(m, p, x, &RngStream::with_stream(seed, j as u64), 1).unwrap();
            acc += loss.apply(e.total, m.output_dim()).max(0.0);
        }
        acc / batch.len() as f64
    }
}

fn lemma_bound() -> Outcome {
    let step = |p: &[f64]| if p[0] > 0.0 { 1.0 } else { 0.0 };
    let cfg = HessianCheckConfig::default();
    let r = hessian_quadform_check(step, 1.0, &[0.1], &[0.2], 0.5, &cfg, &RngStream::new(701)).unwrap();
    let mut lines = vec![format!("step function {:.3} +- {:.3} <= {}", r.quantity, r.std_error, r.bound)];
    let mut ok = r.status == BoundStatus::Satisfied;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..20u64 {
        let (m, xs) = bounded_toy(710 + 2 * i);
        let batch = xs[..8].to_vec();
        let obj = bounded_objective(&m, &batch, 3.0, 750 + i);
        let mu1 = m.params.values().to_vec();
        let shift = gaussian_sample(&RngStream::with_stream(760, i), mu1.len()).unwrap();
        let mu2: Vec<f64> = mu1.iter().zip(&shift).map(|(a, b)| a + 0.1 * b).collect();
        let r = hessian_quadform_check(&obj, 3.0, &mu1, &mu2, 0.1, &HessianCheckConfig { initial_samples: 512, ..cfg }, &RngStream::with_stream(770, i)).unwrap();
        ok &= r.status == BoundStatus::Satisfied;
        worst_ratio = worst_ratio.max((r.quantity + 3.0 * r.std_error) / r.bound);
    }
    lines.push(format!("20 toy VAEs satisfied, largest (Q + 3 SE) / bound = {worst_ratio:.2e}"));
    check(ok, lines.join("; "))
}

// ---- 8 -------------------------------------------------------------------

fn theorem_trend() -> Outcome {
    // M above the toy loss scale, so perturbations are not all clipped to the same value.
    let bound = 9.0;
    let (t, sigma, population) = (100, 0.1, 300);
    let mut satisfied = 0;
    let mut worst: f64 = 0.0;
    let mut worst_se = 0.0;
    for seed in 0..20u64 {
        let (m, xs) = bounded_toy(800 + 2 * seed);
        let d = m.num_params();
        let eta = eta_star(t, d, bound, sigma);
        let cfg = NesConfig {
            sigma,
            population,
            eta,
            mirrored: true,
            standardize: false,
            optimizer: OptimizerKind::Sgd,
            iterations: t,
            batch_size: 16,
            loss: LossTransform::Bounded { bound: Some(bound) },
            ..NesConfig::default()
        };
        let (_, trace) = train_loop(&m, &xs, &cfg, &RngStream::new(850 + seed)).unwrap();
        let c = TheoremConstants { d, m: bound, sigma, eta, t };
        let r = theorem_bound_check(&trace, &c, Some(0.1)).map_err(|e| e.to_string())?;
        if r.report.satisfied() {
            satisfied += 1;
        }
        let ratio = r.report.quantity / r.report.bound;
        if ratio > worst {
            worst = ratio;
            worst_se = r.report.std_error / r.report.bound;
        }
    }
    // Spot values go through black_box so the reference is evaluated at run time,
    // like eta_star itself, rather than constant-folded.
    use std::hint::black_box;
    let spots = [(100usize, 263usize, 1.0f64, 0.1f64), (1000, 626, 9.0, 0.01), (100, 1, 1.0, 1.0), (7, 40, 3.0, 0.5)];
    let bit_exact = spots.iter().all(|&(t, d, m, s)| {
        let (t, d, m, s) = black_box((t, d, m, s));
        eta_star(t, d, m, s).to_bits() == (2.0 * s.powi(4) / (t as f64 * d as f64 * m * m)).sqrt().to_bits()
    }) && eta_star(100, 1, 1.0, 1.0) == 0.02f64.sqrt();
    check(
        satisfied == 20 && bit_exact,
        format!(
            "{satisfied}/20 runs satisfy the bound at eta*; largest mean grad norm / bound {worst:.3e} (MC error {worst_se:.1e} of the bound); eta* formula bit-exact: {bit_exact}"
        ),
    )
}

// ---- 9 -------------------------------------------------------------------

fn proximity_trend() -> Outcome {
    let (m, train, test) = categorical_toy(901);
    let sigmas = [0.01, 0.05, 0.1];
    let points = test[..20].to_vec();
    let epochs = 5;
    let per_epoch = train.len() / 25;
    let cfg = NesConfig {
        sigma: 0.1,
        population: 300,
        eta: 0.01,
        optimizer: OptimizerKind::adam(),
        iterations: epochs * per_epoch + 1,
        batch_size: 25,
        ..NesConfig::default()
    };
    let mut rows = Vec::new();
    let mut ok = true;
    train_loop_observed(&m, &train, &cfg, &RngStream::new(902), |t, model, _| {
        if t % per_epoch == 0 {
            let d: Vec<f64> = sigmas
                .iter()
                .map(|&s| g_k_distance(model, &points, s, 1000, LossTransform::Raw, &RngStream::new(903)))
                .collect::<nesvae_core::Result<_>>()?;
            ok &= d.windows(2).all(|w| w[0] <= w[1]);
            rows.push(format!("epoch {}: {:.4}/{:.4}/{:.4}", t / per_epoch, d[0], d[1], d[2]));
        }
        Ok(())
    })
    .unwrap();
    check(ok, format!("|g - k| at sigma 0.01/0.05/0.1, {}", rows.join(", ")))
}

// ---- 10 ------------------------------------------------------------------

fn bounded_loss_study() -> Outcome {
    let (m, train, test) = categorical_toy(1001);
    let dim = m.output_dim() as f64;
    let run = |loss: LossTransform| {
        let cfg = NesConfig {
            sigma: 0.1,
            population: 300,
            eta: 0.01,
            optimizer: OptimizerKind::adam(),
            iterations: 200,
            batch_size: 25,
            loss,
            ..NesConfig::default()
        };
        let (trained, _) = train_loop(&m, &train, &cfg, &RngStream::new(1002)).unwrap();
        mean_exact(&trained, &test) / dim
    };
    let m1 = run(LossTransform::Bounded { bound: Some(1.0) });
    let m9 = run(LossTransform::Bounded { bound: Some(9.0) });
    let unbounded = run(LossTransform::Bounded { bound: None });
    let rel = (m9 - unbounded).abs() / unbounded.abs();
    check(
        m1 > m9 && rel <= 0.10,
        format!(
            "final exact negative ELBO per output dim: M=1 {m1:.4}, M=9 {m9:.4}, unbounded {unbounded:.4} (M=9 differs by {:.2}%, limit 10%)",
            100.0 * rel
        ),
    )
}

// ---- 11 ------------------------------------------------------------------

fn determinism() -> Outcome {
    let (m, train, _) = categorical_toy(1101);
    let cfg = NesConfig {
        sigma: 0.1,
        population: 64,
        eta: 0.01,
        optimizer: OptimizerKind::adam(),
        iterations: 10,
        batch_size: 16,
        ..NesConfig::default()
    };
    let base = BaselineConfig { eta: 0.01, optimizer: OptimizerKind::adam(), iterations: 10, batch_size: 16 };
    let max = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(2);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let nes = train_loop(&m, &train, &cfg, &RngStream::new(1102)).unwrap();
            let ema = baseline_train_loop(&m, &train, BaselineMethod::ReinforceEma { decay: 0.9 }, &base, &RngStream::new(1102)).unwrap();
            (nes, ema)
        })
    };
    let ((m1, t1), (b1, e1)) = run(1);
    let ((mm, tm), (bm, em)) = run(max);
    let same = t1.deterministic_eq(&tm) && m1 == mm && e1.deterministic_eq(&em) && b1 == bm;
    check(same, format!("NES and REINFORCE traces at 1 and {max} threads bit-identical: {same}"))
}

#[test]
fn acceptance() {
    let mut suite = Suite { failures: Vec::new() };
    let s = Duration::from_secs;
    suite.run(1, "MAP solver exactness", s(30), map_exactness);
    suite.run(2, "Gumbel-max identity", s(10), gumbel_max_identity);
    suite.run(3, "NES estimator calibration", s(5), nes_calibration);
    suite.run(4, "gradient oracle chain", s(60), gradient_chain);
    suite.run(5, "NES vs unbiased", s(600), nes_vs_unbiased);
    suite.run(6, "structure recovery", s(1800), structure_recovery);
    suite.run(7, "Lemma 1 bound", s(300), lemma_bound);
    suite.run(8, "Theorem 1 trend", s(900), theorem_trend);
    suite.run(9, "g-k proximity trend", s(600), proximity_trend);
    suite.run(10, "bounded-loss trend", s(900), bounded_loss_study);
    suite.run(11, "determinism", s(600), determinism);
    assert!(suite.failures.is_empty(), "failed criteria: {:?}", suite.failures);
}
