use std::time::Instant;

use nesvae_core::data::gen_latent_tree_dataset;
use nesvae_core::diagnostics::{estimate_g, wallclock_bench, BenchSettings, BenchTask};
use nesvae_core::vae::{elbo_sample_at, ModelShape, VaeModel};
use nesvae_core::RngStream;

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn smoothing_error_shrinks_like_root_s() {
    let k = |p: &[f64]| p.iter().map(|v| v.sin()).sum::<f64>();
    let mu = [0.3, -0.7, 1.1];
    let small = estimate_g(k, &mu, 0.5, 100, &RngStream::new(1)).unwrap();
    let large = estimate_g(k, &mu, 0.5, 10_000, &RngStream::new(2)).unwrap();
    let ratio = small.std_error / large.std_error;
    assert!((ratio - 10.0).abs() < 2.0, "{ratio}");
    assert!((small.g_value - large.g_value).abs() < 4.0 * small.std_error);
}

// One NES iteration on a single-sample batch is N forward passes plus
// noise generation and the update.
#[test]
fn nes_iteration_costs_about_n_forward_passes() {
    let population = 200;
    let (iter_ms, forward_ms) = single_thread(|| {
        let data = gen_latent_tree_dataset(6, 10, 1, 0.05, 4, &RngStream::new(3).child(0)).unwrap();
        let model = VaeModel::new(data.architecture(), data.space(), &ModelShape::default(), &RngStream::new(3).child(1)).unwrap();
        let x = &data.samples[0].x;
        let p = model.params.values();
        let forward: Vec<f64> = (0..7)
            .map(|r| {
                let t = Instant::now();
                for s in 0..200u64 {
                    std::hint::black_box(elbo_sample_at(&model, p, x, &RngStream::with_stream(r, s), 1).unwrap());
                }
                t.elapsed().as_secs_f64() * 1e3 / 200.0
            })
            .collect();
        let settings = BenchSettings { population, iterations: 5, seeds: vec![3], ..BenchSettings::default() };
        let iters: Vec<f64> = (0..3)
            .map(|_| wallclock_bench(&[BenchTask::Nes], &[6], &settings).unwrap()[0].mean_iter_ms)
            .collect();
        (median(iters), median(forward))
    });
    let ratio = iter_ms / (population as f64 * forward_ms);
    println!("nes iteration {iter_ms:.3} ms, forward {forward_ms:.4} ms, ratio {ratio:.2}");
    assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn enumeration_cost_grows_and_overtakes_nes() {
    let sizes = [4, 5, 6];
    let settings = BenchSettings { population: 100, iterations: 3, seeds: vec![0], ..BenchSettings::default() };
    let rows = single_thread(|| wallclock_bench(&[BenchTask::Nes, BenchTask::ReinforceEnum], &sizes, &settings).unwrap());
    assert_eq!(rows.len(), 2 * sizes.len());
    let time = |method: &str, n: usize| rows.iter().find(|r| r.method == method && r.input_size == n).unwrap().mean_iter_ms;
    for &n in &sizes {
        println!("n={n}: nes {:.3} ms, reinforce_enum {:.3} ms", time("nes", n), time("reinforce_enum", n));
    }
    assert!(time("reinforce_enum", 4) < time("reinforce_enum", 5) && time("reinforce_enum", 5) < time("reinforce_enum", 6));
    assert!(time("reinforce_enum", 6) > time("nes", 6));
}
