use proptest::prelude::*;

use nesvae_core::gumbel::perturb_and_map;
use nesvae_core::math::logsumexp;
use nesvae_core::structures::{count_structures, enumerate_structures, log_partition_function, LatentSpace};
use nesvae_core::{EdgeScores, RngStream};

fn space(kind: u8, n: usize) -> LatentSpace {
    match kind % 5 {
        0 => LatentSpace::spanning_trees(n),
        1 => LatentSpace::arborescences(n, n / 2),
        2 => LatentSpace::projective(n, false),
        3 => LatentSpace::projective(n, true),
        _ => LatentSpace::categorical(n),
    }
}

fn brute_max(space: &LatentSpace, s: &[f64]) -> f64 {
    enumerate_structures(space.family, &space.graph)
        .unwrap()
        .iter()
        .map(|z| z.score(s))
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solver_matches_brute_force(kind in 0u8..5, n in 2usize..6, seed in any::<u64>()) {
        let sp = space(kind, n);
        let s: Vec<f64> = {
            let mut r = RngStream::new(seed).rng();
            (0..sp.dim()).map(|_| rand::Rng::gen_range(&mut r, -3.0..3.0)).collect()
        };
        let z = sp.map(&EdgeScores(s.clone())).unwrap();
        prop_assert!(sp.validate(&z));
        prop_assert_eq!(z.score(&s), brute_max(&sp, &s));
    }

    // Integer scores make ties common; equality must still hold on scores.
    #[test]
    fn solver_handles_ties(kind in 0u8..5, n in 2usize..6, vals in proptest::collection::vec(-2i8..3, 36)) {
        let sp = space(kind, n);
        let s: Vec<f64> = vals.iter().cycle().take(sp.dim()).map(|&v| v as f64).collect();
        let z = sp.map(&EdgeScores(s.clone())).unwrap();
        prop_assert!(sp.validate(&z));
        prop_assert_eq!(z.score(&s), brute_max(&sp, &s));
    }

    #[test]
    fn counts_match_enumeration(kind in 0u8..5, n in 2usize..7) {
        let sp = space(kind, n);
        let all = enumerate_structures(sp.family, &sp.graph).unwrap();
        let c = count_structures(sp.family, &sp.graph).unwrap();
        prop_assert_eq!(c.exact, Some(all.len() as u128));
        prop_assert!((c.log - (all.len() as f64).ln()).abs() < 1e-9);
        prop_assert!(all.iter().all(|z| sp.validate(z)));
    }

    #[test]
    fn log_partition_matches_enumeration(kind in 0u8..5, n in 2usize..6, seed in any::<u64>()) {
        let sp = space(kind, n);
        let s = nesvae_core::math::gaussian_sample(&RngStream::new(seed), sp.dim()).unwrap();
        let all = enumerate_structures(sp.family, &sp.graph).unwrap();
        let want = logsumexp(&all.iter().map(|z| z.score(&s)).collect::<Vec<_>>());
        let got = log_partition_function(sp.family, &sp.graph, &s).unwrap();
        prop_assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn perturbed_map_is_always_valid(kind in 0u8..5, n in 2usize..7, seed in any::<u64>()) {
        let sp = space(kind, n);
        let s = EdgeScores(vec![0.0; sp.dim()]);
        let z = perturb_and_map(&sp, &s, &RngStream::new(seed)).unwrap();
        prop_assert!(sp.validate(&z));
    }
}

#[test]
fn raising_an_edge_score_raises_its_marginal() {
    let draws = 20_000;
    for (i, sp) in [LatentSpace::spanning_trees(5), LatentSpace::arborescences(4, 0), LatentSpace::projective(4, false)]
        .into_iter()
        .enumerate()
    {
        let base = nesvae_core::math::gaussian_sample(&RngStream::new(10 + i as u64), sp.dim()).unwrap();
        let e = 1;
        let marginal = |bump: f64| {
            let mut s = base.clone();
            s[e] += bump;
            let s = EdgeScores(s);
            (0..draws)
                .filter(|&d| perturb_and_map(&sp, &s, &RngStream::with_stream(20 + i as u64, d)).unwrap().0[e])
                .count() as f64
                / draws as f64
        };
        let (lo, hi) = (marginal(0.0), marginal(1.0));
        let se = ((lo * (1.0 - lo) + hi * (1.0 - hi)) / draws as f64).sqrt();
        assert!(hi >= lo - 2.0 * se, "{}: {lo} -> {hi}", sp.family.name());
        assert!(hi > lo, "{}: raising the score by 1 should visibly raise the marginal ({lo} -> {hi})", sp.family.name());
    }
}
