use multicast_precoding::caa::random_precoder;
use multicast_precoding::linalg::{c, inverse_hpd, logdet_hpd, re_trace_prod, CMat};
use multicast_precoding::model::{
    complex_gaussian, generate_base_codebook, generate_rayleigh, lmmse_filter, mse_matrix, rate, rate_set, ChannelSet, CodebookKind, GroundSet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ground(seed: u64, tx: usize, codewords: usize) -> GroundSet {
    let cw = generate_base_codebook(CodebookKind::RandomIsotropic { seed }, tx, codewords).unwrap();
    GroundSet::with_power_levels(&cw, &[0.5, 1.0, 3.0]).unwrap()
}

/// Nested random subsets `U ⊆ U'` and an element `e`.
fn triple(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>, usize) {
    let mut small = Vec::new();
    let mut big = Vec::new();
    for i in 0..n {
        let r: f64 = rng.random();
        if r < 0.25 {
            small.push(i);
            big.push(i);
        } else if r < 0.55 {
            big.push(i);
        }
    }
    (small, big, rng.random_range(0..n))
}

fn with(ids: &[usize], e: usize) -> Vec<usize> {
    let mut v = ids.to_vec();
    if !v.contains(&e) {
        v.push(e);
    }
    v
}

fn random_pd(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let a = complex_gaussian(d, d, rng);
    &a * a.adjoint() + multicast_precoding::linalg::identity(d) * c(0.1, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn set_rate_is_submodular(seed in 0u64..1_000_000, tx in 1usize..=4, rx in 1usize..=2) {
        let g = ground(seed, tx, 4);
        let ch = generate_rayleigh(seed, 1, tx, &[rx], 1).unwrap();
        let h = ch.channel(0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let (u, up, e) = triple(&mut rng, g.len());
            let gain_small = rate_set(h, &g, &with(&u, e)).unwrap() - rate_set(h, &g, &u).unwrap();
            let gain_big = rate_set(h, &g, &with(&up, e)).unwrap() - rate_set(h, &g, &up).unwrap();
            prop_assert!(gain_small >= gain_big - 1e-9, "{gain_small} < {gain_big}");
        }
    }

    #[test]
    fn set_rate_is_monotone(seed in 0u64..1_000_000, tx in 1usize..=4) {
        let g = ground(seed, tx, 3);
        let ch = generate_rayleigh(seed, 1, tx, &[2], 1).unwrap();
        let h = ch.channel(0, 0);
        prop_assert_eq!(rate_set(h, &g, &[]).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let (u, up, _) = triple(&mut rng, g.len());
        prop_assert!(rate_set(h, &g, &u).unwrap() <= rate_set(h, &g, &up).unwrap() + 1e-9);
    }

    #[test]
    fn set_rate_matches_concatenation(seed in 0u64..1_000_000) {
        let g = ground(seed, 3, 4);
        let ch = generate_rayleigh(seed, 1, 3, &[2], 1).unwrap();
        let h = ch.channel(0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<usize> = (0..3).map(|_| rng.random_range(0..g.len())).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let w = g.concatenate(&ids).unwrap();
        prop_assert!((rate_set(h, &g, &ids).unwrap() - rate(h, &w).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn lmmse_mse_gives_the_rate(seed in 0u64..1_000_000, tx in 1usize..=4, rx in 1usize..=2, d in 1usize..=2) {
        let ch = generate_rayleigh(seed, 1, tx, &[rx], 1).unwrap();
        let h = ch.channel(0, 0);
        let w = random_precoder(tx, d, 10.0, seed);
        let e = mse_matrix(h, &w, &lmmse_filter(h, &w).unwrap()).unwrap();
        let lhs = logdet_hpd(&inverse_hpd(&e).unwrap()).unwrap();
        prop_assert!((lhs - rate(h, &w).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn inverse_mse_maximizes_the_slack_objective(seed in 0u64..1_000_000, tx in 1usize..=4, d in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = complex_gaussian(2, tx, &mut rng);
        let w = multicast_precoding::model::Precoder::new(complex_gaussian(tx, d, &mut rng)).unwrap();
        // an arbitrary filter, not the LMMSE one
        let g = multicast_precoding::model::ReceiveFilter(complex_gaussian(2, d, &mut rng));
        let e = mse_matrix(&h, &w, &g).unwrap();
        let value = |s: &CMat| -re_trace_prod(s, &e) + logdet_hpd(s).unwrap() + d as f64;
        let s_opt = inverse_hpd(&e).unwrap();
        let best = logdet_hpd(&s_opt).unwrap();
        prop_assert!((value(&s_opt) - best).abs() <= 1e-8);
        for _ in 0..4 {
            prop_assert!(value(&random_pd(&mut rng, d)) <= best + 1e-9);
        }
    }

    #[test]
    fn rate_grows_with_power(seed in 0u64..1_000_000, a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let ch = generate_rayleigh(seed, 1, 3, &[2], 1).unwrap();
        let h = ch.channel(0, 0);
        let w = random_precoder(3, 2, 1.0, seed);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r = |s: f64| rate(h, &multicast_precoding::model::Precoder::new(w.matrix() * c(s, 0.0)).unwrap()).unwrap();
        prop_assert!(r(lo) <= r(hi) + 1e-12);
    }

    #[test]
    fn channel_json_round_trips(seed in 0u64..1_000_000, k in 1usize..4, tx in 1usize..4, slots in 1usize..3) {
        let rx: Vec<usize> = (0..k).map(|i| 1 + (i + seed as usize) % 2).collect();
        let ch = generate_rayleigh(seed, k, tx, &rx, slots).unwrap();
        let json = ch.to_json().unwrap();
        let back = ChannelSet::from_json(&json).unwrap();
        prop_assert_eq!(back.to_file(), ch.to_file());
        prop_assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn codebook_json_round_trips(seed in 0u64..1_000_000, tx in 1usize..5, n in 1usize..6) {
        let g = ground(seed, tx, n);
        let json = g.to_json().unwrap();
        prop_assert_eq!(GroundSet::from_json(&json).unwrap().to_file(), g.to_file());
    }
}

#[test]
fn rayleigh_entries_have_unit_power() {
    let n = 100_000;
    let mean: f64 = (0..n)
        .map(|s| generate_rayleigh(s, 1, 1, &[1], 1).unwrap().channel(0, 0)[(0, 0)].norm_sqr())
        .sum::<f64>()
        / n as f64;
    assert!((0.99..=1.01).contains(&mean), "{mean}");
}

#[test]
fn rayleigh_is_deterministic_and_shaped() {
    let a = generate_rayleigh(5, 2, 3, &[2, 1], 2).unwrap();
    let b = generate_rayleigh(5, 2, 3, &[2, 1], 2).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.channel(0, 1).shape(), (2, 3));
    assert_eq!(a.channel(1, 0).shape(), (1, 3));
    assert!(generate_rayleigh(5, 0, 3, &[], 1).is_err());
}
