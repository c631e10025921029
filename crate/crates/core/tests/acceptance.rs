//! One pass/fail line per acceptance criterion. Criteria run concurrently;
//! the process exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use multicast_precoding::bench::{run_sweep, Experiment, Sweep};
use multicast_precoding::caa::{caa_instant_rate, CaaConfig, CaaInit};
use multicast_precoding::conic::{solve_covariance_bound, solve_fractional_bound};
use multicast_precoding::delay_cont::{caa_delay, feasible_interval, repeat_delay, DelayConfig, DelayInit, DelayInstance};
use multicast_precoding::delay_disc::{brute_force_delay, build_knapsack, delay_cover, feasible_codewords, CoverConfig, FContext};
use multicast_precoding::discrete::{brute_force_maxmin, greedy_cover, min_power_cover, saturation_bisection, simple_greedy, BisectionConfig, Budget, Scan, TruncatedAverage};
use multicast_precoding::linalg::{c, identity, inverse_hpd, logdet_hpd, re_trace_prod, CMat};
use multicast_precoding::model::{
    complex_gaussian, generate_base_codebook, generate_rayleigh, lmmse_filter, mse_matrix, rate, rate_set, CodebookKind, GroundSet, Precoder, RateTable,
    ReceiveFilter,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

type Criterion = (usize, &'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "rate / MSE and slack identities", Duration::from_secs(5), c1_identities),
        (2, "submodularity of set rate and delay objective", Duration::from_secs(30), c2_submodular),
        (3, "CAA ascent and stationarity", Duration::from_secs(600), c3_caa),
        (4, "CAA against the covariance bound", Duration::from_secs(600), c4_sandwich),
        (5, "discrete heuristics against exhaustive search and bound", Duration::from_secs(300), c5_discrete),
        (6, "greedy cover power guarantee", Duration::from_secs(120), c6_cover),
        (7, "continuous delay coverage, horizon and ordering", Duration::from_secs(1200), c7_delay),
        (8, "discrete delay cover structure", Duration::from_secs(900), c8_delay_disc),
        (9, "discrete max-min ordering at 10 dB", Duration::from_secs(600), c9_ordering),
        (10, "CLI determinism", Duration::from_secs(120), c10_determinism),
    ];
    let results: Vec<(Verdict, Duration)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(_, _, _, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let v = f();
                    (v, t.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| (verdict(false, "panicked"), Duration::ZERO))).collect()
    });
    let mut failed = 0;
    for ((id, name, limit, _), (v, took)) in criteria.iter().zip(results) {
        let in_time = took <= *limit;
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let time_note = if in_time { String::new() } else { format!(", over the {}s limit", limit.as_secs()) };
        println!(
            "criterion {id:>2} {}: {name}: {} ({:.1}s{time_note})",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn c1_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_rate, mut worst_opt, mut above) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..1000 {
        let (m, n, d) = (rng.random_range(1..=4), rng.random_range(1..=2), rng.random_range(1..=2));
        let h = complex_gaussian(n, m, &mut rng);
        let w = Precoder::new(complex_gaussian(m, d, &mut rng) * c(rng.random_range(0.1..3.0), 0.0)).unwrap();
        let e = mse_matrix(&h, &w, &lmmse_filter(&h, &w).unwrap()).unwrap();
        worst_rate = worst_rate.max((logdet_hpd(&inverse_hpd(&e).unwrap()).unwrap() - rate(&h, &w).unwrap()).abs());

        let g = ReceiveFilter(complex_gaussian(n, d, &mut rng));
        let e = mse_matrix(&h, &w, &g).unwrap();
        let value = |s: &CMat| -re_trace_prod(s, &e) + logdet_hpd(s).unwrap() + d as f64;
        let s_opt = inverse_hpd(&e).unwrap();
        let best = logdet_hpd(&s_opt).unwrap();
        worst_opt = worst_opt.max((value(&s_opt) - best).abs());
        let a = complex_gaussian(d, d, &mut rng);
        let other = &a * a.adjoint() + identity(d) * c(0.05, 0.0);
        if value(&other) > best + 1e-9 {
            above += 1;
        }
    }
    verdict(
        worst_rate <= 1e-8 && worst_opt <= 1e-8 && above == 0,
        format!("max |log|E^-1| - R| = {worst_rate:.1e}, max slack gap = {worst_opt:.1e}, random S above optimum: {above}"),
    )
}

fn nested(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>, usize) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for i in 0..n {
        let r: f64 = rng.random();
        if r < 0.25 {
            a.push(i);
            b.push(i);
        } else if r < 0.55 {
            b.push(i);
        }
    }
    (a, b, rng.random_range(0..n))
}

fn plus(ids: &[usize], e: usize) -> Vec<usize> {
    let mut v = ids.to_vec();
    if !v.contains(&e) {
        v.push(e);
    }
    v
}

fn c2_submodular() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut rate_viol = 0;
    for t in 0..1000u64 {
        let m = rng.random_range(1..=4);
        let cw = generate_base_codebook(CodebookKind::RandomIsotropic { seed: t }, m, 4).unwrap();
        let g = GroundSet::with_power_levels(&cw, &[0.5, 2.0]).unwrap();
        let ch = generate_rayleigh(t, 1, m, &[rng.random_range(1..=2)], 1).unwrap();
        let h = ch.channel(0, 0);
        let (u, up, e) = nested(&mut rng, g.len());
        let small = rate_set(h, &g, &plus(&u, e)).unwrap() - rate_set(h, &g, &u).unwrap();
        let big = rate_set(h, &g, &plus(&up, e)).unwrap() - rate_set(h, &g, &up).unwrap();
        if small < big - 1e-9 {
            rate_viol += 1;
        }
    }
    let mut f_viol = 0;
    for t in 0..1000u64 {
        let slots = rng.random_range(1..=2);
        let cw = generate_base_codebook(CodebookKind::RandomIsotropic { seed: t }, 2, 3).unwrap();
        let g = GroundSet::with_power_levels(&cw, &[1.0, 2.0]).unwrap();
        let ch = generate_rayleigh(t + 5000, 3, 2, &[1, 2, 1], slots).unwrap();
        let table = RateTable::new(&ch, &g).unwrap();
        let progress: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..0.95)).collect();
        let ctx = FContext::new(&table, vec![0, 1, 2], &progress, &[0.2, 0.3, 0.5], rng.random_range(0.5..6.0)).unwrap();
        let (v, vp, e) = nested(&mut rng, ctx.concat().len());
        let small = ctx.eval(&plus(&v, e)).unwrap() - ctx.eval(&v).unwrap();
        let big = ctx.eval(&plus(&vp, e)).unwrap() - ctx.eval(&vp).unwrap();
        if small < big - 1e-9 {
            f_viol += 1;
        }
    }
    verdict(rate_viol == 0 && f_viol == 0, format!("violations: set rate {rate_viol}/1000, delay objective {f_viol}/1000"))
}

fn c3_caa() -> Verdict {
    let outcomes: Vec<(bool, f64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let (k, m) = (rng.random_range(1..=8), rng.random_range(2..=4));
            let rx: Vec<usize> = (0..k).map(|_| rng.random_range(1..=2)).collect();
            let ch = generate_rayleigh(seed, k, m, &rx, 1).unwrap();
            let cfg = CaaConfig {
                kkt_tol: Some(1e-3),
                max_outer_iters: 2000,
                ..CaaConfig::with_init(CaaInit::Random { seed })
            };
            let r = caa_instant_rate(&ch, 2, 10.0, &cfg).unwrap();
            let monotone = r.state.objective.windows(2).all(|w| w[1] >= w[0] - 1e-7);
            (monotone, r.kkt_residual)
        })
        .collect();
    let non_monotone = outcomes.iter().filter(|o| !o.0).count();
    let stationary = outcomes.iter().filter(|o| o.1 <= 1e-3).count();
    verdict(
        non_monotone == 0 && stationary >= 95,
        format!("non-monotone traces {non_monotone}/100, KKT residual <= 1e-3 on {stationary}/100"),
    )
}

fn c4_sandwich() -> Verdict {
    let (p, mut ok, mut notes) = (10.0, true, Vec::new());
    for k in [1usize, 2, 4, 8] {
        let rows: Vec<(f64, f64, f64)> = (0..50u64)
            .into_par_iter()
            .map(|t| {
                let ch = generate_rayleigh(4000 + 100 * k as u64 + t, k, 2, &vec![1; k], 1).unwrap();
                let caa = caa_instant_rate(&ch, 2, p, &CaaConfig::with_init(CaaInit::Random { seed: t })).unwrap();
                let bound = solve_covariance_bound(&ch, p, 1e-8).unwrap();
                let mf = (1.0 + p * ch.channel(0, 0).norm_squared()).ln();
                (caa.min_rate, bound.value, mf)
            })
            .collect();
        let caa_mean = rows.iter().map(|r| r.0).sum::<f64>() / 50.0;
        let bound_mean = rows.iter().map(|r| r.1).sum::<f64>() / 50.0;
        ok &= caa_mean >= 0.95 * bound_mean;
        if k == 1 {
            let worst = rows.iter().map(|r| (r.0 - r.2).abs()).fold(0.0, f64::max);
            ok &= worst <= 1e-3;
            notes.push(format!("K=1 max |CAA - ln(1+P|h|^2)| = {worst:.1e}"));
        }
        notes.push(format!("K={k} ratio {:.4}", caa_mean / bound_mean));
    }
    verdict(ok, notes.join(", "))
}

fn c5_discrete() -> Verdict {
    let rows: Vec<(bool, bool, bool)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let (k, m) = (rng.random_range(1..=3), rng.random_range(2..=4));
            let p = rng.random_range(1.0..10.0);
            let cw = generate_base_codebook(CodebookKind::RandomIsotropic { seed }, m, rng.random_range(3..=4)).unwrap();
            let g = GroundSet::with_power_levels(&cw, &[p / 4.0, p / 2.0, p]).unwrap();
            let rx: Vec<usize> = (0..k).map(|_| rng.random_range(1..=2)).collect();
            let ch = generate_rayleigh(seed, k, m, &rx, 1).unwrap();
            let budget = Budget::power(p);
            let brute = brute_force_maxmin(&g, &ch, &budget).unwrap().min_rate;
            let bound = solve_fractional_bound(&g, &ch, p, 1e-9).unwrap().upper;
            let greedy = simple_greedy(&g, &ch, &budget).unwrap();
            let bis = saturation_bisection(&g, &ch, p, &BisectionConfig { eps: 0.01, ..BisectionConfig::default() }).unwrap();
            let ordered = greedy.min_rate <= brute + 1e-6 && bis.result.min_rate <= brute + 1e-6 && brute <= bound + 1e-6;
            let within_power = bis.result.power <= p && greedy.power <= p;
            (ordered, bis.result.min_rate >= 0.5 * brute, within_power)
        })
        .collect();
    let ordered = rows.iter().filter(|r| r.0).count();
    let half = rows.iter().filter(|r| r.1).count();
    let power = rows.iter().filter(|r| r.2).count();
    verdict(
        ordered == 50 && half >= 45 && power == 50,
        format!("ordering holds {ordered}/50, bisection >= half of optimum {half}/50, within power {power}/50"),
    )
}

fn c6_cover() -> Verdict {
    let (mut checked, mut violations, mut worst) = (0, 0, 0.0f64);
    let mut seed = 0u64;
    while checked < 30 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let k = rng.random_range(1..=3);
        let cw = generate_base_codebook(CodebookKind::RandomIsotropic { seed }, 2, 4).unwrap();
        let g = GroundSet::with_power_levels(&cw, &[0.5, 1.0, 2.0]).unwrap();
        let ch = generate_rayleigh(seed, k, 2, &vec![1; k], 1).unwrap();
        let table = RateTable::new(&ch, &g).unwrap();
        let all: Vec<usize> = (0..g.len()).collect();
        let level = rng.random_range(0.3..1.0) * table.min_rate(0, &all).unwrap();
        let trunc = TruncatedAverage::new(&table, level).unwrap();
        let Some((_, p_star)) = min_power_cover(&trunc, level).unwrap() else { continue };
        if p_star <= 0.0 {
            continue;
        }
        checked += 1;
        let greedy = greedy_cover(&trunc, 0.1, None, Scan::Naive).unwrap();
        let ratio = greedy.power / p_star;
        worst = worst.max(ratio);
        if !greedy.covered || greedy.power > p_star * (1.0 + 10f64.ln()) + 1e-12 {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("violations {violations}/30, worst power ratio {worst:.3} (limit {:.3})", 1.0 + 10f64.ln()))
}

fn c7_delay() -> Verdict {
    let rows: Vec<[u8; 8]> = (0..30u64)
        .into_par_iter()
        .map(|seed| {
            let ch = generate_rayleigh(700 + seed, 4, 4, &[1; 4], 1).unwrap();
            let inst = DelayInstance::uniform(ch, 10.0, 10.0, 2).unwrap();
            let feasible = feasible_interval(&inst, &CaaConfig::with_init(CaaInit::Random { seed })).unwrap();
            let base = repeat_delay(&inst, &inst.interval_rates(&feasible).unwrap()).unwrap().objective;
            let variants = [
                DelayConfig::default(),
                DelayConfig { init: DelayInit::I2, ..DelayConfig::default() },
                DelayConfig { greedy: true, ..DelayConfig::default() },
            ];
            let mut out = [1u8, 1, 0, 0, 0, 0, 0, 0];
            for (i, cfg) in variants.iter().enumerate() {
                let r = caa_delay(&inst, cfg, &feasible).unwrap();
                let structural = r.outcome.complete() && r.t_final <= r.truncation && r.relaxed <= r.outcome.objective + 1e-9;
                let monotone = r.trace.iter().all(|h| h.objective.windows(2).all(|w| w[1] >= w[0] - 1e-7 * (1.0 + w[0].abs())));
                out[0] &= structural as u8;
                out[1] &= monotone as u8;
                out[2 + i] = (r.outcome.objective <= base + 1e-9) as u8;
                out[5 + i] = (r.outcome.objective < base - 1e-9) as u8;
            }
            out
        })
        .collect();
    let count = |i: usize| rows.iter().filter(|r| r[i] == 1).count();
    let (s, m, w1, w2, wg) = (count(0), count(1), count(2), count(3), count(4));
    let strict = [count(5), count(6), count(7)];
    verdict(
        s == 30 && m == 30 && w1 >= 27 && w2 >= 27 && wg >= 27,
        format!("coverage/horizon/relaxation {s}/30, monotone {m}/30, at most the fixed precoder's delay: i1 {w1}/30, i2 {w2}/30, greedy {wg}/30 (strictly below: {strict:?})"),
    )
}

fn c8_delay_disc() -> Verdict {
    let (p, theta) = (10.0, 5.0);
    let rows: Vec<(bool, bool, bool)> = (0..30u64)
        .into_par_iter()
        .map(|seed| {
            let ch = generate_rayleigh(800 + seed, 3, 4, &[1; 3], 1).unwrap();
            let cw = generate_base_codebook(CodebookKind::Dft, 4, 4).unwrap();
            let g = GroundSet::with_power_levels(&cw, &[p / 8.0, p / 4.0, p / 2.0, p]).unwrap();
            let inst = DelayInstance::uniform(ch, theta, p, 2).unwrap();
            let budget = Budget::power(p).with_rank(2);
            let feasible = feasible_codewords(inst.channels(), &g, &budget, 0.01).unwrap();
            let s = delay_cover(&inst, &g, &feasible, &CoverConfig::default()).unwrap();
            let knap = build_knapsack(&g, 1, 2, p).unwrap();
            let every_interval_fits = s.intervals.iter().all(|iv| knap.admits(&iv[0]));
            (s.outcome.complete(), s.knapsack_feasible && every_interval_fits, s.max_repetition <= s.repetition_cap)
        })
        .collect();
    let count = |f: fn(&(bool, bool, bool)) -> bool| rows.iter().filter(|r| f(r)).count();
    let (cov, fit, rep) = (count(|r| r.0), count(|r| r.1), count(|r| r.2));

    let mut ratios = Vec::new();
    for seed in 0..30u64 {
        let ch = generate_rayleigh(850 + seed, 3, 2, &[1; 3], 1).unwrap();
        let cw = generate_base_codebook(CodebookKind::RandomIsotropic { seed }, 2, 3).unwrap();
        let g = GroundSet::with_power_levels(&cw, &[1.0]).unwrap();
        let inst = DelayInstance::uniform(ch, 2.0, 2.0, 2).unwrap();
        let budget = Budget::power(2.0).with_rank(2);
        let feasible = feasible_codewords(inst.channels(), &g, &budget, 0.01).unwrap();
        let s = delay_cover(&inst, &g, &feasible, &CoverConfig::default()).unwrap();
        if let Some((opt, _)) = brute_force_delay(&inst, &g, 8, 6).unwrap() {
            ratios.push(s.outcome.objective / opt);
        }
    }
    let finite = ratios.iter().all(|r| r.is_finite() && *r >= 1.0 - 1e-12);
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    verdict(
        cov == 30 && fit == 30 && rep == 30 && !ratios.is_empty() && finite,
        format!(
            "covered {cov}/30, packing feasible {fit}/30, repetition cap {rep}/30; ratio to exhaustive optimum on {} tiny instances: mean {mean:.3}, worst {worst:.3}",
            ratios.len()
        ),
    )
}

fn c9_ordering() -> Verdict {
    let sweep = Sweep {
        grid: vec![10.0],
        trials: 20,
        ..Sweep::defaults(Experiment::Tc4)
    };
    let rows = run_sweep(&sweep).unwrap();
    let mean = |alg: &str| {
        let v: Vec<f64> = rows.iter().filter(|r| r.algorithm == alg).map(|r| r.value).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (bis, greedy, bound) = (mean("bisection"), mean("simple-greedy"), mean("fractional-bound"));
    let bad = rows.iter().filter(|r| r.status != "ok").count();
    verdict(
        bis >= greedy && bis <= bound && greedy <= bound && bad == 0,
        format!("means: bisection {bis:.4}, simple greedy {greedy:.4}, fractional bound {bound:.4}; flagged rows {bad}"),
    )
}

fn run_twice(dir: &Path, args: &[&str]) -> bool {
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_mcprec")).current_dir(dir).args(args).output().unwrap();
        (out.status.code(), out.stdout)
    };
    let (a, b) = (run(), run());
    a.0 == Some(0) && a == b
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cmds: Vec<Vec<&str>> = vec![
        vec!["gen-channels", "--users", "3", "--tx", "4", "--rx", "1", "--seed", "11"],
        vec!["maxrate-cont", "--channels", "ch.json", "--power", "10", "--trace"],
        vec!["maxrate-disc", "--channels", "ch.json", "--power", "10"],
        vec!["delay-cont", "--channels", "ch.json", "--theta", "5", "--power", "10", "--trace"],
        vec!["delay-disc", "--channels", "ch.json", "--theta", "5", "--power", "10", "--dump-knapsack"],
        vec!["bound", "--kind", "covariance", "--channels", "ch.json", "--power", "10"],
        vec!["bound", "--kind", "fractional", "--channels", "ch.json", "--power", "10", "--log-base", "bits"],
        vec!["sweep", "--experiment", "tc1", "--grid", "1,2", "--trials", "3"],
        vec!["sweep", "--experiment", "tc4", "--grid", "10", "--trials", "2"],
        vec!["summarize", "--input", "s.csv"],
    ];
    let setup = Command::new(env!("CARGO_BIN_EXE_mcprec"))
        .current_dir(d)
        .args(["gen-channels", "--users", "3", "--tx", "4", "--seed", "11", "--out", "ch.json"])
        .status()
        .unwrap();
    let sweep = Command::new(env!("CARGO_BIN_EXE_mcprec"))
        .current_dir(d)
        .args(["sweep", "--experiment", "tc3", "--grid", "10", "--trials", "2", "--out", "s.csv"])
        .status()
        .unwrap();
    if !setup.success() || !sweep.success() {
        return verdict(false, "setup commands failed");
    }
    let failing: Vec<&str> = cmds.iter().filter(|a| !run_twice(d, a)).map(|a| a[0]).collect();
    verdict(failing.is_empty(), format!("{} commands rerun byte-identical; differing or failing: {failing:?}", cmds.len() - failing.len()))
}
