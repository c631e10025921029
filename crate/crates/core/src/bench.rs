//! Monte Carlo sweeps over the four reference experiments and a summarizer
//! for their CSV output.
//!
//! * `tc1`: MISO max-min rate versus user count.
//! * `tc2`: the same with two receive antennas per user.
//! * `tc3`: weighted sum delay over the continuous codebook versus power.
//! * `tc4`: max-min rate over the discrete codebook versus SNR.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caa::{caa_instant_rate, open_loop_precoder, rates_of, rec_type_precoder, CaaConfig, CaaInit};
use crate::conic::{solve_covariance_bound, solve_fractional_bound};
use crate::delay_cont::{caa_delay, feasible_interval, repeat_delay, repeat_objective, DelayConfig, DelayInit, DelayInstance};
use crate::discrete::{saturation_bisection, simple_greedy, BisectionConfig, Budget};
use crate::error::{Error, Result};
use crate::model::{generate_base_codebook, generate_rayleigh, ChannelSet, CodebookKind, GroundSet, LogBase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Tc1,
    Tc2,
    Tc3,
    Tc4,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tc1" => Ok(Self::Tc1),
            "tc2" => Ok(Self::Tc2),
            "tc3" => Ok(Self::Tc3),
            "tc4" => Ok(Self::Tc4),
            other => Err(Error::config(format!("unknown experiment '{other}' (expected tc1..tc4)"))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tc1 => "tc1",
            Self::Tc2 => "tc2",
            Self::Tc3 => "tc3",
            Self::Tc4 => "tc4",
        })
    }
}

impl Experiment {
    /// What the grid values mean.
    pub fn grid_name(&self) -> &'static str {
        match self {
            Self::Tc1 | Self::Tc2 => "users",
            Self::Tc3 => "power",
            Self::Tc4 => "snr-db",
        }
    }
}

/// User weights for the delay experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    /// `1/K` each.
    Uniform,
    /// 0.9 on the weakest user under the max-min precoder, the rest shared.
    Unequal,
}

impl FromStr for Weights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "unequal" => Ok(Self::Unequal),
            other => Err(Error::config(format!("unknown weights '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub experiment: Experiment,
    /// Users (tc1, tc2), power (tc3) or SNR in dB (tc4).
    pub grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Fixed user count for tc3 and tc4.
    pub users: usize,
    pub tx: usize,
    pub rx: usize,
    pub streams: usize,
    /// Power budget for tc1 and tc2.
    pub power: f64,
    /// Rate threshold for tc3.
    pub theta: f64,
    pub weights: Weights,
    /// Base codewords for tc4, each at four power levels.
    pub codewords: usize,
    pub codebook: CodebookKind,
    /// Bisection width for tc4.
    pub eps: f64,
    pub tol: f64,
}

impl Sweep {
    /// Desk-scale defaults; the trial counts and grids are this crate's own
    /// choice.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            grid: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            trials: 50,
            seed: 0,
            users: 4,
            tx: 2,
            rx: 1,
            streams: 2,
            power: 10.0,
            theta: 10.0,
            weights: Weights::Uniform,
            codewords: 16,
            codebook: CodebookKind::Dft,
            eps: 0.08,
            tol: 1e-8,
        };
        match experiment {
            Experiment::Tc1 => base,
            Experiment::Tc2 => Self { rx: 2, ..base },
            Experiment::Tc3 => Self {
                grid: vec![5.0, 10.0, 20.0],
                trials: 20,
                tx: 4,
                ..base
            },
            Experiment::Tc4 => Self {
                grid: vec![0.0, 5.0, 10.0, 15.0, 20.0],
                users: 5,
                tx: 4,
                rx: 2,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.grid.is_empty() {
            return Err(Error::config("a sweep needs at least one trial and one grid point"));
        }
        if self.tx == 0 || self.rx == 0 || self.streams == 0 || self.codewords == 0 {
            return Err(Error::config("dimensions must be positive"));
        }
        if !(self.tol > 0.0) || !(self.eps > 0.0) {
            return Err(Error::config("tolerances must be positive"));
        }
        for &g in &self.grid {
            let ok = match self.experiment {
                Experiment::Tc1 | Experiment::Tc2 => g >= 1.0 && g.fract() == 0.0,
                Experiment::Tc3 => g > 0.0 && g.is_finite(),
                Experiment::Tc4 => g.is_finite(),
            };
            if !ok {
                return Err(Error::config(format!("invalid {} grid value {g}", self.experiment.grid_name())));
            }
        }
        match self.experiment {
            Experiment::Tc1 | Experiment::Tc2 if !(self.power > 0.0) => Err(Error::config("power must be positive")),
            Experiment::Tc3 | Experiment::Tc4 if self.users == 0 => Err(Error::config("users must be positive")),
            Experiment::Tc3 if !(self.theta > 0.0) => Err(Error::config("rate threshold must be positive")),
            _ => Ok(()),
        }
    }

    /// Metadata written as `#` lines ahead of the CSV.
    pub fn metadata(&self) -> Vec<String> {
        vec![
            format!("experiment={} grid={}", self.experiment, self.experiment.grid_name()),
            format!(
                "trials={} seed={} users={} tx={} rx={} streams={} power={} theta={} weights={:?} codewords={} eps={} tol={}",
                self.trials, self.seed, self.users, self.tx, self.rx, self.streams, self.power, self.theta, self.weights, self.codewords, self.eps, self.tol
            ),
            "trial counts and grids are this crate's defaults".into(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub algorithm: String,
    pub point: f64,
    pub seed: u64,
    pub metric: String,
    /// Infinite for delays that never complete.
    pub value: f64,
    /// `ok`, or why the trial is unusable.
    pub status: String,
}

/// Metrics expressed in nats and affected by [`LogBase`].
pub const RATE_METRIC: &str = "min-rate";

/// Seed for trial `trial`, and the channel and initialization streams drawn
/// from it.
pub fn trial_seeds(base: u64, trial: usize) -> (u64, u64, u64) {
    let seed = base ^ trial as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (seed, rng.next_u64(), rng.next_u64())
}

/// Run every grid point and trial; rows come back in grid-then-trial order
/// regardless of scheduling.
pub fn run_sweep(sweep: &Sweep) -> Result<Vec<ResultRow>> {
    sweep.validate()?;
    let tasks: Vec<(f64, usize)> = sweep.grid.iter().flat_map(|&g| (0..sweep.trials).map(move |t| (g, t))).collect();
    let rows: Vec<Vec<ResultRow>> = tasks.par_iter().map(|&(point, trial)| run_trial(sweep, point, trial)).collect();
    Ok(rows.into_iter().flatten().collect())
}

fn run_trial(sweep: &Sweep, point: f64, trial: usize) -> Vec<ResultRow> {
    let (seed, ch_seed, init_seed) = trial_seeds(sweep.seed, trial);
    let mut out = Vec::new();
    let mut push = |algorithm: &str, metric: &str, value: f64, status: &str| {
        out.push(ResultRow {
            experiment: sweep.experiment,
            algorithm: algorithm.into(),
            point,
            seed,
            metric: metric.into(),
            value,
            status: status.into(),
        })
    };
    let result = match sweep.experiment {
        Experiment::Tc1 | Experiment::Tc2 => rate_trial(sweep, point as usize, ch_seed, init_seed),
        Experiment::Tc3 => delay_trial(sweep, point, ch_seed, init_seed),
        Experiment::Tc4 => discrete_trial(sweep, point, ch_seed),
    };
    match result {
        Ok(rows) => {
            for (alg, metric, value, status) in rows {
                push(alg, metric, value, status);
            }
        }
        Err(e) => push("trial", "error", f64::NAN, &status_of(&e)),
    }
    out
}

fn status_of(e: &Error) -> String {
    let kind = match e {
        Error::Numeric(_) => "numeric-failure",
        Error::Precondition(_) => "precondition",
        _ => "error",
    };
    format!("{kind}: {e}").replace([',', '\n'], ";")
}

type Row = (&'static str, &'static str, f64, &'static str);

const BOUND_SLACK: f64 = 1e-6;

fn checked(value: f64, upper: f64) -> &'static str {
    if value <= upper + BOUND_SLACK * (1.0 + upper.abs()) {
        "ok"
    } else {
        "bound-violation"
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn rate_trial(sweep: &Sweep, users: usize, ch_seed: u64, init_seed: u64) -> Result<Vec<Row>> {
    let ch = generate_rayleigh(ch_seed, users, sweep.tx, &vec![sweep.rx; users], 1)?;
    let hs: Vec<_> = (0..users).map(|k| ch.channel(k, 0)).collect();
    let (p, d) = (sweep.power, sweep.streams);
    let config = |init| CaaConfig {
        solver_tol: sweep.tol.min(1e-9),
        ..CaaConfig::with_init(init)
    };
    let caa = caa_instant_rate(&ch, d, p, &config(CaaInit::Random { seed: init_seed }))?;
    let caa_rec = caa_instant_rate(&ch, d, p, &config(CaaInit::RecType))?;
    let open = min_of(&rates_of(&hs, &open_loop_precoder(sweep.tx, sweep.tx, p)?)?);
    let rec = min_of(&rates_of(&hs, &rec_type_precoder(&ch, d, p)?)?);
    let bound = solve_covariance_bound(&ch, p, sweep.tol)?;
    Ok(vec![
        ("caa", RATE_METRIC, caa.min_rate, checked(caa.min_rate, bound.upper)),
        ("caa-rec", RATE_METRIC, caa_rec.min_rate, checked(caa_rec.min_rate, bound.upper)),
        ("open-loop", RATE_METRIC, open, checked(open, bound.upper)),
        ("rec-type", RATE_METRIC, rec, checked(rec, bound.upper)),
        ("cov-bound", RATE_METRIC, bound.value, checked(bound.value, bound.upper)),
    ])
}

fn delay_trial(sweep: &Sweep, power: f64, ch_seed: u64, init_seed: u64) -> Result<Vec<Row>> {
    let k = sweep.users;
    let ch = generate_rayleigh(ch_seed, k, sweep.tx, &vec![sweep.rx; k], 1)?;
    let caa_cfg = CaaConfig {
        solver_tol: sweep.tol.min(1e-9),
        ..CaaConfig::with_init(CaaInit::Random { seed: init_seed })
    };
    let uniform = DelayInstance::uniform(ch.clone(), sweep.theta, power, sweep.streams)?;
    let feasible = feasible_interval(&uniform, &caa_cfg)?;
    let delta = uniform.interval_rates(&feasible)?;
    let mu = match sweep.weights {
        Weights::Uniform => vec![1.0 / k as f64; k],
        Weights::Unequal if k == 1 => vec![1.0],
        Weights::Unequal => {
            let weakest = (0..k).min_by(|&a, &b| delta[a].total_cmp(&delta[b])).unwrap_or(0);
            (0..k).map(|u| if u == weakest { 0.9 } else { 0.1 / (k - 1) as f64 }).collect()
        }
    };
    let inst = DelayInstance::new(ch.clone(), mu, sweep.theta, power, sweep.streams)?;
    let mut rows: Vec<Row> = Vec::new();
    let variants: [(&'static str, DelayConfig); 3] = [
        ("caa-i1", DelayConfig::default()),
        ("caa-i2", DelayConfig { init: DelayInit::I2, ..DelayConfig::default() }),
        ("caa-greedy", DelayConfig { greedy: true, ..DelayConfig::default() }),
    ];
    for (name, cfg) in variants {
        let cfg = DelayConfig {
            solver_tol: sweep.tol,
            ..cfg
        };
        let r = caa_delay(&inst, &cfg, &feasible)?;
        let status = if !r.outcome.complete() {
            "not-covered"
        } else if r.relaxed > r.outcome.objective + 1e-9 {
            "relaxation-violation"
        } else {
            "ok"
        };
        rows.push((name, "delay", r.outcome.objective, status));
        rows.push((name, "relaxed", r.relaxed, status));
    }
    let rec = vec![rec_type_precoder(&ch, sweep.streams, power)?];
    for (name, interval) in [("fixed-caa", &feasible), ("fixed-rec-type", &rec)] {
        let rates = inst.interval_rates(interval)?;
        let exact = repeat_delay(&inst, &rates)?;
        let relaxed = if exact.complete() { repeat_objective(&inst, &rates)? } else { f64::INFINITY };
        rows.push((name, "delay", exact.objective, "ok"));
        rows.push((name, "relaxed", relaxed, "ok"));
    }
    Ok(rows)
}

/// Base codewords at `{P/8, P/4, P/2, P}`.
pub fn four_level_ground(kind: CodebookKind, tx: usize, codewords: usize, power: f64) -> Result<GroundSet> {
    let cw = generate_base_codebook(kind, tx, codewords)?;
    GroundSet::with_power_levels(&cw, &[power / 8.0, power / 4.0, power / 2.0, power])
}

fn discrete_trial(sweep: &Sweep, snr_db: f64, ch_seed: u64) -> Result<Vec<Row>> {
    let k = sweep.users;
    let p = 10f64.powf(snr_db / 10.0);
    let ch: ChannelSet = generate_rayleigh(ch_seed, k, sweep.tx, &vec![sweep.rx; k], 1)?;
    let ground = four_level_ground(sweep.codebook, sweep.tx, sweep.codewords, p)?;
    let budget = Budget::power(p);
    let greedy = simple_greedy(&ground, &ch, &budget)?;
    let bis = saturation_bisection(
        &ground,
        &ch,
        p,
        &BisectionConfig {
            eps: sweep.eps,
            ..BisectionConfig::default()
        },
    )?;
    let bound = solve_fractional_bound(&ground, &ch, p, sweep.tol)?;
    let feasible = |r: f64, power: f64| {
        if power > p * (1.0 + 1e-12) {
            "power-violation"
        } else {
            checked(r, bound.upper)
        }
    };
    Ok(vec![
        ("simple-greedy", RATE_METRIC, greedy.min_rate, feasible(greedy.min_rate, greedy.power)),
        ("bisection", RATE_METRIC, bis.result.min_rate, feasible(bis.result.min_rate, bis.result.power)),
        ("fractional-bound", RATE_METRIC, bound.value, checked(bound.value, bound.upper)),
    ])
}

fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// CSV with `#` metadata lines; rate metrics converted to `base`.
pub fn write_rows<W: Write>(mut w: W, sweep: &Sweep, rows: &[ResultRow], base: LogBase) -> Result<()> {
    for line in sweep.metadata() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "# log-base={base:?}")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["experiment", "algorithm", "point", "seed", "metric", "value", "status"])?;
    for r in rows {
        let v = if r.metric == RATE_METRIC { base.convert(r.value) } else { r.value };
        csv.write_record([
            r.experiment.to_string(),
            r.algorithm.clone(),
            format!("{}", r.point),
            r.seed.to_string(),
            r.metric.clone(),
            fmt_value(v),
            r.status.clone(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub algorithm: String,
    pub point: String,
    pub metric: String,
    /// Over finite values only.
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub count: usize,
    pub inf_count: usize,
    /// Rows whose status is not `ok`.
    pub failed: usize,
}

/// Aggregate sweep CSV per experiment, algorithm, grid point and metric.
pub fn summarize<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::instance(format!("missing column '{name}'")))
    };
    let (ce, ca, cp, cm, cv, cs) = (col("experiment")?, col("algorithm")?, col("point")?, col("metric")?, col("value")?, col("status")?);
    type Key = (String, String, String, String);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>, usize, usize)> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::instance(format!("line {line}: missing field")));
        let point_str = field(cp)?.to_string();
        let point: f64 = point_str.parse().map_err(|_| Error::instance(format!("line {line}: bad grid point '{point_str}'")))?;
        let raw = field(cv)?;
        let value: f64 = match raw {
            "inf" => f64::INFINITY,
            s => s.parse().map_err(|_| Error::instance(format!("line {line}: bad value '{s}'")))?,
        };
        let key = (field(ce)?.to_string(), field(ca)?.to_string(), field(cm)?.to_string(), point_str);
        let entry = groups.entry(key).or_insert((point, Vec::new(), 0, 0));
        if field(cs)? != "ok" {
            entry.3 += 1;
        } else if value.is_infinite() {
            entry.2 += 1;
        } else if value.is_finite() {
            entry.1.push(value);
        } else {
            return Err(Error::instance(format!("line {line}: value is not a number")));
        }
    }
    let mut out: Vec<(f64, SummaryRow)> = groups
        .into_iter()
        .map(|((experiment, algorithm, metric, point), (p, vals, inf_count, failed))| {
            let n = vals.len();
            let mean = if n == 0 { f64::NAN } else { vals.iter().sum::<f64>() / n as f64 };
            let std = if n < 2 {
                0.0
            } else {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            (
                p,
                SummaryRow {
                    experiment,
                    algorithm,
                    point,
                    metric,
                    mean,
                    std,
                    count: n,
                    inf_count,
                    failed,
                },
            )
        })
        .collect();
    out.sort_by(|(pa, a), (pb, b)| {
        (&a.experiment, &a.metric, &a.algorithm)
            .cmp(&(&b.experiment, &b.metric, &b.algorithm))
            .then(pa.total_cmp(pb))
    });
    Ok(out.into_iter().map(|(_, r)| r).collect())
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["experiment", "algorithm", "point", "metric", "mean", "std", "count", "inf_count", "failed"])?;
    for r in rows {
        csv.write_record([
            r.experiment.clone(),
            r.algorithm.clone(),
            r.point.clone(),
            r.metric.clone(),
            format!("{}", r.mean),
            format!("{}", r.std),
            r.count.to_string(),
            r.inf_count.to_string(),
            r.failed.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
