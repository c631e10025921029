//! The `mcprec` command line. Every subcommand writes JSON (or CSV for
//! `sweep` and `summarize`) to `--out` or stdout.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 for
//! numeric failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{run_sweep, summarize, write_rows, write_summary, Experiment, Sweep, Weights};
use crate::caa::{caa_instant_rate, CaaConfig, CaaInit};
use crate::conic::{solve_covariance_bound, solve_fractional_bound};
use crate::delay_cont::{caa_delay, feasible_interval, DelayConfig, DelayInit, DelayInstance};
use crate::delay_disc::{build_knapsack, delay_cover, feasible_codewords, CoverConfig};
use crate::discrete::{brute_force_maxmin, saturation_bisection, simple_greedy, BisectionConfig, Budget, Scan};
use crate::error::{Error, Result};
use crate::model::{generate_base_codebook, generate_rayleigh, matrix_to_nested, ChannelSet, CodebookKind, GroundSet, LogBase, Precoder};

#[derive(Debug, Parser)]
#[command(name = "mcprec", version, about = "Multicast precoder design")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "log-base", global = true, value_enum, default_value_t = Base::Nats)]
    pub log_base: Base,
    /// Include per-iteration traces in JSON output.
    #[arg(long, global = true)]
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Base {
    Nats,
    Bits,
}

impl From<Base> for LogBase {
    fn from(b: Base) -> Self {
        match b {
            Base::Nats => LogBase::Nats,
            Base::Bits => LogBase::Bits,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw i.i.d. Rayleigh channels.
    GenChannels {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        tx: usize,
        /// Receive antennas per user: one value for all, or a comma list.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        rx: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        slots: usize,
    },
    /// Max-min rate over the continuous codebook by cyclic alternating ascent.
    MaxrateCont {
        #[arg(long)]
        channels: PathBuf,
        #[arg(long, default_value_t = 2)]
        streams: usize,
        #[arg(long)]
        power: f64,
        #[arg(long, value_enum, default_value_t = InitKind::Random)]
        init: InitKind,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-5)]
        obj_tol: f64,
    },
    /// Max-min rate over a discrete codebook.
    MaxrateDisc {
        #[command(flatten)]
        book: BookArgs,
        #[arg(long)]
        channels: PathBuf,
        #[arg(long)]
        power: f64,
        /// Rank cap; none when omitted.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, value_enum, default_value_t = DiscAlgo::Bisection)]
        algo: DiscAlgo,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Cover gap; 0 uses the refined variant.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
    /// Weighted sum delay over the continuous codebook.
    DelayCont {
        #[command(flatten)]
        delay: DelayArgs,
        #[arg(long, value_enum, default_value_t = InitVariant::I1)]
        init: InitVariant,
        /// Only re-optimize the newest interval.
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = 1e-4)]
        obj_tol: f64,
    },
    /// Weighted sum delay over a discrete codebook.
    DelayDisc {
        #[command(flatten)]
        delay: DelayArgs,
        #[command(flatten)]
        book: BookArgs,
        /// Multiplicative-weights update factor; `2 L |F|` when omitted.
        #[arg(long)]
        lambda: Option<f64>,
        /// Include the packing constraints `A x <= b` in the output.
        #[arg(long)]
        dump_knapsack: bool,
    },
    /// Upper bounds on the max-min rate.
    Bound {
        #[arg(long, value_enum)]
        kind: BoundKind,
        #[arg(long)]
        channels: PathBuf,
        #[arg(long)]
        power: f64,
        #[command(flatten)]
        book: BookArgs,
    },
    /// Monte Carlo sweep of one reference experiment, as CSV.
    Sweep {
        #[arg(long)]
        experiment: String,
        /// Grid values; the experiment's defaults when omitted.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        tx: Option<usize>,
        #[arg(long)]
        rx: Option<usize>,
        #[arg(long)]
        streams: Option<usize>,
        #[arg(long)]
        power: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Mean, sample std and counts per algorithm and grid point of a sweep CSV.
    Summarize {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct BookArgs {
    /// Codebook JSON; otherwise generated from `--codebook-kind`.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// `dft` or `random-isotropic[:seed]`.
    #[arg(long, default_value = "dft")]
    pub codebook_kind: String,
    #[arg(long, default_value_t = 16)]
    pub codewords: usize,
    /// Power levels as fractions of `--power`.
    #[arg(long, value_delimiter = ',', default_value = "0.125,0.25,0.5,1")]
    pub levels: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct DelayArgs {
    #[arg(long)]
    pub channels: PathBuf,
    #[arg(long)]
    pub theta: f64,
    #[arg(long)]
    pub power: f64,
    #[arg(long, default_value_t = 2)]
    pub streams: usize,
    /// User weights (comma list); uniform when omitted.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitKind {
    Random,
    RecType,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitVariant {
    I1,
    I2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DiscAlgo {
    Bisection,
    Greedy,
    Brute,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundKind {
    Covariance,
    Fractional,
}

/// Parse `args`, run, print errors to stderr and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mcprec: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn read_channels(path: &Path) -> Result<ChannelSet> {
    ChannelSet::from_json(&fs::read_to_string(path)?)
}

impl BookArgs {
    fn load(&self, tx: usize, power: f64) -> Result<GroundSet> {
        if let Some(p) = &self.codebook {
            return GroundSet::from_json(&fs::read_to_string(p)?);
        }
        let kind: CodebookKind = self.codebook_kind.parse()?;
        let cw = generate_base_codebook(kind, tx, self.codewords)?;
        let levels: Vec<f64> = self.levels.iter().map(|l| l * power).collect();
        GroundSet::with_power_levels(&cw, &levels)
    }
}

impl DelayArgs {
    fn instance(&self) -> Result<DelayInstance> {
        let ch = read_channels(&self.channels)?;
        match &self.weights {
            Some(mu) => DelayInstance::new(ch, mu.clone(), self.theta, self.power, self.streams),
            None => DelayInstance::uniform(ch, self.theta, self.power, self.streams),
        }
    }
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(common: &Common, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(common, &s)
}

fn precoder_json(w: &Precoder) -> Value {
    json!(matrix_to_nested(w.matrix()))
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("--tol must be positive, got {tol}")))
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    check_tol(common.tol)?;
    let base: LogBase = common.log_base.into();
    let conv = |v: f64| base.convert(v);
    let conv_all = |v: &[f64]| v.iter().map(|x| base.convert(*x)).collect::<Vec<_>>();
    match &cli.command {
        Command::GenChannels { users, tx, rx, slots } => {
            let rx = match rx.as_slice() {
                [one] => vec![*one; *users],
                many => many.to_vec(),
            };
            let ch = generate_rayleigh(common.seed, *users, *tx, &rx, *slots)?;
            emit(common, &(ch.to_json()? + "\n"))
        }
        Command::MaxrateCont {
            channels,
            streams,
            power,
            init,
            max_iter,
            obj_tol,
        } => {
            let ch = read_channels(channels)?;
            let init = match init {
                InitKind::Random => CaaInit::Random { seed: common.seed },
                InitKind::RecType => CaaInit::RecType,
            };
            let config = CaaConfig {
                max_outer_iters: *max_iter,
                obj_tol: *obj_tol,
                solver_tol: common.tol,
                ..CaaConfig::with_init(init)
            };
            let r = caa_instant_rate(&ch, *streams, *power, &config)?;
            let mut out = json!({
                "W": precoder_json(&r.w),
                "min_rate": conv(r.min_rate),
                "rates": conv_all(&r.rates),
                "kkt_residual": r.kkt_residual,
                "iterations": r.state.iterations,
            });
            if common.trace {
                out["trace"] = serde_json::to_value(r.trace())?;
            }
            emit_json(common, &out)
        }
        Command::MaxrateDisc {
            book,
            channels,
            power,
            rank,
            algo,
            eps,
            delta,
        } => {
            let ch = read_channels(channels)?;
            let ground = book.load(ch.tx_antennas(), *power)?;
            let mut budget = Budget::power(*power);
            if let Some(d) = rank {
                budget = budget.with_rank(*d);
            }
            let (res, extra) = match algo {
                DiscAlgo::Bisection => {
                    let cfg = BisectionConfig {
                        delta: *delta,
                        eps: *eps,
                        refine: *delta == 0.0,
                        rank_cap: *rank,
                        scan: Scan::Lazy,
                    };
                    let b = saturation_bisection(&ground, &ch, *power, &cfg)?;
                    (b.result, json!({"cover_calls": b.cover_calls, "bracket": [conv(b.bracket.0), conv(b.bracket.1)]}))
                }
                DiscAlgo::Greedy => (simple_greedy(&ground, &ch, &budget)?, Value::Null),
                DiscAlgo::Brute => (brute_force_maxmin(&ground, &ch, &budget)?, Value::Null),
            };
            emit_json(
                common,
                &json!({
                    "ids": res.ids,
                    "min_rate": conv(res.min_rate),
                    "rates": conv_all(&res.rates),
                    "power": res.power,
                    "rank": res.rank,
                    "search": extra,
                }),
            )
        }
        Command::DelayCont {
            delay,
            init,
            greedy,
            obj_tol,
        } => {
            let inst = delay.instance()?;
            let caa_cfg = CaaConfig {
                solver_tol: common.tol.min(1e-9),
                ..CaaConfig::with_init(CaaInit::Random { seed: common.seed })
            };
            let feasible = feasible_interval(&inst, &caa_cfg)?;
            let config = DelayConfig {
                init: match init {
                    InitVariant::I1 => DelayInit::I1,
                    InitVariant::I2 => DelayInit::I2,
                },
                greedy: *greedy,
                obj_tol: *obj_tol,
                solver_tol: common.tol,
                ..DelayConfig::default()
            };
            let r = caa_delay(&inst, &config, &feasible)?;
            let mut out = json!({
                "schedule": r.schedule.iter().map(precoder_json).collect::<Vec<_>>(),
                "delays": r.outcome.delays,
                "objective": r.outcome.objective,
                "relaxed": r.relaxed,
                "t_final": r.t_final,
                "truncation": r.truncation,
                "augmented": r.augmented,
                "kkt_residual": r.kkt_residual,
            });
            if common.trace {
                out["trace"] = json!(r
                    .trace
                    .iter()
                    .map(|h| json!({"horizon": h.horizon, "objective": h.objective, "rejected": h.rejected}))
                    .collect::<Vec<_>>());
            }
            emit_json(common, &out)
        }
        Command::DelayDisc {
            delay,
            book,
            lambda,
            dump_knapsack,
        } => {
            let inst = delay.instance()?;
            let ground = book.load(inst.channels().tx_antennas(), inst.power())?;
            let budget = Budget::power(inst.power()).with_rank(inst.streams());
            let feasible = feasible_codewords(inst.channels(), &ground, &budget, 0.01)?;
            let s = delay_cover(&inst, &ground, &feasible, &CoverConfig { lambda: *lambda, ..CoverConfig::default() })?;
            let mut out = json!({
                "intervals": s.intervals,
                "delays": s.outcome.delays,
                "objective": s.outcome.objective,
                "t_final": s.t_final,
                "augmented": s.augmented,
                "repetition_cap": s.repetition_cap,
                "max_repetition": s.max_repetition,
                "knapsack_feasible": s.knapsack_feasible,
            });
            if common.trace {
                out["progress"] = json!(s.progress);
            }
            if *dump_knapsack {
                let k = build_knapsack(&ground, inst.slots_per_interval(), inst.streams(), inst.power())?;
                let rows: Vec<Vec<f64>> = k.a.row_iter().map(|r| r.iter().copied().collect()).collect();
                out["knapsack"] = json!({"A": rows, "b": k.b.as_slice(), "width": k.width()});
            }
            emit_json(common, &out)
        }
        Command::Bound { kind, channels, power, book } => {
            let ch = read_channels(channels)?;
            let out = match kind {
                BoundKind::Covariance => {
                    let b = solve_covariance_bound(&ch, *power, common.tol)?;
                    json!({
                        "value": conv(b.value),
                        "upper": conv(b.upper),
                        "Q": matrix_to_nested(&b.q),
                        "status": b.report.status,
                        "newton_steps": b.report.newton_steps,
                    })
                }
                BoundKind::Fractional => {
                    let ground = book.load(ch.tx_antennas(), *power)?;
                    let b = solve_fractional_bound(&ground, &ch, *power, common.tol)?;
                    json!({
                        "value": conv(b.value),
                        "upper": conv(b.upper),
                        "x": b.x,
                        "status": b.report.status,
                        "newton_steps": b.report.newton_steps,
                    })
                }
            };
            emit_json(common, &out)
        }
        Command::Sweep {
            experiment,
            grid,
            trials,
            users,
            tx,
            rx,
            streams,
            power,
            theta,
            weights,
            eps,
        } => {
            let exp: Experiment = experiment.parse()?;
            let d = Sweep::defaults(exp);
            let sweep = Sweep {
                grid: grid.clone().unwrap_or(d.grid.clone()),
                trials: trials.unwrap_or(d.trials),
                seed: common.seed,
                users: users.unwrap_or(d.users),
                tx: tx.unwrap_or(d.tx),
                rx: rx.unwrap_or(d.rx),
                streams: streams.unwrap_or(d.streams),
                power: power.unwrap_or(d.power),
                theta: theta.unwrap_or(d.theta),
                weights: match weights {
                    Some(w) => w.parse::<Weights>()?,
                    None => d.weights,
                },
                eps: eps.unwrap_or(d.eps),
                tol: common.tol,
                ..d
            };
            let rows = run_sweep(&sweep)?;
            let mut buf = Vec::new();
            write_rows(&mut buf, &sweep, &rows, base)?;
            emit(common, &String::from_utf8_lossy(&buf))
        }
        Command::Summarize { input } => {
            let rows = summarize(fs::File::open(input)?)?;
            let mut buf = Vec::new();
            write_summary(&mut buf, &rows)?;
            emit(common, &String::from_utf8_lossy(&buf))
        }
    }
}
