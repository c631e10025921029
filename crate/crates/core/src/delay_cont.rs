//! Weighted sum delay over the continuous codebook.
//!
//! User `k` decodes once its accumulated rate reaches `Theta`; its delay is
//! the number of scheduling intervals (of `L` slots each) this takes. The
//! decode indicator is relaxed to `min(acc / Theta, 1)` and the relaxed
//! problem over a growing horizon is attacked by alternating ascent with an
//! SOCP precoder step.

use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::caa::{caa_instant_rate, CaaConfig, ASCENT_SLACK};
use crate::conic::{solve_delay_socp, DelaySocp, SolverReport};
use crate::error::{Error, Result};
use crate::linalg::{frob2, to_real_vec};
use crate::model::{rate, rate_gradient, ChannelSet, Precoder};

/// Accumulated rates within this of `Theta` count as reaching it.
pub const COVER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DelayInstance {
    channels: ChannelSet,
    mu: Vec<f64>,
    theta: f64,
    power: f64,
    streams: usize,
}

impl DelayInstance {
    pub fn new(channels: ChannelSet, mu: Vec<f64>, theta: f64, power: f64, streams: usize) -> Result<Self> {
        if mu.len() != channels.users() {
            return Err(Error::instance(format!("{} weights for {} users", mu.len(), channels.users())));
        }
        if mu.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::config("user weights must be positive and finite"));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::config(format!("rate threshold must be positive and finite, got {theta}")));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::config(format!("power budget must be positive, got {power}")));
        }
        if streams == 0 {
            return Err(Error::config("stream count d must be at least 1"));
        }
        for k in 0..channels.users() {
            if (0..channels.slots()).all(|l| frob2(channels.channel(k, l)) == 0.0) {
                return Err(Error::Precondition(format!("user {k} has all-zero channels and can never decode")));
            }
        }
        Ok(Self {
            channels,
            mu,
            theta,
            power,
            streams,
        })
    }

    /// Uniform weights `1/K`.
    pub fn uniform(channels: ChannelSet, theta: f64, power: f64, streams: usize) -> Result<Self> {
        let k = channels.users();
        Self::new(channels, vec![1.0 / k as f64; k], theta, power, streams)
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.mu
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn streams(&self) -> usize {
        self.streams
    }

    pub fn users(&self) -> usize {
        self.mu.len()
    }

    pub fn slots_per_interval(&self) -> usize {
        self.channels.slots()
    }

    /// Per-user rates over one interval of the given per-slot precoders.
    pub fn interval_rates(&self, interval: &[Precoder]) -> Result<Vec<f64>> {
        if interval.len() != self.slots_per_interval() {
            return Err(Error::instance(format!("need {} precoders per interval", self.slots_per_interval())));
        }
        (0..self.users())
            .map(|k| interval.iter().enumerate().map(|(l, w)| rate(self.channels.channel(k, l), w)).sum())
            .collect()
    }
}

/// `acc[k][t]`: accumulated rate of user `k` after interval `t + 1`; a
/// trailing partial interval is padded with zero precoders.
pub fn accumulated_rates(schedule: &[Precoder], instance: &DelayInstance) -> Result<Vec<Vec<f64>>> {
    let l = instance.slots_per_interval();
    let intervals = schedule.len().div_ceil(l);
    let mut out = vec![Vec::with_capacity(intervals); instance.users()];
    for (k, row) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for t in 0..intervals {
            for tau in t * l..((t + 1) * l).min(schedule.len()) {
                acc += rate(instance.channels.channel(k, tau), &schedule[tau])?;
            }
            row.push(acc);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayOutcome {
    /// `None` when the schedule never delivers `Theta` to the user.
    pub delays: Vec<Option<usize>>,
    /// `sum mu_k D_k`, infinite if any user is not covered.
    pub objective: f64,
}

impl DelayOutcome {
    pub fn complete(&self) -> bool {
        self.delays.iter().all(Option::is_some)
    }
}

fn reaches(acc: f64, theta: f64) -> bool {
    acc >= theta - COVER_SLACK
}

/// `D_k = min { t : sum_{tau <= L t} R_k^tau >= Theta }`.
pub fn exact_delay(schedule: &[Precoder], instance: &DelayInstance) -> Result<DelayOutcome> {
    if schedule.is_empty() {
        return Err(Error::instance("schedule is empty"));
    }
    let acc = accumulated_rates(schedule, instance)?;
    let delays: Vec<Option<usize>> = acc
        .iter()
        .map(|row| row.iter().position(|&a| reaches(a, instance.theta)).map(|t| t + 1))
        .collect();
    let objective = delays
        .iter()
        .zip(&instance.mu)
        .map(|(d, m)| d.map_or(f64::INFINITY, |d| m * d as f64))
        .sum();
    Ok(DelayOutcome { delays, objective })
}

/// `sum_k mu_k + sum_k sum_{t <= horizon} mu_k (1 - min(acc_k^t / Theta, 1))`,
/// with zero precoders past the end of the schedule.
pub fn relaxed_objective(schedule: &[Precoder], instance: &DelayInstance, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let acc = accumulated_rates(schedule, instance)?;
    let mut total = 0.0;
    for (k, row) in acc.iter().enumerate() {
        let last = row.last().copied().unwrap_or(0.0);
        let mut s = 1.0;
        for t in 0..horizon {
            let a = row.get(t).copied().unwrap_or(last);
            s += 1.0 - (a / instance.theta).min(1.0);
        }
        total += instance.mu[k] * s;
    }
    Ok(total)
}

/// Interval-count bound `1 + ceil(G / (Delta_min mu_min))` with `Delta` the
/// per-interval rate normalized by `Theta` and `G` the relaxed objective of
/// repeating the feasible interval until every user decodes.
pub fn truncation_horizon(instance: &DelayInstance, delta: &[f64], g: f64) -> Result<usize> {
    let dmin = delta.iter().copied().fold(f64::INFINITY, f64::min) / instance.theta;
    if !(dmin > 0.0) || delta.len() != instance.users() {
        return Err(Error::Precondition("per-interval rate vector must be strictly positive".into()));
    }
    let mu_min = instance.mu.iter().copied().fold(f64::INFINITY, f64::min);
    let x = (g / (dmin * mu_min)).ceil();
    if !x.is_finite() || x > 1e9 {
        return Err(Error::numeric("truncation horizon is unbounded"));
    }
    Ok(1 + x as usize)
}

/// Relaxed objective of repeating `interval` until every user decodes.
pub fn repeat_objective(instance: &DelayInstance, delta: &[f64]) -> Result<f64> {
    let dmin = delta.iter().copied().fold(f64::INFINITY, f64::min);
    if !(dmin > 0.0) {
        return Err(Error::Precondition("per-interval rate vector must be strictly positive".into()));
    }
    let reps = (instance.theta / dmin).ceil() as usize;
    let mut total = 0.0;
    for (k, d) in delta.iter().enumerate() {
        let mut s = 1.0;
        for t in 1..=reps {
            s += 1.0 - (t as f64 * d / instance.theta).min(1.0);
        }
        total += instance.mu[k] * s;
    }
    Ok(total)
}

/// Exact outcome of repeating one interval with per-user rates `delta` forever.
pub fn repeat_delay(instance: &DelayInstance, delta: &[f64]) -> Result<DelayOutcome> {
    if delta.len() != instance.users() {
        return Err(Error::instance("one rate per user required"));
    }
    let delays: Vec<Option<usize>> = delta
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return None;
            }
            let t = ((instance.theta - COVER_SLACK) / r).ceil().max(1.0);
            (t < 1e12).then_some(t as usize)
        })
        .collect();
    let objective = delays
        .iter()
        .zip(&instance.mu)
        .map(|(d, m)| d.map_or(f64::INFINITY, |d| m * d as f64))
        .sum();
    Ok(DelayOutcome { delays, objective })
}

/// Per-slot max-min precoders, used as the feasible interval.
pub fn feasible_interval(instance: &DelayInstance, config: &CaaConfig) -> Result<Vec<Precoder>> {
    (0..instance.slots_per_interval())
        .map(|l| caa_instant_rate(&instance.channels.slot(l), instance.streams, instance.power, config).map(|r| r.w))
        .collect()
}

/// How a new interval is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayInit {
    /// Keep the previous precoders and append the feasible interval.
    #[default]
    I1,
    /// Restart every interval from the feasible interval.
    I2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    pub init: DelayInit,
    /// Only optimize the newest interval, freezing earlier ones.
    pub greedy: bool,
    pub obj_tol: f64,
    pub max_sweeps: usize,
    pub solver_tol: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            init: DelayInit::I1,
            greedy: false,
            obj_tol: 1e-4,
            max_sweeps: 100,
            solver_tol: 1e-8,
        }
    }
}

/// Inner sweeps at one horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonTrace {
    pub horizon: usize,
    /// Relaxed objective `sum mu_k min(acc/Theta, 1)` before each sweep and after the last.
    pub objective: Vec<f64>,
    pub rejected: bool,
    pub solver: Vec<SolverReport>,
}

#[derive(Debug, Clone)]
pub struct DelayResult {
    pub schedule: Vec<Precoder>,
    pub t_final: usize,
    pub outcome: DelayOutcome,
    /// Relaxed objective at horizon `t_final`.
    pub relaxed: f64,
    /// Whether the feasible interval was appended at the end.
    pub augmented: bool,
    pub truncation: usize,
    /// Relative stationarity residual of the iterate before augmentation.
    pub kkt_residual: f64,
    pub trace: Vec<HorizonTrace>,
}

/// Alternating ascent over a growing horizon.
pub fn caa_delay(instance: &DelayInstance, config: &DelayConfig, feasible: &[Precoder]) -> Result<DelayResult> {
    if !(config.obj_tol > 0.0 && config.solver_tol > 0.0) || config.max_sweeps == 0 {
        return Err(Error::config("tolerances and sweep cap must be positive"));
    }
    let l = instance.slots_per_interval();
    for w in feasible {
        if w.tx_antennas() != instance.channels.tx_antennas() || w.streams() != instance.streams {
            return Err(Error::instance("feasible precoders do not match M x d"));
        }
        if w.power() > instance.power * (1.0 + 1e-9) {
            return Err(Error::instance("feasible precoders exceed the power budget"));
        }
    }
    let delta = instance.interval_rates(feasible)?;
    if let Some(k) = delta.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Precondition(format!(
            "feasible interval gives user {k} zero rate (its channel may be orthogonal to the others')"
        )));
    }
    let t_hat = truncation_horizon(instance, &delta, repeat_objective(instance, &delta)?)?;
    let mut schedule: Vec<Precoder> = Vec::new();
    let mut trace = Vec::new();
    let mut horizon = 0;
    let below = |schedule: &[Precoder]| -> Result<bool> {
        if schedule.is_empty() {
            return Ok(delta.iter().any(|d| instance.theta - d > 0.0));
        }
        let acc = accumulated_rates(schedule, instance)?;
        Ok(acc.iter().zip(&delta).any(|(row, d)| row.last().copied().unwrap_or(0.0) < instance.theta - d))
    };
    while below(&schedule)? && horizon < t_hat {
        horizon += 1;
        match config.init {
            DelayInit::I2 if !config.greedy => {
                schedule = (0..horizon * l).map(|tau| feasible[tau % l].clone()).collect();
            }
            _ => schedule.extend(feasible.iter().cloned()),
        }
        let free: Vec<bool> = (0..schedule.len()).map(|tau| !config.greedy || tau >= (horizon - 1) * l).collect();
        trace.push(ascend(instance, config, &mut schedule, &free, horizon)?);
    }
    let kkt_residual = if schedule.is_empty() { 0.0 } else { delay_kkt_residual(&schedule, instance)? };
    let covered = !schedule.is_empty() && exact_delay(&schedule, instance)?.complete();
    let augmented = !covered;
    if augmented {
        schedule.extend(feasible.iter().cloned());
    }
    let outcome = exact_delay(&schedule, instance)?;
    let t_final = schedule.len() / l;
    Ok(DelayResult {
        relaxed: relaxed_objective(&schedule, instance, t_final)?,
        schedule,
        t_final,
        outcome,
        augmented,
        truncation: t_hat,
        kkt_residual,
        trace,
    })
}

fn ascend(instance: &DelayInstance, config: &DelayConfig, schedule: &mut [Precoder], free: &[bool], horizon: usize) -> Result<HorizonTrace> {
    let mut objective = Vec::new();
    let mut solver = Vec::new();
    let mut rejected = false;
    for _ in 0..config.max_sweeps {
        let prob = DelaySocp::around(&instance.channels, schedule, free, instance.mu.clone(), instance.theta, instance.power)?;
        let current: Vec<_> = schedule.iter().zip(free).filter(|(_, f)| **f).map(|(w, _)| w.matrix().clone()).collect();
        let before = prob.objective(&current);
        if objective.is_empty() {
            objective.push(before);
        }
        let sol = solve_delay_socp(&prob, config.solver_tol)?;
        solver.push(sol.report.clone());
        if !(sol.objective >= before - ASCENT_SLACK) {
            rejected = true;
            break;
        }
        let mut it = sol.w.into_iter();
        for (tau, f) in free.iter().enumerate() {
            if *f {
                schedule[tau] = it.next().expect("one precoder per free slot");
            }
        }
        // surrogates are tight at the new point after the filter/slack refresh
        let after = relaxed_gain(schedule, instance, horizon)?;
        objective.push(after);
        if (after - before).abs() <= config.obj_tol * (1.0 + before.abs()) {
            break;
        }
    }
    Ok(HorizonTrace {
        horizon,
        objective,
        rejected,
        solver,
    })
}

/// `sum_k sum_{t <= horizon} mu_k min(acc_k^t / Theta, 1)`.
fn relaxed_gain(schedule: &[Precoder], instance: &DelayInstance, horizon: usize) -> Result<f64> {
    let total: f64 = instance.mu.iter().sum::<f64>() * (1.0 + horizon as f64);
    Ok(total - relaxed_objective(schedule, instance, horizon)?)
}

/// Relative residual of the first-order conditions of the relaxed problem at
/// the given horizon. For slot `tau` in interval `t`, the ascent direction is
/// `sum_k mu_k grad R_k^tau * (#{t' >= t : acc_k^t' < Theta} + sum of tie weights)`,
/// which must be a nonnegative multiple of `W^tau` (zero if the power
/// constraint is slack). Tie weights in `[0, 1]` cover intervals where the
/// accumulated rate sits on `Theta`.
pub fn delay_kkt_residual(schedule: &[Precoder], instance: &DelayInstance) -> Result<f64> {
    let l = instance.slots_per_interval();
    let acc = accumulated_rates(schedule, instance)?;
    let n_slots = schedule.len();
    let dims: Vec<usize> = schedule.iter().map(|w| 2 * w.tx_antennas() * w.streams()).collect();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |s, d| {
            let o = *s;
            *s += d;
            Some(o)
        })
        .collect();
    let total: usize = dims.iter().sum();
    let tie = 1e-6 * instance.theta;
    let mut g0 = DVector::zeros(total);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut n_box = 0;
    let mut scale = 0.0;
    let intervals = acc[0].len();
    for k in 0..instance.users() {
        let grads: Vec<DVector<f64>> = (0..n_slots)
            .map(|tau| rate_gradient(instance.channels.channel(k, tau), &schedule[tau]).map(|g| to_real_vec(&g) * instance.mu[k]))
            .collect::<Result<_>>()?;
        for t in 0..intervals {
            let a = acc[k][t];
            let slots = 0..((t + 1) * l).min(n_slots);
            if a < instance.theta - tie {
                for tau in slots {
                    g0.rows_mut(offsets[tau], dims[tau]).add_assign(&grads[tau]);
                }
            } else if a <= instance.theta + tie {
                let mut col = DVector::zeros(total);
                for tau in slots {
                    col.rows_mut(offsets[tau], dims[tau]).copy_from(&grads[tau]);
                }
                scale += col.norm();
                cols.push(col);
                n_box += 1;
            }
        }
    }
    scale += g0.norm();
    for tau in 0..n_slots {
        if schedule[tau].power() >= instance.power - 1e-6 {
            let mut col = DVector::zeros(total);
            col.rows_mut(offsets[tau], dims[tau]).copy_from(&(-to_real_vec(schedule[tau].matrix())));
            cols.push(col);
        }
    }
    if scale <= 1e-12 {
        return Ok(0.0);
    }
    Ok(box_ls(&g0, &cols, n_box).sqrt() / scale)
}

/// `min |g0 + sum_j z_j c_j|^2` with `z_j in [0, 1]` for `j < n_box` and
/// `z_j >= 0` otherwise, by accelerated projected gradient.
fn box_ls(g0: &DVector<f64>, cols: &[DVector<f64>], n_box: usize) -> f64 {
    let n = cols.len();
    if n == 0 {
        return g0.norm_squared();
    }
    let gram = DMatrix::from_fn(n, n, |i, j| cols[i].dot(&cols[j]));
    let lin = DVector::from_fn(n, |i, _| cols[i].dot(g0));
    let lip = gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max).max(1e-300);
    let project = |z: &mut DVector<f64>| {
        for (j, v) in z.iter_mut().enumerate() {
            *v = if j < n_box { v.clamp(0.0, 1.0) } else { v.max(0.0) };
        }
    };
    let value = |z: &DVector<f64>| (g0.norm_squared() + 2.0 * lin.dot(z) + z.dot(&(&gram * z))).max(0.0);
    let mut y = DVector::zeros(n);
    let mut z = y.clone();
    let mut t: f64 = 1.0;
    for _ in 0..20_000 {
        let grad = &gram * &z + &lin;
        let mut next = &z - grad / lip;
        project(&mut next);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + (&next - &y) * ((t - 1.0) / t_next);
        y = next;
        t = t_next;
    }
    value(&y)
}
