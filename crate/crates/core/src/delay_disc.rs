//! Weighted sum delay over the discrete codebook: interval-by-interval cover
//! where each interval's codewords come from a multiplicative-weights greedy
//! for submodular maximization under the per-slot rank/power knapsacks.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::delay_cont::{DelayInstance, DelayOutcome, COVER_SLACK};
use crate::discrete::{saturation_bisection_on, BisectionConfig, Budget, GAIN_FLOOR};
use crate::error::{Error, Result};
use crate::model::{ChannelSet, GroundSet, RateTable};

/// Pairs `(e, l)` of element and slot, indexed `l * |E| + e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConcatGround {
    elements: usize,
    slots: usize,
}

impl ConcatGround {
    pub fn new(elements: usize, slots: usize) -> Self {
        Self { elements, slots }
    }

    pub fn len(&self) -> usize {
        self.elements * self.slots
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, element: usize, slot: usize) -> usize {
        slot * self.elements + element
    }

    pub fn pair(&self, index: usize) -> (usize, usize) {
        (index % self.elements, index / self.elements)
    }

    /// Split concatenated ids into per-slot element ids.
    pub fn per_slot(&self, ids: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.slots];
        for &j in ids {
            let (e, l) = self.pair(j);
            out[l].push(e);
        }
        for s in &mut out {
            s.sort_unstable();
        }
        out
    }
}

/// Packing constraints `A x <= b`: row `2l` bounds slot `l`'s rank by `d`,
/// row `2l + 1` its power by `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

pub fn build_knapsack(ground: &GroundSet, slots: usize, d: usize, power: f64) -> Result<KnapsackSystem> {
    if d == 0 || !(power > 0.0 && power.is_finite()) || slots == 0 {
        return Err(Error::config("knapsack needs d >= 1, P > 0 and at least one slot"));
    }
    let n = ground.len();
    let mut a = DMatrix::zeros(2 * slots, slots * n);
    let mut b = DVector::zeros(2 * slots);
    for l in 0..slots {
        b[2 * l] = d as f64;
        b[2 * l + 1] = power;
        for (e, el) in ground.elements().iter().enumerate() {
            a[(2 * l, l * n + e)] = el.rank() as f64;
            a[(2 * l + 1, l * n + e)] = el.power();
        }
    }
    Ok(KnapsackSystem { a, b })
}

impl KnapsackSystem {
    /// `min { b_m / A_mj : A_mj > 0 }`.
    pub fn width(&self) -> f64 {
        let mut w = f64::INFINITY;
        for m in 0..self.a.nrows() {
            for j in 0..self.a.ncols() {
                if self.a[(m, j)] > 0.0 {
                    w = w.min(self.b[m] / self.a[(m, j)]);
                }
            }
        }
        w
    }

    pub fn load(&self, ids: &[usize]) -> DVector<f64> {
        let mut l = DVector::zeros(self.a.nrows());
        for &j in ids {
            l += self.a.column(j);
        }
        l
    }

    pub fn admits(&self, ids: &[usize]) -> bool {
        let l = self.load(ids);
        (0..l.len()).all(|m| l[m] <= self.b[m] + 1e-12 * self.b[m].abs().max(1.0))
    }
}

/// `f(V) = sum_{k in I} mu_k min(sum_l R_k^l(V_l) / (Theta (1 - theta_k)), 1)`.
#[derive(Debug, Clone)]
pub struct FContext<'a> {
    table: &'a RateTable,
    concat: ConcatGround,
    active: Vec<usize>,
    residual: Vec<f64>,
    mu: Vec<f64>,
    theta: f64,
}

impl<'a> FContext<'a> {
    /// `progress[k]` is the fraction of `Theta` user `k` already holds.
    pub fn new(table: &'a RateTable, active: Vec<usize>, progress: &[f64], mu: &[f64], theta: f64) -> Result<Self> {
        let k = table.users();
        if progress.len() != k || mu.len() != k {
            return Err(Error::instance("one progress value and weight per user required"));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::config("rate threshold must be positive and finite"));
        }
        for &u in &active {
            if u >= k {
                return Err(Error::instance(format!("unknown user {u}")));
            }
            if !(progress[u] < 1.0) {
                return Err(Error::Precondition(format!("active user {u} already holds the full threshold")));
            }
        }
        Ok(Self {
            table,
            concat: ConcatGround::new(table.ground().len(), table.slots()),
            residual: progress.iter().map(|p| theta * (1.0 - p)).collect(),
            active,
            mu: mu.to_vec(),
            theta,
        })
    }

    pub fn concat(&self) -> ConcatGround {
        self.concat
    }

    pub fn eval(&self, ids: &[usize]) -> Result<f64> {
        if let Some(&bad) = ids.iter().find(|&&j| j >= self.concat.len()) {
            return Err(Error::instance(format!("unknown concatenated id {bad}")));
        }
        let per = self.concat.per_slot(ids);
        let mut total = 0.0;
        for &k in &self.active {
            let mut acc = 0.0;
            for (l, s) in per.iter().enumerate() {
                acc += self.table.rate(k, l, s)?;
            }
            total += self.mu[k] * (acc / self.residual[k]).min(1.0);
        }
        Ok(total)
    }

    pub fn threshold(&self) -> f64 {
        self.theta
    }
}

/// Standalone evaluation of `f`.
pub fn eval_f(ids: &[usize], table: &RateTable, active: &[usize], progress: &[f64], theta: f64, mu: &[f64]) -> Result<f64> {
    FContext::new(table, active.to_vec(), progress, mu, theta)?.eval(ids)
}

/// Default update factor `2 L |F|`.
pub fn default_lambda(concat: &ConcatGround) -> f64 {
    (2 * concat.slots * concat.len()) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackResult {
    /// Output before expansion.
    pub selected: Vec<usize>,
    /// Expanded output (maximal per slot).
    pub ids: Vec<usize>,
    pub value: f64,
    /// Which branch of the repair produced `selected`.
    pub repair: Repair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Repair {
    Kept,
    DroppedLast,
    OnlyLast,
    /// Trailing elements removed until feasible.
    Trimmed,
}

/// Multiplicative-weights greedy followed by the feasibility repair and the
/// maximal expansion.
pub fn greedy_knapsack(ctx: &FContext, knap: &KnapsackSystem, lambda: f64, budget: &Budget) -> Result<KnapsackResult> {
    let concat = ctx.concat;
    if knap.a.ncols() != concat.len() || knap.a.nrows() != 2 * concat.slots {
        return Err(Error::instance("knapsack system does not match the concatenated ground set"));
    }
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::config(format!("update factor must exceed 1, got {lambda}")));
    }
    let rows = knap.a.nrows();
    let mut omega: Vec<f64> = (0..rows).map(|m| 1.0 / knap.b[m]).collect();
    let mut chosen = vec![false; concat.len()];
    let mut v: Vec<usize> = Vec::new();
    let mut current = ctx.eval(&v)?;
    while (0..rows).map(|m| knap.b[m] * omega[m]).sum::<f64>() <= lambda && v.len() < concat.len() {
        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..concat.len() {
            if chosen[j] {
                continue;
            }
            v.push(j);
            let val = ctx.eval(&v)?;
            v.pop();
            let gain = val - current;
            if !(gain > GAIN_FLOOR) {
                continue;
            }
            let cost: f64 = (0..rows).map(|m| knap.a[(m, j)] * omega[m]).sum();
            let ratio = cost / gain;
            if best.is_none_or(|(r, _, _)| ratio < r) {
                best = Some((ratio, j, val));
            }
        }
        let Some((_, j, val)) = best else { break };
        v.push(j);
        chosen[j] = true;
        current = val;
        for m in 0..rows {
            omega[m] *= lambda.powf(knap.a[(m, j)] / knap.b[m]);
        }
    }
    let (mut selected, mut repair) = if knap.admits(&v) || v.is_empty() {
        (v, Repair::Kept)
    } else {
        let last = *v.last().expect("nonempty");
        let rest: Vec<usize> = v[..v.len() - 1].to_vec();
        if ctx.eval(&rest)? >= ctx.eval(&[last])? {
            (rest, Repair::DroppedLast)
        } else {
            (vec![last], Repair::OnlyLast)
        }
    };
    while !knap.admits(&selected) {
        selected.pop();
        repair = Repair::Trimmed;
    }
    let per = concat.per_slot(&selected);
    let mut ids = Vec::new();
    for (l, s) in per.into_iter().enumerate() {
        for e in maximal_expand(ctx.table, l, s, budget)? {
            ids.push(concat.index(e, l));
        }
    }
    ids.sort_unstable();
    Ok(KnapsackResult {
        value: ctx.eval(&ids)?,
        selected,
        ids,
        repair,
    })
}

/// Grow a slot's element set until no element fits the rank and power
/// budgets, adding the largest min-rate gain first.
pub fn maximal_expand(table: &RateTable, slot: usize, ids: Vec<usize>, budget: &Budget) -> Result<Vec<usize>> {
    let ground = table.ground();
    if !budget.admits(ground, &ids) {
        return Err(Error::instance("cannot expand an infeasible codeword"));
    }
    let mut ids = ids;
    let mut chosen = vec![false; ground.len()];
    for &e in &ids {
        chosen[e] = true;
    }
    let min_rate = |ids: &[usize]| -> Result<f64> {
        Ok((0..table.users())
            .map(|k| table.rate(k, slot, ids))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    };
    loop {
        let base = min_rate(&ids)?;
        let mut best: Option<(usize, f64)> = None;
        for e in 0..ground.len() {
            if chosen[e] {
                continue;
            }
            ids.push(e);
            let fits = budget.admits(ground, &ids);
            let v = if fits { min_rate(&ids)? } else { 0.0 };
            ids.pop();
            if fits && best.is_none_or(|(_, bv)| v - base > bv) {
                best = Some((e, v - base));
            }
        }
        let Some((e, _)) = best else { break };
        ids.push(e);
        chosen[e] = true;
    }
    ids.sort_unstable();
    Ok(ids)
}

/// Whether no element can be added without breaking the budget.
pub fn is_maximal(ground: &GroundSet, ids: &[usize], budget: &Budget) -> bool {
    let mut v = ids.to_vec();
    (0..ground.len()).filter(|e| !ids.contains(e)).all(|e| {
        v.push(e);
        let ok = budget.admits(ground, &v);
        v.pop();
        !ok
    })
}

/// `ceil(Theta / Delta_min)`.
pub fn repeat_bound(theta: f64, delta: &[f64]) -> Result<usize> {
    let dmin = delta.iter().copied().fold(f64::INFINITY, f64::min);
    if !(dmin > 0.0) {
        return Err(Error::Precondition("per-interval rate vector must be strictly positive".into()));
    }
    Ok((theta / dmin).ceil() as usize)
}

/// One interval of a discrete schedule: element ids per slot.
pub type IntervalSets = Vec<Vec<usize>>;

/// Per-slot maximal codewords from the refined bisection, usable as the
/// feasible interval.
pub fn feasible_codewords(channels: &ChannelSet, ground: &GroundSet, budget: &Budget, eps: f64) -> Result<IntervalSets> {
    let single = |l: usize| -> Result<Vec<usize>> {
        let cfg = BisectionConfig {
            eps,
            rank_cap: budget.rank,
            ..BisectionConfig::default()
        };
        let sub = RateTable::new(&channels.slot(l), ground)?;
        let r = saturation_bisection_on(&sub, budget.power, &cfg)?;
        maximal_expand(&sub, 0, r.result.ids, budget)
    };
    (0..channels.slots()).map(single).collect()
}

/// Rates of `interval` per user (summed over slots).
pub fn interval_rates(table: &RateTable, interval: &IntervalSets) -> Result<Vec<f64>> {
    (0..table.users())
        .map(|k| interval.iter().enumerate().map(|(l, s)| table.rate(k, l, s)).sum())
        .collect()
}

pub fn exact_delay_discrete(table: &RateTable, schedule: &[IntervalSets], instance: &DelayInstance) -> Result<DelayOutcome> {
    let mut acc = vec![0.0; table.users()];
    let mut delays = vec![None; table.users()];
    for (t, interval) in schedule.iter().enumerate() {
        let r = interval_rates(table, interval)?;
        for k in 0..acc.len() {
            acc[k] += r[k];
            if delays[k].is_none() && acc[k] >= instance.theta() - COVER_SLACK {
                delays[k] = Some(t + 1);
            }
        }
    }
    let objective = delays
        .iter()
        .zip(instance.weights())
        .map(|(d, m)| d.map_or(f64::INFINITY, |d| m * d as f64))
        .sum();
    Ok(DelayOutcome { delays, objective })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSchedule {
    pub intervals: Vec<IntervalSets>,
    pub outcome: DelayOutcome,
    pub t_final: usize,
    /// Feasible intervals appended after the loop.
    pub augmented: usize,
    /// `ceil(Theta / Delta_min)`.
    pub repetition_cap: usize,
    /// Largest number of times one interval choice occurs.
    pub max_repetition: usize,
    /// Every greedy output (before expansion) satisfied `A x <= b`.
    pub knapsack_feasible: bool,
    /// `theta_k` after each interval.
    pub progress: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverConfig {
    /// `None` uses `2 L |F|`.
    pub lambda: Option<f64>,
    /// Safety cap on loop iterations.
    pub max_intervals: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            max_intervals: 10_000,
        }
    }
}

/// Interval-by-interval cover: each interval maximizes the truncated
/// residual progress of the still-active users.
pub fn delay_cover(instance: &DelayInstance, ground: &GroundSet, feasible: &IntervalSets, config: &CoverConfig) -> Result<CoverSchedule> {
    let table = RateTable::new(instance.channels(), ground)?;
    let budget = Budget::power(instance.power()).with_rank(instance.streams());
    let knap = build_knapsack(ground, table.slots(), instance.streams(), instance.power())?;
    let concat = ConcatGround::new(ground.len(), table.slots());
    let lambda = config.lambda.unwrap_or_else(|| default_lambda(&concat));
    if knap.width() < 1.0 {
        log::warn!("knapsack width {} is below 1; the approximation guarantee does not apply", knap.width());
    }
    if feasible.len() != table.slots() || feasible.iter().any(|s| !budget.admits(ground, s)) {
        return Err(Error::instance("feasible interval must hold one admissible codeword per slot"));
    }
    let delta = interval_rates(&table, feasible)?;
    if let Some(k) = delta.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Precondition(format!("feasible interval gives user {k} zero rate")));
    }
    let theta = instance.theta();
    let k = instance.users();
    let mut progress = vec![0.0; k];
    let mut active: Vec<usize> = (0..k).collect();
    let mut intervals: Vec<IntervalSets> = Vec::new();
    let mut history = Vec::new();
    let mut knapsack_feasible = true;
    loop {
        if intervals.len() >= config.max_intervals {
            break;
        }
        let ctx = FContext::new(&table, active.clone(), &progress, instance.weights(), theta)?;
        let res = greedy_knapsack(&ctx, &knap, lambda, &budget)?;
        knapsack_feasible &= knap.admits(&res.selected);
        let sets = concat.per_slot(&res.ids);
        let r = interval_rates(&table, &sets)?;
        let gained: f64 = active.iter().map(|&u| r[u]).sum();
        intervals.push(sets);
        for u in 0..k {
            progress[u] += r[u] / theta;
        }
        history.push(progress.clone());
        active.retain(|&u| progress[u] < 1.0);
        if active.is_empty() || (0..k).all(|u| progress[u] >= 1.0 - delta[u] / theta) || !(gained > GAIN_FLOOR) {
            break;
        }
    }
    let mut augmented = 0;
    while !exact_delay_discrete(&table, &intervals, instance)?.complete() {
        intervals.push(feasible.clone());
        augmented += 1;
    }
    let mut counts: HashMap<&IntervalSets, usize> = HashMap::new();
    for s in &intervals {
        *counts.entry(s).or_default() += 1;
    }
    let max_repetition = counts.values().copied().max().unwrap_or(0);
    Ok(CoverSchedule {
        outcome: exact_delay_discrete(&table, &intervals, instance)?,
        t_final: intervals.len(),
        augmented,
        repetition_cap: repeat_bound(theta, &delta)?,
        max_repetition,
        knapsack_feasible,
        progress: history,
        intervals,
    })
}

/// Every maximal admissible subset of a small ground set (at most 20
/// elements); `None` if there are more than `cap`.
pub fn maximal_sets(ground: &GroundSet, budget: &Budget, cap: usize) -> Result<Option<Vec<Vec<usize>>>> {
    let n = ground.len();
    if n > crate::discrete::BRUTE_FORCE_CAP {
        return Err(Error::config("too many elements for enumeration"));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let ids: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if budget.admits(ground, &ids) && is_maximal(ground, &ids, budget) {
            out.push(ids);
            if out.len() > cap {
                return Ok(None);
            }
        }
    }
    Ok(Some(out))
}

/// Optimal weighted sum delay using only maximal codewords, by depth-first
/// search over interval sequences up to `horizon` (single-slot instances).
/// `None` when there are more than `set_cap` maximal sets or no sequence
/// within the horizon covers every user.
pub fn brute_force_delay(instance: &DelayInstance, ground: &GroundSet, horizon: usize, set_cap: usize) -> Result<Option<(f64, Vec<Vec<usize>>)>> {
    if instance.slots_per_interval() != 1 {
        return Err(Error::config("brute-force delay search supports a single slot per interval"));
    }
    if horizon > 8 || set_cap > 6 {
        return Err(Error::config("brute-force delay search is capped at horizon 8 and 6 maximal sets"));
    }
    let budget = Budget::power(instance.power()).with_rank(instance.streams());
    let Some(sets) = maximal_sets(ground, &budget, set_cap)? else {
        return Ok(None);
    };
    let table = RateTable::new(instance.channels(), ground)?;
    let rates: Vec<Vec<f64>> = sets.iter().map(|s| table.rates(0, s)).collect::<Result<_>>()?;
    let mut search = Dfs {
        rates: &rates,
        mu: instance.weights(),
        theta: instance.theta(),
        horizon,
        best: f64::INFINITY,
        best_seq: Vec::new(),
        seq: Vec::new(),
    };
    search.run(&vec![0.0; instance.users()], &vec![false; instance.users()], 0.0);
    if search.best.is_finite() {
        let seq = search.best_seq.iter().map(|&i| sets[i].clone()).collect();
        Ok(Some((search.best, seq)))
    } else {
        Ok(None)
    }
}

struct Dfs<'a> {
    rates: &'a [Vec<f64>],
    mu: &'a [f64],
    theta: f64,
    horizon: usize,
    best: f64,
    best_seq: Vec<usize>,
    seq: Vec<usize>,
}

impl Dfs<'_> {
    fn run(&mut self, acc: &[f64], done: &[bool], cost: f64) {
        let depth = self.seq.len();
        if done.iter().all(|d| *d) {
            if cost < self.best {
                self.best = cost;
                self.best_seq = self.seq.clone();
            }
            return;
        }
        if depth == self.horizon {
            return;
        }
        let pending: f64 = done.iter().zip(self.mu).filter(|(d, _)| !**d).map(|(_, m)| m).sum();
        if cost + pending * (depth + 1) as f64 >= self.best {
            return;
        }
        for (i, r) in self.rates.iter().enumerate() {
            let mut a = acc.to_vec();
            let mut d = done.to_vec();
            let mut c = cost;
            for k in 0..a.len() {
                a[k] += r[k];
                if !d[k] && a[k] >= self.theta - COVER_SLACK {
                    d[k] = true;
                    c += self.mu[k] * (depth + 1) as f64;
                }
            }
            self.seq.push(i);
            self.run(&a, &d, c);
            self.seq.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_base_codebook, generate_rayleigh, CodebookKind};

    fn setup(seed: u64, users: usize, slots: usize, codewords: usize) -> (GroundSet, ChannelSet) {
        let ch = generate_rayleigh(seed, users, 2, &vec![1; users], slots).unwrap();
        let cw = generate_base_codebook(CodebookKind::RandomIsotropic { seed: seed + 7 }, 2, codewords).unwrap();
        (GroundSet::with_power_levels(&cw, &[1.0, 2.0]).unwrap(), ch)
    }

    #[test]
    fn knapsack_shapes_and_width() {
        let (g, _) = setup(1, 1, 1, 2);
        let k1 = build_knapsack(&g, 1, 2, 2.0).unwrap();
        assert_eq!((k1.a.nrows(), k1.a.ncols()), (2, 4));
        assert_eq!(k1.a[(0, 1)], 1.0);
        assert_eq!(k1.a[(1, 2)], 1.0);
        let k2 = build_knapsack(&g, 2, 2, 2.0).unwrap();
        assert_eq!((k2.a.nrows(), k2.a.ncols()), (4, 8));
        assert_eq!(k2.a[(0, 4)], 0.0);
        assert_eq!(k2.a[(2, 4)], 1.0);
        assert!((k1.width() - 1.0).abs() < 1e-15);
        for j in 0..k2.a.ncols() {
            assert_eq!(k2.a.column(j).iter().filter(|v| **v > 0.0).count(), 2);
        }
    }

    #[test]
    fn f_of_empty_and_saturated() {
        let (g, ch) = setup(2, 1, 1, 2);
        let t = RateTable::new(&ch, &g).unwrap();
        assert_eq!(eval_f(&[], &t, &[0], &[0.0], 5.0, &[0.7]).unwrap(), 0.0);
        let v = eval_f(&[0, 1, 2, 3], &t, &[0], &[0.0], 1e-6, &[0.7]).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
        assert!(eval_f(&[], &t, &[0], &[1.0], 5.0, &[0.7]).is_err());
    }

    #[test]
    fn greedy_output_is_feasible_and_maximal() {
        for seed in 0..10 {
            let (g, ch) = setup(seed, 2, 2, 4);
            let t = RateTable::new(&ch, &g).unwrap();
            let knap = build_knapsack(&g, 2, 2, 2.0).unwrap();
            let ctx = FContext::new(&t, vec![0, 1], &[0.0, 0.3], &[0.5, 0.5], 4.0).unwrap();
            let budget = Budget::power(2.0).with_rank(2);
            let r = greedy_knapsack(&ctx, &knap, default_lambda(&ctx.concat()), &budget).unwrap();
            assert!(knap.admits(&r.selected));
            assert!(knap.admits(&r.ids));
            for s in ctx.concat().per_slot(&r.ids) {
                assert!(is_maximal(&g, &s, &budget));
            }
        }
    }

    #[test]
    fn zero_channels_expand_only() {
        let (g, _) = setup(3, 1, 1, 3);
        let ch = ChannelSet::single_slot(vec![crate::linalg::CMat::zeros(1, 2)]).unwrap();
        let t = RateTable::new(&ch, &g).unwrap();
        let knap = build_knapsack(&g, 1, 2, 3.0).unwrap();
        let ctx = FContext::new(&t, vec![0], &[0.0], &[1.0], 1.0).unwrap();
        let budget = Budget::power(3.0).with_rank(2);
        let r = greedy_knapsack(&ctx, &knap, default_lambda(&ctx.concat()), &budget).unwrap();
        assert!(r.selected.is_empty());
        assert!(is_maximal(&g, &r.ids, &budget) && !r.ids.is_empty());
    }

    #[test]
    fn repeat_bound_ceiling() {
        assert_eq!(repeat_bound(10.0, &[2.0, 5.0]).unwrap(), 5);
        assert_eq!(repeat_bound(10.0, &[3.0]).unwrap(), 4);
        assert!(repeat_bound(10.0, &[0.0]).is_err());
    }

    #[test]
    fn cover_reaches_threshold() {
        let (g, ch) = setup(5, 3, 1, 4);
        let inst = DelayInstance::uniform(ch, 6.0, 2.0, 2).unwrap();
        let budget = Budget::power(2.0).with_rank(2);
        let f = feasible_codewords(inst.channels(), &g, &budget, 0.01).unwrap();
        let s = delay_cover(&inst, &g, &f, &CoverConfig::default()).unwrap();
        assert!(s.outcome.complete());
        assert!(s.knapsack_feasible);
        assert!(s.max_repetition <= s.repetition_cap);
    }
}
