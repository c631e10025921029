//! Max-min rate over the discrete codebook: subsets of a ground set of
//! `(codeword, rank, power)` elements under a power (and optional rank) budget.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelSet, GroundSet, RateTable};

/// Gains at or below this are treated as zero.
pub const GAIN_FLOOR: f64 = 1e-12;

fn power_ok(used: f64, budget: f64) -> bool {
    used <= budget + 1e-12 * budget.abs()
}

/// Feasibility test `r_U <= d` and `p_U <= P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub power: f64,
    /// Rank cap `d`; `None` drops the rank constraint.
    pub rank: Option<usize>,
}

impl Budget {
    pub fn power(power: f64) -> Self {
        Self { power, rank: None }
    }

    pub fn with_rank(self, d: usize) -> Self {
        Self { rank: Some(d), ..self }
    }

    pub fn admits(&self, ground: &GroundSet, ids: &[usize]) -> bool {
        power_ok(ground.power_of(ids), self.power) && self.rank.is_none_or(|d| ground.rank_of(ids) <= d)
    }

    /// Whether `ids + {e}` is admissible given the sums over `ids`.
    fn admits_extra(&self, ground: &GroundSet, rank: usize, power: f64, e: usize) -> bool {
        let el = &ground.elements()[e];
        power_ok(power + el.power(), self.power) && self.rank.is_none_or(|d| rank + el.rank() <= d)
    }

    fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::config(format!("power budget must be finite and nonnegative, got {}", self.power)));
        }
        Ok(())
    }
}

/// Ground set restricted to subsets of total rank at most `d`.
#[derive(Debug, Clone, Copy)]
pub struct RankFilter<'a> {
    ground: &'a GroundSet,
    d: usize,
}

pub fn rank_constrained_filter(ground: &GroundSet, d: usize) -> RankFilter<'_> {
    RankFilter { ground, d }
}

impl RankFilter<'_> {
    pub fn feasible(&self, ids: &[usize], power: f64) -> bool {
        Budget::power(power).with_rank(self.d).admits(self.ground, ids)
    }

    pub fn budget(&self, power: f64) -> Budget {
        Budget::power(power).with_rank(self.d)
    }
}

/// `(1/K) sum_k min(R_k(U), c)` on a single slot.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedAverage<'a> {
    table: &'a RateTable,
    level: f64,
}

impl<'a> TruncatedAverage<'a> {
    pub fn new(table: &'a RateTable, level: f64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::config(format!("truncation level must be finite and nonnegative, got {level}")));
        }
        if table.slots() != 1 {
            return Err(Error::instance("truncated average needs a single-slot rate table"));
        }
        Ok(Self { table, level })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn table(&self) -> &'a RateTable {
        self.table
    }

    pub fn value(&self, ids: &[usize]) -> Result<f64> {
        let k = self.table.users();
        let mut acc = 0.0;
        for user in 0..k {
            acc += self.table.rate(user, 0, ids)?.min(self.level);
        }
        Ok(acc / k as f64)
    }
}

/// How the greedy loops find the best candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scan {
    #[default]
    Naive,
    /// Priority queue of stale marginal-gain bounds.
    Lazy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverResult {
    pub ids: Vec<usize>,
    pub value: f64,
    pub power: f64,
    /// False when the loop ran out of useful elements before reaching `c(1 - delta)`.
    pub covered: bool,
}

/// Score of a candidate: zero-power elements with positive gain come first.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    free: bool,
    value: f64,
}

impl Score {
    fn of(gain: f64, power: f64) -> Option<Self> {
        if !(gain > GAIN_FLOOR) {
            return None;
        }
        Some(if power > 0.0 {
            Score { free: false, value: gain / power }
        } else {
            Score { free: true, value: gain }
        })
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.free.cmp(&other.free).then(self.value.total_cmp(&other.value))
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: Score,
    id: usize,
    round: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: best score, then lowest id
        self.score.cmp(&other.score).then(other.id.cmp(&self.id))
    }
}

/// Greedy cost-benefit cover: add `argmax_e gain_e / p_e` until the truncated
/// average reaches `c(1 - delta)`. With `restrict`, only elements keeping the
/// set admissible are considered.
pub fn greedy_cover(trunc: &TruncatedAverage, delta: f64, restrict: Option<&Budget>, scan: Scan) -> Result<CoverResult> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::config(format!("delta must lie in [0, 1), got {delta}")));
    }
    let ground = trunc.table.ground();
    let n = ground.len();
    let target = trunc.level * (1.0 - delta);
    let slack = 1e-12 * trunc.level.max(1.0);
    let mut ids: Vec<usize> = Vec::new();
    let mut chosen = vec![false; n];
    let mut value = trunc.value(&ids)?;
    let (mut rank, mut power) = (0usize, 0.0);
    let mut heap: BinaryHeap<Entry> = BinaryHeap::new();
    let mut round = 0;
    if scan == Scan::Lazy {
        for e in 0..n {
            let gain = trunc.value(&[e])? - value;
            if let Some(score) = Score::of(gain, ground.elements()[e].power()) {
                heap.push(Entry { score, id: e, round: 0 });
            }
        }
    }
    while value < target - slack && ids.len() < n {
        let admissible = |e: usize| restrict.is_none_or(|b| b.admits_extra(ground, rank, power, e));
        let mut pick: Option<(usize, f64)> = None;
        match scan {
            Scan::Naive => {
                let mut best: Option<(Score, usize, f64)> = None;
                for e in 0..n {
                    if chosen[e] || !admissible(e) {
                        continue;
                    }
                    ids.push(e);
                    let v = trunc.value(&ids)?;
                    ids.pop();
                    if let Some(s) = Score::of(v - value, ground.elements()[e].power()) {
                        if best.as_ref().is_none_or(|(b, _, _)| s.cmp(b) == Ordering::Greater) {
                            best = Some((s, e, v));
                        }
                    }
                }
                pick = best.map(|(_, e, v)| (e, v));
            }
            Scan::Lazy => {
                while let Some(top) = heap.pop() {
                    if !admissible(top.id) {
                        continue;
                    }
                    ids.push(top.id);
                    let v = trunc.value(&ids)?;
                    ids.pop();
                    if top.round == round {
                        pick = Some((top.id, v));
                        break;
                    }
                    if let Some(score) = Score::of(v - value, ground.elements()[top.id].power()) {
                        heap.push(Entry { score, id: top.id, round });
                    }
                }
            }
        }
        let Some((e, v)) = pick else { break };
        ids.push(e);
        chosen[e] = true;
        value = v;
        rank += ground.elements()[e].rank();
        power += ground.elements()[e].power();
        round += 1;
    }
    Ok(CoverResult {
        covered: value >= target - slack,
        ids,
        value,
        power,
    })
}

/// Smallest-power subset with truncated average at least `target`, by
/// exhaustive search (at most 20 elements).
pub fn min_power_cover(trunc: &TruncatedAverage, target: f64) -> Result<Option<(Vec<usize>, f64)>> {
    let ground = trunc.table.ground();
    let n = ground.len();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::config(format!("exhaustive search capped at {BRUTE_FORCE_CAP} elements, got {n}")));
    }
    let slack = 1e-12 * trunc.level.max(1.0);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 0u32..(1u32 << n) {
        let ids = mask_ids(mask, n);
        let p = ground.power_of(&ids);
        if best.as_ref().is_some_and(|(_, bp)| p >= *bp) {
            continue;
        }
        if trunc.value(&ids)? >= target - slack {
            best = Some((ids, p));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionConfig {
    /// Cover gap `delta` in `[0, 1)`.
    pub delta: f64,
    /// Bisection width.
    pub eps: f64,
    /// Budget `P` instead of `P(1 + ln(1/delta))` and search restricted to
    /// elements that keep `p <= P`.
    pub refine: bool,
    pub rank_cap: Option<usize>,
    pub scan: Scan,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            eps: 0.01,
            refine: true,
            rank_cap: None,
            scan: Scan::Naive,
        }
    }
}

impl BisectionConfig {
    /// `delta = 1/(2K)` without refinements.
    pub fn guarantee(users: usize) -> Self {
        Self {
            delta: 1.0 / (2.0 * users.max(1) as f64),
            refine: false,
            ..Self::default()
        }
    }

    /// Multiplier on `P` used by the feasibility decision.
    pub fn inflation(&self) -> f64 {
        if self.refine {
            1.0
        } else {
            1.0 + (1.0 / self.delta).ln()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::config(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if !self.refine && self.delta == 0.0 {
            return Err(Error::config("delta = 0 needs the refined mode"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config(format!("epsilon must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// A chosen subset with its rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteResult {
    pub ids: Vec<usize>,
    pub rates: Vec<f64>,
    pub min_rate: f64,
    pub power: f64,
    pub rank: usize,
}

impl DiscreteResult {
    fn of(table: &RateTable, ids: Vec<usize>) -> Result<Self> {
        let rates = table.rates(0, &ids)?;
        let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let ground = table.ground();
        Ok(Self {
            power: ground.power_of(&ids),
            rank: ground.rank_of(&ids),
            rates,
            min_rate,
            ids,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionResult {
    pub result: DiscreteResult,
    /// Number of greedy cover calls.
    pub cover_calls: usize,
    /// Final `[c_min, c_max]`.
    pub bracket: (f64, f64),
}

fn single_slot_table(ground: &GroundSet, channels: &ChannelSet) -> Result<RateTable> {
    if channels.slots() != 1 {
        return Err(Error::instance("max-min rate needs a single-slot channel set"));
    }
    RateTable::new(channels, ground)
}

/// Bisection on the common rate `c`, deciding each `c` with a greedy cover.
pub fn saturation_bisection(ground: &GroundSet, channels: &ChannelSet, power: f64, config: &BisectionConfig) -> Result<BisectionResult> {
    config.validate()?;
    Budget::power(power).validate()?;
    let table = single_slot_table(ground, channels)?;
    saturation_bisection_on(&table, power, config)
}

pub(crate) fn saturation_bisection_on(table: &RateTable, power: f64, config: &BisectionConfig) -> Result<BisectionResult> {
    let ground = table.ground();
    if ground.is_empty() {
        return Ok(BisectionResult {
            result: DiscreteResult::of(table, Vec::new())?,
            cover_calls: 0,
            bracket: (0.0, 0.0),
        });
    }
    let all: Vec<usize> = (0..ground.len()).collect();
    let budget = Budget {
        power: power * config.inflation(),
        rank: config.rank_cap,
    };
    let search = Budget {
        power,
        rank: config.rank_cap,
    };
    let restrict = if config.refine {
        Some(search)
    } else {
        config.rank_cap.map(|d| Budget {
            power: f64::INFINITY,
            rank: Some(d),
        })
    };
    let (mut lo, mut hi) = (0.0, table.min_rate(0, &all)?);
    let mut best: Vec<usize> = Vec::new();
    let mut calls = 0;
    while hi - lo > config.eps {
        let c = 0.5 * (lo + hi);
        let trunc = TruncatedAverage::new(table, c)?;
        let cover = greedy_cover(&trunc, config.delta, restrict.as_ref(), config.scan)?;
        calls += 1;
        if !cover.covered || !budget.admits(ground, &cover.ids) {
            hi = c;
        } else {
            lo = c;
            best = cover.ids;
        }
    }
    Ok(BisectionResult {
        result: DiscreteResult::of(table, best)?,
        cover_calls: calls,
        bracket: (lo, hi),
    })
}

/// Add the admissible element with the largest min-rate increase until none
/// improves it.
pub fn simple_greedy(ground: &GroundSet, channels: &ChannelSet, budget: &Budget) -> Result<DiscreteResult> {
    budget.validate()?;
    let table = single_slot_table(ground, channels)?;
    let mut ids: Vec<usize> = Vec::new();
    let mut chosen = vec![false; ground.len()];
    let mut current = 0.0;
    loop {
        let (rank, power) = (ground.rank_of(&ids), ground.power_of(&ids));
        let mut best: Option<(usize, f64)> = None;
        for e in 0..ground.len() {
            if chosen[e] || !budget.admits_extra(ground, rank, power, e) {
                continue;
            }
            ids.push(e);
            let v = table.min_rate(0, &ids)?;
            ids.pop();
            if v - current > GAIN_FLOOR && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((e, v));
            }
        }
        let Some((e, v)) = best else { break };
        ids.push(e);
        chosen[e] = true;
        current = v;
    }
    DiscreteResult::of(&table, ids)
}

pub const BRUTE_FORCE_CAP: usize = 20;

fn mask_ids(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

/// Exact optimum by enumerating every admissible subset.
pub fn brute_force_maxmin(ground: &GroundSet, channels: &ChannelSet, budget: &Budget) -> Result<DiscreteResult> {
    budget.validate()?;
    let n = ground.len();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::config(format!("exhaustive search capped at {BRUTE_FORCE_CAP} elements, got {n}")));
    }
    let table = single_slot_table(ground, channels)?;
    let mut best: (Vec<usize>, f64) = (Vec::new(), 0.0);
    for mask in 1u32..(1u32 << n) {
        let ids = mask_ids(mask, n);
        if !budget.admits(ground, &ids) {
            continue;
        }
        let v = table.min_rate(0, &ids)?;
        if v > best.1 {
            best = (ids, v);
        }
    }
    DiscreteResult::of(&table, best.0)
}
