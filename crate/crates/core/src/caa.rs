//! Cyclic alternating ascent for max-min rate over the power ball, its
//! stationarity check, and the two fixed baselines (open loop, rec-type).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{solve_maxmin_socp, MaxMinSocp, SolverReport, SolverStatus};
use crate::error::{Error, Result};
use crate::linalg::{c, frob2, to_real_vec, CMat};
use crate::model::{complex_gaussian, rate, rate_gradient, ChannelSet, Precoder, ReceiveFilter, SlackMatrix};

/// Starting point of the ascent.
#[derive(Debug, Clone, PartialEq)]
pub enum CaaInit {
    /// i.i.d. complex Gaussian entries scaled to full power.
    Random { seed: u64 },
    /// The rec-type baseline, see [`rec_type_precoder`].
    RecType,
    Given(Precoder),
}

#[derive(Debug, Clone)]
pub struct CaaConfig {
    pub max_outer_iters: usize,
    /// Stop once `|g_{i+1} - g_i| <= obj_tol (1 + |g_i|)`.
    pub obj_tol: f64,
    /// When set, additionally require `kkt_residual <= kkt_tol` before stopping.
    pub kkt_tol: Option<f64>,
    pub solver_tol: f64,
    pub init: CaaInit,
}

impl Default for CaaConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            obj_tol: 1e-5,
            kkt_tol: None,
            solver_tol: 1e-9,
            init: CaaInit::Random { seed: 0 },
        }
    }
}

impl CaaConfig {
    pub fn with_init(init: CaaInit) -> Self {
        Self { init, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::config("max_outer_iters must be at least 1"));
        }
        if !(self.obj_tol > 0.0) || !(self.solver_tol > 0.0) || self.kkt_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::config("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Iterate of the ascent: precoder, per-user filters and slacks, and the
/// objective history `g_0, g_1, ...` (min rate before each precoder update).
#[derive(Debug, Clone)]
pub struct CaaState {
    pub w: Precoder,
    pub filters: Vec<ReceiveFilter>,
    pub slacks: Vec<SlackMatrix>,
    pub iterations: usize,
    pub objective: Vec<f64>,
    pub solver: Vec<SolverReport>,
    /// Precoder updates rejected because the solver did not improve the
    /// surrogate (the previous precoder was kept).
    pub rejected: usize,
}

/// Serializable view of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaaTrace {
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub rejected: usize,
    pub non_optimal_solves: usize,
    pub solver: Vec<SolverReport>,
}

#[derive(Debug, Clone)]
pub struct CaaResult {
    pub w: Precoder,
    pub min_rate: f64,
    pub rates: Vec<f64>,
    pub kkt_residual: f64,
    pub state: CaaState,
}

impl CaaResult {
    pub fn trace(&self) -> CaaTrace {
        CaaTrace {
            objective: self.state.objective.clone(),
            iterations: self.state.iterations,
            kkt_residual: self.kkt_residual,
            rejected: self.state.rejected,
            non_optimal_solves: self.state.solver.iter().filter(|r| r.status != SolverStatus::Optimal).count(),
            solver: self.state.solver.clone(),
        }
    }
}

fn single_slot(channels: &ChannelSet) -> Result<Vec<&CMat>> {
    if channels.slots() != 1 {
        return Err(Error::instance(format!(
            "instantaneous-rate design needs a single-slot channel set, got L = {}",
            channels.slots()
        )));
    }
    Ok((0..channels.users()).map(|k| channels.channel(k, 0)).collect())
}

fn check_budget(streams: usize, power: f64) -> Result<()> {
    if streams == 0 {
        return Err(Error::config("stream count d must be at least 1"));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::config(format!("power budget must be positive, got {power}")));
    }
    Ok(())
}

pub fn rates_of(h: &[&CMat], w: &Precoder) -> Result<Vec<f64>> {
    h.iter().map(|hk| rate(hk, w)).collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Random full-power starting precoder.
pub fn random_precoder(tx: usize, streams: usize, power: f64, seed: u64) -> Precoder {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Precoder::new(complex_gaussian(tx, streams, &mut rng))
        .expect("finite gaussian draw")
        .scaled_to(power)
}

/// Max-min rate precoder for a single-slot channel set.
pub fn caa_instant_rate(channels: &ChannelSet, streams: usize, power: f64, config: &CaaConfig) -> Result<CaaResult> {
    let h = single_slot(channels)?;
    caa_on(&h, streams, power, config)
}

pub(crate) fn caa_on(h: &[&CMat], streams: usize, power: f64, config: &CaaConfig) -> Result<CaaResult> {
    check_budget(streams, power)?;
    config.validate()?;
    let tx = h[0].ncols();
    let mut w = match &config.init {
        CaaInit::Random { seed } => random_precoder(tx, streams, power, *seed),
        CaaInit::RecType => rec_type_on(h, streams, power)?,
        CaaInit::Given(w0) => {
            if w0.tx_antennas() != tx || w0.streams() != streams {
                return Err(Error::instance("initial precoder has the wrong shape"));
            }
            w0.clamped_to(power)
        }
    };

    let mut objective = Vec::new();
    let mut solver = Vec::new();
    let mut rejected = 0;
    let mut iterations = 0;
    let mut prob;
    loop {
        // filter and slack updates make the surrogate tight at w
        prob = MaxMinSocp::around(h, &w, power)?;
        let g = min_of(&rates_of(h, &w)?);
        if !g.is_finite() {
            return Err(Error::numeric("non-finite rate during ascent"));
        }
        let prev = objective.last().copied();
        objective.push(g);
        if let Some(p) = prev {
            let flat = (g - p).abs() <= config.obj_tol * (1.0 + p.abs());
            let stationary = match config.kkt_tol {
                Some(t) => flat && kkt_on(&w, h, power)? <= t,
                None => flat,
            };
            if stationary {
                break;
            }
        }
        if iterations == config.max_outer_iters {
            break;
        }
        iterations += 1;
        let sol = solve_maxmin_socp(&prob, config.solver_tol)?;
        solver.push(sol.report.clone());
        // the surrogate lower-bounds the rate, so beta >= g means ascent
        if sol.beta >= g - ASCENT_SLACK {
            w = sol.w;
        } else {
            // no ascent available at solver accuracy: w is a fixed point
            rejected += 1;
            break;
        }
    }

    let rates = rates_of(h, &w)?;
    let min_rate = min_of(&rates);
    let kkt = kkt_on(&w, h, power)?;
    let filters = prob.users().iter().map(|u| u.g.clone()).collect();
    let slacks = prob.users().iter().map(|u| u.s.clone()).collect();
    Ok(CaaResult {
        w: w.clone(),
        min_rate,
        rates,
        kkt_residual: kkt,
        state: CaaState {
            w,
            filters,
            slacks,
            iterations,
            objective,
            solver,
            rejected,
        },
    })
}

/// Precoder steps that lose at most this much surrogate value (solver
/// accuracy) are still taken.
pub const ASCENT_SLACK: f64 = 1e-9;

/// Users whose rate is within `1e-6` of the minimum.
pub const ACTIVE_TIE_TOL: f64 = 1e-6;

/// Stationarity residual of the max-min problem at `w`:
/// `min |sum_k lambda_k grad_k - nu W|` over convex weights on the active
/// users and `nu >= 0` (`nu = 0` when the power constraint is slack).
pub fn kkt_residual(w: &Precoder, channels: &ChannelSet, power: f64) -> Result<f64> {
    let h = single_slot(channels)?;
    kkt_on(w, &h, power)
}

pub(crate) fn kkt_on(w: &Precoder, h: &[&CMat], power: f64) -> Result<f64> {
    let rates = rates_of(h, w)?;
    let rmin = min_of(&rates);
    let active: Vec<usize> = (0..h.len()).filter(|&k| rates[k] <= rmin + ACTIVE_TIE_TOL).collect();
    let grads: Vec<DVector<f64>> = active
        .iter()
        .map(|&k| rate_gradient(h[k], w).map(|g| to_real_vec(&g)))
        .collect::<Result<_>>()?;
    let power_active = w.power() >= power - 1e-6;
    let wv = to_real_vec(w.matrix());
    Ok(simplex_residual(&grads, power_active.then_some(&wv)))
}

/// `min |sum_i lambda_i g_i - nu v|` over the simplex and `nu >= 0`.
pub(crate) fn simplex_residual(grads: &[DVector<f64>], v: Option<&DVector<f64>>) -> f64 {
    let a = grads.len();
    let mut cols: Vec<DVector<f64>> = grads.to_vec();
    if let Some(v) = v {
        cols.push(-v);
    }
    let n = cols.len();
    let gram = DMatrix::from_fn(n, n, |i, j| cols[i].dot(&cols[j]));
    if a <= 10 {
        let mut best = f64::INFINITY;
        let with_nu: &[bool] = if v.is_some() { &[false, true] } else { &[false] };
        for mask in 1u32..(1 << a) {
            for &nu in with_nu {
                let mut idx: Vec<usize> = (0..a).filter(|i| mask & (1 << i) != 0).collect();
                if nu {
                    idx.push(a);
                }
                if let Some(val) = restricted_ls(&gram, &idx, a) {
                    best = best.min(val);
                }
            }
        }
        best.max(0.0).sqrt()
    } else {
        fista_residual(&gram, a, v.is_some()).max(0.0).sqrt()
    }
}

/// Equality-constrained least squares on the support `idx`; `None` if the
/// minimizer leaves the feasible set.
fn restricted_ls(gram: &DMatrix<f64>, idx: &[usize], n_lambda: usize) -> Option<f64> {
    let s = idx.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    let mut rhs = DVector::zeros(s + 1);
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            kkt[(p, q)] = gram[(i, j)];
        }
        if i < n_lambda {
            kkt[(p, s)] = 1.0;
            kkt[(s, p)] = 1.0;
        }
    }
    rhs[s] = 1.0;
    let sol = kkt.clone().svd(true, true).solve(&rhs, 1e-14).ok()?;
    let y = sol.rows(0, s);
    if y.iter().any(|&v| v < -1e-12) || !y.iter().all(|v| v.is_finite()) {
        return None;
    }
    let lam_sum: f64 = idx.iter().zip(y.iter()).filter(|(i, _)| **i < n_lambda).map(|(_, v)| v).sum();
    if (lam_sum - 1.0).abs() > 1e-8 {
        return None;
    }
    let mut val = 0.0;
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            val += y[p] * gram[(i, j)] * y[q];
        }
    }
    Some(val)
}

fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn fista_residual(gram: &DMatrix<f64>, a: usize, with_nu: bool) -> f64 {
    let n = gram.nrows();
    let lip = gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max).max(1e-300);
    let project = |y: &mut DVector<f64>| {
        project_simplex(&mut y.as_mut_slice()[..a]);
        if with_nu {
            y[a] = y[a].max(0.0);
        }
    };
    let mut y = DVector::from_element(n, 0.0);
    for i in 0..a {
        y[i] = 1.0 / a as f64;
    }
    let mut z = y.clone();
    let mut t: f64 = 1.0;
    for _ in 0..20_000 {
        let grad = gram * &z;
        let mut next = &z - grad / lip;
        project(&mut next);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + (&next - &y) * ((t - 1.0) / t_next);
        y = next;
        t = t_next;
    }
    y.dot(&(gram * &y))
}

/// Scaled identity precoder: the first `d` columns of `sqrt(P/d) I`.
pub fn open_loop_precoder(tx: usize, streams: usize, power: f64) -> Result<Precoder> {
    check_budget(streams, power)?;
    if streams > tx {
        return Err(Error::config(format!("open-loop precoder needs d <= M, got d = {streams}, M = {tx}")));
    }
    let s = (power / streams as f64).sqrt();
    Precoder::new(CMat::from_fn(tx, streams, |i, j| if i == j { c(s, 0.0) } else { c(0.0, 0.0) }))
}

/// Beamform towards the weakest user: the channel with the smallest Frobenius
/// norm, conjugate-transposed and truncated to its `d` dominant singular
/// components, scaled to `|W|_F^2 = P`. Columns beyond the channel's rank are
/// zero.
pub fn rec_type_precoder(channels: &ChannelSet, streams: usize, power: f64) -> Result<Precoder> {
    let h = single_slot(channels)?;
    rec_type_on(&h, streams, power)
}

pub(crate) fn rec_type_on(h: &[&CMat], streams: usize, power: f64) -> Result<Precoder> {
    check_budget(streams, power)?;
    let tx = h[0].ncols();
    let mut worst = 0;
    for k in 1..h.len() {
        if frob2(h[k]) < frob2(h[worst]) {
            worst = k;
        }
    }
    let hw = h[worst];
    if frob2(hw) == 0.0 {
        return open_loop_precoder(tx, streams.min(tx), power).map(|w| pad_columns(w.into_matrix(), streams));
    }
    let svd = hw.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::numeric("SVD failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut w = CMat::zeros(tx, streams);
    for (j, &i) in order.iter().filter(|&&i| svd.singular_values[i] > 0.0).take(streams).enumerate() {
        w.set_column(j, &(vt.row(i).adjoint() * c(svd.singular_values[i], 0.0)));
    }
    Ok(Precoder::new(w)?.scaled_to(power))
}

fn pad_columns(w: CMat, streams: usize) -> Precoder {
    let mut out = CMat::zeros(w.nrows(), streams);
    out.view_mut((0, 0), (w.nrows(), w.ncols())).copy_from(&w);
    Precoder::new(out).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_rayleigh, lmmse_filter, mse_matrix, surrogate};

    fn miso(seed: u64, tx: usize) -> ChannelSet {
        generate_rayleigh(seed, 1, tx, &[1], 1).unwrap()
    }

    #[test]
    fn single_user_reaches_matched_filter_rate() {
        let ch = miso(3, 4);
        let h = ch.channel(0, 0);
        let target = (1.0 + 10.0 * frob2(h)).ln();
        let res = caa_instant_rate(&ch, 1, 10.0, &CaaConfig::default()).unwrap();
        assert!((res.min_rate - target).abs() < 1e-3, "{} vs {target}", res.min_rate);
    }

    #[test]
    fn zero_channels_stop_quickly() {
        let ch = ChannelSet::single_slot(vec![CMat::zeros(1, 3), CMat::zeros(2, 3)]).unwrap();
        let res = caa_instant_rate(&ch, 2, 10.0, &CaaConfig::default()).unwrap();
        assert_eq!(res.min_rate, 0.0);
        assert!(res.state.iterations <= 2);
    }

    #[test]
    fn objective_trace_is_monotone() {
        for seed in 0..5 {
            let ch = generate_rayleigh(seed, 4, 3, &[2, 1, 2, 1], 1).unwrap();
            let res = caa_instant_rate(&ch, 2, 10.0, &CaaConfig::default()).unwrap();
            for pair in res.state.objective.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9, "{:?}", res.state.objective);
            }
            assert!(res.w.power() <= 10.0 + 1e-9);
            assert!((res.min_rate - res.state.objective.last().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_is_tight_after_filter_and_slack_update() {
        let ch = generate_rayleigh(8, 3, 4, &[2, 2, 1], 1).unwrap();
        let w = random_precoder(4, 2, 10.0, 1);
        for k in 0..3 {
            let h = ch.channel(k, 0);
            let g = lmmse_filter(h, &w).unwrap();
            let s = SlackMatrix::optimal(h, &w).unwrap();
            assert!((surrogate(h, &w, &g, &s).unwrap() - rate(h, &w).unwrap()).abs() < 1e-8);
            let _ = mse_matrix(h, &w, &g).unwrap();
        }
    }

    #[test]
    fn fixed_point_is_consistent() {
        let ch = generate_rayleigh(21, 3, 2, &[1, 1, 1], 1).unwrap();
        let res = caa_instant_rate(&ch, 2, 10.0, &CaaConfig::default()).unwrap();
        for k in 0..3 {
            let h = ch.channel(k, 0);
            let g = lmmse_filter(h, &res.w).unwrap();
            let s = SlackMatrix::optimal(h, &res.w).unwrap();
            let dg = frob2(&(g.matrix() - res.state.filters[k].matrix())).sqrt() / frob2(g.matrix()).sqrt().max(1e-12);
            let ds = frob2(&(s.matrix() - res.state.slacks[k].matrix())).sqrt() / frob2(s.matrix()).sqrt();
            assert!(dg <= 1e-5 && ds <= 1e-5, "{dg} {ds}");
        }
    }

    #[test]
    fn kkt_small_at_matched_filter() {
        let ch = miso(5, 3);
        let h = ch.channel(0, 0);
        let w = Precoder::new(h.adjoint()).unwrap().scaled_to(10.0);
        assert!(kkt_residual(&w, &ch, 10.0).unwrap() <= 1e-6);
    }

    #[test]
    fn kkt_positive_at_origin() {
        let ch = generate_rayleigh(2, 2, 3, &[1, 2], 1).unwrap();
        let w = Precoder::zeros(3, 2);
        // the rate gradient vanishes at W = 0, so perturb slightly off the origin
        let w_small = Precoder::new(w.matrix().map(|_| c(1e-3, 0.0))).unwrap();
        assert!(kkt_residual(&w_small, &ch, 10.0).unwrap() > 0.0);
    }

    #[test]
    fn open_loop_shapes() {
        let w = open_loop_precoder(4, 2, 10.0).unwrap();
        assert!((w.matrix()[(0, 0)].re - 5f64.sqrt()).abs() < 1e-15);
        assert!((w.matrix()[(1, 1)].re - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(w.matrix()[(2, 0)], c(0.0, 0.0));
        let w = open_loop_precoder(4, 4, 10.0).unwrap();
        assert!((w.power() - 10.0).abs() < 1e-12);
        assert!((w.matrix()[(3, 3)].re - 2.5f64.sqrt()).abs() < 1e-15);
        assert!(open_loop_precoder(2, 3, 1.0).is_err());
    }

    #[test]
    fn rec_type_matches_matched_filter_for_one_user() {
        let ch = miso(9, 4);
        let w = rec_type_precoder(&ch, 1, 10.0).unwrap();
        let target = (1.0 + 10.0 * frob2(ch.channel(0, 0))).ln();
        assert!((rate(ch.channel(0, 0), &w).unwrap() - target).abs() < 1e-10);
    }

    #[test]
    fn rec_type_uses_weakest_user_only() {
        let h1 = CMat::from_row_slice(1, 2, &[c(0.1, 0.0), c(0.2, 0.0)]);
        let h2a = CMat::from_row_slice(1, 2, &[c(3.0, 0.0), c(-1.0, 0.0)]);
        let h2b = CMat::from_row_slice(1, 2, &[c(0.0, 2.0), c(5.0, 1.0)]);
        let a = rec_type_precoder(&ChannelSet::single_slot(vec![h1.clone(), h2a]).unwrap(), 1, 1.0).unwrap();
        let b = rec_type_precoder(&ChannelSet::single_slot(vec![h1, h2b]).unwrap(), 1, 1.0).unwrap();
        assert_eq!(a, b);
    }
}
