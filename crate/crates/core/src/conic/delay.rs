//! Precoder update of the delay ascent:
//!
//! ```text
//! max  sum_k sum_t mu_k alpha_k^t
//! s.t. Theta alpha_k^t <= sum_{tau < L t} (c_k^tau - beta_k^tau)
//!      beta_k^tau >= |B†(G† H W^tau - I)|_F^2
//!      alpha_k^t <= 1,   |W^tau|_F^2 <= P
//! ```
//!
//! Slots may be frozen, in which case they contribute their (constant) rates.

use nalgebra::{DMatrix, DVector};

use super::maxmin::UserBlock;
use super::socp::{solve, ConeBlock, Socp, SocpSettings, SolverReport};
use crate::error::{Error, Result};
use crate::linalg::{from_real_vec, CMat};
use crate::model::{rate, ChannelSet, Precoder};

/// One slot of the schedule seen by the subproblem.
#[derive(Debug, Clone)]
pub enum DelaySlot {
    /// Optimized slot with per-user surrogate data.
    Free(Vec<UserBlock>),
    /// Frozen slot with its per-user rates.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct DelaySocp {
    slots: Vec<DelaySlot>,
    mu: Vec<f64>,
    theta: f64,
    per_interval: usize,
    power: f64,
    tx: usize,
    streams: usize,
}

#[derive(Debug, Clone)]
pub struct DelaySolution {
    /// Precoders of the free slots, in slot order.
    pub w: Vec<Precoder>,
    /// `alpha[k][t] = min(1, accumulated surrogate / Theta)` at the returned precoders.
    pub alpha: Vec<Vec<f64>>,
    /// `sum mu_k alpha_k^t` at the returned precoders.
    pub objective: f64,
    pub report: SolverReport,
}

impl DelaySocp {
    pub fn new(slots: Vec<DelaySlot>, mu: Vec<f64>, theta: f64, per_interval: usize, power: f64, tx: usize, streams: usize) -> Result<Self> {
        let k = mu.len();
        if k == 0 {
            return Err(Error::instance("delay problem needs at least one user"));
        }
        if mu.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::config("user weights must be positive and finite"));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::config(format!("rate threshold must be positive and finite, got {theta}")));
        }
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::config(format!("power budget must be finite and nonnegative, got {power}")));
        }
        if per_interval == 0 || slots.is_empty() || !slots.len().is_multiple_of(per_interval) {
            return Err(Error::instance("schedule length must be a positive multiple of the slots per interval"));
        }
        for (tau, s) in slots.iter().enumerate() {
            match s {
                DelaySlot::Free(users) => {
                    if users.len() != k {
                        return Err(Error::instance(format!("slot {tau}: expected {k} users")));
                    }
                    for (j, u) in users.iter().enumerate() {
                        if u.h.ncols() != tx || u.streams() != streams || u.g.matrix().ncols() != streams || u.g.matrix().nrows() != u.h.nrows() {
                            return Err(Error::instance(format!("slot {tau}, user {j}: inconsistent H/G/S dimensions")));
                        }
                        if !u.constant().is_finite() {
                            return Err(Error::numeric(format!("slot {tau}, user {j}: non-finite surrogate constant")));
                        }
                    }
                }
                DelaySlot::Fixed(r) => {
                    if r.len() != k || r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        return Err(Error::instance(format!("slot {tau}: fixed rates must be {k} finite nonnegative values")));
                    }
                }
            }
        }
        Ok(Self {
            slots,
            mu,
            theta,
            per_interval,
            power,
            tx,
            streams,
        })
    }

    /// Surrogates around `schedule` (one precoder per slot, slot `tau` uses
    /// channel `tau mod L`); slots with `free[tau] == false` are frozen.
    pub fn around(channels: &ChannelSet, schedule: &[Precoder], free: &[bool], mu: Vec<f64>, theta: f64, power: f64) -> Result<Self> {
        if schedule.len() != free.len() || schedule.is_empty() {
            return Err(Error::instance("schedule and free mask must have equal nonzero length"));
        }
        let streams = schedule[0].streams();
        if mu.len() != channels.users() {
            return Err(Error::instance("one weight per user required"));
        }
        let mut slots = Vec::with_capacity(schedule.len());
        for (tau, w) in schedule.iter().enumerate() {
            if w.streams() != streams {
                return Err(Error::instance("all precoders must have the same stream count"));
            }
            let hs = (0..channels.users()).map(|k| channels.channel(k, tau));
            slots.push(if free[tau] {
                DelaySlot::Free(hs.map(|h| UserBlock::at(h, w)).collect::<Result<_>>()?)
            } else {
                DelaySlot::Fixed(hs.map(|h| rate(h, w)).collect::<Result<_>>()?)
            });
        }
        Self::new(slots, mu, theta, channels.slots(), power, channels.tx_antennas(), streams)
    }

    pub fn users(&self) -> usize {
        self.mu.len()
    }

    pub fn horizon(&self) -> usize {
        self.slots.len() / self.per_interval
    }

    pub fn free_slots(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, DelaySlot::Free(_))).count()
    }

    pub fn slots(&self) -> &[DelaySlot] {
        &self.slots
    }

    /// Accumulated surrogate rate per user at each interval end, `[k][t]`.
    pub fn accumulated(&self, free_w: &[CMat]) -> Vec<Vec<f64>> {
        let k = self.users();
        let mut out = vec![Vec::with_capacity(self.horizon()); k];
        let mut acc = vec![0.0; k];
        let mut it = free_w.iter();
        for (tau, s) in self.slots.iter().enumerate() {
            match s {
                DelaySlot::Free(users) => {
                    let w = it.next().expect("one precoder per free slot");
                    for (j, u) in users.iter().enumerate() {
                        acc[j] += u.surrogate(w);
                    }
                }
                DelaySlot::Fixed(r) => {
                    for j in 0..k {
                        acc[j] += r[j];
                    }
                }
            }
            if (tau + 1) % self.per_interval == 0 {
                for j in 0..k {
                    out[j].push(acc[j]);
                }
            }
        }
        out
    }

    fn alpha(&self, free_w: &[CMat]) -> Vec<Vec<f64>> {
        self.accumulated(free_w)
            .into_iter()
            .map(|row| row.into_iter().map(|a| (a / self.theta).min(1.0)).collect())
            .collect()
    }

    /// `sum_k sum_t mu_k min(1, accumulated surrogate / Theta)`.
    pub fn objective(&self, free_w: &[CMat]) -> f64 {
        self.alpha(free_w)
            .iter()
            .zip(&self.mu)
            .map(|(row, m)| m * row.iter().sum::<f64>())
            .sum()
    }
}

pub fn solve_delay_socp(prob: &DelaySocp, tol: f64) -> Result<DelaySolution> {
    if !(tol > 0.0) {
        return Err(Error::config("solver tolerance must be positive"));
    }
    let (m, d) = (prob.tx, prob.streams);
    let kk = prob.users();
    let horizon = prob.horizon();
    let nw = 2 * m * d;
    let free: Vec<usize> = (0..prob.slots.len()).filter(|&t| matches!(prob.slots[t], DelaySlot::Free(_))).collect();
    let nf = free.len();
    let alpha_at = |k: usize, t: usize| nf * nw + k * horizon + t;
    let beta0 = nf * nw + kk * horizon;
    let beta_at = |k: usize, f: usize| beta0 + k * nf + f;
    let n = beta0 + kk * nf;

    let mut c = DVector::zeros(n);
    for k in 0..kk {
        for t in 0..horizon {
            c[alpha_at(k, t)] = -prob.mu[k];
        }
    }
    let mut socp = Socp::new(c);

    // accumulated constants and beta cones
    for k in 0..kk {
        let mut acc_const = 0.0;
        let mut betas: Vec<usize> = Vec::new();
        let mut fi = 0;
        for (tau, slot) in prob.slots.iter().enumerate() {
            match slot {
                DelaySlot::Free(users) => {
                    let u = &users[k];
                    acc_const += u.constant();
                    let bi = beta_at(k, fi);
                    betas.push(bi);
                    let (tm, t0) = u.affine(m);
                    let q = tm.nrows();
                    let mut cols: Vec<usize> = (fi * nw..(fi + 1) * nw).collect();
                    cols.push(bi);
                    let mut g = DMatrix::zeros(q + 2, nw + 1);
                    let mut h = DVector::zeros(q + 2);
                    h[0] = 1.0;
                    g[(0, nw)] = -1.0;
                    for r in 0..q {
                        h[r + 1] = 2.0 * t0[r];
                        for j in 0..nw {
                            g[(r + 1, j)] = -2.0 * tm[(r, j)];
                        }
                    }
                    h[q + 1] = -1.0;
                    g[(q + 1, nw)] = -1.0;
                    socp.push(ConeBlock::new(cols, g, h)?)?;
                    fi += 1;
                }
                DelaySlot::Fixed(r) => acc_const += r[k],
            }
            if (tau + 1) % prob.per_interval == 0 {
                let t = (tau + 1) / prob.per_interval - 1;
                let mut cols = betas.clone();
                cols.push(alpha_at(k, t));
                let mut g = DMatrix::zeros(1, cols.len());
                for j in 0..betas.len() {
                    g[(0, j)] = 1.0;
                }
                g[(0, betas.len())] = prob.theta;
                socp.push(ConeBlock::new(cols, g, DVector::from_element(1, acc_const))?)?;
                socp.push(ConeBlock::new(
                    vec![alpha_at(k, t)],
                    DMatrix::from_element(1, 1, 1.0),
                    DVector::from_element(1, 1.0),
                )?)?;
            }
        }
    }
    for fi in 0..nf {
        let mut g = DMatrix::zeros(nw + 1, nw);
        let mut h = DVector::zeros(nw + 1);
        h[0] = prob.power.sqrt();
        for j in 0..nw {
            g[(j + 1, j)] = -1.0;
        }
        socp.push(ConeBlock::new((fi * nw..(fi + 1) * nw).collect(), g, h)?)?;
    }

    let sol = solve(&socp, &SocpSettings::with_tol(tol));
    let mut ws = Vec::with_capacity(nf);
    let mut raw = Vec::with_capacity(nf);
    for fi in 0..nf {
        let w = from_real_vec(&sol.x.as_slice()[fi * nw..(fi + 1) * nw], m, d);
        if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::numeric("cone solver returned non-finite precoder"));
        }
        let w = Precoder::new(w)?.clamped_to(prob.power);
        raw.push(w.matrix().clone());
        ws.push(w);
    }
    let alpha = prob.alpha(&raw);
    let objective = prob.objective(&raw);
    Ok(DelaySolution {
        w: ws,
        alpha,
        objective,
        report: sol.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::model::{generate_rayleigh, ReceiveFilter, SlackMatrix};

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, c(v, 0.0))
    }

    #[test]
    fn zero_channels_give_zero_alpha() {
        let slot = || {
            DelaySlot::Free(
                (0..2)
                    .map(|_| UserBlock {
                        h: CMat::zeros(1, 2),
                        g: ReceiveFilter(CMat::zeros(1, 1)),
                        s: SlackMatrix::identity(1),
                    })
                    .collect(),
            )
        };
        let p = DelaySocp::new(vec![slot(), slot()], vec![0.5, 0.5], 3.0, 1, 10.0, 2, 1).unwrap();
        let sol = solve_delay_socp(&p, 1e-8).unwrap();
        assert!(sol.objective.abs() < 1e-9);
        assert!(sol.alpha.iter().flatten().all(|a| a.abs() < 1e-9));
    }

    #[test]
    fn tiny_threshold_saturates() {
        let ch = generate_rayleigh(3, 2, 2, &[1, 1], 1).unwrap();
        let w = Precoder::new(CMat::identity(2, 1) * c(10f64.sqrt(), 0.0)).unwrap();
        let sched = vec![w.clone(), w.clone(), w];
        let p = DelaySocp::around(&ch, &sched, &[true; 3], vec![0.3, 0.7], 1e-9, 10.0).unwrap();
        let sol = solve_delay_socp(&p, 1e-8).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-6, "{}", sol.objective);
    }

    #[test]
    fn scalar_instance_matches_grid_search() {
        let p: f64 = 10.0;
        let g0 = 0.5_f64;
        let user = UserBlock {
            h: scalar(1.0),
            g: ReceiveFilter(scalar(g0.sqrt() / (1.0 + g0))),
            s: SlackMatrix::new(scalar(1.0 + g0)).unwrap(),
        };
        let theta = 5.0;
        let prob = DelaySocp::new(vec![DelaySlot::Free(vec![user.clone()])], vec![1.0], theta, 1, p, 1, 1).unwrap();
        let sol = solve_delay_socp(&prob, 1e-9).unwrap();
        let n = 200_000;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            let r = -p.sqrt() + 2.0 * p.sqrt() * i as f64 / n as f64;
            best = best.max((user.surrogate(&scalar(r)) / theta).min(1.0));
        }
        assert!((sol.objective - best).abs() < 1e-4, "{} vs {best}", sol.objective);
    }

    #[test]
    fn fixed_slots_count_toward_threshold() {
        let ch = generate_rayleigh(8, 1, 2, &[1], 1).unwrap();
        let w = Precoder::new(CMat::identity(2, 1) * c(2.0, 0.0)).unwrap();
        let r = rate(ch.channel(0, 0), &w).unwrap();
        let p = DelaySocp::around(&ch, &[w.clone(), w], &[false, true], vec![1.0], 2.0 * r, 4.0).unwrap();
        let sol = solve_delay_socp(&p, 1e-9).unwrap();
        assert_eq!(sol.w.len(), 1);
        // interval 1 holds the fixed rate only; interval 2 reaches the threshold
        assert!((sol.alpha[0][0] - 0.5).abs() < 1e-9);
        assert!((sol.alpha[0][1] - 1.0).abs() < 1e-6);
    }
}
