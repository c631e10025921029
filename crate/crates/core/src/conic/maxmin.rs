//! The precoder update of the alternating ascent: maximize the smallest
//! slack surrogate over the power ball,
//!
//! ```text
//! max beta  s.t.  c_k - beta >= |B_k†(G_k† H_k W - I)|_F^2,  |W|_F^2 <= P
//! ```
//!
//! with `c_k = log|S_k| + d - |G_k B_k|_F^2`.

use nalgebra::{DMatrix, DVector};

use super::socp::{solve, ConeBlock, Socp, SocpSettings, SolverReport};
use crate::error::{Error, Result};
use crate::linalg::{frob2, from_real_vec, identity, realify_left_mul, to_real_vec, CMat};
use crate::model::{lmmse_filter, Precoder, ReceiveFilter, SlackMatrix};

/// Per-user data `(H_k, G_k, S_k)` of one surrogate term.
#[derive(Debug, Clone)]
pub struct UserBlock {
    pub h: CMat,
    pub g: ReceiveFilter,
    pub s: SlackMatrix,
}

impl UserBlock {
    /// LMMSE filter and matching slack at precoder `w`, which makes the
    /// surrogate tight at `w`.
    pub fn at(h: &CMat, w: &Precoder) -> Result<Self> {
        Ok(Self {
            h: h.clone(),
            g: lmmse_filter(h, w)?,
            s: SlackMatrix::optimal(h, w)?,
        })
    }

    pub fn streams(&self) -> usize {
        self.s.matrix().nrows()
    }

    /// `log|S| + d - |G B|_F^2`.
    pub fn constant(&self) -> f64 {
        self.s.logdet() + self.streams() as f64 - frob2(&(self.g.matrix() * self.s.factor()))
    }

    /// `|B†(G† H W - I)|_F^2`.
    pub fn penalty(&self, w: &CMat) -> f64 {
        let d = self.streams();
        let x = self.g.matrix().adjoint() * &self.h * w - identity(d);
        frob2(&(self.s.factor().adjoint() * x))
    }

    /// Surrogate value `c - penalty` at `w`, a lower bound on the rate.
    pub fn surrogate(&self, w: &CMat) -> f64 {
        self.constant() - self.penalty(w)
    }

    /// Realified affine map `w -> vec(B† G† H W - B†)` as `(T, t0)`.
    pub(crate) fn affine(&self, tx: usize) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.streams();
        let bh = self.s.factor().adjoint();
        let lin = &bh * self.g.matrix().adjoint() * &self.h;
        debug_assert_eq!(lin.ncols(), tx);
        (realify_left_mul(&lin, d), -to_real_vec(&bh))
    }
}

/// Data of one max-min precoder subproblem.
#[derive(Debug, Clone)]
pub struct MaxMinSocp {
    users: Vec<UserBlock>,
    power: f64,
    tx: usize,
    streams: usize,
}

impl MaxMinSocp {
    pub fn new(users: Vec<UserBlock>, power: f64, tx: usize, streams: usize) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::instance("max-min problem needs at least one user"));
        }
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::config(format!("power budget must be finite and nonnegative, got {power}")));
        }
        for (k, u) in users.iter().enumerate() {
            if u.h.ncols() != tx || u.g.matrix().nrows() != u.h.nrows() || u.g.matrix().ncols() != streams || u.streams() != streams {
                return Err(Error::instance(format!("user {k}: inconsistent H/G/S dimensions")));
            }
            if !u.constant().is_finite() {
                return Err(Error::numeric(format!("user {k}: non-finite surrogate constant")));
            }
        }
        Ok(Self { users, power, tx, streams })
    }

    /// Surrogates built around the current precoder.
    pub fn around(h: &[&CMat], w: &Precoder, power: f64) -> Result<Self> {
        let users = h.iter().map(|hk| UserBlock::at(hk, w)).collect::<Result<Vec<_>>>()?;
        Self::new(users, power, w.tx_antennas(), w.streams())
    }

    pub fn users(&self) -> &[UserBlock] {
        &self.users
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `min_k` surrogate at `w`.
    pub fn objective(&self, w: &CMat) -> f64 {
        self.users.iter().map(|u| u.surrogate(w)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct MaxMinSolution {
    pub w: Precoder,
    pub beta: f64,
    pub report: SolverReport,
}

/// Solve the subproblem. The returned `beta` is the surrogate objective of the
/// returned (power-feasible) precoder.
pub fn solve_maxmin_socp(prob: &MaxMinSocp, tol: f64) -> Result<MaxMinSolution> {
    if !(tol > 0.0) {
        return Err(Error::config("solver tolerance must be positive"));
    }
    let (m, d) = (prob.tx, prob.streams);
    let nw = 2 * m * d;
    let n = nw + 1;
    let ib = nw;
    let mut c = DVector::zeros(n);
    c[ib] = -1.0;
    let mut socp = Socp::new(c);
    let all: Vec<usize> = (0..n).collect();
    for u in &prob.users {
        let (t, t0) = u.affine(m);
        let q = t.nrows();
        let ck = u.constant();
        let mut g = DMatrix::zeros(q + 2, n);
        let mut h = DVector::zeros(q + 2);
        h[0] = ck + 1.0;
        g[(0, ib)] = 1.0;
        for r in 0..q {
            h[r + 1] = 2.0 * t0[r];
            for j in 0..nw {
                g[(r + 1, j)] = -2.0 * t[(r, j)];
            }
        }
        h[q + 1] = ck - 1.0;
        g[(q + 1, ib)] = 1.0;
        socp.push(ConeBlock::new(all.clone(), g, h)?)?;
    }
    let mut g = DMatrix::zeros(nw + 1, nw);
    let mut h = DVector::zeros(nw + 1);
    h[0] = prob.power.sqrt();
    for j in 0..nw {
        g[(j + 1, j)] = -1.0;
    }
    socp.push(ConeBlock::new((0..nw).collect(), g, h)?)?;

    let sol = solve(&socp, &SocpSettings::with_tol(tol));
    let w = from_real_vec(&sol.x.as_slice()[..nw], m, d);
    if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::numeric("cone solver returned non-finite precoder"));
    }
    let w = Precoder::new(w)?.clamped_to(prob.power);
    let beta = prob.objective(w.matrix());
    Ok(MaxMinSolution { w, beta, report: sol.report })
}
