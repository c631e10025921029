//! Concave max-min log-det upper bounds.
//!
//! Both problems have the form `max_{y in D} min_k f_k(y)` with concave `f_k`:
//!
//! * covariance bound: `y` is a Hermitian `Q >= 0` with `Tr Q <= P`,
//!   `f_k(Q) = log|I + H_k Q H_k†|`;
//! * fractional bound: `y = x in [0,1]^E` with `sum p_e x_e <= P`,
//!   `f_k(x) = log|I + sum_e x_e p_e H_k W_e W_e† H_k†|`.
//!
//! They are solved by a log-barrier path-following Newton method on the
//! epigraph form. The reported `upper` value is an independent Lagrangian
//! certificate: for convex weights `lambda` (read off the central path),
//! `max_D min_k f_k <= sum_k lambda_k f_k(y) + max_{y' in D} <sum_k lambda_k grad f_k(y), y' - y>`,
//! whose linear maximization is closed-form on both domains.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::socp::SolverStatus;
use crate::error::{Error, Result};
use crate::linalg::{c, cholesky_lower, inverse_hpd, logdet_hpd, max_eigenvalue_hermitian, CMat};
use crate::model::{ChannelSet, GroundSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub status: SolverStatus,
    pub newton_steps: usize,
    /// `upper - value`.
    pub certified_gap: f64,
}

#[derive(Debug, Clone)]
pub struct CovarianceBound {
    pub q: CMat,
    /// `min_k log|I + H_k Q H_k†|` at the returned `Q`.
    pub value: f64,
    /// Certified upper bound on the optimum.
    pub upper: f64,
    pub report: BoundReport,
}

#[derive(Debug, Clone)]
pub struct FractionalBound {
    pub x: Vec<f64>,
    /// `min_k f_k(x)` at the returned `x`.
    pub value: f64,
    pub upper: f64,
    pub report: BoundReport,
}

struct Eval {
    f: Vec<f64>,
    grad: Vec<DVector<f64>>,
    hess: Vec<DMatrix<f64>>,
    dom: f64,
    dom_grad: DVector<f64>,
    dom_hess: DMatrix<f64>,
}

trait Domain {
    fn dim(&self) -> usize;
    /// Barrier parameter of the domain barrier.
    fn theta(&self) -> f64;
    /// `None` outside the open domain.
    fn eval(&self, y: &DVector<f64>, hessians: bool) -> Option<Eval>;
    /// `max_{y' in D} <g, y'>`.
    fn linear_max(&self, g: &DVector<f64>) -> f64;
}

struct PathResult {
    y: DVector<f64>,
    lambda: Vec<f64>,
    newton_steps: usize,
    converged: bool,
}

const MAX_NEWTON: usize = 5000;

fn barrier_value(ev: &Eval, beta: f64, t: f64) -> Option<f64> {
    let mut v = t * beta + ev.dom;
    for &f in &ev.f {
        let u = f - beta;
        if !(u > 0.0) {
            return None;
        }
        v += u.ln();
    }
    Some(v)
}

fn path_follow<D: Domain>(dom: &D, y0: DVector<f64>, tol: f64) -> Result<PathResult> {
    let n = dom.dim();
    let mut y = y0;
    let ev0 = dom.eval(&y, false).ok_or_else(|| Error::numeric("bound start point outside the domain"))?;
    let kusers = ev0.f.len();
    let mut beta = ev0.f.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut t = 1.0;
    let mut steps = 0;
    let m_total = kusers as f64 + dom.theta();
    let mut converged = false;
    'outer: loop {
        // centering
        let (mut prev_dec, mut stalled) = (f64::INFINITY, 0);
        loop {
            if steps >= MAX_NEWTON {
                break 'outer;
            }
            let ev = dom.eval(&y, true).ok_or_else(|| Error::numeric("iterate left the domain"))?;
            let phi = barrier_value(&ev, beta, t).ok_or_else(|| Error::numeric("iterate left the epigraph"))?;
            let mut grad = DVector::zeros(n + 1);
            let mut hess = DMatrix::zeros(n + 1, n + 1);
            grad.rows_mut(0, n).copy_from(&ev.dom_grad);
            hess.view_mut((0, 0), (n, n)).copy_from(&ev.dom_hess);
            grad[n] = t;
            for k in 0..kusers {
                let u = ev.f[k] - beta;
                let g = &ev.grad[k];
                for i in 0..n {
                    grad[i] += g[i] / u;
                    for j in 0..n {
                        hess[(i, j)] += ev.hess[k][(i, j)] / u - g[i] * g[j] / (u * u);
                    }
                    hess[(i, n)] += g[i] / (u * u);
                    hess[(n, i)] += g[i] / (u * u);
                }
                grad[n] -= 1.0 / u;
                hess[(n, n)] -= 1.0 / (u * u);
            }
            let neg = -hess;
            let dir = solve_pd(neg, &grad).ok_or_else(|| Error::numeric("singular Newton system in bound solver"))?;
            let dec = grad.dot(&dir);
            steps += 1;
            if !(dec.is_finite()) {
                return Err(Error::numeric("non-finite Newton decrement"));
            }
            // the decrement can stall at the rounding floor of phi
            stalled = if dec >= 0.99 * prev_dec { stalled + 1 } else { 0 };
            prev_dec = dec;
            if dec / 2.0 <= 1e-9 || stalled >= 5 {
                break;
            }
            let mut s = 1.0;
            loop {
                let y_new = &y + dir.rows(0, n) * s;
                let b_new = beta + dir[n] * s;
                if let Some(ev_new) = dom.eval(&y_new, false) {
                    if let Some(v) = barrier_value(&ev_new, b_new, t) {
                        if v >= phi + 0.25 * s * dec {
                            y = y_new;
                            beta = b_new;
                            break;
                        }
                    }
                }
                s *= 0.5;
                if s < 1e-14 {
                    // no further progress possible at this t
                    break;
                }
            }
            if s < 1e-14 {
                break;
            }
        }
        if m_total / t <= tol * (1.0 + beta.abs()) {
            converged = true;
            break;
        }
        t *= 10.0;
    }
    let ev = dom.eval(&y, false).ok_or_else(|| Error::numeric("final iterate outside the domain"))?;
    let mut lambda: Vec<f64> = ev.f.iter().map(|f| 1.0 / (t * (f - beta).max(1e-300))).collect();
    let sum: f64 = lambda.iter().sum();
    for l in &mut lambda {
        *l /= sum;
    }
    Ok(PathResult {
        y,
        lambda,
        newton_steps: steps,
        converged,
    })
}

fn solve_pd(mut a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..10 {
        if let Some(ch) = nalgebra::Cholesky::new(a.clone()) {
            let mut x = ch.solve(b);
            let r = b - &a * &x;
            x += ch.solve(&r);
            return Some(x);
        }
        let bump = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..n {
            a[(i, i)] += bump - reg;
        }
        reg = bump;
    }
    None
}

/// Certificate from weights `lambda` at point `y`.
fn certificate<D: Domain>(dom: &D, y: &DVector<f64>, lambda: &[f64]) -> Option<(f64, f64)> {
    let ev = dom.eval(y, false)?;
    let value = ev.f.iter().copied().fold(f64::INFINITY, f64::min);
    let mut g = DVector::zeros(dom.dim());
    let mut lf = 0.0;
    for (k, l) in lambda.iter().enumerate() {
        g += &ev.grad[k] * *l;
        lf += l * ev.f[k];
    }
    let upper = lf + dom.linear_max(&g) - g.dot(y);
    Some((value, upper.max(value)))
}

fn finish<D: Domain>(dom: &D, path: &PathResult) -> Result<(f64, f64, BoundReport)> {
    let (value, upper) = certificate(dom, &path.y, &path.lambda).ok_or_else(|| Error::numeric("certificate evaluation failed"))?;
    Ok((
        value,
        upper,
        BoundReport {
            status: if path.converged { SolverStatus::Optimal } else { SolverStatus::MaxIter },
            newton_steps: path.newton_steps,
            certified_gap: upper - value,
        },
    ))
}

// ---- covariance bound ---------------------------------------------------

struct CovDomain {
    h: Vec<CMat>,
    tx: usize,
    power: f64,
    basis: Vec<CMat>,
}

fn hermitian_basis(m: usize) -> Vec<CMat> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        let mut e = CMat::zeros(m, m);
        e[(i, i)] = c(1.0, 0.0);
        out.push(e);
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let mut e = CMat::zeros(m, m);
            e[(i, j)] = c(r, 0.0);
            e[(j, i)] = c(r, 0.0);
            out.push(e);
            let mut e = CMat::zeros(m, m);
            e[(i, j)] = c(0.0, r);
            e[(j, i)] = c(0.0, -r);
            out.push(e);
        }
    }
    out
}

/// `Re Tr(A B)` for square matrices.
fn re_tr(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)].re * b[(j, i)].re - a[(i, j)].im * b[(j, i)].im;
        }
    }
    acc
}

impl CovDomain {
    fn matrix(&self, y: &DVector<f64>) -> CMat {
        let mut q = CMat::zeros(self.tx, self.tx);
        for (i, e) in self.basis.iter().enumerate() {
            q += e * c(y[i], 0.0);
        }
        q
    }

    fn coords(&self, q: &CMat) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|e| re_tr(e, q)))
    }

    fn curvature(&self, a: &CMat, hess: &mut DMatrix<f64>, sign: f64) {
        let xs: Vec<CMat> = self.basis.iter().map(|e| a * e).collect();
        let n = xs.len();
        for i in 0..n {
            for j in i..n {
                let v = sign * re_tr(&xs[i], &xs[j]);
                hess[(i, j)] += v;
                if i != j {
                    hess[(j, i)] += v;
                }
            }
        }
    }
}

impl Domain for CovDomain {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn theta(&self) -> f64 {
        self.tx as f64 + 1.0
    }

    fn eval(&self, y: &DVector<f64>, hessians: bool) -> Option<Eval> {
        let q = self.matrix(y);
        let slack = self.power - (0..self.tx).map(|i| q[(i, i)].re).sum::<f64>();
        if !(slack > 0.0) {
            return None;
        }
        cholesky_lower(&q).ok()?;
        let n = self.dim();
        let qinv = inverse_hpd(&q).ok()?;
        let trace_e = DVector::from_iterator(n, self.basis.iter().map(|e| (0..self.tx).map(|i| e[(i, i)].re).sum::<f64>()));
        let dom = logdet_hpd(&q).ok()? + slack.ln();
        let dom_grad = DVector::from_iterator(n, self.basis.iter().map(|e| re_tr(&qinv, e))) - &trace_e / slack;
        let mut dom_hess = DMatrix::zeros(n, n);
        if hessians {
            self.curvature(&qinv, &mut dom_hess, -1.0);
            dom_hess -= &trace_e * trace_e.transpose() / (slack * slack);
        }
        let mut f = Vec::with_capacity(self.h.len());
        let mut grad = Vec::with_capacity(self.h.len());
        let mut hess = Vec::with_capacity(self.h.len());
        for h in &self.h {
            let cov = h * &q * h.adjoint() + CMat::identity(h.nrows(), h.nrows());
            f.push(logdet_hpd(&cov).ok()?);
            let a = h.adjoint() * inverse_hpd(&cov).ok()? * h;
            grad.push(DVector::from_iterator(n, self.basis.iter().map(|e| re_tr(&a, e))));
            let mut hk = DMatrix::zeros(n, n);
            if hessians {
                self.curvature(&a, &mut hk, -1.0);
            }
            hess.push(hk);
        }
        Some(Eval {
            f,
            grad,
            hess,
            dom,
            dom_grad,
            dom_hess,
        })
    }

    fn linear_max(&self, g: &DVector<f64>) -> f64 {
        // max Re Tr(Y Q) over Q >= 0, Tr Q <= P
        let y = self.matrix(g);
        self.power * max_eigenvalue_hermitian(&y).max(0.0)
    }
}

/// Max-min rate over all transmit covariances `Q >= 0`, `Tr Q <= P`; an upper
/// bound for every precoder with `|W|_F^2 <= P`.
pub fn solve_covariance_bound(channels: &ChannelSet, power: f64, tol: f64) -> Result<CovarianceBound> {
    if channels.slots() != 1 {
        return Err(Error::instance("covariance bound needs a single-slot channel set"));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::config(format!("power budget must be positive, got {power}")));
    }
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let tx = channels.tx_antennas();
    let dom = CovDomain {
        h: (0..channels.users()).map(|k| channels.channel(k, 0).clone()).collect(),
        tx,
        power,
        basis: hermitian_basis(tx),
    };
    let q0 = CMat::identity(tx, tx) * c(power / (2.0 * tx as f64), 0.0);
    let path = path_follow(&dom, dom.coords(&q0), tol)?;
    let (value, upper, report) = finish(&dom, &path)?;
    Ok(CovarianceBound {
        q: dom.matrix(&path.y),
        value,
        upper,
        report,
    })
}

// ---- fractional bound ---------------------------------------------------

struct FracDomain {
    /// `v[k][i] = sqrt(p_e) H_k W_e` for the free elements.
    v: Vec<Vec<CMat>>,
    p: Vec<f64>,
    power: f64,
    rx: Vec<usize>,
}

impl Domain for FracDomain {
    fn dim(&self) -> usize {
        self.p.len()
    }

    fn theta(&self) -> f64 {
        2.0 * self.p.len() as f64 + 1.0
    }

    fn eval(&self, x: &DVector<f64>, hessians: bool) -> Option<Eval> {
        let n = self.dim();
        let used: f64 = self.p.iter().zip(x.iter()).map(|(p, x)| p * x).sum();
        let slack = self.power - used;
        if !(slack > 0.0) || x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return None;
        }
        let dom = x.iter().map(|&v| v.ln() + (1.0 - v).ln()).sum::<f64>() + slack.ln();
        let pv = DVector::from_vec(self.p.clone());
        let dom_grad = DVector::from_iterator(n, x.iter().map(|&v| 1.0 / v - 1.0 / (1.0 - v))) - &pv / slack;
        let mut dom_hess = DMatrix::zeros(n, n);
        if hessians {
            for i in 0..n {
                dom_hess[(i, i)] = -1.0 / (x[i] * x[i]) - 1.0 / ((1.0 - x[i]) * (1.0 - x[i]));
            }
            dom_hess -= &pv * pv.transpose() / (slack * slack);
        }
        let mut f = Vec::with_capacity(self.v.len());
        let mut grad = Vec::with_capacity(self.v.len());
        let mut hess = Vec::with_capacity(self.v.len());
        for (k, vk) in self.v.iter().enumerate() {
            let nr = self.rx[k];
            let mut cmat = CMat::identity(nr, nr);
            for (i, v) in vk.iter().enumerate() {
                cmat += v * v.adjoint() * c(x[i], 0.0);
            }
            let l = cholesky_lower(&cmat).ok()?;
            f.push(2.0 * (0..nr).map(|i| l[(i, i)].re.ln()).sum::<f64>());
            let xs: Vec<CMat> = vk.iter().map(|v| l.solve_lower_triangular(v).expect("nonsingular factor")).collect();
            grad.push(DVector::from_iterator(n, xs.iter().map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>())));
            let mut hk = DMatrix::zeros(n, n);
            if hessians {
                for i in 0..n {
                    for j in i..n {
                        let val = -(xs[i].adjoint() * &xs[j]).iter().map(|z| z.norm_sqr()).sum::<f64>();
                        hk[(i, j)] = val;
                        hk[(j, i)] = val;
                    }
                }
            }
            hess.push(hk);
        }
        Some(Eval {
            f,
            grad,
            hess,
            dom,
            dom_grad,
            dom_hess,
        })
    }

    fn linear_max(&self, g: &DVector<f64>) -> f64 {
        // fractional knapsack over 0 <= y <= 1, p'y <= P
        let mut order: Vec<usize> = (0..self.dim()).filter(|&i| g[i] > 0.0).collect();
        order.sort_by(|&a, &b| (g[b] / self.p[b]).total_cmp(&(g[a] / self.p[a])).then(a.cmp(&b)));
        let mut left = self.power;
        let mut total = 0.0;
        for i in order {
            let take = (left / self.p[i]).min(1.0);
            total += take * g[i];
            left -= take * self.p[i];
            if left <= 0.0 {
                break;
            }
        }
        total
    }
}

fn set_rates(ground: &GroundSet, channels: &ChannelSet, x: &[f64]) -> Result<Vec<f64>> {
    (0..channels.users())
        .map(|k| {
            let h = channels.channel(k, 0);
            let mut y = CMat::identity(h.nrows(), h.nrows());
            for (e, el) in ground.elements().iter().enumerate() {
                let v = h * el.codeword();
                y += v.clone() * v.adjoint() * c(x[e] * el.power(), 0.0);
            }
            Ok(logdet_hpd(&y)?.max(0.0))
        })
        .collect()
}

/// Relax the element choices to `x_e in [0, 1]` and maximize the smallest
/// log-det rate under the power budget; an upper bound on the discrete
/// max-min rate.
pub fn solve_fractional_bound(ground: &GroundSet, channels: &ChannelSet, power: f64, tol: f64) -> Result<FractionalBound> {
    if channels.slots() != 1 {
        return Err(Error::instance("fractional bound needs a single-slot channel set"));
    }
    if !(power >= 0.0 && power.is_finite()) {
        return Err(Error::config(format!("power budget must be finite and nonnegative, got {power}")));
    }
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    if let Some(m) = ground.tx_antennas() {
        if m != channels.tx_antennas() {
            return Err(Error::instance("codeword and channel antenna counts differ"));
        }
    }
    let n_all = ground.len();
    let free: Vec<usize> = (0..n_all).filter(|&e| ground.elements()[e].power() > 0.0).collect();
    let total: f64 = free.iter().map(|&e| ground.elements()[e].power()).sum();
    let mut x = vec![1.0; n_all];
    let exact = |x: Vec<f64>| -> Result<FractionalBound> {
        let rates = set_rates(ground, channels, &x)?;
        let value = rates.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(FractionalBound {
            x,
            value,
            upper: value,
            report: BoundReport {
                status: SolverStatus::Optimal,
                newton_steps: 0,
                certified_gap: 0.0,
            },
        })
    };
    if free.is_empty() || power >= total {
        return exact(x);
    }
    if power == 0.0 {
        for &e in &free {
            x[e] = 0.0;
        }
        return exact(x);
    }
    let dom = FracDomain {
        v: (0..channels.users())
            .map(|k| {
                free.iter()
                    .map(|&e| {
                        let el = &ground.elements()[e];
                        channels.channel(k, 0) * el.codeword() * c(el.power().sqrt(), 0.0)
                    })
                    .collect()
            })
            .collect(),
        p: free.iter().map(|&e| ground.elements()[e].power()).collect(),
        power,
        rx: channels.rx_all().to_vec(),
    };
    let start = (0.5 * power / total).min(0.5);
    let path = path_follow(&dom, DVector::from_element(free.len(), start), tol)?;
    let (value, upper, report) = finish(&dom, &path)?;
    for (i, &e) in free.iter().enumerate() {
        x[e] = path.y[i];
    }
    Ok(FractionalBound { x, value, upper, report })
}
