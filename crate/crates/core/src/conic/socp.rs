//! Primal-dual interior-point method for second-order cone programs
//!
//! ```text
//! minimize    c'x
//! subject to  s = h - G x,   s in K_1 x ... x K_m
//! ```
//!
//! Every `K_i` is a second-order cone `{(u0, u1) : u0 >= |u1|}`; a cone of
//! dimension one is the nonnegative ray. `G` is stored block-wise: each cone
//! only touches the columns it lists. Search directions use Nesterov-Todd
//! scaling with a Mehrotra predictor-corrector step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cone constraint `h - G x[cols] in K`.
#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub cols: Vec<usize>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl ConeBlock {
    pub fn new(cols: Vec<usize>, g: DMatrix<f64>, h: DVector<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::instance("cone of dimension zero"));
        }
        if g.nrows() != h.len() || g.ncols() != cols.len() {
            return Err(Error::instance(format!(
                "cone block G is {}x{}, expected {}x{}",
                g.nrows(),
                g.ncols(),
                h.len(),
                cols.len()
            )));
        }
        Ok(Self { cols, g, h })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let xs = DVector::from_iterator(self.cols.len(), self.cols.iter().map(|&j| x[j]));
        &self.g * xs
    }

    fn mul_t_into(&self, z: &DVector<f64>, out: &mut DVector<f64>) {
        let v = self.g.tr_mul(z);
        for (i, &j) in self.cols.iter().enumerate() {
            out[j] += v[i];
        }
    }
}

/// A cone program in the form above.
#[derive(Debug, Clone)]
pub struct Socp {
    c: DVector<f64>,
    cones: Vec<ConeBlock>,
}

impl Socp {
    pub fn new(c: DVector<f64>) -> Self {
        Self { c, cones: Vec::new() }
    }

    pub fn push(&mut self, cone: ConeBlock) -> Result<()> {
        if let Some(&j) = cone.cols.iter().find(|&&j| j >= self.c.len()) {
            return Err(Error::instance(format!("cone references variable {j} of {}", self.c.len())));
        }
        self.cones.push(cone);
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn cones(&self) -> &[ConeBlock] {
        &self.cones
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x)
    }

    /// Largest violation of `h - Gx in K` over all cones (0 when feasible).
    pub fn cone_violation(&self, x: &DVector<f64>) -> f64 {
        self.cones
            .iter()
            .map(|cone| {
                let s = &cone.h - cone.mul(x);
                let tail = if s.len() > 1 { s.rows(1, s.len() - 1).norm() } else { 0.0 };
                (tail - s[0]).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    MaxIter,
    /// Newton systems lost accuracy before the tolerance was met; the best
    /// iterate is returned.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

impl SolverReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SocpSettings {
    pub max_iter: usize,
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
}

impl Default for SocpSettings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            feastol: 1e-7,
            abstol: 1e-7,
            reltol: 1e-7,
        }
    }
}

impl SocpSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            feastol: tol,
            abstol: tol,
            reltol: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SocpSolution {
    pub x: DVector<f64>,
    pub s: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
    pub report: SolverReport,
}

// ---- cone algebra -------------------------------------------------------

fn jnorm2(u: &DVector<f64>) -> f64 {
    let tail = if u.len() > 1 { u.rows(1, u.len() - 1).norm_squared() } else { 0.0 };
    u[0] * u[0] - tail
}

/// Jordan product `u o v = (u'v, u0 v1 + v0 u1)`.
pub(crate) fn jordan(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = u * v[0] + v * u[0];
    out[0] = u.dot(v);
    out
}

/// Solve `lambda o x = v` for `x`.
pub(crate) fn jordan_div(lambda: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let q = lambda.len();
    if q == 1 {
        return DVector::from_element(1, v[0] / lambda[0]);
    }
    let l1 = lambda.rows(1, q - 1);
    let v1 = v.rows(1, q - 1);
    let x0 = (lambda[0] * v[0] - l1.dot(&v1)) / jnorm2(lambda);
    let mut out = DVector::zeros(q);
    out[0] = x0;
    let tail = (v1 - l1 * x0) / lambda[0];
    out.rows_mut(1, q - 1).copy_from(&tail);
    out
}

fn unit(q: usize) -> DVector<f64> {
    let mut e = DVector::zeros(q);
    e[0] = 1.0;
    e
}

/// Largest `a >= 0` with `x + a d` in the cone (`x` interior); `inf` if none.
fn max_step(x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let q = x.len();
    if q == 1 {
        return if d[0] < 0.0 { -x[0] / d[0] } else { f64::INFINITY };
    }
    let a = jnorm2(d);
    let b = 2.0 * (x[0] * d[0] - x.rows(1, q - 1).dot(&d.rows(1, q - 1)));
    let c = jnorm2(x);
    // roots of a t^2 + b t + c, smallest positive
    let mut best = f64::INFINITY;
    if a.abs() <= 1e-300 {
        if b < 0.0 {
            best = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let qq = -0.5 * (b + b.signum() * sq);
            let mut roots = [f64::NAN, f64::NAN];
            if qq != 0.0 {
                roots = [qq / a, c / qq];
            } else {
                roots[0] = 0.0;
            }
            for r in roots {
                if r.is_finite() && r > 0.0 && r < best {
                    best = r;
                }
            }
        }
    }
    // guard against the spurious branch (x0 + t d0 < 0)
    if d[0] < 0.0 {
        best = best.min(-x[0] / d[0]);
    }
    best
}

/// Nesterov-Todd scaling `W = eta * Wbar` of one cone.
#[derive(Debug, Clone)]
pub(crate) struct NtScaling {
    eta: f64,
    wbar: DVector<f64>,
}

impl NtScaling {
    pub(crate) fn new(s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let ss = jnorm2(s);
        let zz = jnorm2(z);
        if !(ss > 0.0 && zz > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
            return None;
        }
        let sb = s / ss.sqrt();
        let zb = z / zz.sqrt();
        let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
        let mut jz = zb.clone();
        for i in 1..jz.len() {
            jz[i] = -jz[i];
        }
        let wbar = (sb + jz) / (2.0 * gamma);
        let eta = (ss / zz).powf(0.25);
        if !eta.is_finite() || !wbar.iter().all(|v| v.is_finite()) {
            return None;
        }
        Some(Self { eta, wbar })
    }

    fn wbar_mul(&self, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let q = v.len();
        let w0 = self.wbar[0];
        if q == 1 {
            return DVector::from_element(1, w0 * v[0]);
        }
        // Wbar^{-1} = J Wbar J
        let sign = if inverse { -1.0 } else { 1.0 };
        let w1 = self.wbar.rows(1, q - 1);
        let v1 = v.rows(1, q - 1);
        let t = w1.dot(&v1);
        let mut out = DVector::zeros(q);
        out[0] = w0 * v[0] + sign * t;
        let tail = v1 + w1 * (sign * v[0] + t / (1.0 + w0));
        out.rows_mut(1, q - 1).copy_from(&tail);
        out
    }

    pub(crate) fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.wbar_mul(v, false) * self.eta
    }

    pub(crate) fn apply_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        self.wbar_mul(v, true) / self.eta
    }

    fn apply_inv_cols(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            let col = self.apply_inv(&m.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    }
}

// ---- solver -------------------------------------------------------------

fn factor_spd(mut h: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut reg = 0.0;
    for _ in 0..8 {
        if let Some(ch) = nalgebra::Cholesky::new(h.clone()) {
            return Some(ch);
        }
        let bump = if reg == 0.0 { 1e-13 * scale } else { reg * 100.0 };
        for i in 0..n {
            h[(i, i)] += bump - reg;
        }
        reg = bump;
    }
    None
}

#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    s: Vec<DVector<f64>>,
    z: Vec<DVector<f64>>,
}

/// Solve `prob`. Never panics on numerical trouble: the returned report
/// carries the status and the last interior iterate is returned.
pub fn solve(prob: &Socp, settings: &SocpSettings) -> SocpSolution {
    let n = prob.num_vars();
    let cones = &prob.cones;
    let m_deg = cones.len().max(1) as f64;
    let hnorm = cones.iter().map(|c| c.h.norm_squared()).sum::<f64>().sqrt().max(1.0);
    let cnorm = prob.c.norm().max(1.0);

    let mut it = match initial_point(prob) {
        Some(p) => p,
        None => {
            return SocpSolution {
                x: DVector::zeros(n),
                s: cones.iter().map(|c| c.h.clone()).collect(),
                z: cones.iter().map(|c| unit(c.dim())).collect(),
                report: SolverReport {
                    status: SolverStatus::Stalled,
                    objective: 0.0,
                    primal_residual: f64::INFINITY,
                    dual_residual: f64::INFINITY,
                    gap: f64::INFINITY,
                    iterations: 0,
                },
            }
        }
    };

    let mut report = SolverReport {
        status: SolverStatus::MaxIter,
        objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        iterations: 0,
    };

    let mut best: Option<(f64, Iterate, SolverReport)> = None;
    for iter in 0..=settings.max_iter {
        // residuals
        let mut rx = prob.c.clone();
        for (cone, z) in cones.iter().zip(&it.z) {
            cone.mul_t_into(z, &mut rx);
        }
        let rz: Vec<DVector<f64>> = cones
            .iter()
            .zip(&it.s)
            .map(|(cone, s)| cone.mul(&it.x) + s - &cone.h)
            .collect();
        let pres = rz.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / hnorm;
        let dres = rx.norm() / cnorm;
        let gap: f64 = it.s.iter().zip(&it.z).map(|(s, z)| s.dot(z)).sum();
        let pcost = prob.c.dot(&it.x);
        let dcost = -cones.iter().zip(&it.z).map(|(c, z)| c.h.dot(z)).sum::<f64>();
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        report.objective = pcost;
        report.primal_residual = pres;
        report.dual_residual = dres;
        report.gap = gap;
        report.iterations = iter;
        let score = (pres / settings.feastol)
            .max(dres / settings.feastol)
            .max((gap / settings.abstol).min(relgap / settings.reltol));
        match &best {
            Some((b, _, _)) if score >= *b => {
                if score > 1e3 * b.max(1.0) {
                    // the Newton systems have lost accuracy; fall back
                    report.status = SolverStatus::Stalled;
                    break;
                }
            }
            _ => best = Some((score, it.clone(), report.clone())),
        }
        log::trace!("{iter:3} pcost {pcost:.6e} dcost {dcost:.6e} gap {gap:.2e} pres {pres:.2e} dres {dres:.2e}");
        if pres <= settings.feastol && dres <= settings.feastol && (gap <= settings.abstol || relgap <= settings.reltol) {
            report.status = SolverStatus::Optimal;
            break;
        }
        if iter == settings.max_iter {
            report.status = SolverStatus::MaxIter;
            break;
        }

        let scalings: Option<Vec<NtScaling>> = it.s.iter().zip(&it.z).map(|(s, z)| NtScaling::new(s, z)).collect();
        let Some(scalings) = scalings else {
            report.status = SolverStatus::Stalled;
            break;
        };
        let lambdas: Vec<DVector<f64>> = scalings.iter().zip(&it.z).map(|(w, z)| w.apply(z)).collect();

        // reduced system  sum G' W^-2 G
        let mut hmat = DMatrix::zeros(n, n);
        let wg: Vec<DMatrix<f64>> = cones.iter().zip(&scalings).map(|(c, w)| w.apply_inv_cols(&c.g)).collect();
        for (cone, a) in cones.iter().zip(&wg) {
            let block = a.tr_mul(a);
            for (bi, &i) in cone.cols.iter().enumerate() {
                for (bj, &j) in cone.cols.iter().enumerate() {
                    hmat[(i, j)] += block[(bi, bj)];
                }
            }
        }
        let hcopy = hmat.clone();
        let Some(chol) = factor_spd(hmat) else {
            report.status = SolverStatus::Stalled;
            break;
        };

        // `keep` scales the residuals the step should remove
        let newton = |rc: &[DVector<f64>], keep: f64| -> (DVector<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
            let t: Vec<DVector<f64>> = scalings
                .iter()
                .zip(&lambdas)
                .zip(rc)
                .map(|((w, l), r)| w.apply(&jordan_div(l, r)))
                .collect();
            let mut rhs = -&rx * keep;
            for (((cone, w), r), tc) in cones.iter().zip(&scalings).zip(&rz).zip(&t) {
                let v = w.apply_inv(&w.apply_inv(&(r * keep + tc)));
                let mut acc = DVector::zeros(n);
                cone.mul_t_into(&v, &mut acc);
                rhs -= acc;
            }
            let mut dx = chol.solve(&rhs);
            let resid = &rhs - &hcopy * &dx;
            dx += chol.solve(&resid);
            let mut dz = Vec::with_capacity(cones.len());
            let mut ds = Vec::with_capacity(cones.len());
            for (((cone, w), r), tc) in cones.iter().zip(&scalings).zip(&rz).zip(&t) {
                let gdx = cone.mul(&dx);
                let dzc = w.apply_inv(&w.apply_inv(&(&gdx + r * keep + tc)));
                let dsc = -(r * keep) - gdx;
                dz.push(dzc);
                ds.push(dsc);
            }
            (dx, ds, dz)
        };

        let step_to_boundary = |ds: &[DVector<f64>], dz: &[DVector<f64>]| -> f64 {
            let mut a = f64::INFINITY;
            for (s, d) in it.s.iter().zip(ds) {
                a = a.min(max_step(s, d));
            }
            for (z, d) in it.z.iter().zip(dz) {
                a = a.min(max_step(z, d));
            }
            a
        };

        // predictor
        let rc_aff: Vec<DVector<f64>> = lambdas.iter().map(|l| -jordan(l, l)).collect();
        let (_, ds_a, dz_a) = newton(&rc_aff, 1.0);
        let alpha_aff = step_to_boundary(&ds_a, &dz_a).min(1.0);
        let sigma = (1.0 - alpha_aff).max(0.0).powi(3);
        let mu = gap / m_deg;

        // corrector
        let rc: Vec<DVector<f64>> = lambdas
            .iter()
            .zip(&scalings)
            .zip(ds_a.iter().zip(&dz_a))
            .map(|((l, w), (dsa, dza))| {
                let corr = jordan(&w.apply_inv(dsa), &w.apply(dza));
                -jordan(l, l) - corr + unit(l.len()) * (sigma * mu)
            })
            .collect();
        let (dx, ds, dz) = newton(&rc, 1.0 - sigma);
        let amax = step_to_boundary(&ds, &dz);
        let alpha = (0.99 * amax).min(1.0);
        if !(alpha.is_finite() && alpha > 1e-14) || !dx.iter().all(|v| v.is_finite()) {
            report.status = SolverStatus::Stalled;
            break;
        }
        let next = Iterate {
            x: &it.x + &dx * alpha,
            s: it.s.iter().zip(&ds).map(|(s, d)| s + d * alpha).collect(),
            z: it.z.iter().zip(&dz).map(|(z, d)| z + d * alpha).collect(),
        };
        it = next;
    }

    if report.status != SolverStatus::Optimal {
        if let Some((_, b_it, mut b_rep)) = best {
            if b_rep.primal_residual + b_rep.dual_residual + b_rep.gap < report.primal_residual + report.dual_residual + report.gap {
                b_rep.status = report.status;
                b_rep.iterations = report.iterations;
                it = b_it;
                report = b_rep;
            }
        }
    }
    SocpSolution {
        x: it.x,
        s: it.s,
        z: it.z,
        report,
    }
}

fn initial_point(prob: &Socp) -> Option<Iterate> {
    let n = prob.num_vars();
    let mut gtg = DMatrix::zeros(n, n);
    let mut gth = DVector::zeros(n);
    for cone in &prob.cones {
        let block = cone.g.tr_mul(&cone.g);
        for (bi, &i) in cone.cols.iter().enumerate() {
            for (bj, &j) in cone.cols.iter().enumerate() {
                gtg[(i, j)] += block[(bi, bj)];
            }
        }
        cone.mul_t_into(&cone.h, &mut gth);
    }
    let chol = factor_spd(gtg)?;
    let x = chol.solve(&gth);
    let y = chol.solve(&prob.c);
    let mut s: Vec<DVector<f64>> = prob.cones.iter().map(|c| &c.h - c.mul(&x)).collect();
    let mut z: Vec<DVector<f64>> = prob.cones.iter().map(|c| -c.mul(&y)).collect();
    shift_interior(&mut s);
    shift_interior(&mut z);
    Some(Iterate { x, s, z })
}

fn shift_interior(u: &mut [DVector<f64>]) {
    let worst = u
        .iter()
        .map(|v| {
            let tail = if v.len() > 1 { v.rows(1, v.len() - 1).norm() } else { 0.0 };
            tail - v[0]
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = u.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt().max(1.0);
    if worst >= -1e-8 * scale {
        for v in u.iter_mut() {
            v[0] += 1.0 + worst;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_same_point() {
        let s = dv(&[3.0, 1.0, -0.5, 0.2]);
        let z = dv(&[2.0, -0.3, 0.7, 1.1]);
        let w = NtScaling::new(&s, &z).unwrap();
        let a = w.apply(&z);
        let b = w.apply_inv(&s);
        assert!((a - b).norm() < 1e-12);
        let v = dv(&[0.3, -1.0, 2.0, 0.5]);
        assert!((w.apply_inv(&w.apply(&v)) - v).norm() < 1e-12);
    }

    #[test]
    fn jordan_division_inverts_product() {
        let l = dv(&[2.0, 0.5, -0.3]);
        let v = dv(&[1.0, -2.0, 0.25]);
        let x = jordan_div(&l, &v);
        assert!((jordan(&l, &x) - v).norm() < 1e-12);
    }

    #[test]
    fn max_step_hits_boundary() {
        let x = dv(&[2.0, 0.0]);
        let d = dv(&[-1.0, 1.0]);
        let a = max_step(&x, &d);
        let y = &x + &d * a;
        assert!((y[0] - y[1].abs()).abs() < 1e-12, "{a}");
        assert!(max_step(&x, &dv(&[1.0, 0.5])).is_infinite());
        assert_eq!(max_step(&dv(&[1.0]), &dv(&[-4.0])), 0.25);
    }

    #[test]
    fn linear_program_on_rays() {
        // min -x1 - x2  s.t. x1 + 2 x2 <= 4, 3 x1 + x2 <= 6, x >= 0
        let mut p = Socp::new(dv(&[-1.0, -1.0]));
        p.push(ConeBlock::new(vec![0, 1], DMatrix::from_row_slice(1, 2, &[1.0, 2.0]), dv(&[4.0])).unwrap()).unwrap();
        p.push(ConeBlock::new(vec![0, 1], DMatrix::from_row_slice(1, 2, &[3.0, 1.0]), dv(&[6.0])).unwrap()).unwrap();
        p.push(ConeBlock::new(vec![0], DMatrix::from_element(1, 1, -1.0), dv(&[0.0])).unwrap()).unwrap();
        p.push(ConeBlock::new(vec![1], DMatrix::from_element(1, 1, -1.0), dv(&[0.0])).unwrap()).unwrap();
        let sol = solve(&p, &SocpSettings::default());
        assert!(sol.report.is_optimal(), "{:?}", sol.report);
        assert!((sol.x[0] - 1.6).abs() < 1e-7 && (sol.x[1] - 1.2).abs() < 1e-7, "{}", sol.x);
    }

    #[test]
    fn projection_onto_ball() {
        // min t  s.t. |x - a| <= t, |x| <= 1 ; a = (3, 4) -> x = a/5, t = 4
        let mut p = Socp::new(dv(&[0.0, 0.0, 1.0]));
        let g1 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0]);
        p.push(ConeBlock::new(vec![0, 1, 2], g1, dv(&[0.0, -3.0, -4.0])).unwrap()).unwrap();
        let g2 = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, -1.0, 0.0, 0.0, -1.0]);
        p.push(ConeBlock::new(vec![0, 1], g2, dv(&[1.0, 0.0, 0.0])).unwrap()).unwrap();
        let sol = solve(&p, &SocpSettings::default());
        assert!(sol.report.is_optimal(), "{:?}", sol.report);
        assert!((sol.x[2] - 4.0).abs() < 1e-7);
        assert!((sol.x[0] - 0.6).abs() < 1e-6 && (sol.x[1] - 0.8).abs() < 1e-6);
        assert!(p.cone_violation(&sol.x) < 1e-8);
    }
}
