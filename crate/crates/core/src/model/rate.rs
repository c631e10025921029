//! Per-user rate, MSE matrix, LMMSE filter and the slack-matrix surrogate.
//!
//! Rates are in nats throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, c, cholesky_lower, frob2, identity, inverse_hpd, logdet_hpd, re_trace_prod, CMat};

/// A complex `M x d` precoding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    w: CMat,
}

impl Precoder {
    pub fn new(w: CMat) -> Result<Self> {
        if w.ncols() == 0 || w.nrows() == 0 {
            return Err(Error::instance("precoder needs at least one row and one stream"));
        }
        if !all_finite(&w) {
            return Err(Error::numeric("precoder has non-finite entries"));
        }
        Ok(Self { w })
    }

    pub fn zeros(tx: usize, streams: usize) -> Self {
        Self { w: CMat::zeros(tx, streams) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.w
    }

    pub fn into_matrix(self) -> CMat {
        self.w
    }

    pub fn streams(&self) -> usize {
        self.w.ncols()
    }

    pub fn tx_antennas(&self) -> usize {
        self.w.nrows()
    }

    /// `||W||_F^2`.
    pub fn power(&self) -> f64 {
        frob2(&self.w)
    }

    /// Rescale to exactly `power` (the zero matrix is returned unchanged).
    pub fn scaled_to(&self, power: f64) -> Self {
        let p = self.power();
        if p <= 0.0 {
            return self.clone();
        }
        Self { w: &self.w * c((power / p).sqrt(), 0.0) }
    }

    /// Project onto the ball `||W||_F^2 <= power`.
    pub fn clamped_to(&self, power: f64) -> Self {
        if self.power() > power {
            self.scaled_to(power)
        } else {
            self.clone()
        }
    }
}

/// A user's linear receive filter `G_k` (`N_k x d`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveFilter(pub CMat);

impl ReceiveFilter {
    pub fn matrix(&self) -> &CMat {
        &self.0
    }
}

/// The Hermitian positive-definite slack matrix `S = B B†` with its Cholesky
/// factor `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackMatrix {
    s: CMat,
    b: CMat,
}

impl SlackMatrix {
    pub fn new(s: CMat) -> Result<Self> {
        let b = cholesky_lower(&s)?;
        let s = (&s + s.adjoint()) * c(0.5, 0.0);
        Ok(Self { s, b })
    }

    /// The maximizing slack for precoder `W`: `W† H† H W + I`.
    pub fn optimal(h: &CMat, w: &Precoder) -> Result<Self> {
        let hw = h * w.matrix();
        Self::new(hw.adjoint() * &hw + identity(w.streams()))
    }

    pub fn identity(d: usize) -> Self {
        Self {
            s: identity(d),
            b: identity(d),
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.s
    }

    pub fn factor(&self) -> &CMat {
        &self.b
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.b.nrows()).map(|i| self.b[(i, i)].re.ln()).sum::<f64>()
    }
}

fn check_dims(h: &CMat, w: &CMat) -> Result<()> {
    if h.ncols() != w.nrows() {
        return Err(Error::instance(format!(
            "channel has {} columns but precoder has {} rows",
            h.ncols(),
            w.nrows()
        )));
    }
    if !all_finite(h) || !all_finite(w) {
        return Err(Error::numeric("non-finite channel or precoder entries"));
    }
    Ok(())
}

/// `log|I + A A†|` evaluated on the smaller of the two Gram matrices.
pub(crate) fn log_det_gram(a: &CMat) -> Result<f64> {
    let gram = if a.nrows() <= a.ncols() {
        a * a.adjoint() + identity(a.nrows())
    } else {
        a.adjoint() * a + identity(a.ncols())
    };
    Ok(logdet_hpd(&gram)?.max(0.0))
}

/// Achievable rate `log|I + H W W† H†|` in nats.
pub fn rate(h: &CMat, w: &Precoder) -> Result<f64> {
    check_dims(h, w.matrix())?;
    log_det_gram(&(h * w.matrix()))
}

/// MSE matrix `(G†HW - I)(G†HW - I)† + G†G`.
pub fn mse_matrix(h: &CMat, w: &Precoder, g: &ReceiveFilter) -> Result<CMat> {
    check_dims(h, w.matrix())?;
    let g = g.matrix();
    if g.nrows() != h.nrows() || g.ncols() != w.streams() {
        return Err(Error::instance(format!(
            "receive filter is {}x{}, expected {}x{}",
            g.nrows(),
            g.ncols(),
            h.nrows(),
            w.streams()
        )));
    }
    let err = g.adjoint() * h * w.matrix() - identity(w.streams());
    let e = &err * err.adjoint() + g.adjoint() * g;
    Ok((&e + e.adjoint()) * c(0.5, 0.0))
}

/// LMMSE receive filter `(H W W† H† + I)^{-1} H W`.
pub fn lmmse_filter(h: &CMat, w: &Precoder) -> Result<ReceiveFilter> {
    check_dims(h, w.matrix())?;
    let hw = h * w.matrix();
    let cov = &hw * hw.adjoint() + identity(h.nrows());
    Ok(ReceiveFilter(inverse_hpd(&cov)? * hw))
}

/// Slack surrogate `-Tr(S E(G, W)) + log|S| + d`, a minorizer of the rate that
/// is tight at the LMMSE filter and the matching optimal slack.
pub fn surrogate(h: &CMat, w: &Precoder, g: &ReceiveFilter, s: &SlackMatrix) -> Result<f64> {
    let e = mse_matrix(h, w, g)?;
    Ok(-re_trace_prod(s.matrix(), &e) + s.logdet() + w.streams() as f64)
}

/// Gradient of the rate with respect to `W*`: `H† H W (I + W† H† H W)^{-1}`.
pub fn rate_gradient(h: &CMat, w: &Precoder) -> Result<CMat> {
    check_dims(h, w.matrix())?;
    let hw = h * w.matrix();
    let inner = hw.adjoint() * &hw + identity(w.streams());
    Ok(h.adjoint() * hw * inverse_hpd(&inner)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    /// Convert a rate in nats to this base.
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            LogBase::Nats => nats,
            LogBase::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nats" => Ok(LogBase::Nats),
            "bits" => Ok(LogBase::Bits),
            other => Err(Error::config(format!("unknown log base '{other}' (expected nats or bits)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::channel::complex_gaussian;
    use crate::linalg::hermitian_eigenvalues;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(x: f64) -> CMat {
        CMat::from_element(1, 1, c(x, 0.0))
    }

    #[test]
    fn scalar_rate() {
        let r = rate(&scalar(1.0), &Precoder::new(scalar(10f64.sqrt())).unwrap()).unwrap();
        assert!((r - 11f64.ln()).abs() < 1e-12);
        assert!((r - 2.397895).abs() < 1e-6);
    }

    #[test]
    fn zero_precoder_has_zero_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = complex_gaussian(2, 3, &mut rng);
        assert_eq!(rate(&h, &Precoder::zeros(3, 2)).unwrap(), 0.0);
    }

    #[test]
    fn rate_matches_eigenvalue_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = complex_gaussian(2, 2, &mut rng);
        let w = Precoder::new(complex_gaussian(2, 2, &mut rng)).unwrap();
        let hw = &h * w.matrix();
        let oracle: f64 = hermitian_eigenvalues(&(&hw * hw.adjoint()))
            .iter()
            .map(|l| (1.0 + l).ln())
            .sum();
        assert!((rate(&h, &w).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_instance_error() {
        let h = CMat::zeros(2, 3);
        let w = Precoder::zeros(4, 1);
        assert!(matches!(rate(&h, &w), Err(Error::Instance(_))));
        assert!(matches!(lmmse_filter(&h, &w), Err(Error::Instance(_))));
    }

    #[test]
    fn mse_with_zero_filter_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = complex_gaussian(2, 3, &mut rng);
        let w = Precoder::new(complex_gaussian(3, 2, &mut rng)).unwrap();
        let e = mse_matrix(&h, &w, &ReceiveFilter(CMat::zeros(2, 2))).unwrap();
        assert!((e - identity(2)).norm() < 1e-15);
    }

    #[test]
    fn scalar_mse_and_filter() {
        let h = scalar(1.0);
        let w = Precoder::new(scalar(10f64.sqrt())).unwrap();
        let g = lmmse_filter(&h, &w).unwrap();
        assert!((g.0[(0, 0)].re - 10f64.sqrt() / 11.0).abs() < 1e-14);
        let e = mse_matrix(&h, &w, &g).unwrap();
        assert!((e[(0, 0)].re - 1.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn lmmse_of_zero_channel_is_zero() {
        let w = Precoder::new(identity(2)).unwrap();
        let g = lmmse_filter(&CMat::zeros(2, 2), &w).unwrap();
        assert_eq!(frob2(g.matrix()), 0.0);
    }

    #[test]
    fn lmmse_error_is_inverse_of_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = complex_gaussian(2, 4, &mut rng);
        let w = Precoder::new(complex_gaussian(4, 2, &mut rng)).unwrap();
        let g = lmmse_filter(&h, &w).unwrap();
        let e = mse_matrix(&h, &w, &g).unwrap();
        let hw = &h * w.matrix();
        let expected = inverse_hpd(&(hw.adjoint() * &hw + identity(2))).unwrap();
        for (a, b) in e.iter().zip(expected.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
        let lhs = -logdet_hpd(&e).unwrap();
        assert!((lhs - rate(&h, &w).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn surrogate_is_tight_at_lmmse_and_optimal_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = complex_gaussian(2, 3, &mut rng);
        let w = Precoder::new(complex_gaussian(3, 2, &mut rng)).unwrap();
        let g = lmmse_filter(&h, &w).unwrap();
        let s = SlackMatrix::optimal(&h, &w).unwrap();
        let r = rate(&h, &w).unwrap();
        assert!((surrogate(&h, &w, &g, &s).unwrap() - r).abs() < 1e-9);
        // any other slack does no better
        let s2 = SlackMatrix::new(identity(2) * c(2.0, 0.0)).unwrap();
        assert!(surrogate(&h, &w, &g, &s2).unwrap() <= r + 1e-9);
    }

    #[test]
    fn slack_factor_reproduces_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = complex_gaussian(3, 3, &mut rng);
        let s = SlackMatrix::new(&a * a.adjoint() + identity(3)).unwrap();
        let rebuilt = s.factor() * s.factor().adjoint();
        assert!((rebuilt - s.matrix()).norm() <= 1e-8 * s.matrix().norm());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h = complex_gaussian(2, 3, &mut rng);
        let w = complex_gaussian(3, 2, &mut rng);
        let grad = rate_gradient(&h, &Precoder::new(w.clone()).unwrap()).unwrap();
        let eps = 1e-6;
        for i in 0..3 {
            for j in 0..2 {
                for (dir, part) in [(c(1.0, 0.0), 0), (c(0.0, 1.0), 1)] {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[(i, j)] += dir * eps;
                    wm[(i, j)] -= dir * eps;
                    let fd = (rate(&h, &Precoder::new(wp).unwrap()).unwrap()
                        - rate(&h, &Precoder::new(wm).unwrap()).unwrap())
                        / (2.0 * eps);
                    // d/dRe = 2 Re(g), d/dIm = 2 Im(g) for the W* gradient
                    let analytic = if part == 0 { 2.0 * grad[(i, j)].re } else { 2.0 * grad[(i, j)].im };
                    assert!((fd - analytic).abs() < 1e-6, "{fd} vs {analytic}");
                }
            }
        }
    }
}
