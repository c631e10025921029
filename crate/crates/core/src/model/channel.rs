use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, c, CMat};

/// All user channel matrices for one scheduling interval.
///
/// `H[k][l]` is the `N_k x M` channel of user `k` on slot `l`. Channels are
/// quasi-static across intervals, so slot `tau` (counted from 0 across the
/// whole horizon) uses `H[k][tau mod L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    tx: usize,
    rx: Vec<usize>,
    slots: usize,
    h: Vec<Vec<CMat>>,
}

impl ChannelSet {
    /// Build from `h[k][l]`, validating every dimension.
    pub fn new(h: Vec<Vec<CMat>>) -> Result<Self> {
        let users = h.len();
        if users == 0 {
            return Err(Error::instance("channel set needs at least one user"));
        }
        let slots = h[0].len();
        if slots == 0 {
            return Err(Error::instance("channel set needs at least one slot"));
        }
        let tx = h[0][0].ncols();
        if tx == 0 {
            return Err(Error::instance("channel matrices need at least one transmit antenna"));
        }
        let mut rx = Vec::with_capacity(users);
        for (k, per_user) in h.iter().enumerate() {
            if per_user.len() != slots {
                return Err(Error::instance(format!(
                    "user {k} has {} slots, expected {slots}",
                    per_user.len()
                )));
            }
            let n = per_user[0].nrows();
            if n == 0 {
                return Err(Error::instance(format!("user {k} has no receive antennas")));
            }
            for (l, m) in per_user.iter().enumerate() {
                if m.nrows() != n || m.ncols() != tx {
                    return Err(Error::instance(format!(
                        "H[{k}][{l}] is {}x{}, expected {n}x{tx}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if !all_finite(m) {
                    return Err(Error::numeric(format!("H[{k}][{l}] has non-finite entries")));
                }
            }
            rx.push(n);
        }
        Ok(Self { tx, rx, slots, h })
    }

    /// Single-slot channel set from one matrix per user.
    pub fn single_slot(h: Vec<CMat>) -> Result<Self> {
        Self::new(h.into_iter().map(|m| vec![m]).collect())
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx
    }

    pub fn rx_antennas(&self, user: usize) -> usize {
        self.rx[user]
    }

    pub fn rx_all(&self) -> &[usize] {
        &self.rx
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Channel of `user` on global slot index `tau` (0-based, wraps modulo L).
    pub fn channel(&self, user: usize, tau: usize) -> &CMat {
        &self.h[user][tau % self.slots]
    }

    /// The `L = 1` channel set holding only slot `slot`.
    pub fn slot(&self, slot: usize) -> ChannelSet {
        let h = self.h.iter().map(|u| vec![u[slot % self.slots].clone()]).collect();
        ChannelSet {
            tx: self.tx,
            rx: self.rx.clone(),
            slots: 1,
            h,
        }
    }

    /// Keep only the listed users, in the given order.
    pub fn subset(&self, users: &[usize]) -> Result<ChannelSet> {
        let h = users
            .iter()
            .map(|&k| {
                self.h
                    .get(k)
                    .cloned()
                    .ok_or_else(|| Error::instance(format!("unknown user {k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ChannelSet::new(h)
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            k: self.users(),
            m: self.tx,
            l: self.slots,
            n: self.rx.clone(),
            h: self
                .h
                .iter()
                .map(|u| u.iter().map(matrix_to_nested).collect())
                .collect(),
        }
    }

    pub fn from_file(file: &ChannelFile) -> Result<Self> {
        if file.h.len() != file.k || file.n.len() != file.k {
            return Err(Error::instance("channel file: K does not match H/N lengths"));
        }
        let mut h = Vec::with_capacity(file.k);
        for (k, per_user) in file.h.iter().enumerate() {
            if per_user.len() != file.l {
                return Err(Error::instance(format!("channel file: user {k} slot count != L")));
            }
            let mats = per_user
                .iter()
                .map(|m| nested_to_matrix(m, file.n[k], file.m))
                .collect::<Result<Vec<_>>>()?;
            h.push(mats);
        }
        ChannelSet::new(h)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ChannelFile = serde_json::from_str(s)?;
        Self::from_file(&file)
    }
}

/// On-disk channel format: `{K, M, L, N: [..], H: [k][l][row][col] = [re, im]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelFile {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

/// Row-major `[re, im]` pairs.
pub fn matrix_to_nested(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn nested_to_matrix(rows: &[Vec<[f64; 2]>], n: usize, m: usize) -> Result<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != m) {
        return Err(Error::instance(format!("matrix entry list is not {n}x{m}")));
    }
    Ok(CMat::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// Draw a circularly-symmetric complex Gaussian matrix with unit-variance
/// entries (real and imaginary parts each of variance 1/2).
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(s * re, s * im)
    })
}

/// i.i.d. Rayleigh-fading channels, deterministic in `seed`.
pub fn generate_rayleigh(seed: u64, users: usize, tx: usize, rx: &[usize], slots: usize) -> Result<ChannelSet> {
    if users == 0 || tx == 0 || slots == 0 {
        return Err(Error::instance("K, M and L must be positive"));
    }
    if rx.len() != users {
        return Err(Error::instance(format!("N has {} entries for K = {users}", rx.len())));
    }
    if rx.contains(&0) {
        return Err(Error::instance("every N_k must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = rx
        .iter()
        .map(|&n| (0..slots).map(|_| complex_gaussian(n, tx, &mut rng)).collect())
        .collect();
    ChannelSet::new(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_is_deterministic() {
        let a = generate_rayleigh(17, 3, 4, &[2, 1, 2], 2).unwrap();
        let b = generate_rayleigh(17, 3, 4, &[2, 1, 2], 2).unwrap();
        assert_eq!(a, b);
        let c = generate_rayleigh(18, 3, 4, &[2, 1, 2], 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rayleigh_shapes() {
        let ch = generate_rayleigh(1, 2, 3, &[2, 1], 1).unwrap();
        assert_eq!(ch.channel(0, 0).shape(), (2, 3));
        assert_eq!(ch.channel(1, 0).shape(), (1, 3));
    }

    #[test]
    fn rayleigh_unit_second_moment() {
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|s| generate_rayleigh(s, 1, 1, &[1], 1).unwrap().channel(0, 0)[(0, 0)].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((0.99..=1.01).contains(&mean), "mean |h|^2 = {mean}");
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(generate_rayleigh(0, 0, 2, &[], 1).is_err());
        assert!(generate_rayleigh(0, 2, 2, &[1], 1).is_err());
        assert!(generate_rayleigh(0, 1, 2, &[0], 1).is_err());
        let bad = vec![vec![CMat::zeros(1, 2)], vec![CMat::zeros(1, 3)]];
        assert!(matches!(ChannelSet::new(bad), Err(Error::Instance(_))));
        let nan = vec![vec![CMat::from_element(1, 1, c(f64::NAN, 0.0))]];
        assert!(matches!(ChannelSet::new(nan), Err(Error::Numeric(_))));
    }

    #[test]
    fn slots_wrap_modulo_interval() {
        let ch = generate_rayleigh(9, 1, 2, &[1], 3).unwrap();
        assert_eq!(ch.channel(0, 4), ch.channel(0, 1));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ch = generate_rayleigh(5, 2, 3, &[1, 2], 2).unwrap();
        let text = ch.to_json().unwrap();
        let back = ChannelSet::from_json(&text).unwrap();
        assert_eq!(ch, back);
        assert_eq!(text, back.to_json().unwrap());
    }
}
