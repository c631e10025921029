//! Discrete codebook: base codewords, ground-set elements and set rates.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, frob2, identity, logdet_hpd, CMat};
use crate::model::channel::{complex_gaussian, matrix_to_nested, nested_to_matrix, ChannelSet};
use crate::model::rate::Precoder;

const UNIT_NORM_TOL: f64 = 1e-9;

/// One ground-set element `(W', r, p)`: a unit-Frobenius-norm codeword, its
/// rank and the power it is scaled to.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    w: CMat,
    rank: usize,
    power: f64,
}

impl Element {
    pub fn new(w: CMat, rank: usize, power: f64) -> Result<Self> {
        if w.ncols() != rank || rank == 0 {
            return Err(Error::instance(format!(
                "codeword has {} columns but rank {rank} was given",
                w.ncols()
            )));
        }
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::instance(format!("element power {power} must be finite and >= 0")));
        }
        let norm = frob2(&w);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::instance(format!("codeword has squared norm {norm}, expected 1")));
        }
        let sv = w.clone().singular_values();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let numerical_rank = sv.iter().filter(|&&s| s > 1e-10 * smax.max(1e-300)).count();
        if numerical_rank != rank {
            return Err(Error::instance(format!(
                "codeword columns are not linearly independent (rank {numerical_rank} < {rank})"
            )));
        }
        Ok(Self { w, rank, power })
    }

    pub fn codeword(&self) -> &CMat {
        &self.w
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn tx_antennas(&self) -> usize {
        self.w.nrows()
    }
}

/// The ground set of elements; an element's id is its index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundSet {
    elements: Vec<Element>,
}

impl GroundSet {
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        if let Some(first) = elements.first() {
            let m = first.tx_antennas();
            if elements.iter().any(|e| e.tx_antennas() != m) {
                return Err(Error::instance("ground-set elements have different row counts"));
            }
        }
        Ok(Self { elements })
    }

    /// Every codeword at every listed power level; ids run codeword-major.
    pub fn with_power_levels(codewords: &[CMat], levels: &[f64]) -> Result<Self> {
        let mut elements = Vec::with_capacity(codewords.len() * levels.len());
        for w in codewords {
            for &p in levels {
                elements.push(Element::new(w.clone(), w.ncols(), p)?);
            }
        }
        Self::new(elements)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, id: usize) -> Result<&Element> {
        self.elements
            .get(id)
            .ok_or_else(|| Error::instance(format!("unknown element id {id}")))
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn tx_antennas(&self) -> Option<usize> {
        self.elements.first().map(Element::tx_antennas)
    }

    /// `r_U`.
    pub fn rank_of(&self, ids: &[usize]) -> usize {
        ids.iter().map(|&i| self.elements[i].rank).sum()
    }

    /// `p_U`.
    pub fn power_of(&self, ids: &[usize]) -> f64 {
        ids.iter().map(|&i| self.elements[i].power).sum()
    }

    /// The concatenated precoder `[sqrt(p_e) W_e]_{e in U}`.
    pub fn concatenate(&self, ids: &[usize]) -> Result<Precoder> {
        let m = self
            .tx_antennas()
            .ok_or_else(|| Error::instance("empty ground set"))?;
        let cols = ids
            .iter()
            .map(|&i| self.element(i).map(|e| e.rank))
            .sum::<Result<usize>>()?;
        if cols == 0 {
            return Ok(Precoder::zeros(m, 1));
        }
        let mut w = CMat::zeros(m, cols);
        let mut at = 0;
        for &i in ids {
            let e = &self.elements[i];
            let scaled = &e.w * c(e.power.sqrt(), 0.0);
            w.columns_mut(at, e.rank).copy_from(&scaled);
            at += e.rank;
        }
        Precoder::new(w)
    }

    pub fn to_file(&self) -> Vec<ElementFile> {
        self.elements
            .iter()
            .map(|e| ElementFile {
                w: matrix_to_nested(&e.w),
                r: e.rank,
                p: e.power,
            })
            .collect()
    }

    pub fn from_file(file: &[ElementFile]) -> Result<Self> {
        let elements = file
            .iter()
            .map(|ef| {
                let rows = ef.w.len();
                let cols = ef.w.first().map_or(0, Vec::len);
                let w = nested_to_matrix(&ef.w, rows, cols)?;
                Element::new(w, ef.r, ef.p)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(elements)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: Vec<ElementFile> = serde_json::from_str(s)?;
        Self::from_file(&file)
    }
}

/// On-disk codebook entry `{W: [[ [re, im], .. ], ..], r, p}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ElementFile {
    #[serde(rename = "W")]
    pub w: Vec<Vec<[f64; 2]>>,
    pub r: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookKind {
    /// Oversampled DFT beams: `w_n(m) = exp(j 2 pi m n / count) / sqrt(M)`.
    /// For `count = 4 M` these are the `M`-point DFT columns under four
    /// phase rotations.
    Dft,
    /// Normalized complex Gaussian vectors.
    RandomIsotropic { seed: u64 },
}

impl std::str::FromStr for CodebookKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dft" => Ok(CodebookKind::Dft),
            other => {
                if let Some(seed) = other.strip_prefix("random-isotropic") {
                    let seed = seed.trim_start_matches(':');
                    let seed = if seed.is_empty() {
                        0
                    } else {
                        seed.parse()
                            .map_err(|_| Error::config(format!("bad codebook seed in '{other}'")))?
                    };
                    Ok(CodebookKind::RandomIsotropic { seed })
                } else {
                    Err(Error::config(format!("unsupported codebook kind '{other}'")))
                }
            }
        }
    }
}

/// `count` rank-one unit-norm codewords of length `tx`.
pub fn generate_base_codebook(kind: CodebookKind, tx: usize, count: usize) -> Result<Vec<CMat>> {
    if count == 0 || tx == 0 {
        return Err(Error::config("codebook needs count >= 1 and M >= 1"));
    }
    let scale = 1.0 / (tx as f64).sqrt();
    match kind {
        CodebookKind::Dft => Ok((0..count)
            .map(|n| {
                CMat::from_fn(tx, 1, |m, _| {
                    let phase = 2.0 * PI * (m * n) as f64 / count as f64;
                    c(scale * phase.cos(), scale * phase.sin())
                })
            })
            .collect()),
        CodebookKind::RandomIsotropic { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..count)
                .map(|_| loop {
                    let v = complex_gaussian(tx, 1, &mut rng);
                    let n2 = frob2(&v);
                    if n2 > 1e-12 {
                        break v * c(1.0 / n2.sqrt(), 0.0);
                    }
                })
                .collect())
        }
    }
}

/// Precomputed `sqrt(p_e) H_k^l W_e` products for fast set-rate evaluation.
#[derive(Debug, Clone)]
pub struct RateTable {
    users: usize,
    slots: usize,
    rx: Vec<usize>,
    // [(user * slots + slot) * n_elements + e]
    products: Vec<CMat>,
    n_elements: usize,
    ground: GroundSet,
}

impl RateTable {
    pub fn new(channels: &ChannelSet, ground: &GroundSet) -> Result<Self> {
        if let Some(m) = ground.tx_antennas() {
            if m != channels.tx_antennas() {
                return Err(Error::instance(format!(
                    "codewords have {m} rows but channels have {} transmit antennas",
                    channels.tx_antennas()
                )));
            }
        }
        let (users, slots) = (channels.users(), channels.slots());
        let mut products = Vec::with_capacity(users * slots * ground.len());
        for k in 0..users {
            for l in 0..slots {
                let h = channels.channel(k, l);
                for e in ground.elements() {
                    products.push(h * e.codeword() * c(e.power().sqrt(), 0.0));
                }
            }
        }
        Ok(Self {
            users,
            slots,
            rx: channels.rx_all().to_vec(),
            products,
            n_elements: ground.len(),
            ground: ground.clone(),
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    /// `R_k^l(U) = log|I + sum_{e in U} p_e H W_e W_e† H†|`.
    pub fn rate(&self, user: usize, slot: usize, ids: &[usize]) -> Result<f64> {
        let n = self.rx[user];
        let mut y = identity(n);
        for &id in ids {
            if id >= self.n_elements {
                return Err(Error::instance(format!("unknown element id {id}")));
            }
            let v = &self.products[(user * self.slots + slot) * self.n_elements + id];
            y += v * v.adjoint();
        }
        if ids.is_empty() {
            return Ok(0.0);
        }
        Ok(logdet_hpd(&y)?.max(0.0))
    }

    /// Per-user rates on a single slot.
    pub fn rates(&self, slot: usize, ids: &[usize]) -> Result<Vec<f64>> {
        (0..self.users).map(|k| self.rate(k, slot, ids)).collect()
    }

    pub fn min_rate(&self, slot: usize, ids: &[usize]) -> Result<f64> {
        Ok(self
            .rates(slot, ids)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }
}

/// Set rate `log|I + sum_{e in U} p_e H W_e W_e† H†|` for one channel matrix.
pub fn rate_set(h: &CMat, ground: &GroundSet, ids: &[usize]) -> Result<f64> {
    let mut y = identity(h.nrows());
    for &id in ids {
        let e = ground.element(id)?;
        if e.tx_antennas() != h.ncols() {
            return Err(Error::instance("codeword and channel dimensions differ"));
        }
        let v = h * e.codeword();
        y += &v * v.adjoint() * c(e.power(), 0.0);
    }
    if ids.is_empty() {
        return Ok(0.0);
    }
    Ok(logdet_hpd(&y)?.max(0.0))
}
