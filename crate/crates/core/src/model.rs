//! Network description, channel generators and antenna block selectors.
//!
//! Base stations (BSs) and mobile stations (MSs) are indexed from zero. The
//! aggregate transmit vector stacks the antennas of BS 0, BS 1, ... in order,
//! so BS `i` owns rows `offset(i) .. offset(i) + n_{B,i}`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Dimensions, per-BS power budgets and backhaul capacities, and rate
/// weights of a downlink instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    bs_antennas: Vec<usize>,
    ms_antennas: Vec<usize>,
    streams: Vec<usize>,
    powers: Vec<f64>,
    backhaul: Vec<f64>,
    weights: Vec<f64>,
}

impl NetworkConfig {
    /// Builds a configuration with full-rank streams (`r_k = n_{M,k}`) and
    /// unit weights.
    pub fn new(
        bs_antennas: Vec<usize>,
        ms_antennas: Vec<usize>,
        powers: Vec<f64>,
        backhaul: Vec<f64>,
    ) -> Result<Self> {
        let streams = ms_antennas.clone();
        let weights = vec![1.0; ms_antennas.len()];
        Self::with_all(bs_antennas, ms_antennas, streams, powers, backhaul, weights)
    }

    /// `n_bs` identical BSs and `n_ms` identical MSs.
    pub fn uniform(
        n_bs: usize,
        n_ms: usize,
        bs_antennas: usize,
        ms_antennas: usize,
        power: f64,
        backhaul: f64,
    ) -> Result<Self> {
        Self::new(
            vec![bs_antennas; n_bs],
            vec![ms_antennas; n_ms],
            vec![power; n_bs],
            vec![backhaul; n_bs],
        )
    }

    pub fn with_all(
        bs_antennas: Vec<usize>,
        ms_antennas: Vec<usize>,
        streams: Vec<usize>,
        powers: Vec<f64>,
        backhaul: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let cfg = Self {
            bs_antennas,
            ms_antennas,
            streams,
            powers,
            backhaul,
            weights,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.bs_antennas.is_empty() || self.ms_antennas.is_empty() {
            return bad("need at least one BS and one MS".into());
        }
        if self.bs_antennas.iter().chain(&self.ms_antennas).any(|&n| n == 0) {
            return bad("antenna counts must be at least 1".into());
        }
        let nb = self.bs_antennas.len();
        let nm = self.ms_antennas.len();
        if self.powers.len() != nb || self.backhaul.len() != nb {
            return bad(format!("expected {nb} powers and backhaul capacities"));
        }
        if self.streams.len() != nm || self.weights.len() != nm {
            return bad(format!("expected {nm} stream counts and weights"));
        }
        for (k, (&r, &n)) in self.streams.iter().zip(&self.ms_antennas).enumerate() {
            if r == 0 || r > n {
                return bad(format!("MS {k}: streams {r} must lie in 1..={n}"));
            }
        }
        if let Some(p) = self.powers.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return bad(format!("power {p} must be positive and finite"));
        }
        if let Some(c) = self.backhaul.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return bad(format!("backhaul {c} must be nonnegative and finite"));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return bad(format!("weight {w} must be nonnegative and finite"));
        }
        Ok(())
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn with_streams(mut self, streams: Vec<usize>) -> Result<Self> {
        self.streams = streams;
        self.validate()?;
        Ok(self)
    }

    pub fn with_powers(mut self, powers: Vec<f64>) -> Result<Self> {
        self.powers = powers;
        self.validate()?;
        Ok(self)
    }

    pub fn with_backhaul(mut self, backhaul: Vec<f64>) -> Result<Self> {
        self.backhaul = backhaul;
        self.validate()?;
        Ok(self)
    }

    pub fn n_bs(&self) -> usize {
        self.bs_antennas.len()
    }

    pub fn n_ms(&self) -> usize {
        self.ms_antennas.len()
    }

    pub fn bs_antennas(&self) -> &[usize] {
        &self.bs_antennas
    }

    pub fn ms_antennas(&self) -> &[usize] {
        &self.ms_antennas
    }

    pub fn streams(&self) -> &[usize] {
        &self.streams
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn backhaul(&self) -> &[f64] {
        &self.backhaul
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total transmit antennas `n_B`.
    pub fn total_bs_antennas(&self) -> usize {
        self.bs_antennas.iter().sum()
    }

    /// Total receive antennas `n_M`.
    pub fn total_ms_antennas(&self) -> usize {
        self.ms_antennas.iter().sum()
    }

    /// First stacked row owned by BS `i`.
    pub fn bs_offset(&self, i: usize) -> usize {
        self.bs_antennas[..i].iter().sum()
    }

    /// Stacked rows owned by BS `i`.
    pub fn bs_rows(&self, i: usize) -> std::ops::Range<usize> {
        let o = self.bs_offset(i);
        o..o + self.bs_antennas[i]
    }

    /// Sum of backhaul capacities over `subset`.
    pub fn backhaul_sum(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&i| self.backhaul[i]).sum()
    }
}

/// Per-MS channel matrices `H_k` of shape `n_{M,k} x n_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    h: Vec<CMat>,
}

impl ChannelSet {
    pub fn new(cfg: &NetworkConfig, h: Vec<CMat>) -> Result<Self> {
        if h.len() != cfg.n_ms() {
            return Err(Error::Dimension(format!(
                "{} channel matrices for {} MSs",
                h.len(),
                cfg.n_ms()
            )));
        }
        let nb = cfg.total_bs_antennas();
        for (k, hk) in h.iter().enumerate() {
            if hk.nrows() != cfg.ms_antennas()[k] || hk.ncols() != nb {
                return Err(Error::Dimension(format!(
                    "H_{k} is {}x{}, expected {}x{nb}",
                    hk.nrows(),
                    hk.ncols(),
                    cfg.ms_antennas()[k]
                )));
            }
            if hk.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidConfig(format!("H_{k} has non-finite entries")));
            }
        }
        Ok(Self { h })
    }

    pub fn get(&self, k: usize) -> &CMat {
        &self.h[k]
    }

    pub fn all(&self) -> &[CMat] {
        &self.h
    }

    pub fn n_ms(&self) -> usize {
        self.h.len()
    }

    /// Block `H_{k,i}` from BS `i` to MS `k`.
    pub fn block(&self, cfg: &NetworkConfig, k: usize, i: usize) -> CMat {
        let rows = cfg.bs_rows(i);
        self.h[k].columns(rows.start, rows.len()).into_owned()
    }

    /// Every `H_k` multiplied by `factor[k]`.
    pub fn scaled(&self, factor: &[f64]) -> Self {
        let h = self
            .h
            .iter()
            .zip(factor)
            .map(|(hk, &f)| hk * C64::new(f, 0.0))
            .collect();
        Self { h }
    }
}

/// Selection of the stacked antenna rows of a set of BSs (the matrix `E_S`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSelector {
    subset: Vec<usize>,
    rows: Vec<usize>,
    total: usize,
}

impl BlockSelector {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Stacked row indices, ascending.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The explicit `n_B x |rows|` selection matrix.
    pub fn matrix(&self) -> CMat {
        let mut e = CMat::zeros(self.total, self.rows.len());
        for (j, &r) in self.rows.iter().enumerate() {
            e[(r, j)] = C64::new(1.0, 0.0);
        }
        e
    }

    /// `E_S^H M E_S`.
    pub fn compress(&self, m: &CMat) -> CMat {
        crate::linalg::submatrix(m, &self.rows, &self.rows)
    }

    /// `E_S^H M E_T`.
    pub fn cross(&self, m: &CMat, other: &BlockSelector) -> CMat {
        crate::linalg::submatrix(m, &self.rows, &other.rows)
    }

    /// `E_S^H x` for a stacked vector.
    pub fn extract<'a>(&self, x: impl Fn(usize) -> C64 + 'a) -> Vec<C64> {
        self.rows.iter().map(|&r| x(r)).collect()
    }
}

/// Realizes `E_S` for a nonempty subset of BS indices.
pub fn block_select(cfg: &NetworkConfig, subset: &[usize]) -> Result<BlockSelector> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset(subset.to_vec()));
    }
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != subset.len() || s.iter().any(|&i| i >= cfg.n_bs()) {
        return Err(Error::InvalidSubset(subset.to_vec()));
    }
    let rows = s.iter().flat_map(|&i| cfg.bs_rows(i)).collect();
    Ok(BlockSelector {
        subset: s,
        rows,
        total: cfg.total_bs_antennas(),
    })
}

/// Circular Wyner model: unit direct gain, gain `g` between every other
/// cell pair. Requires single-antenna nodes and one MS per cell.
pub fn wyner_channels(cfg: &NetworkConfig, g: f64) -> Result<ChannelSet> {
    if cfg.bs_antennas().iter().chain(cfg.ms_antennas()).any(|&n| n != 1) {
        return Err(Error::Dimension(
            "Wyner model requires single-antenna BSs and MSs".into(),
        ));
    }
    if cfg.n_bs() != cfg.n_ms() {
        return Err(Error::Dimension(format!(
            "Wyner model requires as many MSs as BSs ({} vs {})",
            cfg.n_ms(),
            cfg.n_bs()
        )));
    }
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::InvalidConfig(format!("inter-cell gain {g} outside [0, 1]")));
    }
    let n = cfg.n_bs();
    let h = (0..n)
        .map(|k| CMat::from_fn(1, n, |_, j| C64::new(if j == k { 1.0 } else { g }, 0.0)))
        .collect();
    ChannelSet::new(cfg, h)
}

/// Stream id of the channel block from BS `bs` to MS `ms` inside the
/// ChaCha20 generator keyed by the trial seed.
pub fn channel_stream_id(ms: usize, bs: usize) -> u64 {
    ((ms as u64) << 32) | bs as u64
}

/// Standard circularly symmetric complex Gaussian sample via Box-Muller
/// (unit variance: real and imaginary parts each have variance 1/2).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    // 1 - U keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let r = (-u1.ln()).sqrt();
    let theta = 2.0 * PI * u2;
    C64::new(r * theta.cos(), r * theta.sin())
}

/// I.i.d. Rayleigh fading: entries of `H_{k,i}` are `CN(0, alpha^|i-k|)`.
///
/// Each block `(k, i)` draws from its own ChaCha20 stream
/// ([`channel_stream_id`]) keyed by `seed`, so the result does not depend on
/// evaluation order. Entries are filled row-major within a block.
pub fn fading_channels(cfg: &NetworkConfig, alpha: f64, seed: u64) -> Result<ChannelSet> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} must be positive")));
    }
    let nb = cfg.total_bs_antennas();
    let mut h = Vec::with_capacity(cfg.n_ms());
    for k in 0..cfg.n_ms() {
        let mut hk = CMat::zeros(cfg.ms_antennas()[k], nb);
        for i in 0..cfg.n_bs() {
            let dist = (i as i64 - k as i64).unsigned_abs() as i32;
            let std = alpha.powi(dist).sqrt();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(channel_stream_id(k, i));
            for r in 0..cfg.ms_antennas()[k] {
                for c in cfg.bs_rows(i) {
                    hk[(r, c)] = complex_gaussian(&mut rng) * std;
                }
            }
        }
        h.push(hk);
    }
    ChannelSet::new(cfg, h)
}
