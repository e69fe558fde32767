//! Closed-form rate and backhaul expressions.
//!
//! Everything here is a pure evaluator over a precoder `A = [A_1 .. A_N]`
//! (equivalently the covariances `R_k = A_k A_k^H`) and the joint
//! quantization-noise covariance `Omega`. Logarithms are base two.
//!
//! The `*_cov` functions take covariances directly; the optimizer works in
//! that parameterization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, LOGDET_FLOOR};
use crate::model::{block_select, ChannelSet, NetworkConfig};

/// Largest `N_B` for which the `2^N_B - 1` backhaul constraints are
/// enumerated exactly.
pub const MAX_ENUMERATED_BS: usize = 12;

/// Tolerance on negative eigenvalues accepted as PSD rounding noise,
/// relative to the matrix scale.
const PSD_TOL: f64 = 1e-8;

/// Linear precoder: one `n_B x c_k` block per MS.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    blocks: Vec<CMat>,
    covs: Vec<CMat>,
}

impl Precoder {
    pub fn new(cfg: &NetworkConfig, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != cfg.n_ms() {
            return Err(Error::Dimension(format!(
                "{} precoder blocks for {} MSs",
                blocks.len(),
                cfg.n_ms()
            )));
        }
        let nb = cfg.total_bs_antennas();
        if let Some((k, a)) = blocks.iter().enumerate().find(|(_, a)| a.nrows() != nb) {
            return Err(Error::Dimension(format!("A_{k} has {} rows, expected {nb}", a.nrows())));
        }
        let covs = blocks.iter().map(|a| a * a.adjoint()).collect();
        Ok(Self { blocks, covs })
    }

    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let nb = cfg.total_bs_antennas();
        let blocks: Vec<CMat> = cfg.streams().iter().map(|&r| CMat::zeros(nb, r)).collect();
        let covs = blocks.iter().map(|_| CMat::zeros(nb, nb)).collect();
        Self { blocks, covs }
    }

    /// Recovers `A_k = V_k D_k^{1/2}` from the eigen-decomposition of each
    /// `R_k`, keeping the numerically nonzero eigenvalues.
    pub fn from_covariances(cfg: &NetworkConfig, covs: &[CMat]) -> Result<Self> {
        let nb = cfg.total_bs_antennas();
        if covs.len() != cfg.n_ms() || covs.iter().any(|r| r.nrows() != nb || r.ncols() != nb) {
            return Err(Error::Dimension("covariances must be n_B x n_B, one per MS".into()));
        }
        let blocks = covs
            .iter()
            .map(|r| {
                let eig = linalg::eigh(r);
                let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
                let keep: Vec<usize> = (0..nb)
                    .filter(|&j| eig.eigenvalues[j] > 1e-13 * max && eig.eigenvalues[j] > 0.0)
                    .collect();
                CMat::from_fn(nb, keep.len(), |i, c| {
                    eig.eigenvectors[(i, keep[c])] * eig.eigenvalues[keep[c]].sqrt()
                })
            })
            .collect();
        Self::new(cfg, blocks)
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    /// `R_k = A_k A_k^H` for every MS.
    pub fn covariances(&self) -> &[CMat] {
        &self.covs
    }

    /// `A A^H = sum_k R_k`.
    pub fn total_covariance(&self) -> CMat {
        sum_covs(&self.covs, self.covs.iter().map(|_| true))
    }

    /// The stacked precoder `[A_1 .. A_N]`.
    pub fn stacked(&self) -> CMat {
        let nb = self.covs.first().map_or(0, |c| c.nrows());
        let cols: usize = self.blocks.iter().map(|a| a.ncols()).sum();
        let mut out = CMat::zeros(nb, cols);
        let mut c0 = 0;
        for a in &self.blocks {
            out.columns_mut(c0, a.ncols()).copy_from(a);
            c0 += a.ncols();
        }
        out
    }
}

/// Joint quantization-noise covariance `Omega`, Hermitian PSD, with
/// per-BS block access.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantCov {
    omega: CMat,
    sizes: Vec<usize>,
}

impl QuantCov {
    /// Validates and symmetrizes `omega`.
    pub fn new(cfg: &NetworkConfig, omega: CMat) -> Result<Self> {
        let nb = cfg.total_bs_antennas();
        if omega.nrows() != nb || omega.ncols() != nb {
            return Err(Error::Dimension(format!(
                "Omega is {}x{}, expected {nb}x{nb}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        let scale = 1.0 + linalg::max_abs(&omega);
        let asym = linalg::asymmetry(&omega);
        if asym > PSD_TOL * scale {
            return Err(Error::NotHermitian(asym));
        }
        let omega = linalg::hermitian_part(&omega);
        let min = linalg::min_eigenvalue(&omega);
        if min < -PSD_TOL * scale {
            return Err(Error::NotPsd(min));
        }
        Ok(Self {
            omega,
            sizes: cfg.bs_antennas().to_vec(),
        })
    }

    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let nb = cfg.total_bs_antennas();
        Self {
            omega: CMat::zeros(nb, nb),
            sizes: cfg.bs_antennas().to_vec(),
        }
    }

    /// Diagonal `Omega` with one variance per stacked antenna.
    pub fn diagonal(cfg: &NetworkConfig, per_antenna: &[f64]) -> Result<Self> {
        let d: Vec<C64> = per_antenna.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self::new(cfg, CMat::from_diagonal(&nalgebra::DVector::from_vec(d)))
    }

    pub fn matrix(&self) -> &CMat {
        &self.omega
    }

    /// `Omega_{i,j}`.
    pub fn block(&self, i: usize, j: usize) -> CMat {
        let oi: usize = self.sizes[..i].iter().sum();
        let oj: usize = self.sizes[..j].iter().sum();
        self.omega
            .view((oi, oj), (self.sizes[i], self.sizes[j]))
            .into_owned()
    }

    /// Whether every cross-BS block is zero within `tol`.
    pub fn is_block_diagonal(&self, tol: f64) -> bool {
        let n = self.sizes.len();
        (0..n).all(|i| (0..n).all(|j| i == j || linalg::max_abs(&self.block(i, j)) <= tol))
    }
}

/// Per-subset backhaul usage `g_S` against capacity `sum_{i in S} C_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetUsage {
    pub subset: Vec<usize>,
    pub usage: f64,
    pub capacity: f64,
}

impl SubsetUsage {
    pub fn slack(&self) -> f64 {
        self.capacity - self.usage
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerUsage {
    pub bs: usize,
    pub used: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    Backhaul(Vec<usize>),
    Power(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub backhaul: Vec<SubsetUsage>,
    pub power: Vec<PowerUsage>,
    /// `max(0, largest constraint excess)`; backhaul in bits, power linear.
    pub worst_violation: f64,
    pub worst: Option<Constraint>,
    /// Constraints satisfied with equality within the requested tolerance.
    pub active: Vec<Constraint>,
    /// Some log-determinant needed the domain guard.
    pub regularized: bool,
}

impl FeasibilityReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.worst_violation <= tol
    }

    /// Drops the power entries, for problems without per-BS power budgets.
    pub fn backhaul_only(mut self) -> Self {
        self.power.clear();
        self.active.retain(|c| matches!(c, Constraint::Backhaul(_)));
        self.worst = None;
        self.worst_violation = 0.0;
        for u in &self.backhaul {
            if u.usage - u.capacity > self.worst_violation {
                self.worst_violation = u.usage - u.capacity;
                self.worst = Some(Constraint::Backhaul(u.subset.clone()));
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_ms: Vec<f64>,
    pub weighted_sum: f64,
    pub backhaul: Vec<SubsetUsage>,
    pub bs_power: Vec<f64>,
    pub regularized: bool,
}

impl RateReport {
    pub fn sum_rate(&self) -> f64 {
        self.per_ms.iter().sum()
    }
}

/// Every nonempty subset of `0..n`, ordered by bitmask.
pub fn nonempty_subsets(n: usize) -> Vec<Vec<usize>> {
    (1u32..(1u32 << n))
        .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
        .collect()
}

pub(crate) fn sum_covs<'a>(covs: &'a [CMat], include: impl Iterator<Item = bool>) -> CMat {
    let n = covs.first().map_or(0, |c| c.nrows());
    let mut acc = CMat::zeros(n, n);
    for (c, inc) in covs.iter().zip(include) {
        if inc {
            acc += c;
        }
    }
    acc
}

/// `log2 det(I + H X H^H)`.
pub(crate) fn log2_det_ihxh(h: &CMat, x: &CMat) -> f64 {
    let m = CMat::identity(h.nrows(), h.nrows()) + h * x * h.adjoint();
    let m = linalg::hermitian_part(&m);
    match linalg::ln_det_pd(&m) {
        Some(v) => v / std::f64::consts::LN_2,
        None => linalg::log2_det_guarded(&m, f64::INFINITY).map(|v| v.0).unwrap_or(f64::NAN),
    }
}

/// Rate of MS `k` under linear precoding, in covariance form.
pub fn user_rate_cov(h: &CMat, covs: &[CMat], omega: &CMat, k: usize) -> f64 {
    let interf = sum_covs(covs, (0..covs.len()).map(|l| l != k)) + omega;
    let total = &interf + &covs[k];
    (log2_det_ihxh(h, &total) - log2_det_ihxh(h, &interf)).max(0.0)
}

/// Dirty-paper rate of the MS encoded at `position` of `perm`: only MSs
/// encoded later interfere.
pub fn dpc_rate_cov(h_all: &[CMat], covs: &[CMat], omega: &CMat, perm: &[usize], position: usize) -> f64 {
    let k = perm[position];
    let mut later = omega.clone();
    for &l in &perm[position + 1..] {
        later += &covs[l];
    }
    let with = &later + &covs[k];
    (log2_det_ihxh(&h_all[k], &with) - log2_det_ihxh(&h_all[k], &later)).max(0.0)
}

fn check_shapes(cfg: &NetworkConfig, chans: Option<&ChannelSet>, prec: &Precoder, q: &QuantCov) -> Result<()> {
    let nb = cfg.total_bs_antennas();
    if prec.covariances().len() != cfg.n_ms() || prec.covariances().iter().any(|r| r.nrows() != nb) {
        return Err(Error::Dimension("precoder does not match configuration".into()));
    }
    if q.matrix().nrows() != nb || q.sizes != cfg.bs_antennas() {
        return Err(Error::Dimension("quantization covariance does not match configuration".into()));
    }
    if let Some(ch) = chans {
        if ch.n_ms() != cfg.n_ms() || ch.all().iter().any(|h| h.ncols() != nb) {
            return Err(Error::Dimension("channels do not match configuration".into()));
        }
    }
    Ok(())
}

fn ms_index(cfg: &NetworkConfig, k: usize) -> Result<()> {
    if k >= cfg.n_ms() {
        return Err(Error::Dimension(format!("MS index {k} out of range")));
    }
    Ok(())
}

/// Achievable rate of MS `k` with single-user detection.
pub fn user_rate(cfg: &NetworkConfig, k: usize, chans: &ChannelSet, prec: &Precoder, q: &QuantCov) -> Result<f64> {
    check_shapes(cfg, Some(chans), prec, q)?;
    ms_index(cfg, k)?;
    Ok(user_rate_cov(chans.get(k), prec.covariances(), q.matrix(), k))
}

pub fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidPermutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Dirty-paper rate of the MS at `position` in encoding order `perm`.
pub fn dpc_rate(
    cfg: &NetworkConfig,
    position: usize,
    perm: &[usize],
    chans: &ChannelSet,
    prec: &Precoder,
    q: &QuantCov,
) -> Result<f64> {
    check_shapes(cfg, Some(chans), prec, q)?;
    validate_permutation(perm, cfg.n_ms())?;
    ms_index(cfg, position)?;
    Ok(dpc_rate_cov(chans.all(), prec.covariances(), q.matrix(), perm, position))
}

/// Multivariate backhaul requirement `g_S` in covariance form, with the
/// regularization flag.
pub fn backhaul_subset_rate_cov(
    cfg: &NetworkConfig,
    subset: &[usize],
    signal: &CMat,
    omega: &CMat,
) -> Result<(f64, bool)> {
    let sel = block_select(cfg, subset)?;
    let scale = 1.0 + linalg::max_abs(omega) + linalg::max_abs(signal);
    let tol = PSD_TOL * scale;
    let singular = |m: f64| Error::SingularBlock {
        subset: sel.subset().to_vec(),
        min_eig: m,
    };
    let mut total = 0.0;
    let mut regularized = false;
    for &i in sel.subset() {
        let rows: Vec<usize> = cfg.bs_rows(i).collect();
        let y = linalg::submatrix(signal, &rows, &rows) + linalg::submatrix(omega, &rows, &rows);
        let (v, r) = linalg::log2_det_guarded(&y, tol).map_err(singular)?;
        total += v;
        regularized |= r;
    }
    let (v, r) = linalg::log2_det_guarded(&sel.compress(omega), tol).map_err(singular)?;
    total -= v;
    regularized |= r;
    Ok((total.max(0.0), regularized))
}

/// `g_S(A, Omega)`: bits per channel use needed on the backhaul links of
/// `subset` for multivariate compression.
pub fn backhaul_subset_rate(cfg: &NetworkConfig, subset: &[usize], prec: &Precoder, q: &QuantCov) -> Result<f64> {
    check_shapes(cfg, None, prec, q)?;
    Ok(backhaul_subset_rate_cov(cfg, subset, &prec.total_covariance(), q.matrix())?.0)
}

/// Rate needed on BS `i`'s backhaul when it is compressed on its own.
pub fn independent_backhaul_rate(cfg: &NetworkConfig, i: usize, prec: &Precoder, q: &QuantCov) -> Result<f64> {
    backhaul_subset_rate(cfg, &[i], prec, q)
}

/// Per-BS transmit powers `tr(E_i^H A A^H E_i + Omega_ii)`.
pub fn bs_powers_cov(cfg: &NetworkConfig, signal: &CMat, omega: &CMat) -> Vec<f64> {
    (0..cfg.n_bs())
        .map(|i| cfg.bs_rows(i).map(|r| signal[(r, r)].re + omega[(r, r)].re).sum())
        .collect()
}

pub fn check_feasible_cov(cfg: &NetworkConfig, signal: &CMat, omega: &CMat, tol: f64) -> Result<FeasibilityReport> {
    if cfg.n_bs() > MAX_ENUMERATED_BS {
        return Err(Error::CapExceeded {
            what: "base stations for exact subset enumeration",
            cap: MAX_ENUMERATED_BS,
            got: cfg.n_bs(),
        });
    }
    let mut backhaul = Vec::new();
    let mut regularized = false;
    for s in nonempty_subsets(cfg.n_bs()) {
        let (usage, r) = backhaul_subset_rate_cov(cfg, &s, signal, omega)?;
        regularized |= r;
        let capacity = cfg.backhaul_sum(&s);
        backhaul.push(SubsetUsage {
            subset: s,
            usage,
            capacity,
        });
    }
    let power: Vec<PowerUsage> = bs_powers_cov(cfg, signal, omega)
        .into_iter()
        .enumerate()
        .map(|(bs, used)| PowerUsage {
            bs,
            used,
            budget: cfg.powers()[bs],
        })
        .collect();
    let mut worst_violation = 0.0;
    let mut worst = None;
    let mut active = Vec::new();
    let excesses = backhaul
        .iter()
        .map(|u| (u.usage - u.capacity, Constraint::Backhaul(u.subset.clone())))
        .chain(power.iter().map(|p| (p.used - p.budget, Constraint::Power(p.bs))));
    for (excess, c) in excesses {
        if excess > worst_violation {
            worst_violation = excess;
            worst = Some(c.clone());
        }
        if excess.abs() <= tol {
            active.push(c);
        }
    }
    Ok(FeasibilityReport {
        backhaul,
        power,
        worst_violation,
        worst,
        active,
        regularized,
    })
}

/// Evaluates every backhaul constraint and every per-BS power constraint.
pub fn check_feasible(cfg: &NetworkConfig, prec: &Precoder, q: &QuantCov, tol: f64) -> Result<FeasibilityReport> {
    check_shapes(cfg, None, prec, q)?;
    check_feasible_cov(cfg, &prec.total_covariance(), q.matrix(), tol)
}

/// Conditional covariance `Omega_ii - Omega_{i,S} Omega_SS^{-1} Omega_{S,i}`
/// of BS `i`'s quantization noise given the noises of `prefix`.
pub(crate) fn conditional_noise(cfg: &NetworkConfig, omega: &CMat, i: usize, prefix: &[usize]) -> Result<CMat> {
    let rows_i: Vec<usize> = cfg.bs_rows(i).collect();
    let oii = linalg::submatrix(omega, &rows_i, &rows_i);
    if prefix.is_empty() {
        return Ok(oii);
    }
    let rows_s: Vec<usize> = prefix.iter().flat_map(|&j| cfg.bs_rows(j)).collect();
    let oss = linalg::submatrix(omega, &rows_s, &rows_s);
    let min = linalg::min_eigenvalue(&oss);
    if min < LOGDET_FLOOR {
        return Err(Error::SingularBlock {
            subset: prefix.to_vec(),
            min_eig: min,
        });
    }
    let ois = linalg::submatrix(omega, &rows_i, &rows_s);
    let inv = linalg::inv_pd(&oss)?;
    Ok(linalg::hermitian_part(&(oii - &ois * inv * ois.adjoint())))
}

/// Corner point of the backhaul region for BS order `perm`, listed in step
/// order: entry `i` is the rate of BS `perm[i]`.
pub fn corner_point_cov(cfg: &NetworkConfig, perm: &[usize], signal: &CMat, omega: &CMat) -> Result<Vec<f64>> {
    validate_permutation(perm, cfg.n_bs())?;
    let mut out = Vec::with_capacity(perm.len());
    for (step, &i) in perm.iter().enumerate() {
        let rows: Vec<usize> = cfg.bs_rows(i).collect();
        let y = linalg::submatrix(signal, &rows, &rows) + linalg::submatrix(omega, &rows, &rows);
        let cond = conditional_noise(cfg, omega, i, &perm[..step])?;
        let singular = |m: f64| Error::SingularBlock {
            subset: perm[..=step].to_vec(),
            min_eig: m,
        };
        let tol = PSD_TOL * (1.0 + linalg::max_abs(&y));
        let (a, _) = linalg::log2_det_guarded(&y, tol).map_err(singular)?;
        let min = linalg::min_eigenvalue(&cond);
        if min < LOGDET_FLOOR {
            return Err(singular(min));
        }
        let (b, _) = linalg::log2_det_guarded(&cond, tol).map_err(singular)?;
        out.push(a - b);
    }
    Ok(out)
}

pub fn corner_point(cfg: &NetworkConfig, perm: &[usize], prec: &Precoder, q: &QuantCov) -> Result<Vec<f64>> {
    check_shapes(cfg, None, prec, q)?;
    corner_point_cov(cfg, perm, &prec.total_covariance(), q.matrix())
}

fn subset_mask(s: &[usize]) -> usize {
    s.iter().fold(0, |m, &i| m | (1 << i))
}

/// Finds a BS order whose nested prefix subsets all meet their backhaul
/// constraint with equality (within `tol`). Depth-first in ascending BS
/// order, so the lexicographically smallest such order is returned.
pub fn detect_corner_ordering_cov(
    cfg: &NetworkConfig,
    signal: &CMat,
    omega: &CMat,
    tol: f64,
) -> Result<Option<Vec<usize>>> {
    let report = check_feasible_cov(cfg, signal, omega, tol)?;
    let n = cfg.n_bs();
    let mut tight = vec![false; 1 << n];
    for u in &report.backhaul {
        tight[subset_mask(&u.subset)] = (u.usage - u.capacity).abs() <= tol;
    }
    fn dfs(n: usize, tight: &[bool], mask: usize, path: &mut Vec<usize>) -> bool {
        if path.len() == n {
            return true;
        }
        for j in 0..n {
            if mask & (1 << j) == 0 && tight[mask | (1 << j)] {
                path.push(j);
                if dfs(n, tight, mask | (1 << j), path) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = Vec::with_capacity(n);
    Ok(dfs(n, &tight, 0, &mut path).then_some(path))
}

pub fn detect_corner_ordering(
    cfg: &NetworkConfig,
    prec: &Precoder,
    q: &QuantCov,
    tol: f64,
) -> Result<Option<Vec<usize>>> {
    check_shapes(cfg, None, prec, q)?;
    detect_corner_ordering_cov(cfg, &prec.total_covariance(), q.matrix(), tol)
}

pub fn weighted_sum_rate_cov(cfg: &NetworkConfig, chans: &ChannelSet, covs: &[CMat], omega: &CMat) -> Result<RateReport> {
    let per_ms: Vec<f64> = (0..cfg.n_ms())
        .map(|k| user_rate_cov(chans.get(k), covs, omega, k))
        .collect();
    let weighted_sum = per_ms.iter().zip(cfg.weights()).map(|(r, w)| r * w).sum();
    let signal = sum_covs(covs, covs.iter().map(|_| true));
    let report = check_feasible_cov(cfg, &signal, omega, 0.0)?;
    Ok(RateReport {
        per_ms,
        weighted_sum,
        backhaul: report.backhaul,
        bs_power: report.power.iter().map(|p| p.used).collect(),
        regularized: report.regularized,
    })
}

/// Per-MS rates, weighted sum, backhaul usage per subset and per-BS power.
pub fn weighted_sum_rate(cfg: &NetworkConfig, chans: &ChannelSet, prec: &Precoder, q: &QuantCov) -> Result<RateReport> {
    check_shapes(cfg, Some(chans), prec, q)?;
    weighted_sum_rate_cov(cfg, chans, prec.covariances(), q.matrix())
}
