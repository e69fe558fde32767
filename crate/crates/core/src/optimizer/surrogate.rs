//! Concave minorant of the sum-rate and convex majorant of the backhaul
//! functions, evaluated on explicit covariance points.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{block_select, ChannelSet, NetworkConfig};
use crate::optimizer::Point;
use crate::rates::{log2_det_ihxh, sum_covs};

/// `phi(X, Y) = log2 det Y + tr(Y^{-1} (X - Y)) / ln 2`, the tangent upper
/// bound of `log2 det X` at `Y`.
pub fn phi(x: &CMat, y: &CMat) -> Result<f64> {
    if x.shape() != y.shape() || x.nrows() != x.ncols() {
        return Err(Error::Dimension("phi needs two square matrices of equal size".into()));
    }
    let y = linalg::hermitian_part(y);
    let ln_det = linalg::ln_det_pd(&y).ok_or_else(|| Error::Numerical("phi anchor is singular".into()))?;
    let yinv = linalg::inv_pd(&y)?;
    let tr = linalg::trace_prod_re(&yinv, &(x - &y));
    Ok(ln_det / LN_2 + tr / LN_2)
}

fn check_point(cfg: &NetworkConfig, p: &Point) -> Result<()> {
    let nb = cfg.total_bs_antennas();
    if p.covs.len() != cfg.n_ms() || p.covs.iter().any(|r| r.shape() != (nb, nb)) || p.omega.shape() != (nb, nb) {
        return Err(Error::Dimension("covariance point does not match configuration".into()));
    }
    Ok(())
}

/// `sum_k w_k f'_k`: exact first log-determinant, interference term
/// replaced by its tangent at the anchor.
pub fn surrogate_objective(candidate: &Point, anchor: &Point, cfg: &NetworkConfig, chans: &ChannelSet) -> Result<f64> {
    check_point(cfg, candidate)?;
    check_point(cfg, anchor)?;
    let n = cfg.n_ms();
    let mut total = 0.0;
    for k in 0..n {
        let w = cfg.weights()[k];
        let h = chans.get(k);
        let all = sum_covs(&candidate.covs, (0..n).map(|_| true)) + &candidate.omega;
        let first = log2_det_ihxh(h, &all);
        let interf = |p: &Point| {
            let s = sum_covs(&p.covs, (0..n).map(|l| l != k)) + &p.omega;
            CMat::identity(h.nrows(), h.nrows()) + h * s * h.adjoint()
        };
        total += w * (first - phi(&interf(candidate), &interf(anchor))?);
    }
    Ok(total)
}

/// `g'_S`: per-BS received covariances majorized by their tangents at the
/// anchor, exact `-log2 det Omega_SS`.
pub fn surrogate_backhaul(candidate: &Point, anchor: &Point, cfg: &NetworkConfig, subset: &[usize]) -> Result<f64> {
    check_point(cfg, candidate)?;
    check_point(cfg, anchor)?;
    let sel = block_select(cfg, subset)?;
    let total = |p: &Point| sum_covs(&p.covs, p.covs.iter().map(|_| true)) + &p.omega;
    let (tc, ta) = (total(candidate), total(anchor));
    let mut g = 0.0;
    for &i in sel.subset() {
        let rows: Vec<usize> = cfg.bs_rows(i).collect();
        g += phi(&linalg::submatrix(&tc, &rows, &rows), &linalg::submatrix(&ta, &rows, &rows))?;
    }
    let block = sel.compress(&candidate.omega);
    let ln_det = linalg::ln_det_pd(&linalg::hermitian_part(&block)).ok_or_else(|| Error::SingularBlock {
        subset: sel.subset().to_vec(),
        min_eig: linalg::min_eigenvalue(&block),
    })?;
    Ok(g - ln_det / LN_2)
}
