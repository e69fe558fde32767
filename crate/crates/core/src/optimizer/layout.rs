//! Real-variable parameterization of the covariance unknowns.
//!
//! A Hermitian `m x m` block uses `m^2` reals: the diagonal, then one real
//! and one imaginary part per upper-triangular entry. Basis matrices are
//! `E_aa`, `E_ab + E_ba` and `i (E_ab - E_ba)`.
//!
//! Coordinates are restricted to the antennas of "active" base stations;
//! a base station with zero backhaul carries no signal and is left out.

use std::ops::Range;

use crate::linalg::{CMat, C64};
use crate::model::NetworkConfig;
use crate::optimizer::program::AffineHerm;

/// Quantization-noise variance put on the antennas of muted base stations.
pub(crate) const MUTED_NOISE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Group {
    R(usize),
    Omega,
    Extra(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Diag,
    Re,
    Im,
    Scalar,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Var {
    pub group: Group,
    pub kind: Kind,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum OmegaShape {
    Full,
    BlockDiag,
    Fixed(CMat),
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub active_bs: Vec<usize>,
    /// Full-coordinate rows of the active antennas.
    pub active: Vec<usize>,
    /// Active-coordinate rows of each active BS, aligned with `active_bs`.
    pub bs_rows: Vec<Vec<usize>>,
    pub d: usize,
    pub vars: Vec<Var>,
    pub r_ranges: Vec<Option<Range<usize>>>,
    pub omega_range: Range<usize>,
    pub extra_offset: usize,
    pub fixed_r: Vec<CMat>,
    pub fixed_omega: CMat,
    pub n_bs_total: usize,
}

fn push_herm(vars: &mut Vec<Var>, group: Group, rows: &[usize]) {
    for &a in rows {
        vars.push(Var {
            group,
            kind: Kind::Diag,
            a,
            b: a,
        });
    }
    for (i, &a) in rows.iter().enumerate() {
        for &b in &rows[i + 1..] {
            vars.push(Var {
                group,
                kind: Kind::Re,
                a,
                b,
            });
            vars.push(Var {
                group,
                kind: Kind::Im,
                a,
                b,
            });
        }
    }
}

/// Basis matrices of an `m x m` Hermitian block, in variable order.
#[cfg(test)]
pub(crate) fn herm_basis(m: usize) -> Vec<CMat> {
    let mut vars = Vec::new();
    let rows: Vec<usize> = (0..m).collect();
    push_herm(&mut vars, Group::Omega, &rows);
    vars.iter().map(|v| basis(v, m)).collect()
}

#[cfg(test)]
fn basis(v: &Var, d: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    match v.kind {
        Kind::Diag => m[(v.a, v.a)] = C64::new(1.0, 0.0),
        Kind::Re => {
            m[(v.a, v.b)] = C64::new(1.0, 0.0);
            m[(v.b, v.a)] = C64::new(1.0, 0.0);
        }
        Kind::Im => {
            m[(v.a, v.b)] = C64::new(0.0, 1.0);
            m[(v.b, v.a)] = C64::new(0.0, -1.0);
        }
        Kind::Scalar => {}
    }
    m
}

impl Layout {
    /// `r_var[k]` selects whether `R_k` is a variable; fixed covariances
    /// (and a fixed `Omega`) are given in full coordinates.
    pub fn new(
        cfg: &NetworkConfig,
        active_bs: Vec<usize>,
        r_var: &[bool],
        fixed_r_full: Option<&[CMat]>,
        omega: OmegaShape,
        n_extra: usize,
    ) -> Self {
        let mut active = Vec::new();
        let mut bs_rows = Vec::new();
        for &i in &active_bs {
            let start = active.len();
            active.extend(cfg.bs_rows(i));
            bs_rows.push((start..active.len()).collect::<Vec<_>>());
        }
        let d = active.len();
        let all: Vec<usize> = (0..d).collect();
        let mut vars = Vec::new();
        let mut r_ranges = Vec::new();
        let mut fixed_r = Vec::new();
        for (k, &is_var) in r_var.iter().enumerate() {
            if is_var {
                let s = vars.len();
                push_herm(&mut vars, Group::R(k), &all);
                r_ranges.push(Some(s..vars.len()));
                fixed_r.push(CMat::zeros(d, d));
            } else {
                r_ranges.push(None);
                let f = fixed_r_full.map(|f| restrict(&f[k], &active)).unwrap_or_else(|| CMat::zeros(d, d));
                fixed_r.push(f);
            }
        }
        let s = vars.len();
        let fixed_omega = match &omega {
            OmegaShape::Full => {
                push_herm(&mut vars, Group::Omega, &all);
                CMat::zeros(d, d)
            }
            OmegaShape::BlockDiag => {
                for rows in &bs_rows {
                    push_herm(&mut vars, Group::Omega, rows);
                }
                CMat::zeros(d, d)
            }
            OmegaShape::Fixed(o) => restrict(o, &active),
        };
        let omega_range = s..vars.len();
        let extra_offset = vars.len();
        for j in 0..n_extra {
            vars.push(Var {
                group: Group::Extra(j),
                kind: Kind::Scalar,
                a: 0,
                b: 0,
            });
        }
        Self {
            active_bs,
            active,
            bs_rows,
            d,
            vars,
            r_ranges,
            omega_range,
            extra_offset,
            fixed_r,
            fixed_omega,
            n_bs_total: cfg.total_bs_antennas(),
        }
    }

    pub fn n(&self) -> usize {
        self.vars.len()
    }

    pub fn n_ms(&self) -> usize {
        self.r_ranges.len()
    }

    pub fn extra(&self, j: usize) -> usize {
        self.extra_offset + j
    }

    fn fill(&self, x: &[f64], range: Range<usize>, base: &CMat) -> CMat {
        let mut m = base.clone();
        for v in range {
            let var = &self.vars[v];
            let xv = x[v];
            match var.kind {
                Kind::Diag => m[(var.a, var.a)] += C64::new(xv, 0.0),
                Kind::Re => {
                    m[(var.a, var.b)] += C64::new(xv, 0.0);
                    m[(var.b, var.a)] += C64::new(xv, 0.0);
                }
                Kind::Im => {
                    m[(var.a, var.b)] += C64::new(0.0, xv);
                    m[(var.b, var.a)] += C64::new(0.0, -xv);
                }
                Kind::Scalar => {}
            }
        }
        m
    }

    /// Active-coordinate `(R_1..R_N, Omega)` at `x`.
    pub fn unpack(&self, x: &[f64]) -> (Vec<CMat>, CMat) {
        let covs = self
            .r_ranges
            .iter()
            .zip(&self.fixed_r)
            .map(|(r, f)| match r {
                Some(r) => self.fill(x, r.clone(), f),
                None => f.clone(),
            })
            .collect();
        let omega = self.fill(x, self.omega_range.clone(), &self.fixed_omega);
        (covs, omega)
    }

    /// Inverse of [`Layout::unpack`] for active-coordinate inputs; fixed
    /// parts are ignored and extras set to zero.
    pub fn pack(&self, covs: &[CMat], omega: &CMat) -> Vec<f64> {
        self.vars
            .iter()
            .map(|v| {
                let m = match v.group {
                    Group::R(k) => &covs[k],
                    Group::Omega => omega,
                    Group::Extra(_) => return 0.0,
                };
                match v.kind {
                    Kind::Diag => m[(v.a, v.a)].re,
                    Kind::Re => m[(v.a, v.b)].re,
                    Kind::Im => m[(v.a, v.b)].im,
                    Kind::Scalar => 0.0,
                }
            })
            .collect()
    }

    /// `Re tr(M B_v)` for the basis matrix of variable `v`.
    #[cfg(test)]
    pub fn lin_coef(&self, v: usize, m: &CMat) -> f64 {
        let var = &self.vars[v];
        let (a, b) = (var.a, var.b);
        match var.kind {
            Kind::Diag => m[(a, a)].re,
            Kind::Re => m[(b, a)].re + m[(a, b)].re,
            Kind::Im => (C64::new(0.0, 1.0) * (m[(b, a)] - m[(a, b)])).re,
            Kind::Scalar => 0.0,
        }
    }

    /// `L B_v L^H`, with `L` indexed by active coordinates on its columns.
    pub fn mapped(&self, v: usize, l: &CMat) -> CMat {
        let var = &self.vars[v];
        let la = l.column(var.a);
        let lb = l.column(var.b);
        match var.kind {
            Kind::Diag => &la * la.adjoint(),
            Kind::Re => {
                let p = &la * lb.adjoint();
                &p + p.adjoint()
            }
            Kind::Im => {
                let p = &la * lb.adjoint();
                (&p - p.adjoint()) * C64::new(0.0, 1.0)
            }
            Kind::Scalar => CMat::zeros(l.nrows(), l.nrows()),
        }
    }

    pub fn vars_in(&self, groups: &[Group]) -> impl Iterator<Item = usize> + '_ {
        let groups = groups.to_vec();
        (0..self.vars.len()).filter(move |&v| groups.contains(&self.vars[v].group))
    }

    /// Affine Hermitian map `offset + L (sum over `groups`) L^H`.
    pub fn affine(&self, groups: &[Group], l: &CMat, offset: CMat) -> AffineHerm {
        let terms = self
            .vars_in(groups)
            .filter_map(|v| {
                let f = self.mapped(v, l);
                (f.iter().any(|z| z.norm_sqr() > 0.0)).then_some((v, f))
            })
            .collect();
        AffineHerm { offset, terms }
    }

    /// Selection matrix `E^H` (rows x d) picking the given active rows.
    pub fn selector(&self, rows: &[usize]) -> CMat {
        let mut s = CMat::zeros(rows.len(), self.d);
        for (i, &r) in rows.iter().enumerate() {
            s[(i, r)] = C64::new(1.0, 0.0);
        }
        s
    }

    /// Active rows of a subset given as positions into `active_bs`.
    pub fn subset_rows(&self, positions: &[usize]) -> Vec<usize> {
        positions.iter().flat_map(|&p| self.bs_rows[p].iter().copied()).collect()
    }

    /// Full-coordinate embedding; muted BSs get white noise of variance
    /// [`MUTED_NOISE`] unless `omega` was fixed by the caller.
    pub fn embed(&self, covs: &[CMat], omega: &CMat, muted_noise: bool) -> (Vec<CMat>, CMat) {
        let n = self.n_bs_total;
        let emb = |m: &CMat| {
            let mut out = CMat::zeros(n, n);
            for (i, &ri) in self.active.iter().enumerate() {
                for (j, &rj) in self.active.iter().enumerate() {
                    out[(ri, rj)] = m[(i, j)];
                }
            }
            out
        };
        let covs = covs.iter().map(emb).collect();
        let mut om = emb(omega);
        if muted_noise {
            for r in 0..n {
                if !self.active.contains(&r) {
                    om[(r, r)] = C64::new(MUTED_NOISE, 0.0);
                }
            }
        }
        (covs, om)
    }

    pub fn restrict(&self, m: &CMat) -> CMat {
        restrict(m, &self.active)
    }
}

pub(crate) fn restrict(m: &CMat, rows: &[usize]) -> CMat {
    crate::linalg::submatrix(m, rows, rows)
}
