//! Power minimization under worst-case SINR constraints with ellipsoidal
//! channel errors, using the S-procedure LMI.
//!
//! Each single-antenna MS `k` sees `h_k = h^_k + e_k` with
//! `e_k C_k e_k^H <= 1` (row vectors). With `Xi_k = R_k - Gamma_k (sum_{j != k}
//! R_j + Omega)` and `c = h^_k^H`, the SINR target holds for every such error
//! iff some `beta_k >= 0` makes
//!
//! ```text
//! [ Xi_k + beta_k C_k     Xi_k c                      ]
//! [ c^H Xi_k              c^H Xi_k c - Gamma_k - beta_k ]  >= 0.
//! ```

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::model::NetworkConfig;
use crate::optimizer::layout::{Group, Layout, OmegaShape};
use crate::optimizer::mm::{self, Backhaul, Goal, MmModel, MmStatus, ModelParts};
use crate::optimizer::program::{AffineHerm, ConvexFn};
use crate::optimizer::{default_start_active, Point, SolveStatus, SolverOptions, MUTE_CAPACITY};
use crate::rates::{self, FeasibilityReport, Precoder, QuantCov};

/// Total-power bound that keeps the search region bounded, relative to the
/// configured per-BS powers.
const POWER_BOUND_FACTOR: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SinrSpec {
    /// Estimated channels `h^_k`, each `1 x n_B`.
    pub channels: Vec<CMat>,
    /// Positive definite ellipsoid matrices `C_k`.
    pub uncertainty: Vec<CMat>,
    /// SINR targets `Gamma_k > 0`.
    pub targets: Vec<f64>,
    /// Per-BS power weights `mu_i >= 0`.
    pub mu: Vec<f64>,
}

impl SinrSpec {
    pub fn new(cfg: &NetworkConfig, channels: Vec<CMat>, uncertainty: Vec<CMat>, targets: Vec<f64>) -> Result<Self> {
        let nb = cfg.total_bs_antennas();
        let n = cfg.n_ms();
        if cfg.ms_antennas().iter().any(|&a| a != 1) {
            return Err(Error::Dimension("SINR design needs single-antenna MSs".into()));
        }
        if channels.len() != n || uncertainty.len() != n || targets.len() != n {
            return Err(Error::Dimension("one channel, ellipsoid and target per MS".into()));
        }
        if channels.iter().any(|h| h.shape() != (1, nb)) || uncertainty.iter().any(|c| c.shape() != (nb, nb)) {
            return Err(Error::Dimension("channel rows are 1 x n_B and ellipsoids n_B x n_B".into()));
        }
        if let Some(t) = targets.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidConfig(format!("SINR target {t} must be positive")));
        }
        for c in &uncertainty {
            if linalg::min_eigenvalue(c) <= 0.0 {
                return Err(Error::NotPsd(linalg::min_eigenvalue(c)));
            }
        }
        Ok(Self {
            channels,
            uncertainty: uncertainty.iter().map(linalg::hermitian_part).collect(),
            targets,
            mu: vec![1.0; cfg.n_bs()],
        })
    }

    pub fn with_mu(mut self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.mu.len() || mu.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::InvalidConfig("one nonnegative weight per BS".into()));
        }
        self.mu = mu;
        Ok(self)
    }

    /// SINR of MS `k` for the channel row `h`.
    pub fn sinr(&self, k: usize, h: &CMat, covs: &[CMat], omega: &CMat) -> f64 {
        let q = |m: &CMat| (h * m * h.adjoint())[(0, 0)].re;
        let interf: f64 = (0..covs.len()).filter(|&j| j != k).map(|j| q(&covs[j])).sum::<f64>() + q(omega);
        q(&covs[k]) / (interf + 1.0)
    }
}

/// `T^H Xi_k T` with `T = [I, c]`, plus the `beta_k` terms.
pub fn build_sinr_lmi(k: usize, covs: &[CMat], omega: &CMat, sinr: &SinrSpec, beta: f64) -> Result<CMat> {
    let nb = omega.nrows();
    if k >= covs.len() || covs.iter().any(|r| r.shape() != (nb, nb)) || sinr.channels[k].ncols() != nb {
        return Err(Error::Dimension("LMI inputs do not match".into()));
    }
    let g = sinr.targets[k];
    let mut xi = covs[k].clone();
    for (j, r) in covs.iter().enumerate() {
        if j != k {
            xi -= r * C64::new(g, 0.0);
        }
    }
    xi -= omega * C64::new(g, 0.0);
    let t = lift(&sinr.channels[k]);
    let mut m = t.adjoint() * xi * &t;
    let cmat = &sinr.uncertainty[k];
    for a in 0..nb {
        for b in 0..nb {
            m[(a, b)] += cmat[(a, b)] * beta;
        }
    }
    m[(nb, nb)] -= C64::new(g + beta, 0.0);
    Ok(linalg::hermitian_part(&m))
}

/// `T = [I, h^H]`, of size `n_B x (n_B + 1)`.
fn lift(h: &CMat) -> CMat {
    let nb = h.ncols();
    let mut t = CMat::zeros(nb, nb + 1);
    for i in 0..nb {
        t[(i, i)] = C64::new(1.0, 0.0);
        t[(i, nb)] = h[(0, i)].conj();
    }
    t
}

fn lmi_affine(lay: &Layout, sinr: &SinrSpec, k: usize, slack: Option<usize>) -> AffineHerm {
    let nb = lay.d;
    let l = lift(&sinr.channels[k]).adjoint();
    let g = sinr.targets[k];
    let mut offset = CMat::zeros(nb + 1, nb + 1);
    offset[(nb, nb)] = C64::new(-g, 0.0);
    let own = lay.affine(&[Group::R(k)], &l, CMat::zeros(nb + 1, nb + 1));
    let others: Vec<Group> = (0..lay.n_ms()).filter(|&j| j != k).map(Group::R).chain([Group::Omega]).collect();
    let rest = lay.affine(&others, &l, CMat::zeros(nb + 1, nb + 1));
    let mut terms = own.terms;
    terms.extend(rest.terms.into_iter().map(|(v, f)| (v, f * C64::new(-g, 0.0))));
    let mut bmat = CMat::zeros(nb + 1, nb + 1);
    bmat.view_mut((0, 0), (nb, nb)).copy_from(&sinr.uncertainty[k]);
    bmat[(nb, nb)] = C64::new(-1.0, 0.0);
    terms.push((lay.extra(k), bmat));
    if let Some(s) = slack {
        terms.push((s, CMat::identity(nb + 1, nb + 1) * C64::new(-1.0, 0.0)));
    }
    AffineHerm { offset, terms }
}

#[derive(Debug, Clone)]
pub struct SinrResult {
    pub point: Point,
    pub precoder: Precoder,
    pub quantcov: QuantCov,
    pub betas: Vec<f64>,
    /// Weighted power `sum_i mu_i P_i(R, Omega)`.
    pub power: f64,
    pub bs_power: Vec<f64>,
    /// Weighted power at every iterate of the minimization phase.
    pub trace: Vec<f64>,
    pub feasibility: FeasibilityReport,
    /// Smallest eigenvalue over all LMIs at the returned point.
    pub min_lmi_eigenvalue: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

fn sinr_model(cfg: &NetworkConfig, sinr: &SinrSpec, phase_one: bool) -> MmModel {
    let n = cfg.n_ms();
    let all: Vec<usize> = (0..cfg.n_bs()).collect();
    let lay = Layout::new(cfg, all, &vec![true; n], None, OmegaShape::Full, n + usize::from(phase_one));
    let slack = phase_one.then(|| lay.extra(n));
    let mut extra_constraints: Vec<ConvexFn> = (0..n)
        .map(|k| ConvexFn {
            linear: vec![(lay.extra(k), -1.0)],
            ..ConvexFn::default()
        })
        .collect();
    let total_power: Vec<(usize, f64)> = lay
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.a == v.b && matches!(v.kind, crate::optimizer::layout::Kind::Diag))
        .map(|(i, _)| (i, 1.0))
        .collect();
    extra_constraints.push(ConvexFn {
        linear: total_power,
        constant: -POWER_BOUND_FACTOR * cfg.powers().iter().sum::<f64>(),
        logdets: Vec::new(),
    });
    if let Some(s) = slack {
        extra_constraints.push(ConvexFn {
            linear: vec![(s, 1.0)],
            constant: -1.0,
            logdets: Vec::new(),
        });
    }
    let extra_cones = (0..n).map(|k| lmi_affine(&lay, sinr, k, slack)).collect();
    let goal = if phase_one { Goal::MaxExtra(n) } else { Goal::MinPower(sinr.mu.clone()) };
    MmModel::new(
        cfg,
        &sinr.channels,
        lay,
        goal,
        ModelParts {
            backhaul: Backhaul::AllSubsets,
            power_caps: false,
            extra_constraints,
            extra_cones,
        },
    )
}

/// Minimizes the weighted transmit power subject to the robust SINR LMIs
/// and the multivariate backhaul constraints. A first MM phase maximizes a
/// common LMI margin until every LMI is strictly satisfied.
pub fn solve_robust_sinr(sinr: &SinrSpec, cfg: &NetworkConfig, options: &SolverOptions) -> Result<SinrResult> {
    if sinr.channels.len() != cfg.n_ms() || sinr.mu.len() != cfg.n_bs() {
        return Err(Error::Dimension("SINR specification does not match configuration".into()));
    }
    if let Some(i) = (0..cfg.n_bs()).find(|&i| cfg.backhaul()[i] <= MUTE_CAPACITY) {
        return Err(Error::InvalidConfig(format!("BS {i} has no backhaul; robust SINR design needs every BS active")));
    }
    let n = cfg.n_ms();
    let opts = options.mm();

    let p1 = sinr_model(cfg, sinr, true);
    let lay1 = &p1.layout;
    let (covs, omega) = default_start_active(cfg, lay1, true);
    let mut x = lay1.pack(&covs, &omega);
    let mut margin = f64::INFINITY;
    for k in 0..n {
        let best = (-3..=3)
            .map(|e| 10f64.powi(e))
            .map(|b| (b, linalg::min_eigenvalue(&build_sinr_lmi(k, &covs, &omega, sinr, b).expect("shapes checked"))))
            .fold((0.0, f64::NEG_INFINITY), |a, c| if c.1 > a.1 { c } else { a });
        x[lay1.extra(k)] = best.0;
        margin = margin.min(best.1);
    }
    x[lay1.extra(n)] = (margin - 1.0).min(0.5);
    let s_index = lay1.extra(n);
    let positive = move |x: &[f64]| x[s_index] > 0.0;
    let out1 = mm::run_mm(&p1, x, &opts, Some(&positive));
    if out1.status != MmStatus::Stopped {
        return Err(Error::Infeasible("SINR targets cannot be met under the backhaul constraints".into()));
    }

    let p2 = sinr_model(cfg, sinr, false);
    let x0: Vec<f64> = out1.x[..p2.n()].to_vec();
    if !p2.program_at(&x0).is_some_and(|p| p.strictly_feasible(&x0)) {
        return Err(Error::Numerical("phase-one point is not strictly feasible".into()));
    }
    let out = mm::run_mm(&p2, x0, &opts, None);
    let lay = &p2.layout;
    let (covs, omega) = lay.unpack(&out.x);
    let betas: Vec<f64> = (0..n).map(|k| out.x[lay.extra(k)]).collect();
    let min_lmi_eigenvalue = (0..n)
        .map(|k| linalg::min_eigenvalue(&build_sinr_lmi(k, &covs, &omega, sinr, betas[k]).expect("shapes checked")))
        .fold(f64::INFINITY, f64::min);
    let point = Point { covs, omega };
    let signal = point.signal();
    let bs_power = rates::bs_powers_cov(cfg, &signal, &point.omega);
    Ok(SinrResult {
        precoder: Precoder::from_covariances(cfg, &point.covs)?,
        quantcov: QuantCov::new(cfg, point.omega.clone())?,
        feasibility: rates::check_feasible_cov(cfg, &signal, &point.omega, 1e-6)?.backhaul_only(),
        power: bs_power.iter().zip(&sinr.mu).map(|(p, m)| p * m).sum(),
        bs_power,
        betas,
        trace: out.trace.iter().map(|v| -v).collect(),
        min_lmi_eigenvalue,
        status: match out.status {
            MmStatus::IterationCap => SolveStatus::IterationCap,
            _ => SolveStatus::Converged,
        },
        iterations: out.iterations,
        point,
    })
}
