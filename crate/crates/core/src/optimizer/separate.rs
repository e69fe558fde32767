//! Separate design: precoding first at a reduced power `gamma P_i`, then
//! the quantization covariance alone under the full power and backhaul
//! constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::model::{ChannelSet, NetworkConfig};
use crate::optimizer::layout::{Layout, OmegaShape};
use crate::optimizer::mm::{self, Backhaul, Goal, MmModel, ModelParts};
use crate::optimizer::{
    finish, interiorize, iterate_violation, solve_full_cooperation_from, status_of, zero_result, Compression, Point, ProblemSpec,
    ResultKind, SolveResult, SolveStatus, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    Fixed(f64),
    /// Grid search over `0.1, .., 0.9` refined by bisection on feasibility.
    Auto,
}

/// Width at which the feasibility bisection over `gamma` stops.
const GAMMA_TOL: f64 = 1e-3;

/// Separate design for the compression named in `spec.mode` (multivariate
/// unless the mode says otherwise).
pub fn solve_separate(spec: &ProblemSpec, gamma: Gamma) -> Result<SolveResult> {
    let pair = separate_search(&spec.cfg, &spec.chans, gamma, &spec.options)?;
    Ok(match spec.compression() {
        Compression::Multivariate => pair.multivariate,
        Compression::Independent => pair.independent,
    })
}

pub(crate) struct SeparatePair {
    pub independent: SolveResult,
    pub multivariate: SolveResult,
}

struct Stage1 {
    gamma: f64,
    point: Point,
    omega0: Option<CMat>,
}

/// Smallest-power noise covariance for one BS whose compression rate stays
/// below `rate` bits, in the eigenbasis of the BS's signal covariance `q`
/// (reverse water-filling). Returns the covariance and its trace.
pub(crate) fn min_power_noise(q: &CMat, rate: f64) -> Option<(CMat, f64)> {
    let n = q.nrows();
    let eig = linalg::eigh(q);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let lam: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > 1e-14 * max && l > 0.0 { l } else { 0.0 })
        .collect();
    let omega_at = |nu: f64| -> Vec<f64> {
        lam.iter()
            .map(|&l| if l > 0.0 { 2.0 * nu * l / (l + (l * l + 4.0 * nu * l).sqrt()) } else { 0.0 })
            .collect()
    };
    let rate_at = |w: &[f64]| -> f64 {
        lam.iter()
            .zip(w)
            .filter(|(l, _)| **l > 0.0)
            .map(|(l, w)| (1.0 + l / w).log2())
            .sum()
    };
    let w = if max <= 0.0 {
        vec![0.0; n]
    } else {
        if rate <= 0.0 {
            return None;
        }
        let (mut lo, mut hi) = (-700.0f64, 700.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rate_at(&omega_at(mid.exp())) > rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        omega_at(hi.exp())
    };
    let power = w.iter().sum();
    let v = &eig.eigenvectors;
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, w.iter().map(|&x| C64::new(x, 0.0))));
    Some((v * d * v.adjoint(), power))
}

/// Strictly feasible block-diagonal `Omega` for a fixed signal covariance,
/// or `None` when some BS cannot meet its backhaul within its power.
pub(crate) fn stage2_start(cfg: &NetworkConfig, signal: &CMat) -> Option<CMat> {
    let nb = cfg.total_bs_antennas();
    let mut omega = CMat::zeros(nb, nb);
    for i in 0..cfg.n_bs() {
        let rows: Vec<usize> = cfg.bs_rows(i).collect();
        let q = linalg::hermitian_part(&linalg::submatrix(signal, &rows, &rows));
        let c = cfg.backhaul()[i];
        let (w, need) = min_power_noise(&q, c * (1.0 - 1e-6))?;
        let left = cfg.powers()[i] - linalg::trace_re(&q) - need;
        if !(left > 1e-12 * cfg.powers()[i]) {
            return None;
        }
        let eta = 0.5 * left / rows.len() as f64;
        let block = w + CMat::identity(rows.len(), rows.len()) * C64::new(eta, 0.0);
        for (a, &ra) in rows.iter().enumerate() {
            for (b, &rb) in rows.iter().enumerate() {
                omega[(ra, rb)] = block[(a, b)];
            }
        }
    }
    Some(omega)
}

fn stage1(cfg: &NetworkConfig, chans: &ChannelSet, gamma: f64, warm: Option<&Stage1>, opts: &SolverOptions) -> Result<Stage1> {
    let reduced = cfg.clone().with_powers(cfg.powers().iter().map(|p| p * gamma).collect())?;
    let warm_point = warm.map(|w| {
        let s = C64::new(gamma / w.gamma, 0.0);
        Point {
            covs: w.point.covs.iter().map(|r| r * s).collect(),
            omega: w.point.omega.clone(),
        }
    });
    let res = match warm_point.as_ref() {
        Some(p) => solve_full_cooperation_from(&reduced, chans, Some(p), opts)
            .or_else(|_| solve_full_cooperation_from(&reduced, chans, None, opts))?,
        None => solve_full_cooperation_from(&reduced, chans, None, opts)?,
    };
    let omega0 = stage2_start(cfg, &res.point.signal());
    Ok(Stage1 {
        gamma,
        point: res.point,
        omega0,
    })
}

fn stage2(
    cfg: &NetworkConfig,
    chans: &ChannelSet,
    s1: &Stage1,
    compression: Compression,
    start: &CMat,
    opts: &SolverOptions,
) -> Result<Option<SolveResult>> {
    let (shape, backhaul) = match compression {
        Compression::Multivariate => (OmegaShape::Full, Backhaul::AllSubsets),
        Compression::Independent => (OmegaShape::BlockDiag, Backhaul::Singletons),
    };
    let all: Vec<usize> = (0..cfg.n_bs()).collect();
    let layout = Layout::new(cfg, all, &vec![false; cfg.n_ms()], Some(&s1.point.covs), shape, 0);
    let model = MmModel::new(
        cfg,
        chans.all(),
        layout,
        Goal::SumRate(None),
        ModelParts {
            backhaul,
            ..ModelParts::default()
        },
    );
    let covs = model.layout.fixed_r.clone();
    let Some(x0) = interiorize(&model, &covs, start) else {
        return Ok(None);
    };
    let out = mm::run_mm(&model, x0, &opts.mm(), None);
    let (_, omega) = model.layout.unpack(&out.x);
    let point = Point {
        covs: s1.point.covs.clone(),
        omega,
    };
    let mut res = finish(cfg, chans, point, out.trace.clone(), status_of(&out), out.iterations, out.kkt_residual, ResultKind::Rates(None))?;
    res.gamma = Some(s1.gamma);
    res.iterate_violation = iterate_violation(cfg, &out, false, |x| Point {
        covs: s1.point.covs.clone(),
        omega: model.layout.unpack(x).1,
    })?;
    Ok(Some(res))
}

struct Candidate {
    independent: SolveResult,
    multivariate: SolveResult,
}

fn evaluate(cfg: &NetworkConfig, chans: &ChannelSet, s1: &Stage1, opts: &SolverOptions) -> Result<Option<Candidate>> {
    let Some(start) = s1.omega0.as_ref() else {
        return Ok(None);
    };
    let Some(independent) = stage2(cfg, chans, s1, Compression::Independent, start, opts)? else {
        return Ok(None);
    };
    let multivariate = stage2(cfg, chans, s1, Compression::Multivariate, &independent.point.omega, opts)?
        .filter(|m| m.weighted_sum_rate() >= independent.weighted_sum_rate())
        .unwrap_or_else(|| independent.clone());
    Ok(Some(Candidate {
        independent,
        multivariate,
    }))
}

/// Stage 2 alone, keeping the precoder and power split of an earlier
/// separate-design solution and starting from its `Omega`. `None` when the
/// earlier solution has no power split or is not strictly feasible here.
pub(crate) fn separate_from(
    cfg: &NetworkConfig,
    chans: &ChannelSet,
    earlier: &SolveResult,
    compression: Compression,
    opts: &SolverOptions,
) -> Result<Option<SolveResult>> {
    let Some(gamma) = earlier.gamma else {
        return Ok(None);
    };
    let s1 = Stage1 {
        gamma,
        point: earlier.point.clone(),
        omega0: None,
    };
    stage2(cfg, chans, &s1, compression, &earlier.point.omega, opts)
}

/// Runs the separate design for both compressions over one common set of
/// `gamma` candidates; for each candidate the multivariate stage starts
/// from the independent solution.
pub(crate) fn separate_search(cfg: &NetworkConfig, chans: &ChannelSet, gamma: Gamma, opts: &SolverOptions) -> Result<SeparatePair> {
    let mut candidates: Vec<Candidate> = Vec::new();
    match gamma {
        Gamma::Fixed(g) => {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidConfig(format!("power split gamma = {g} outside (0, 1)")));
            }
            let s1 = stage1(cfg, chans, g, None, opts)?;
            candidates.extend(evaluate(cfg, chans, &s1, opts)?);
        }
        Gamma::Auto => {
            let mut grid: Vec<Stage1> = Vec::new();
            for g in 1..=9 {
                let s1 = stage1(cfg, chans, g as f64 / 10.0, grid.last(), opts)?;
                grid.push(s1);
            }
            let mut best: Option<(usize, f64)> = None;
            for (idx, s1) in grid.iter().enumerate() {
                if let Some(c) = evaluate(cfg, chans, s1, opts)? {
                    let r = c.independent.weighted_sum_rate();
                    if best.is_none_or(|(_, b)| r > b) {
                        best = Some((idx, r));
                    }
                    candidates.push(c);
                }
            }
            let (mut lo, mut hi, mut lo_stage) = match best {
                Some((idx, _)) if idx + 1 < grid.len() && grid[idx + 1].omega0.is_some() => (0.0, 0.0, None),
                Some((idx, _)) => (grid[idx].gamma, (grid[idx].gamma + 0.1).min(1.0), Some(idx)),
                None => (0.0, 0.1, None),
            };
            let mut refined: Option<Stage1> = None;
            while hi - lo > GAMMA_TOL {
                let mid = 0.5 * (lo + hi);
                let warm = refined.as_ref().or(lo_stage.map(|i| &grid[i]));
                let s1 = stage1(cfg, chans, mid, warm, opts)?;
                if s1.omega0.is_some() {
                    lo = mid;
                    refined = Some(s1);
                    lo_stage = None;
                } else {
                    hi = mid;
                }
            }
            if let Some(s1) = refined {
                candidates.extend(evaluate(cfg, chans, &s1, opts)?);
            }
        }
    }
    let best_of = |f: fn(&Candidate) -> &SolveResult| {
        candidates
            .iter()
            .map(f)
            .fold(None::<&SolveResult>, |b, c| match b {
                Some(b) if b.weighted_sum_rate() >= c.weighted_sum_rate() => Some(b),
                _ => Some(c),
            })
            .cloned()
    };
    match (best_of(|c| &c.independent), best_of(|c| &c.multivariate)) {
        (Some(independent), Some(multivariate)) => Ok(SeparatePair {
            independent,
            multivariate,
        }),
        _ => {
            let z = zero_result(cfg, chans, SolveStatus::Infeasible)?;
            Ok(SeparatePair {
                independent: z.clone(),
                multivariate: z,
            })
        }
    }
}
