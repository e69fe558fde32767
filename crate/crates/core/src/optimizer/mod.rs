//! Weighted sum-rate maximization by majorize-minimize.
//!
//! Every solver here runs the same loop: linearize the concave parts that
//! appear with the wrong sign (interference log-determinants in the rates,
//! per-BS received log-determinants in the backhaul constraints) at the
//! current point, solve the resulting convex log-det program, repeat. The
//! true objective never decreases and every iterate is strictly feasible
//! for the original constraints.

mod layout;
mod mm;
mod program;
mod robust;
mod schemes;
mod separate;
mod surrogate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::model::{ChannelSet, NetworkConfig};
use crate::rates::{self, FeasibilityReport, Precoder, PowerUsage, QuantCov, RateReport};

use layout::{Layout, OmegaShape};
use mm::{Backhaul, Goal, MmModel, MmOptions, MmOutcome, MmStatus, ModelParts};
use program::BarrierOptions;

pub use robust::{build_sinr_lmi, solve_robust_sinr, SinrResult, SinrSpec};
pub use schemes::SchemeSolver;
pub use separate::{solve_separate, Gamma};
pub use surrogate::{phi, surrogate_backhaul, surrogate_objective};

/// Backhaul capacities at or below this are treated as zero: the BS is
/// muted.
pub const MUTE_CAPACITY: f64 = 1e-9;

/// Slack, in bits, under which a nested backhaul constraint counts as tight
/// when looking for a corner ordering of a solution. MM stops on a relative
/// objective change of 1e-5, which leaves slacks of this order on
/// constraints that are tight in the limit.
pub const CORNER_TOL: f64 = 1e-4;

/// Largest number of MSs for the exhaustive dirty-paper order search.
pub const MAX_DPC_USERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compression {
    Multivariate,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Joint(Compression),
    Separate(Compression),
    FullCooperation,
    Dpc(Compression),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative change of the objective that ends the MM loop.
    pub rel_tol: f64,
    /// Duality-gap target of each convex subproblem, in nats.
    pub gap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tol: 1e-5,
            gap: 1e-9,
        }
    }
}

impl SolverOptions {
    fn mm(&self) -> MmOptions {
        MmOptions {
            max_iter: self.max_iterations,
            rel_tol: self.rel_tol,
            barrier: BarrierOptions {
                gap: self.gap,
                ..BarrierOptions::default()
            },
            ..MmOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub cfg: NetworkConfig,
    pub chans: ChannelSet,
    pub mode: Mode,
    /// Singular-value uncertainty radii `eps_k` in `[0, 1)`.
    pub robust: Option<Vec<f64>>,
    pub options: SolverOptions,
}

impl ProblemSpec {
    pub fn new(cfg: NetworkConfig, chans: ChannelSet, mode: Mode) -> Result<Self> {
        if chans.n_ms() != cfg.n_ms() || chans.all().iter().any(|h| h.ncols() != cfg.total_bs_antennas()) {
            return Err(Error::Dimension("channels do not match configuration".into()));
        }
        Ok(Self {
            cfg,
            chans,
            mode,
            robust: None,
            options: SolverOptions::default(),
        })
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    fn compression(&self) -> Compression {
        match self.mode {
            Mode::Joint(c) | Mode::Separate(c) | Mode::Dpc(c) => c,
            Mode::FullCooperation => Compression::Multivariate,
        }
    }
}

/// Transmit covariances `R_k` and quantization covariance `Omega`, in full
/// antenna coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub covs: Vec<CMat>,
    pub omega: CMat,
}

impl Point {
    pub fn from_design(prec: &Precoder, q: &QuantCov) -> Self {
        Self {
            covs: prec.covariances().to_vec(),
            omega: q.matrix().clone(),
        }
    }

    pub fn signal(&self) -> CMat {
        rates::sum_covs(&self.covs, self.covs.iter().map(|_| true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    IterationCap,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::IterationCap => "iteration-cap",
            Self::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub precoder: Precoder,
    pub quantcov: QuantCov,
    pub point: Point,
    pub rates: RateReport,
    /// True objective (weighted sum-rate, bits) at every MM iterate,
    /// starting with the initial point.
    pub trace: Vec<f64>,
    pub feasibility: FeasibilityReport,
    /// Largest violation of the true backhaul and power constraints over
    /// all MM iterates, as in [`FeasibilityReport::worst_violation`].
    pub iterate_violation: f64,
    pub ordering: Option<Vec<usize>>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Normalized KKT residual of the last convex subproblem.
    pub kkt_residual: f64,
    /// Encoding order of the best dirty-paper solution.
    pub dpc_order: Option<Vec<usize>>,
    /// Power split used by the separate design.
    pub gamma: Option<f64>,
}

impl SolveResult {
    pub fn weighted_sum_rate(&self) -> f64 {
        self.rates.weighted_sum
    }
}

/// Result of a single convex subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub point: Point,
    pub surrogate_at_anchor: f64,
    pub surrogate_at_solution: f64,
    pub kkt_residual: f64,
    pub gap: f64,
}

fn active_bs(cfg: &NetworkConfig) -> Vec<usize> {
    (0..cfg.n_bs()).filter(|&i| cfg.backhaul()[i] > MUTE_CAPACITY).collect()
}

/// MM model for the joint design (linear or dirty-paper rates).
fn joint_model(cfg: &NetworkConfig, h: &[CMat], compression: Compression, order: Option<Vec<usize>>) -> MmModel {
    let shape = match compression {
        Compression::Multivariate => OmegaShape::Full,
        Compression::Independent => OmegaShape::BlockDiag,
    };
    let layout = Layout::new(cfg, active_bs(cfg), &vec![true; cfg.n_ms()], None, shape, 0);
    let backhaul = match compression {
        Compression::Multivariate => Backhaul::AllSubsets,
        Compression::Independent => Backhaul::Singletons,
    };
    MmModel::new(
        cfg,
        h,
        layout,
        Goal::SumRate(order),
        ModelParts {
            backhaul,
            ..ModelParts::default()
        },
    )
}

fn full_coop_model(cfg: &NetworkConfig, h: &[CMat], order: Option<Vec<usize>>) -> MmModel {
    let nb = cfg.total_bs_antennas();
    let all: Vec<usize> = (0..cfg.n_bs()).collect();
    let layout = Layout::new(cfg, all, &vec![true; cfg.n_ms()], None, OmegaShape::Fixed(CMat::zeros(nb, nb)), 0);
    MmModel::new(
        cfg,
        h,
        layout,
        Goal::SumRate(order),
        ModelParts {
            backhaul: Backhaul::None,
            ..ModelParts::default()
        },
    )
}

/// Deterministic strictly feasible start: every MS gets a scaled identity
/// on the active antennas using half of each BS's power, and `Omega` is
/// white per BS with each singleton backhaul constraint at 90% of capacity.
/// Powers are halved per BS until strictly within budget.
fn default_start_active(cfg: &NetworkConfig, lay: &Layout, with_omega: bool) -> (Vec<CMat>, CMat) {
    let d = lay.d;
    let n_ms = cfg.n_ms() as f64;
    let mut kappa = vec![0.0; d];
    let mut omega = vec![0.0; d];
    for (p, &i) in lay.active_bs.iter().enumerate() {
        let ni = lay.bs_rows[p].len() as f64;
        let budget = cfg.powers()[i];
        let mut k = 0.5 * budget / (n_ms * ni);
        let ratio = if with_omega {
            1.0 / ((0.9 * cfg.backhaul()[i] / ni).exp2() - 1.0)
        } else {
            0.0
        };
        while ni * n_ms * k * (1.0 + ratio) >= budget {
            k *= 0.5;
        }
        for &r in &lay.bs_rows[p] {
            kappa[r] = k;
            omega[r] = n_ms * k * ratio;
        }
    }
    let diag = |v: &[f64]| CMat::from_diagonal(&nalgebra::DVector::from_iterator(d, v.iter().map(|&x| C64::new(x, 0.0))));
    let covs = vec![diag(&kappa); cfg.n_ms()];
    let om = if with_omega { diag(&omega) } else { lay.fixed_omega.clone() };
    (covs, om)
}

/// Pushes a warm start strictly inside the surrogate feasible set anchored
/// at itself: a small identity is added to every variable block and all
/// powers are scaled down slightly. `None` if no perturbation up to 1e-3
/// relative works.
fn interiorize(model: &MmModel, covs: &[CMat], omega: &CMat) -> Option<Vec<f64>> {
    let lay = &model.layout;
    let d = lay.d.max(1);
    let eye = CMat::identity(lay.d, lay.d);
    let sig_scale = covs.iter().map(linalg::trace_re).sum::<f64>().max(1e-300) / d as f64;
    let om_scale = linalg::trace_re(omega).max(1e-300) / d as f64;
    let has_omega = !lay.omega_range.is_empty();
    let try_eps = |eps: f64| -> Option<Vec<f64>> {
        let c = C64::new(1.0 - 4.0 * eps, 0.0);
        let rs: Vec<CMat> = covs.iter().map(|r| (r + &eye * C64::new(eps * sig_scale, 0.0)) * c).collect();
        let om = if has_omega {
            (omega + &eye * C64::new(eps * om_scale.max(eps * sig_scale), 0.0)) * c
        } else {
            omega.clone()
        };
        let x = lay.pack(&rs, &om);
        let prog = model.program_at(&x)?;
        prog.strictly_feasible(&x).then_some(x)
    };
    if let Some(x) = (|| {
        let x = lay.pack(covs, omega);
        let prog = model.program_at(&x)?;
        prog.strictly_feasible(&x).then_some(x)
    })() {
        return Some(x);
    }
    let mut eps = 1e-10;
    while eps <= 1e-3 {
        if let Some(x) = try_eps(eps) {
            return Some(x);
        }
        eps *= 10.0;
    }
    None
}

fn start_from_point(model: &MmModel, p: &Point) -> Option<Vec<f64>> {
    let lay = &model.layout;
    let covs: Vec<CMat> = p.covs.iter().map(|r| lay.restrict(r)).collect();
    let omega = if lay.omega_range.is_empty() {
        lay.fixed_omega.clone()
    } else {
        lay.restrict(&p.omega)
    };
    interiorize(model, &covs, &omega)
}

fn default_x(cfg: &NetworkConfig, model: &MmModel) -> Option<Vec<f64>> {
    let lay = &model.layout;
    let (covs, omega) = default_start_active(cfg, lay, !lay.omega_range.is_empty());
    let x = lay.pack(&covs, &omega);
    let prog = model.program_at(&x)?;
    prog.strictly_feasible(&x).then_some(x)
}

/// The solver's default initial point for the joint design.
pub fn default_start(spec: &ProblemSpec) -> Point {
    let model = joint_model(&spec.cfg, spec.chans.all(), spec.compression(), None);
    let lay = &model.layout;
    let (covs, omega) = default_start_active(&spec.cfg, lay, true);
    let (covs, omega) = lay.embed(&covs, &omega, true);
    Point { covs, omega }
}

fn zero_result(cfg: &NetworkConfig, chans: &ChannelSet, status: SolveStatus) -> Result<SolveResult> {
    let nb = cfg.total_bs_antennas();
    let point = Point {
        covs: vec![CMat::zeros(nb, nb); cfg.n_ms()],
        omega: CMat::zeros(nb, nb),
    };
    finish(cfg, chans, point, vec![0.0], status, 0, 0.0, ResultKind::Rates(None))
}

#[derive(Debug, Clone)]
enum ResultKind {
    /// Backhaul-constrained design; `Some(order)` for dirty-paper rates.
    Rates(Option<Vec<usize>>),
    /// No backhaul constraints and `Omega = 0`.
    FullCooperation(Option<Vec<usize>>),
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &NetworkConfig,
    chans: &ChannelSet,
    point: Point,
    trace: Vec<f64>,
    status: SolveStatus,
    iterations: usize,
    kkt_residual: f64,
    kind: ResultKind,
) -> Result<SolveResult> {
    let precoder = Precoder::from_covariances(cfg, &point.covs)?;
    let quantcov = QuantCov::new(cfg, point.omega.clone())?;
    let order = match &kind {
        ResultKind::Rates(o) | ResultKind::FullCooperation(o) => o.clone(),
    };
    let mut report = match &kind {
        ResultKind::Rates(_) => rates::weighted_sum_rate_cov(cfg, chans, &point.covs, &point.omega)?,
        ResultKind::FullCooperation(_) => {
            let per_ms: Vec<f64> = (0..cfg.n_ms())
                .map(|k| rates::user_rate_cov(chans.get(k), &point.covs, &point.omega, k))
                .collect();
            RateReport {
                weighted_sum: per_ms.iter().zip(cfg.weights()).map(|(r, w)| r * w).sum(),
                per_ms,
                backhaul: Vec::new(),
                bs_power: rates::bs_powers_cov(cfg, &point.signal(), &point.omega),
                regularized: false,
            }
        }
    };
    if let Some(order) = &order {
        let mut per_ms = vec![0.0; cfg.n_ms()];
        for pos in 0..order.len() {
            per_ms[order[pos]] = rates::dpc_rate_cov(chans.all(), &point.covs, &point.omega, order, pos);
        }
        report.weighted_sum = per_ms.iter().zip(cfg.weights()).map(|(r, w)| r * w).sum();
        report.per_ms = per_ms;
    }
    let signal = point.signal();
    let (feasibility, ordering) = match kind {
        ResultKind::Rates(_) => (
            rates::check_feasible_cov(cfg, &signal, &point.omega, 1e-6)?,
            rates::detect_corner_ordering_cov(cfg, &signal, &point.omega, CORNER_TOL)?,
        ),
        ResultKind::FullCooperation(_) => (power_only_report(cfg, &signal, &point.omega), None),
    };
    Ok(SolveResult {
        precoder,
        quantcov,
        point,
        rates: report,
        trace,
        feasibility,
        iterate_violation: 0.0,
        ordering,
        status,
        iterations,
        kkt_residual,
        dpc_order: order,
        gamma: None,
    })
}

fn power_only_report(cfg: &NetworkConfig, signal: &CMat, omega: &CMat) -> FeasibilityReport {
    let power: Vec<PowerUsage> = rates::bs_powers_cov(cfg, signal, omega)
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
    for p in &power {
        let excess = p.used - p.budget;
        if excess > worst_violation {
            worst_violation = excess;
            worst = Some(rates::Constraint::Power(p.bs));
        }
        if excess.abs() <= 1e-6 {
            active.push(rates::Constraint::Power(p.bs));
        }
    }
    FeasibilityReport {
        backhaul: Vec::new(),
        power,
        worst_violation,
        worst,
        active,
        regularized: false,
    }
}

/// Worst true-constraint violation over the iterates of `out`, each mapped
/// to full coordinates by `to_point`.
fn iterate_violation(
    cfg: &NetworkConfig,
    out: &MmOutcome,
    full_coop: bool,
    to_point: impl Fn(&[f64]) -> Point,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in &out.iterates {
        let p = to_point(x);
        let signal = p.signal();
        let report = if full_coop {
            power_only_report(cfg, &signal, &p.omega)
        } else {
            rates::check_feasible_cov(cfg, &signal, &p.omega, 0.0)?
        };
        worst = worst.max(report.worst_violation);
    }
    Ok(worst)
}

fn status_of(out: &MmOutcome) -> SolveStatus {
    match out.status {
        MmStatus::Converged | MmStatus::Stopped => SolveStatus::Converged,
        MmStatus::IterationCap => SolveStatus::IterationCap,
    }
}

fn outcome_point(model: &MmModel, x: &[f64], muted_noise: bool) -> Point {
    let (covs, omega) = model.layout.unpack(x);
    let (covs, omega) = model.layout.embed(&covs, &omega, muted_noise);
    Point { covs, omega }
}

/// Runs one MM pass of `model` from `start` (or the default start).
fn run_model(
    cfg: &NetworkConfig,
    chans: &ChannelSet,
    model: &MmModel,
    start: Option<&Point>,
    opts: &SolverOptions,
    kind: ResultKind,
) -> Result<SolveResult> {
    let full_coop = matches!(kind, ResultKind::FullCooperation(_));
    if model.layout.d == 0 {
        return zero_result(cfg, chans, SolveStatus::Converged);
    }
    let x0 = match start {
        Some(p) => start_from_point(model, p),
        None => default_x(cfg, model),
    }
    .ok_or_else(|| Error::NoFeasibleStart("could not find a strictly feasible initial point".into()))?;
    let out = mm::run_mm(model, x0, &opts.mm(), None);
    let point = outcome_point(model, &out.x, !full_coop);
    let mut res = finish(cfg, chans, point, out.trace.clone(), status_of(&out), out.iterations, out.kkt_residual, kind)?;
    res.iterate_violation = iterate_violation(cfg, &out, full_coop, |x| outcome_point(model, x, !full_coop))?;
    Ok(res)
}

fn pick_better(best: Option<SolveResult>, cand: SolveResult) -> SolveResult {
    match best {
        Some(b) if b.weighted_sum_rate() >= cand.weighted_sum_rate() => b,
        _ => cand,
    }
}

/// Joint precoding and multivariate compression from `init`, or, with
/// `init = None`, the best of the default start and warm starts from the
/// independent-compression and separate designs.
pub fn solve_joint(spec: &ProblemSpec, init: Option<&Point>) -> Result<SolveResult> {
    match init {
        Some(p) => solve_joint_from(spec, Compression::Multivariate, Some(p)),
        None => SchemeSolver::new(spec).solve(Mode::Joint(Compression::Multivariate)),
    }
}

/// Joint design with block-diagonal `Omega` (per-BS compression).
pub fn solve_independent(spec: &ProblemSpec, init: Option<&Point>) -> Result<SolveResult> {
    match init {
        Some(p) => solve_joint_from(spec, Compression::Independent, Some(p)),
        None => SchemeSolver::new(spec).solve(Mode::Joint(Compression::Independent)),
    }
}

/// One MM pass of the joint design.
pub(crate) fn solve_joint_from(spec: &ProblemSpec, compression: Compression, init: Option<&Point>) -> Result<SolveResult> {
    let h = effective_channels(spec)?;
    let model = joint_model(&spec.cfg, h.all(), compression, None);
    run_model(&spec.cfg, &h, &model, init, &spec.options, ResultKind::Rates(None))
}

/// Sum-rate precoding with `Omega = 0` and no backhaul constraints.
pub fn solve_full_cooperation(spec: &ProblemSpec) -> Result<SolveResult> {
    SchemeSolver::new(spec).solve(Mode::FullCooperation)
}

pub(crate) fn solve_full_cooperation_from(cfg: &NetworkConfig, chans: &ChannelSet, init: Option<&Point>, opts: &SolverOptions) -> Result<SolveResult> {
    let model = full_coop_model(cfg, chans.all(), None);
    run_model(cfg, chans, &model, init, opts, ResultKind::FullCooperation(None))
}

/// Dirty-paper coding: the MM loop with nested-interference rates for every
/// encoding order, each warm-started from the linear joint solution.
pub fn solve_dpc(spec: &ProblemSpec) -> Result<SolveResult> {
    SchemeSolver::new(spec).solve(Mode::Dpc(spec.compression()))
}

pub(crate) fn solve_dpc_from(spec: &ProblemSpec, compression: Compression, warm: &Point) -> Result<SolveResult> {
    let n = spec.cfg.n_ms();
    if n > MAX_DPC_USERS {
        return Err(Error::CapExceeded {
            what: "mobile stations for the dirty-paper order search",
            cap: MAX_DPC_USERS,
            got: n,
        });
    }
    let h = effective_channels(spec)?;
    let mut best: Option<SolveResult> = None;
    for order in permutations(n) {
        let model = joint_model(&spec.cfg, h.all(), compression, Some(order.clone()));
        let res = run_model(&spec.cfg, &h, &model, Some(warm), &spec.options, ResultKind::Rates(Some(order)))?;
        best = Some(match best {
            Some(b) if b.weighted_sum_rate() >= res.weighted_sum_rate() => b,
            _ => res,
        });
    }
    best.ok_or_else(|| Error::InvalidConfig("no mobile stations".into()))
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Channels after the singular-value worst case `H_k <- (1 - eps_k) H_k`.
fn effective_channels(spec: &ProblemSpec) -> Result<ChannelSet> {
    match &spec.robust {
        None => Ok(spec.chans.clone()),
        Some(eps) => {
            if eps.len() != spec.cfg.n_ms() {
                return Err(Error::Dimension(format!("{} uncertainty radii for {} MSs", eps.len(), spec.cfg.n_ms())));
            }
            if let Some(e) = eps.iter().find(|e| !(0.0..1.0).contains(*e)) {
                return Err(Error::InvalidConfig(format!("uncertainty radius {e} outside [0, 1)")));
            }
            let factor: Vec<f64> = eps.iter().map(|e| 1.0 - e).collect();
            Ok(spec.chans.scaled(&factor))
        }
    }
}

/// Robust joint design against `H_k = H^_k (I + Delta_k)` with
/// `sigma_max(Delta_k) <= eps_k`: the worst case is the scaled channel, so
/// this is the joint design on `(1 - eps_k) H^_k`. Reported rates are the
/// worst-case rates.
pub fn solve_robust_singular(spec: &ProblemSpec, eps: &[f64]) -> Result<SolveResult> {
    let mut s = spec.clone();
    s.robust = Some(eps.to_vec());
    let h = effective_channels(&s)?;
    s.chans = h;
    s.robust = None;
    SchemeSolver::new(&s).solve(Mode::Joint(spec.compression()))
}

/// Solves one convex surrogate subproblem of the joint design anchored at
/// `anchor` to full barrier accuracy.
pub fn solve_subproblem(spec: &ProblemSpec, anchor: &Point) -> Result<SubproblemResult> {
    let h = effective_channels(spec)?;
    let model = match spec.mode {
        Mode::FullCooperation => full_coop_model(&spec.cfg, h.all(), None),
        _ => joint_model(&spec.cfg, h.all(), spec.compression(), None),
    };
    let lay = &model.layout;
    let covs: Vec<CMat> = anchor.covs.iter().map(|r| lay.restrict(r)).collect();
    let omega = if lay.omega_range.is_empty() {
        lay.fixed_omega.clone()
    } else {
        lay.restrict(&anchor.omega)
    };
    let x0 = lay.pack(&covs, &omega);
    let prog = model
        .program_at(&x0)
        .filter(|p| p.strictly_feasible(&x0))
        .ok_or_else(|| Error::Infeasible("anchor is not strictly feasible".into()))?;
    let opts = spec.options.mm().barrier;
    let s0 = model.surrogate_value(&prog, &x0).unwrap_or(f64::NAN);
    let out = prog.solve(&x0, 1.0, &opts);
    let s1 = model.surrogate_value(&prog, &out.x).unwrap_or(f64::NAN);
    Ok(SubproblemResult {
        point: outcome_point(&model, &out.x, !matches!(spec.mode, Mode::FullCooperation)),
        surrogate_at_anchor: s0,
        surrogate_at_solution: s1,
        kkt_residual: out.kkt_residual,
        gap: out.gap,
    })
}

/// Dispatches on `spec.mode`.
pub fn solve(spec: &ProblemSpec) -> Result<SolveResult> {
    SchemeSolver::new(spec).solve(spec.mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_lexicographic() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[1], vec![0, 2, 1]);
        assert_eq!(p[5], vec![2, 1, 0]);
        assert_eq!(permutations(1), vec![vec![0]]);
    }
}
