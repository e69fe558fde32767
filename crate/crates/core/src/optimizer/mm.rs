//! Majorize-minimize loop over log-det surrogates.
//!
//! A [`MmModel`] fixes the variable layout, the matrices whose
//! log-determinants stay exact (signal terms, `Omega_SS`, cones) and the
//! matrices that get linearized at every anchor (interference terms and the
//! per-BS received covariances in the backhaul constraints). Each outer
//! iteration re-linearizes at the current point and re-centers the barrier
//! from it, so one barrier path is shared across iterations.

use std::f64::consts::LN_2;
use std::rc::Rc;

use crate::linalg::{self, CMat};
use crate::model::NetworkConfig;
use crate::optimizer::layout::{Group, Layout};
use crate::optimizer::program::{AffineHerm, BarrierOptions, ConvexFn, LogDetProgram};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Goal {
    /// Weighted sum-rate; `Some(order)` uses dirty-paper rates with MSs
    /// encoded in `order`.
    SumRate(Option<Vec<usize>>),
    /// Minimize `sum_i mu_i` times the power of active BS `i`.
    MinPower(Vec<f64>),
    /// Maximize one extra scalar variable.
    MaxExtra(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Backhaul {
    None,
    Singletons,
    AllSubsets,
}

struct RateTerm {
    weight: f64,
    signal: usize,
    interference: AffineHerm,
}

struct BackhaulTerm {
    positions: Vec<usize>,
    cap_nats: f64,
    omega_block: usize,
}

pub(crate) struct MmModel {
    pub layout: Layout,
    goal: Goal,
    pool: Rc<Vec<AffineHerm>>,
    rates: Vec<RateTerm>,
    /// `E_i^H (sum R + Omega) E_i` per active BS.
    received: Vec<AffineHerm>,
    backhaul: Vec<BackhaulTerm>,
    power: Vec<ConvexFn>,
    static_constraints: Vec<ConvexFn>,
    cones: Vec<usize>,
}

pub(crate) struct ModelParts {
    pub backhaul: Backhaul,
    pub power_caps: bool,
    pub extra_constraints: Vec<ConvexFn>,
    pub extra_cones: Vec<AffineHerm>,
}

impl Default for ModelParts {
    fn default() -> Self {
        Self {
            backhaul: Backhaul::AllSubsets,
            power_caps: true,
            extra_constraints: Vec::new(),
            extra_cones: Vec::new(),
        }
    }
}

impl MmModel {
    pub fn new(cfg: &NetworkConfig, h_full: &[CMat], layout: Layout, goal: Goal, parts: ModelParts) -> Self {
        let d = layout.d;
        let n_ms = layout.n_ms();
        let mut pool: Vec<AffineHerm> = Vec::new();
        let omega_groups = [Group::Omega];
        let h: Vec<CMat> = h_full
            .iter()
            .map(|hk| CMat::from_fn(hk.nrows(), d, |r, c| hk[(r, layout.active[c])]))
            .collect();

        // `I + H (sum_{l in set} R_l + Omega) H^H`
        let received_by = |k: usize, set: &[usize]| -> AffineHerm {
            let mut groups: Vec<Group> = set.iter().map(|&l| Group::R(l)).collect();
            groups.push(Group::Omega);
            let mut inner = layout.fixed_omega.clone();
            for &l in set {
                inner += &layout.fixed_r[l];
            }
            let hk = &h[k];
            let offset = CMat::identity(hk.nrows(), hk.nrows()) + hk * inner * hk.adjoint();
            layout.affine(&groups, hk, offset)
        };

        let mut rates = Vec::new();
        if let Goal::SumRate(order) = &goal {
            let order: Vec<usize> = order.clone().unwrap_or_else(|| (0..n_ms).collect());
            for (pos, &k) in order.iter().enumerate() {
                let w = cfg.weights()[k];
                if w <= 0.0 {
                    continue;
                }
                let (with, without): (Vec<usize>, Vec<usize>) = if matches!(goal, Goal::SumRate(Some(_))) {
                    let later: Vec<usize> = order[pos + 1..].to_vec();
                    let mut with = later.clone();
                    with.push(k);
                    (with, later)
                } else {
                    ((0..n_ms).collect(), (0..n_ms).filter(|&l| l != k).collect())
                };
                pool.push(received_by(k, &with));
                rates.push(RateTerm {
                    weight: w,
                    signal: pool.len() - 1,
                    interference: received_by(k, &without),
                });
            }
        }

        let all_groups: Vec<Group> = (0..n_ms).map(Group::R).chain([Group::Omega]).collect();
        let mut fixed_total = layout.fixed_omega.clone();
        for f in &layout.fixed_r {
            fixed_total += f;
        }
        let received: Vec<AffineHerm> = layout
            .bs_rows
            .iter()
            .map(|rows| {
                let sel = layout.selector(rows);
                let offset = &sel * &fixed_total * sel.adjoint();
                layout.affine(&all_groups, &sel, offset)
            })
            .collect();

        let n_act = layout.active_bs.len();
        let subsets: Vec<Vec<usize>> = match parts.backhaul {
            Backhaul::None => Vec::new(),
            Backhaul::Singletons => (0..n_act).map(|p| vec![p]).collect(),
            Backhaul::AllSubsets => crate::rates::nonempty_subsets(n_act),
        };
        let mut backhaul = Vec::new();
        for positions in subsets {
            let rows = layout.subset_rows(&positions);
            let sel = layout.selector(&rows);
            let offset = &sel * &layout.fixed_omega * sel.adjoint();
            pool.push(layout.affine(&omega_groups, &sel, offset));
            let bs: Vec<usize> = positions.iter().map(|&p| layout.active_bs[p]).collect();
            backhaul.push(BackhaulTerm {
                positions,
                cap_nats: cfg.backhaul_sum(&bs) * LN_2,
                omega_block: pool.len() - 1,
            });
        }

        let power: Vec<ConvexFn> = layout
            .bs_rows
            .iter()
            .map(|rows| {
                let linear = layout
                    .vars_in(&all_groups)
                    .filter(|&v| {
                        let var = &layout.vars[v];
                        var.a == var.b && rows.contains(&var.a) && var.kind == crate::optimizer::layout::Kind::Diag
                    })
                    .map(|v| (v, 1.0))
                    .collect();
                let constant = rows.iter().map(|&r| fixed_total[(r, r)].re).sum();
                ConvexFn {
                    linear,
                    constant,
                    logdets: Vec::new(),
                }
            })
            .collect();

        let mut static_constraints = Vec::new();
        if parts.power_caps {
            for (p, f) in power.iter().enumerate() {
                let mut f = f.clone();
                f.constant -= cfg.powers()[layout.active_bs[p]];
                static_constraints.push(f);
            }
        }
        static_constraints.extend(parts.extra_constraints);

        let mut cones = Vec::new();
        let eye = CMat::identity(d, d);
        for k in 0..n_ms {
            if layout.r_ranges[k].is_some() {
                pool.push(layout.affine(&[Group::R(k)], &eye, CMat::zeros(d, d)));
                cones.push(pool.len() - 1);
            }
        }
        if !layout.omega_range.is_empty() {
            for rows in &layout.bs_rows {
                let sel = layout.selector(rows);
                pool.push(layout.affine(&omega_groups, &sel, CMat::zeros(rows.len(), rows.len())));
                cones.push(pool.len() - 1);
            }
            if layout.omega_range.len() == d * d && layout.bs_rows.len() > 1 {
                pool.push(layout.affine(&omega_groups, &eye, CMat::zeros(d, d)));
                cones.push(pool.len() - 1);
            }
        }
        for c in parts.extra_cones {
            pool.push(c);
            cones.push(pool.len() - 1);
        }

        Self {
            layout,
            goal,
            pool: Rc::new(pool),
            rates,
            received,
            backhaul,
            power,
            static_constraints,
            cones,
        }
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }

    /// Surrogate program anchored at `x0`.
    pub fn program_at(&self, x0: &[f64]) -> Option<LogDetProgram> {
        let n = self.n();
        let mut objective = ConvexFn::default();
        match &self.goal {
            Goal::SumRate(_) => {
                for t in &self.rates {
                    let (lin, c) = linearize(&t.interference, x0)?;
                    push_scaled(&mut objective, &lin, c, t.weight);
                    objective.logdets.push((t.weight, t.signal));
                }
            }
            Goal::MinPower(mu) => {
                for (f, &m) in self.power.iter().zip(mu) {
                    push_scaled(&mut objective, &f.linear, f.constant, m);
                }
            }
            Goal::MaxExtra(j) => objective.linear.push((self.layout.extra(*j), -1.0)),
        }
        let mut constraints = self.static_constraints.clone();
        if !self.backhaul.is_empty() {
            let lins: Vec<(Vec<(usize, f64)>, f64)> =
                self.received.iter().map(|a| linearize(a, x0)).collect::<Option<_>>()?;
            for b in &self.backhaul {
                let mut f = ConvexFn::default();
                for &p in &b.positions {
                    push_scaled(&mut f, &lins[p].0, lins[p].1, 1.0);
                }
                f.constant -= b.cap_nats;
                f.logdets.push((1.0, b.omega_block));
                constraints.push(f);
            }
        }
        Some(LogDetProgram {
            n,
            pool: Rc::clone(&self.pool),
            objective,
            constraints,
            cones: self.cones.clone(),
        })
    }

    /// The goal in its natural units (bits for rates, linear for power),
    /// oriented so that larger is better.
    pub fn true_value(&self, x: &[f64]) -> Option<f64> {
        match &self.goal {
            Goal::SumRate(_) => {
                let mut v = 0.0;
                for t in &self.rates {
                    let s = linalg::ln_det_pd(&self.pool[t.signal].eval(x))?;
                    let i = linalg::ln_det_pd(&t.interference.eval(x))?;
                    v += t.weight * (s - i);
                }
                Some(v / LN_2)
            }
            Goal::MinPower(mu) => Some(-self.power.iter().zip(mu).map(|(f, m)| m * f.linear_value(x)).sum::<f64>()),
            Goal::MaxExtra(j) => Some(x[self.layout.extra(*j)]),
        }
    }

    /// Surrogate value in the same units and orientation as
    /// [`MmModel::true_value`].
    pub fn surrogate_value(&self, prog: &LogDetProgram, x: &[f64]) -> Option<f64> {
        let f0 = prog.objective_value(x)?;
        Some(match self.goal {
            Goal::SumRate(_) => -f0 / LN_2,
            _ => -f0,
        })
    }
}

fn push_scaled(f: &mut ConvexFn, lin: &[(usize, f64)], c: f64, w: f64) {
    f.linear.extend(lin.iter().map(|&(v, a)| (v, a * w)));
    f.constant += c * w;
}

/// `phi` in nats as an affine function of `x`: the tangent of
/// `ln det A(x)` at `x0`.
pub(crate) fn linearize(a: &AffineHerm, x0: &[f64]) -> Option<(Vec<(usize, f64)>, f64)> {
    let y = linalg::hermitian_part(&a.eval(x0));
    let ln_det = linalg::ln_det_pd(&y)?;
    let yinv = linalg::inv_pd(&y).ok()?;
    let lin = a
        .terms
        .iter()
        .map(|(v, f)| (*v, linalg::trace_prod_re(&yinv, f)))
        .collect();
    let c = ln_det - y.nrows() as f64 + linalg::trace_prod_re(&yinv, &a.offset);
    Some((lin, c))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct MmOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub barrier: BarrierOptions,
    /// Largest barrier growth per outer iteration.
    pub t_growth: f64,
    /// Growth applied when a subproblem fails to improve the surrogate.
    pub t_retry: f64,
    pub t_growth_min: f64,
    /// Target ratio of subproblem gap to the last surrogate improvement.
    pub gap_fraction: f64,
}

impl Default for MmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: 1e-5,
            barrier: BarrierOptions::default(),
            t_growth: 64.0,
            t_retry: 8.0,
            t_growth_min: 1.5,
            gap_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MmStatus {
    Converged,
    IterationCap,
    Stopped,
}

#[derive(Debug, Clone)]
pub(crate) struct MmOutcome {
    pub x: Vec<f64>,
    pub trace: Vec<f64>,
    /// Every iterate, starting with `x0`.
    pub iterates: Vec<Vec<f64>>,
    pub status: MmStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Runs the MM loop from a strictly feasible `x0`. `stop` ends the loop
/// early once it accepts the current iterate.
pub(crate) fn run_mm(model: &MmModel, x0: Vec<f64>, opts: &MmOptions, stop: Option<&dyn Fn(&[f64]) -> bool>) -> MmOutcome {
    let mut x = x0;
    let mut value = model.true_value(&x).unwrap_or(f64::NEG_INFINITY);
    let mut trace = vec![value];
    let mut iterates = vec![x.clone()];
    let mut status = MmStatus::IterationCap;
    let mut iterations = 0;
    let mut kkt_residual = f64::INFINITY;
    if stop.is_some_and(|s| s(&x)) {
        return MmOutcome {
            x,
            trace,
            iterates,
            status: MmStatus::Stopped,
            iterations,
            kkt_residual,
        };
    }
    let Some(first) = model.program_at(&x) else {
        return MmOutcome {
            x,
            trace,
            iterates,
            status: MmStatus::Converged,
            iterations,
            kkt_residual,
        };
    };
    let m = first.barrier_weight().max(1.0);
    let t_final = m / opts.barrier.gap;
    let mut t = (m / value.abs().max(1.0)).min(t_final);
    while iterations < opts.max_iter {
        let Some(prog) = model.program_at(&x) else {
            status = MmStatus::Converged;
            break;
        };
        let anchor = model.surrogate_value(&prog, &x).unwrap_or(value);
        let mut accepted = None;
        loop {
            let out = prog.center(&x, t, &opts.barrier);
            let s_new = model.surrogate_value(&prog, &out.x).unwrap_or(f64::NEG_INFINITY);
            if s_new >= anchor && prog.strictly_feasible(&out.x) {
                let grad_scale = 1.0 + prog.objective.linear.iter().map(|l| l.1.abs()).fold(0.0, f64::max);
                kkt_residual = (m / t).max(out.stationarity / grad_scale);
                accepted = Some(out.x);
                break;
            }
            if t >= t_final {
                break;
            }
            t = (t * opts.t_retry).min(t_final);
        }
        let Some(next) = accepted else {
            status = MmStatus::Converged;
            break;
        };
        // Keep the subproblem gap m / t a fraction of the surrogate progress:
        // a large t while the anchor still moves far costs many damped
        // Newton steps per re-centering.
        let f_anchor = prog.objective_value(&x).unwrap_or(f64::INFINITY);
        let f_next = prog.objective_value(&next).unwrap_or(f64::NEG_INFINITY);
        let progress = (f_anchor - f_next).max(0.0);
        let target = if progress > 0.0 { m / (opts.gap_fraction * progress) } else { f64::INFINITY };
        let t_next = target.clamp(t * opts.t_growth_min, t * opts.t_growth);
        iterations += 1;
        x = next;
        iterates.push(x.clone());
        let new_value = model.true_value(&x).unwrap_or(value);
        trace.push(new_value);
        let change = (new_value - value).abs();
        value = new_value;
        if stop.is_some_and(|s| s(&x)) {
            status = MmStatus::Stopped;
            break;
        }
        if t >= t_final && change <= opts.rel_tol * value.abs().max(1e-6) {
            status = MmStatus::Converged;
            break;
        }
        t = t_next.min(t_final);
    }
    MmOutcome {
        x,
        trace,
        iterates,
        status,
        iterations,
        kkt_residual,
    }
}
