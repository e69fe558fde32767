//! Solves several schemes on one instance, sharing work between them.
//!
//! The schemes are nested: a separate-design solution is feasible for the
//! joint problem, an independent-compression solution is feasible for
//! multivariate compression, any joint solution is feasible for full
//! cooperation, and every rate only grows under dirty-paper coding. Each
//! richer scheme therefore also runs MM from the poorer schemes' solutions
//! and keeps the best, which makes the ordering hold on every instance and
//! not only on average.
//!
//! [`SchemeSolver::warm_from`] adds another solver's solutions as starting
//! points. In a sweep over a relaxing parameter (more backhaul, say) every
//! earlier solution stays feasible, so each scheme's rate is nondecreasing
//! along the sweep.

use std::collections::HashMap;

use crate::error::Result;
use crate::optimizer::separate::{separate_from, separate_search, Gamma};
use crate::optimizer::{
    effective_channels, pick_better, solve_dpc_from, solve_full_cooperation_from, solve_joint_from, Compression, Mode,
    Point, ProblemSpec, SolveResult, SolveStatus,
};

pub struct SchemeSolver {
    spec: ProblemSpec,
    cache: HashMap<Mode, SolveResult>,
    hints: HashMap<Mode, SolveResult>,
}

impl SchemeSolver {
    pub fn new(spec: &ProblemSpec) -> Self {
        let mut spec = spec.clone();
        if let Ok(h) = effective_channels(&spec) {
            spec.chans = h;
            spec.robust = None;
        }
        Self {
            spec,
            cache: HashMap::new(),
            hints: HashMap::new(),
        }
    }

    /// Uses the solutions `other` has computed so far as extra starting
    /// points. They must be feasible for this solver's problem, e.g. come
    /// from the same channels with smaller backhaul capacities; infeasible
    /// ones are skipped.
    pub fn warm_from(&mut self, other: &SchemeSolver) {
        for (mode, res) in &other.cache {
            if res.status != SolveStatus::Infeasible {
                self.hints.insert(*mode, res.clone());
            }
        }
    }

    fn hint_point(&self, mode: Mode) -> Option<Point> {
        self.hints.get(&mode).map(|r| r.point.clone())
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn solve(&mut self, mode: Mode) -> Result<SolveResult> {
        if let Some(r) = self.cache.get(&mode) {
            return Ok(r.clone());
        }
        let res = match mode {
            Mode::Separate(c) => {
                let (cfg, chans, opts) = (&self.spec.cfg, &self.spec.chans, &self.spec.options);
                let pair = separate_search(cfg, chans, Gamma::Auto, opts)?;
                let best = |comp: Compression, found: SolveResult| -> Result<SolveResult> {
                    let mut best = found;
                    if let Some(h) = self.hints.get(&Mode::Separate(comp)) {
                        if let Some(r) = separate_from(cfg, chans, h, comp, opts)? {
                            best = pick_better(Some(best), r);
                        }
                    }
                    Ok(best)
                };
                let independent = best(Compression::Independent, pair.independent)?;
                let multivariate = best(Compression::Multivariate, pair.multivariate)?;
                let multivariate = pick_better(Some(multivariate), independent.clone());
                self.cache.insert(Mode::Separate(Compression::Independent), independent.clone());
                self.cache.insert(Mode::Separate(Compression::Multivariate), multivariate.clone());
                match c {
                    Compression::Independent => independent,
                    Compression::Multivariate => multivariate,
                }
            }
            Mode::Joint(c) => {
                let mut warm: Vec<Point> = Vec::new();
                let sep = self.solve(Mode::Separate(c))?;
                if sep.status != SolveStatus::Infeasible {
                    warm.push(sep.point);
                }
                if c == Compression::Multivariate {
                    warm.push(self.solve(Mode::Joint(Compression::Independent))?.point);
                }
                warm.extend(self.hint_point(mode));
                let mut best = Some(solve_joint_from(&self.spec, c, None)?);
                for w in &warm {
                    if let Ok(r) = solve_joint_from(&self.spec, c, Some(w)) {
                        best = Some(pick_better(best, r));
                    }
                }
                best.expect("default run present")
            }
            Mode::FullCooperation => {
                let joint = self.solve(Mode::Joint(Compression::Multivariate))?;
                let (cfg, chans, opts) = (&self.spec.cfg, &self.spec.chans, &self.spec.options);
                let mut best = solve_full_cooperation_from(cfg, chans, None, opts)?;
                let hint = self.hints.get(&mode).map(|r| r.point.clone());
                for w in std::iter::once(joint.point).chain(hint) {
                    if let Ok(r) = solve_full_cooperation_from(cfg, chans, Some(&w), opts) {
                        best = pick_better(Some(best), r);
                    }
                }
                best
            }
            Mode::Dpc(c) => {
                let joint = self.solve(Mode::Joint(c))?;
                let mut best = solve_dpc_from(&self.spec, c, &joint.point)?;
                if let Some(h) = self.hint_point(mode) {
                    if let Ok(r) = solve_dpc_from(&self.spec, c, &h) {
                        best = pick_better(Some(best), r);
                    }
                }
                best
            }
        };
        self.cache.insert(mode, res.clone());
        Ok(res)
    }
}
