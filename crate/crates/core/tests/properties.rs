mod common;

use common::{instance, intersection, union};
use cran_core::linalg::{self, CMat, C64};
use cran_core::model::{block_select, fading_channels, NetworkConfig};
use cran_core::optimizer::{surrogate_backhaul, surrogate_objective};
use cran_core::rates::{self, nonempty_subsets, QuantCov};
use cran_core::sim::plan_successive;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 1usize..=4, 1usize..=3, 1usize..=2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn selector_is_an_isometry((seed, n_bs, _n_ms, ant) in dims()) {
        let inst = instance(seed, n_bs, 1, ant);
        for s in nonempty_subsets(n_bs) {
            let e = block_select(&inst.cfg, &s).unwrap().matrix();
            let gram = e.adjoint() * &e;
            prop_assert!(linalg::max_abs(&(gram - CMat::identity(e.ncols(), e.ncols()))) < 1e-15);
        }
    }

    #[test]
    fn backhaul_is_contrapolymatroid((seed, n_bs, n_ms, ant) in dims()) {
        let inst = instance(seed, n_bs, n_ms, ant);
        let subsets = nonempty_subsets(n_bs);
        prop_assert_eq!(inst.g(&[]), 0.0);
        for s in &subsets {
            for t in &subsets {
                let (gs, gt) = (inst.g(s), inst.g(t));
                if s.iter().all(|i| t.contains(i)) {
                    prop_assert!(gs <= gt + 1e-9, "g{:?}={} > g{:?}={}", s, gs, t, gt);
                }
                let sup = inst.g(&union(s, t)) + inst.g(&intersection(s, t));
                prop_assert!(gs + gt <= sup + 1e-9);
            }
        }
    }

    #[test]
    fn corner_points_telescope((seed, n_bs, n_ms, ant) in dims()) {
        let inst = instance(seed, n_bs, n_ms, ant);
        for perm in cran_core::optimizer::permutations(n_bs) {
            let c = rates::corner_point(&inst.cfg, &perm, &inst.prec, &inst.q).unwrap();
            let mut prefix = Vec::new();
            let mut acc = 0.0;
            for (pos, &bs) in perm.iter().enumerate() {
                prefix.push(bs);
                prefix.sort_unstable();
                acc += c[pos];
                prop_assert!((acc - inst.g(&prefix)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn plan_rates_match_corner_points((seed, n_bs, n_ms, ant) in dims()) {
        let inst = instance(seed, n_bs, n_ms, ant);
        let perm: Vec<usize> = (0..n_bs).rev().collect();
        let plan = plan_successive(&inst.cfg, &inst.prec, &inst.q, &perm).unwrap();
        let corner = rates::corner_point(&inst.cfg, &perm, &inst.prec, &inst.q).unwrap();
        for (step, c) in plan.steps.iter().zip(&corner) {
            prop_assert!((step.rate - c).abs() < 1e-8);
            prop_assert!(step.rate >= 0.0);
        }
        let all: Vec<usize> = (0..n_bs).collect();
        prop_assert!((plan.total_rate() - inst.g(&all)).abs() < 1e-8);
        prop_assert!(linalg::rel_frobenius_error(&plan.steps[0].conditional, &inst.q.block(perm[0], perm[0])) < 1e-12);
    }

    #[test]
    fn block_diagonal_collapse((seed, n_bs, n_ms, ant) in dims()) {
        let inst = instance(seed, n_bs, n_ms, ant);
        let mut om = inst.q.matrix().clone();
        for i in 0..n_bs {
            for j in 0..n_bs {
                if i != j {
                    for r in inst.cfg.bs_rows(i) {
                        for c in inst.cfg.bs_rows(j) {
                            om[(r, c)] = C64::new(0.0, 0.0);
                        }
                    }
                }
            }
        }
        let q = QuantCov::new(&inst.cfg, om).unwrap();
        for s in nonempty_subsets(n_bs) {
            let joint = rates::backhaul_subset_rate(&inst.cfg, &s, &inst.prec, &q).unwrap();
            let sum: f64 = s.iter().map(|&i| rates::independent_backhaul_rate(&inst.cfg, i, &inst.prec, &q).unwrap()).sum();
            prop_assert!((joint - sum).abs() < 1e-9);
        }
    }

    #[test]
    fn rates_are_nonnegative_and_dpc_dominates((seed, n_bs, n_ms, ant) in dims()) {
        let inst = instance(seed, n_bs, n_ms, ant);
        let report = rates::weighted_sum_rate(&inst.cfg, &inst.chans, &inst.prec, &inst.q).unwrap();
        prop_assert!(report.per_ms.iter().all(|&r| r >= 0.0));
        for perm in cran_core::optimizer::permutations(n_ms) {
            let dpc: f64 = (0..n_ms)
                .map(|pos| rates::dpc_rate(&inst.cfg, pos, &perm, &inst.chans, &inst.prec, &inst.q).unwrap())
                .sum();
            prop_assert!(dpc >= report.sum_rate() - 1e-9);
        }
    }

    #[test]
    fn surrogates_bound_the_true_functions((seed, n_bs, n_ms, ant) in dims(), other in any::<u64>()) {
        let cand = instance(seed, n_bs, n_ms, ant);
        let anchor = instance(other, n_bs, n_ms, ant);
        let cfg = &cand.cfg;
        let (pc, pa) = (cand.point(), anchor.point());
        let f = rates::weighted_sum_rate(cfg, &cand.chans, &cand.prec, &cand.q).unwrap().weighted_sum;
        let f_anchor = rates::weighted_sum_rate(cfg, &cand.chans, &anchor.prec, &anchor.q).unwrap().weighted_sum;
        prop_assert!(surrogate_objective(&pc, &pa, cfg, &cand.chans).unwrap() <= f + 1e-9);
        prop_assert!((surrogate_objective(&pa, &pa, cfg, &cand.chans).unwrap() - f_anchor).abs() < 1e-9);
        for s in nonempty_subsets(n_bs) {
            let gc = cand.g(&s);
            let ga = rates::backhaul_subset_rate(cfg, &s, &anchor.prec, &anchor.q).unwrap();
            prop_assert!(surrogate_backhaul(&pc, &pa, cfg, &s).unwrap() >= gc - 1e-9);
            prop_assert!((surrogate_backhaul(&pa, &pa, cfg, &s).unwrap() - ga).abs() < 1e-9);
        }
    }

    #[test]
    fn fading_is_a_pure_function(seed in any::<u64>(), alpha in 0.01f64..=1.0) {
        let cfg = NetworkConfig::uniform(3, 3, 2, 1, 1.0, 1.0).unwrap();
        let a = fading_channels(&cfg, alpha, seed).unwrap();
        let b = fading_channels(&cfg, alpha, seed).unwrap();
        prop_assert_eq!(a.all(), b.all());
    }
}
