use cran_core::linalg::{self, from_real};
use cran_core::model::{fading_channels, wyner_channels, ChannelSet, NetworkConfig};
use cran_core::optimizer::{
    self, build_sinr_lmi, phi, solve_full_cooperation, solve_independent, solve_joint, solve_robust_singular,
    solve_robust_sinr, solve_separate, solve_subproblem, Compression, Gamma, Mode, ProblemSpec, SchemeSolver,
    SinrSpec, SolveStatus, SolverOptions,
};
use cran_core::rates::{self, Precoder, QuantCov};
use cran_core::{CMat, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar(p: f64, c: f64) -> ProblemSpec {
    let cfg = NetworkConfig::uniform(1, 1, 1, 1, p, c).unwrap();
    let h = ChannelSet::new(&cfg, vec![from_real(1, 1, &[1.0])]).unwrap();
    ProblemSpec::new(cfg, h, Mode::Joint(Compression::Multivariate)).unwrap()
}

fn fading(n: usize, bs_ant: usize, p: f64, c: f64, seed: u64) -> ProblemSpec {
    let cfg = NetworkConfig::uniform(n, n, bs_ant, 1, p, c).unwrap();
    let h = fading_channels(&cfg, 1.0, seed).unwrap();
    ProblemSpec::new(cfg, h, Mode::Joint(Compression::Multivariate)).unwrap()
}

#[test]
fn scalar_joint_optimum() {
    let res = solve_joint(&scalar(3.0, 2.0), None).unwrap();
    assert!((res.weighted_sum_rate() - (4.0f64 / 1.75).log2()).abs() < 1e-3);
    assert!((res.point.covs[0][(0, 0)].re - 2.25).abs() < 1e-2);
    assert!((res.point.omega[(0, 0)].re - 0.75).abs() < 1e-2);
    assert!(res.feasibility.is_feasible(1e-6));
    assert_eq!(res.status, SolveStatus::Converged);
}

#[test]
fn zero_backhaul_gives_zero_rate() {
    let res = solve_joint(&scalar(3.0, 0.0), None).unwrap();
    assert!(res.weighted_sum_rate().abs() < 1e-9);
    let spec = fading(2, 1, 3.0, 0.0, 4);
    assert!(solve_joint(&spec, None).unwrap().weighted_sum_rate().abs() < 1e-9);
}

#[test]
fn large_backhaul_approaches_full_cooperation() {
    let spec = fading(2, 2, 10f64.powf(0.5), 30.0, 11);
    let joint = solve_joint(&spec, None).unwrap();
    let full = solve_full_cooperation(&spec).unwrap();
    assert!(joint.weighted_sum_rate() >= 0.99 * full.weighted_sum_rate());
    assert!(joint.weighted_sum_rate() <= full.weighted_sum_rate() + 1e-4);
}

#[test]
fn full_cooperation_scalar_and_backhaul_free() {
    let res = solve_full_cooperation(&scalar(3.0, 2.0)).unwrap();
    assert!((res.weighted_sum_rate() - 2.0).abs() < 1e-3);
    let other = solve_full_cooperation(&scalar(3.0, 0.0)).unwrap();
    assert!((res.weighted_sum_rate() - other.weighted_sum_rate()).abs() < 1e-9);
    let cutset = |c: f64| res.weighted_sum_rate().min(c);
    assert_eq!(cutset(0.0), 0.0);
}

#[test]
fn independent_matches_joint_on_single_bs() {
    let spec = scalar(3.0, 2.0);
    let a = solve_joint(&spec, None).unwrap();
    let b = solve_independent(&spec, None).unwrap();
    assert!((a.weighted_sum_rate() - b.weighted_sum_rate()).abs() < 1e-6);
}

#[test]
fn independent_is_block_diagonal_and_dominated() {
    let spec = fading(3, 2, 10f64.powf(0.5), 2.0, 21);
    let mut solver = SchemeSolver::new(&spec);
    let ind = solver.solve(Mode::Joint(Compression::Independent)).unwrap();
    let joint = solver.solve(Mode::Joint(Compression::Multivariate)).unwrap();
    assert!(ind.quantcov.is_block_diagonal(0.0));
    assert!(ind.weighted_sum_rate() <= joint.weighted_sum_rate() + 1e-4);
    assert!(ind.feasibility.is_feasible(1e-6));
}

#[test]
fn separate_power_split_extremes() {
    let spec = fading(3, 2, 10f64.powf(0.5), 2.0, 5);
    let near_one = solve_separate(&spec, Gamma::Fixed(0.999)).unwrap();
    assert_eq!(near_one.status, SolveStatus::Infeasible);
    let small = solve_separate(&spec, Gamma::Fixed(0.05)).unwrap();
    assert_ne!(small.status, SolveStatus::Infeasible);
    assert!(small.feasibility.is_feasible(1e-6));
    let auto = solve_separate(&spec, Gamma::Auto).unwrap();
    assert!(auto.weighted_sum_rate() >= small.weighted_sum_rate() - 1e-9);
    let joint = solve_joint(&spec, None).unwrap();
    assert!(auto.weighted_sum_rate() <= joint.weighted_sum_rate() + 1e-4);
}

#[test]
fn dpc_single_user_and_dominance() {
    let spec = scalar(3.0, 2.0);
    let d = optimizer::solve_dpc(&spec).unwrap();
    let j = solve_joint(&spec, None).unwrap();
    assert!((d.weighted_sum_rate() - j.weighted_sum_rate()).abs() < 1e-6);

    let cfg = NetworkConfig::uniform(2, 2, 1, 1, 10.0, 2.0).unwrap();
    let spec = ProblemSpec::new(cfg.clone(), wyner_channels(&cfg, 0.5).unwrap(), Mode::Dpc(Compression::Multivariate)).unwrap();
    let mut solver = SchemeSolver::new(&spec);
    let lin = solver.solve(Mode::Joint(Compression::Multivariate)).unwrap();
    let dpc = solver.solve(Mode::Dpc(Compression::Multivariate)).unwrap();
    assert!(dpc.weighted_sum_rate() >= lin.weighted_sum_rate() - 1e-4);
    let order = dpc.dpc_order.clone().unwrap();
    for (pos, &k) in order.iter().enumerate() {
        let r = rates::dpc_rate_cov(spec.chans.all(), &dpc.point.covs, &dpc.point.omega, &order, pos);
        assert!((r - dpc.rates.per_ms[k]).abs() < 1e-12);
    }
}

#[test]
fn dpc_evaluation_matches_scalar_oracle() {
    let cfg = NetworkConfig::uniform(1, 2, 1, 1, 10.0, 5.0).unwrap();
    let h = ChannelSet::new(&cfg, vec![from_real(1, 1, &[1.0]); 2]).unwrap();
    let covs = vec![from_real(1, 1, &[2.0]), from_real(1, 1, &[1.0])];
    let omega = from_real(1, 1, &[1.0]);
    let r1 = rates::dpc_rate_cov(h.all(), &covs, &omega, &[0, 1], 0);
    let r2 = rates::dpc_rate_cov(h.all(), &covs, &omega, &[0, 1], 1);
    assert!((r1 - 0.7370).abs() < 1e-4);
    assert!((r2 - 0.5850).abs() < 1e-4);
}

#[test]
fn robust_singular_zero_radius_is_nominal() {
    let spec = fading(2, 1, 3.0, 2.0, 8);
    let a = solve_joint(&spec, None).unwrap();
    let b = solve_robust_singular(&spec, &[0.0, 0.0]).unwrap();
    assert!((a.weighted_sum_rate() - b.weighted_sum_rate()).abs() < 1e-9);
    assert!(solve_robust_singular(&spec, &[1.0, 0.0]).is_err());
}

#[test]
fn robust_singular_scalar_worst_case() {
    let cfg = NetworkConfig::uniform(1, 1, 1, 1, 3.0, 50.0).unwrap();
    let h = ChannelSet::new(&cfg, vec![from_real(1, 1, &[1.0])]).unwrap();
    let scaled = h.scaled(&[0.5]);
    let prec = Precoder::from_covariances(&cfg, &[from_real(1, 1, &[3.0])]).unwrap();
    let q = QuantCov::new(&cfg, from_real(1, 1, &[1e-12])).unwrap();
    let r = rates::user_rate(&cfg, 0, &scaled, &prec, &q).unwrap();
    assert!((r - 1.75f64.log2()).abs() < 1e-6);
}

#[test]
fn robust_singular_value_is_the_scaled_channel_rate() {
    let spec = fading(2, 2, 3.0, 2.0, 13);
    let eps = [0.3, 0.2];
    let res = solve_robust_singular(&spec, &eps).unwrap();
    let nb = spec.cfg.total_bs_antennas();
    let h: Vec<CMat> = (0..2)
        .map(|k| spec.chans.get(k) * (CMat::identity(nb, nb) * C64::new(1.0 - eps[k], 0.0)))
        .collect();
    let shrunk = ChannelSet::new(&spec.cfg, h).unwrap();
    let r = rates::weighted_sum_rate_cov(&spec.cfg, &shrunk, &res.point.covs, &res.point.omega).unwrap();
    assert!((r.weighted_sum - res.weighted_sum_rate()).abs() < 1e-9);
}

// Shrinking the whole channel is not the worst perturbation once the rate
// carries interference: tilting gain from the signal antenna to the
// interfering one does more damage at the same spectral norm.
#[test]
fn scaled_channel_is_not_the_worst_case_under_interference() {
    let cfg = NetworkConfig::uniform(2, 2, 1, 1, 3.0, 50.0).unwrap();
    let h = ChannelSet::new(&cfg, vec![from_real(1, 2, &[1.0, 1.0]), from_real(1, 2, &[0.0, 1.0])]).unwrap();
    let prec = Precoder::from_covariances(
        &cfg,
        &[from_real(2, 2, &[3.0, 0.0, 0.0, 0.0]), from_real(2, 2, &[0.0, 0.0, 0.0, 3.0])],
    )
    .unwrap();
    let q = QuantCov::new(&cfg, from_real(2, 2, &[0.1, 0.0, 0.0, 0.1])).unwrap();
    let eps = 0.2;
    let scaled = rates::user_rate(&cfg, 0, &h.scaled(&[1.0 - eps, 1.0]), &prec, &q).unwrap();
    let tilted = ChannelSet::new(&cfg, vec![from_real(1, 2, &[1.0 - eps, 1.0 + eps]), from_real(1, 2, &[0.0, 1.0])]).unwrap();
    let worse = rates::user_rate(&cfg, 0, &tilted, &prec, &q).unwrap();
    assert!(worse < scaled - 0.1, "tilted {worse} vs scaled {scaled}");
}

#[test]
fn subproblem_improves_and_meets_kkt() {
    let spec = fading(2, 2, 3.0, 2.0, 3);
    let anchor = optimizer::default_start(&spec);
    let sub = solve_subproblem(&spec, &anchor).unwrap();
    assert!(sub.surrogate_at_solution >= sub.surrogate_at_anchor);
    assert!(sub.kkt_residual <= 1e-6);
    let report = rates::check_feasible_cov(&spec.cfg, &sub.point.signal(), &sub.point.omega, 1e-6).unwrap();
    assert!(report.is_feasible(1e-6));
}

#[test]
fn subproblem_scalar_large_budgets() {
    let spec = scalar(100.0, 60.0);
    let mut anchor = optimizer::default_start(&spec);
    let mut best = 0.0;
    for _ in 0..30 {
        let sub = solve_subproblem(&spec, &anchor).unwrap();
        best = sub.surrogate_at_solution;
        anchor = sub.point;
    }
    assert!((best - 101f64.log2()).abs() < 1e-3);
    assert!(anchor.omega[(0, 0)].re < 1e-3);
}

#[test]
fn subproblem_keeps_a_stationary_anchor() {
    let spec = scalar(3.0, 2.0);
    let anchor = solve_joint(&spec, None).unwrap().point;
    let sub = solve_subproblem(&spec, &anchor).unwrap();
    assert!((sub.point.covs[0][(0, 0)].re - anchor.covs[0][(0, 0)].re).abs() < 1e-4);
    assert!((sub.point.omega[(0, 0)].re - anchor.omega[(0, 0)].re).abs() < 1e-4);
    assert!((sub.surrogate_at_solution - sub.surrogate_at_anchor).abs() < 1e-6);
}

#[test]
fn recovered_precoder_reproduces_covariances() {
    let spec = fading(3, 2, 3.0, 2.0, 17);
    let res = solve_joint(&spec, None).unwrap();
    for (a, r) in res.precoder.blocks().iter().zip(&res.point.covs) {
        assert!(linalg::rel_frobenius_error(&(a * a.adjoint()), r) < 1e-8);
    }
}

#[test]
fn trace_is_monotone_and_iterates_feasible() {
    let spec = fading(3, 2, 10f64.powf(0.5), 2.0, 1);
    let res = solve_joint(&spec, Some(&optimizer::default_start(&spec))).unwrap();
    for w in res.trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-7);
    }
    assert!(res.feasibility.is_feasible(1e-6));
}

#[test]
fn iteration_cap_is_reported() {
    let spec = fading(3, 2, 10f64.powf(0.5), 2.0, 1).with_options(SolverOptions {
        max_iterations: 2,
        ..SolverOptions::default()
    });
    let res = solve_joint(&spec, Some(&optimizer::default_start(&spec))).unwrap();
    assert_eq!(res.status, SolveStatus::IterationCap);
    assert_eq!(res.iterations, 2);
}

#[test]
fn phi_is_a_tangent_upper_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let rand_pd = |rng: &mut ChaCha8Rng| {
            let m = CMat::from_fn(3, 3, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            &m * m.adjoint() + CMat::identity(3, 3) * C64::new(0.1, 0.0)
        };
        let (x, y) = (rand_pd(&mut rng), rand_pd(&mut rng));
        let ld = linalg::ln_det_pd(&x).unwrap() / std::f64::consts::LN_2;
        assert!(phi(&x, &y).unwrap() >= ld - 1e-9);
    }
}

fn miso_spec(h: f64, uncertainty: f64, gamma: f64) -> (NetworkConfig, SinrSpec) {
    let cfg = NetworkConfig::uniform(1, 1, 1, 1, 100.0, 40.0).unwrap();
    let sinr = SinrSpec::new(
        &cfg,
        vec![from_real(1, 1, &[h])],
        vec![from_real(1, 1, &[uncertainty])],
        vec![gamma],
    )
    .unwrap();
    (cfg, sinr)
}

#[test]
fn sinr_scalar_power_matches_closed_form() {
    let (cfg, sinr) = miso_spec(2.0, 1e8, 1.0);
    let res = solve_robust_sinr(&sinr, &cfg, &SolverOptions::default()).unwrap();
    assert!((res.power - 0.25).abs() < 1e-3);
    assert!(res.point.omega[(0, 0)].re < 1e-3);
}

#[test]
fn sinr_vanishing_target_needs_little_power() {
    let (cfg, sinr) = miso_spec(1.0, 1e8, 1e-6);
    let res = solve_robust_sinr(&sinr, &cfg, &SolverOptions::default()).unwrap();
    assert!(res.power < 1e-4);
}

#[test]
fn sinr_power_grows_with_uncertainty() {
    let mut last = 0.0;
    for c in [1e6, 100.0, 25.0, 10.0, 4.0] {
        let (cfg, sinr) = miso_spec(1.0, c, 1.0);
        let res = solve_robust_sinr(&sinr, &cfg, &SolverOptions::default()).unwrap();
        assert!(res.power >= last - 1e-6, "C={c}: {} < {last}", res.power);
        last = res.power;
    }
}

#[test]
fn lmi_degenerates_to_nominal_sinr() {
    let (_, sinr) = miso_spec(1.0, 1e12, 1.0);
    let ok = build_sinr_lmi(0, &[from_real(1, 1, &[2.0])], &from_real(1, 1, &[0.5]), &sinr, 1e-6).unwrap();
    assert!(linalg::min_eigenvalue(&ok) >= 0.0);
    let bad = build_sinr_lmi(0, &[from_real(1, 1, &[0.5])], &from_real(1, 1, &[0.0]), &sinr, 1e-6).unwrap();
    assert!(linalg::min_eigenvalue(&bad) < 0.0);
}

#[test]
fn lmi_without_nominal_margin_has_no_certificate() {
    let (_, sinr) = miso_spec(1.0, 4.0, 1.0);
    let covs = [from_real(1, 1, &[0.9])];
    let omega = from_real(1, 1, &[0.0]);
    for beta in [0.0, 1e-3, 0.1, 1.0, 10.0, 1e3] {
        let m = build_sinr_lmi(0, &covs, &omega, &sinr, beta).unwrap();
        assert!(linalg::min_eigenvalue(&m) < 0.0, "beta {beta}");
    }
}

#[test]
fn dispatch_follows_mode() {
    let spec = scalar(3.0, 2.0).with_mode(Mode::FullCooperation);
    let res = optimizer::solve(&spec).unwrap();
    assert!((res.weighted_sum_rate() - 2.0).abs() < 1e-3);
}
