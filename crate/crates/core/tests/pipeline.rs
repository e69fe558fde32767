use cran_core::linalg::{self, from_real};
use cran_core::model::{fading_channels, NetworkConfig};
use cran_core::optimizer::{solve_joint, Compression, Mode, ProblemSpec, CORNER_TOL};
use cran_core::rates::{self, Precoder, QuantCov};
use cran_core::sim::{plan_successive, simulate, verify_plan_against_region, OrderingSource, SimStats};

fn two_bs(omega: &[f64]) -> (NetworkConfig, Precoder, QuantCov) {
    let cfg = NetworkConfig::uniform(2, 1, 1, 1, 10.0, 5.0).unwrap();
    let prec = Precoder::from_covariances(&cfg, &[from_real(2, 2, &[1.0, 0.5, 0.5, 1.0])]).unwrap();
    let q = QuantCov::new(&cfg, from_real(2, 2, omega)).unwrap();
    (cfg, prec, q)
}

fn within_se(stats: &SimStats, k: f64) -> bool {
    stats.orthogonality.iter().zip(&stats.orthogonality_se).all(|(m, se)| {
        m.iter().zip(se.iter()).all(|(v, s)| v.re.abs() <= k * s && v.im.abs() <= k * s)
    })
}

#[test]
fn simulated_noise_reproduces_omega() {
    let (cfg, prec, q) = two_bs(&[0.5, 0.2, 0.2, 0.5]);
    let plan = plan_successive(&cfg, &prec, &q, &[0, 1]).unwrap();
    let stats = simulate(&cfg, &plan, &prec, 100_000, 42).unwrap();
    assert_eq!(stats.samples, 100_000);
    assert!(linalg::rel_frobenius_error(&stats.q_cov, q.matrix()) <= 0.05);
    assert!(within_se(&stats, 3.0));
    let expected = rates::bs_powers_cov(&cfg, &prec.total_covariance(), q.matrix());
    for (got, want) in stats.bs_power.iter().zip(&expected) {
        assert!((got - want).abs() <= 0.03 * want);
    }
}

#[test]
fn block_diagonal_noise_is_uncorrelated() {
    let (cfg, prec, q) = two_bs(&[0.5, 0.0, 0.0, 0.7]);
    let plan = plan_successive(&cfg, &prec, &q, &[1, 0]).unwrap();
    let stats = simulate(&cfg, &plan, &prec, 100_000, 7).unwrap();
    let v = stats.q_cov[(0, 1)];
    let se = stats.q_cov_se[(0, 1)];
    assert!(v.re.abs() <= 3.0 * se && v.im.abs() <= 3.0 * se);
}

#[test]
fn diagonal_omega_at_capacity_fits_exactly() {
    let (cfg, prec, q) = two_bs(&[0.5, 0.0, 0.0, 0.5]);
    let caps: Vec<f64> = (0..2)
        .map(|i| rates::independent_backhaul_rate(&cfg, i, &prec, &q).unwrap())
        .collect();
    let cfg = cfg.with_backhaul(caps).unwrap();
    let plan = plan_successive(&cfg, &prec, &q, &[0, 1]).unwrap();
    let report = verify_plan_against_region(&cfg, &plan, &prec, &q, 1e-9).unwrap();
    assert_eq!(report.source, OrderingSource::Corner);
    assert_eq!(report.detected, Some(vec![0, 1]));
    assert!(report.fits);
    assert!(report.max_excess.abs() < 1e-9);
}

#[test]
fn interior_design_falls_back_to_best_fit() {
    let (cfg, prec, q) = two_bs(&[0.5, 0.2, 0.2, 0.5]);
    let cfg = cfg.with_backhaul(vec![1.6, 3.0]).unwrap();
    let plan = plan_successive(&cfg, &prec, &q, &[1, 0]).unwrap();
    let report = verify_plan_against_region(&cfg, &plan, &prec, &q, 1e-6).unwrap();
    assert_eq!(report.detected, None);
    assert_eq!(report.source, OrderingSource::BestFit);
    assert_eq!(report.recommended.order, vec![0, 1]);
    assert!(report.recommended.steps.iter().all(|s| s.rate <= cfg.backhaul()[s.bs]));
}

#[test]
fn converged_design_runs_through_the_pipeline() {
    let cfg = NetworkConfig::uniform(3, 3, 2, 1, 10f64.powf(0.5), 2.0).unwrap();
    let chans = fading_channels(&cfg, 1.0, 3).unwrap();
    let spec = ProblemSpec::new(cfg.clone(), chans, Mode::Joint(Compression::Multivariate)).unwrap();
    let res = solve_joint(&spec, None).unwrap();
    let order = res.ordering.clone().expect("tight nested constraints");
    let plan = plan_successive(&cfg, &res.precoder, &res.quantcov, &order).unwrap();
    let report = verify_plan_against_region(&cfg, &plan, &res.precoder, &res.quantcov, CORNER_TOL).unwrap();
    assert!(report.fits);
    for &(_, rate, cap) in &report.steps {
        assert!(rate <= cap + CORNER_TOL);
    }
    let stats = simulate(&cfg, &plan, &res.precoder, 20_000, 5).unwrap();
    assert!(within_se(&stats, 4.0));
}

#[test]
fn converged_designs_sit_on_the_backhaul_boundary() {
    let cfg = NetworkConfig::uniform(3, 3, 2, 1, 10f64.powf(0.5), 2.0).unwrap();
    let mut corners = 0;
    for seed in 0..6 {
        let chans = fading_channels(&cfg, 1.0, seed).unwrap();
        let spec = ProblemSpec::new(cfg.clone(), chans, Mode::Joint(Compression::Multivariate)).unwrap();
        let res = solve_joint(&spec, None).unwrap();
        let tightest = res.feasibility.backhaul.iter().map(|u| u.slack()).fold(f64::INFINITY, f64::min);
        assert!(tightest.abs() < CORNER_TOL, "seed {seed}: slack {tightest}");
        if let Some(order) = &res.ordering {
            corners += 1;
            let plan = plan_successive(&cfg, &res.precoder, &res.quantcov, order).unwrap();
            let report = verify_plan_against_region(&cfg, &plan, &res.precoder, &res.quantcov, CORNER_TOL).unwrap();
            assert!(report.fits);
        } else {
            let plan = plan_successive(&cfg, &res.precoder, &res.quantcov, &[0, 1, 2]).unwrap();
            let report = verify_plan_against_region(&cfg, &plan, &res.precoder, &res.quantcov, CORNER_TOL).unwrap();
            assert_eq!(report.source, OrderingSource::BestFit);
        }
    }
    println!("corner orderings on {corners} of 6 converged designs");
}
