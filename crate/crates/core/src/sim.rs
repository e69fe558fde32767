//! Successive estimation and per-BS compression.
//!
//! For a BS order `pi`, BS `pi(i)`'s compressed signal is produced by
//! estimating `x_pi(i)` from everything already fixed (the earlier BSs'
//! compressed and noiseless signals and its own noiseless signal) and
//! adding independent Gaussian noise with the conditional covariance. The
//! resulting quantization noise has exactly the joint covariance `Omega`,
//! and step `i` costs the corner-point rate of BS `pi(i)`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, C64, LOGDET_FLOOR};
use crate::model::{complex_gaussian, NetworkConfig};
use crate::optimizer::permutations;
use crate::rates::{self, validate_permutation, Precoder, QuantCov};

/// Samples per independently seeded chunk.
pub const CHUNK: usize = 4096;

/// Largest `N_B` for the exhaustive best-fit order search.
pub const MAX_BEST_FIT_BS: usize = 8;

#[derive(Debug, Clone)]
pub struct PlanStep {
    pub bs: usize,
    /// BSs compressed earlier, in order.
    pub prefix: Vec<usize>,
    /// Stacked antenna rows of the prefix.
    pub prefix_rows: Vec<usize>,
    /// MMSE gain applied to `u = [x_S; x~_S; x~_i]`.
    pub gain: CMat,
    /// Conditional covariance of `x_i` given `u`.
    pub conditional: CMat,
    /// `F` with `F F^H = conditional`.
    pub noise_factor: CMat,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct SuccessivePlan {
    pub order: Vec<usize>,
    pub steps: Vec<PlanStep>,
}

impl SuccessivePlan {
    pub fn rates(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.rate).collect()
    }

    pub fn total_rate(&self) -> f64 {
        self.steps.iter().map(|s| s.rate).sum()
    }
}

/// Builds the estimator gains, conditional covariances and step rates.
pub fn plan_successive(cfg: &NetworkConfig, prec: &Precoder, q: &QuantCov, order: &[usize]) -> Result<SuccessivePlan> {
    validate_permutation(order, cfg.n_bs())?;
    let qs = prec.total_covariance();
    let om = q.matrix();
    let mut steps = Vec::with_capacity(order.len());
    for (step, &i) in order.iter().enumerate() {
        let prefix = order[..step].to_vec();
        let s_rows: Vec<usize> = prefix.iter().flat_map(|&j| cfg.bs_rows(j)).collect();
        let i_rows: Vec<usize> = cfg.bs_rows(i).collect();
        let sub = |m: &CMat, a: &[usize], b: &[usize]| linalg::submatrix(m, a, b);
        let q_ss = sub(&qs, &s_rows, &s_rows);
        let q_si = sub(&qs, &s_rows, &i_rows);
        let q_ii = sub(&qs, &i_rows, &i_rows);
        let o_ss = sub(om, &s_rows, &s_rows);
        let o_is = sub(om, &i_rows, &s_rows);
        let o_ii = sub(om, &i_rows, &i_rows);
        let (ns, ni) = (s_rows.len(), i_rows.len());
        let nu = 2 * ns + ni;

        let mut sigma_u = CMat::zeros(nu, nu);
        sigma_u.view_mut((0, 0), (ns, ns)).copy_from(&(&q_ss + &o_ss));
        sigma_u.view_mut((0, ns), (ns, ns)).copy_from(&q_ss);
        sigma_u.view_mut((ns, 0), (ns, ns)).copy_from(&q_ss);
        sigma_u.view_mut((ns, ns), (ns, ns)).copy_from(&q_ss);
        for (r0, c0) in [(0, 2 * ns), (ns, 2 * ns)] {
            sigma_u.view_mut((r0, c0), (ns, ni)).copy_from(&q_si);
            sigma_u.view_mut((c0, r0), (ni, ns)).copy_from(&q_si.adjoint());
        }
        sigma_u.view_mut((2 * ns, 2 * ns), (ni, ni)).copy_from(&q_ii);

        let mut sigma_xu = CMat::zeros(ni, nu);
        sigma_xu.view_mut((0, 0), (ni, ns)).copy_from(&(q_si.adjoint() + &o_is));
        sigma_xu.view_mut((0, ns), (ni, ns)).copy_from(&q_si.adjoint());
        sigma_xu.view_mut((0, 2 * ns), (ni, ni)).copy_from(&q_ii);

        let gain = &sigma_xu * linalg::pinv_psd(&sigma_u, 1e-12);

        let conditional = if ns == 0 {
            linalg::hermitian_part(&o_ii)
        } else {
            let min = linalg::min_eigenvalue(&o_ss);
            if min < LOGDET_FLOOR {
                return Err(Error::SingularBlock {
                    subset: prefix.clone(),
                    min_eig: min,
                });
            }
            linalg::hermitian_part(&(&o_ii - &o_is * linalg::inv_pd(&o_ss)? * o_is.adjoint()))
        };
        let sigma_x = &q_ii + &o_ii;
        let tol = 1e-8 * (1.0 + linalg::max_abs(&sigma_x));
        let singular = |m: f64| Error::SingularBlock {
            subset: order[..=step].to_vec(),
            min_eig: m,
        };
        let (a, _) = linalg::log2_det_guarded(&sigma_x, tol).map_err(singular)?;
        let (b, _) = linalg::log2_det_guarded(&conditional, tol).map_err(singular)?;
        steps.push(PlanStep {
            bs: i,
            prefix,
            prefix_rows: s_rows,
            noise_factor: linalg::psd_sqrt(&conditional),
            gain,
            conditional,
            rate: a - b,
        });
    }
    Ok(SuccessivePlan {
        order: order.to_vec(),
        steps,
    })
}

/// Empirical statistics of the simulated pipeline.
#[derive(Debug, Clone)]
pub struct SimStats {
    pub samples: usize,
    /// Covariance of `q = x - A s`.
    pub q_cov: CMat,
    /// Standard error of each entry of `q_cov`.
    pub q_cov_se: RMat,
    /// Cross-covariance `E[q s^H]`.
    pub q_s_cross: CMat,
    pub q_s_cross_se: RMat,
    /// Mean power `E |x_i|^2` per BS.
    pub bs_power: Vec<f64>,
    /// Per step, `E[q^_i u_i^H]` and its standard errors.
    pub orthogonality: Vec<CMat>,
    pub orthogonality_se: Vec<RMat>,
}

/// First and second moments of a complex cross product `a b^H`.
#[derive(Clone)]
struct CrossAcc {
    sum: CMat,
    sq: RMat,
}

impl CrossAcc {
    fn new(r: usize, c: usize) -> Self {
        Self {
            sum: CMat::zeros(r, c),
            sq: RMat::zeros(r, c),
        }
    }

    fn add(&mut self, a: &[C64], b: &[C64]) {
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                let z = ai * bj.conj();
                self.sum[(i, j)] += z;
                self.sq[(i, j)] += z.norm_sqr();
            }
        }
    }

    fn merge(&mut self, o: &CrossAcc) {
        self.sum += &o.sum;
        self.sq += &o.sq;
    }

    fn finish(&self, n: usize) -> (CMat, RMat) {
        let nf = n as f64;
        let mean = &self.sum / C64::new(nf, 0.0);
        let se = RMat::from_fn(self.sq.nrows(), self.sq.ncols(), |i, j| {
            let var = (self.sq[(i, j)] / nf - mean[(i, j)].norm_sqr()).max(0.0);
            (var / nf).sqrt()
        });
        (mean, se)
    }
}

#[derive(Clone)]
struct Acc {
    n: usize,
    qq: CrossAcc,
    qs: CrossAcc,
    power: Vec<f64>,
    orth: Vec<CrossAcc>,
}

/// Runs the pipeline on `n_samples` draws of `s ~ CN(0, I)`. Samples are
/// split into chunks of [`CHUNK`], each with its own ChaCha20 stream of
/// `seed`, and the partial sums are merged in chunk order.
pub fn simulate(cfg: &NetworkConfig, plan: &SuccessivePlan, prec: &Precoder, n_samples: usize, seed: u64) -> Result<SimStats> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("at least one sample is required".into()));
    }
    let a = prec.stacked();
    let nb = cfg.total_bs_antennas();
    let ns = a.ncols();
    let n_chunks = n_samples.div_ceil(CHUNK);
    let empty = Acc {
        n: 0,
        qq: CrossAcc::new(nb, nb),
        qs: CrossAcc::new(nb, ns),
        power: vec![0.0; cfg.n_bs()],
        orth: plan
            .steps
            .iter()
            .map(|s| CrossAcc::new(s.gain.nrows(), s.gain.ncols()))
            .collect(),
    };
    let parts: Vec<Acc> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut acc = empty.clone();
            let mut s = vec![C64::new(0.0, 0.0); ns];
            let mut x = vec![C64::new(0.0, 0.0); nb];
            for _ in 0..count {
                for v in s.iter_mut() {
                    *v = complex_gaussian(&mut rng);
                }
                let xt: Vec<C64> = (0..nb).map(|r| (0..ns).map(|j| a[(r, j)] * s[j]).sum()).collect();
                for (step, st) in plan.steps.iter().enumerate() {
                    let i_rows: Vec<usize> = cfg.bs_rows(st.bs).collect();
                    let u: Vec<C64> = st
                        .prefix_rows
                        .iter()
                        .map(|&r| x[r])
                        .chain(st.prefix_rows.iter().map(|&r| xt[r]))
                        .chain(i_rows.iter().map(|&r| xt[r]))
                        .collect();
                    let z: Vec<C64> = (0..i_rows.len()).map(|_| complex_gaussian(&mut rng)).collect();
                    let qhat: Vec<C64> = (0..i_rows.len())
                        .map(|r| (0..z.len()).map(|j| st.noise_factor[(r, j)] * z[j]).sum())
                        .collect();
                    for (r, &row) in i_rows.iter().enumerate() {
                        let est: C64 = (0..u.len()).map(|j| st.gain[(r, j)] * u[j]).sum();
                        x[row] = est + qhat[r];
                    }
                    acc.orth[step].add(&qhat, &u);
                }
                let q: Vec<C64> = x.iter().zip(&xt).map(|(a, b)| a - b).collect();
                acc.qq.add(&q, &q);
                acc.qs.add(&q, &s);
                for i in 0..cfg.n_bs() {
                    acc.power[i] += cfg.bs_rows(i).map(|r| x[r].norm_sqr()).sum::<f64>();
                }
                acc.n += 1;
            }
            acc
        })
        .collect();
    let mut total = empty;
    for p in &parts {
        total.n += p.n;
        total.qq.merge(&p.qq);
        total.qs.merge(&p.qs);
        for (a, b) in total.power.iter_mut().zip(&p.power) {
            *a += b;
        }
        for (a, b) in total.orth.iter_mut().zip(&p.orth) {
            a.merge(b);
        }
    }
    let n = total.n;
    let (q_cov, q_cov_se) = total.qq.finish(n);
    let (q_s_cross, q_s_cross_se) = total.qs.finish(n);
    let (orthogonality, orthogonality_se) = total.orth.iter().map(|o| o.finish(n)).unzip();
    Ok(SimStats {
        samples: n,
        q_cov: linalg::hermitian_part(&q_cov),
        q_cov_se,
        q_s_cross,
        q_s_cross_se,
        bs_power: total.power.iter().map(|p| p / n as f64).collect(),
        orthogonality,
        orthogonality_se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderingSource {
    /// The nested-subset backhaul constraints are tight for this order.
    Corner,
    /// No tight order exists; the order minimizes the largest per-step
    /// excess over capacity.
    BestFit,
}

#[derive(Debug, Clone)]
pub struct RegionReport {
    /// Order detected from tight nested constraints, if any.
    pub detected: Option<Vec<usize>>,
    /// Per-step `(bs, rate, capacity)` for the submitted plan.
    pub steps: Vec<(usize, f64, f64)>,
    /// `max_i (rate_i - C_pi(i))` for the submitted plan.
    pub max_excess: f64,
    pub fits: bool,
    pub source: OrderingSource,
    /// Plan for the recommended order (the detected one, or the best fit).
    pub recommended: SuccessivePlan,
}

fn max_excess(cfg: &NetworkConfig, plan: &SuccessivePlan) -> f64 {
    plan.steps
        .iter()
        .map(|s| s.rate - cfg.backhaul()[s.bs])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Checks that the plan's per-step rates fit the backhaul capacities and
/// recommends an order: the corner ordering when one is detected, the
/// best-fit order otherwise.
pub fn verify_plan_against_region(
    cfg: &NetworkConfig,
    plan: &SuccessivePlan,
    prec: &Precoder,
    q: &QuantCov,
    tol: f64,
) -> Result<RegionReport> {
    let detected = rates::detect_corner_ordering(cfg, prec, q, tol)?;
    let steps = plan
        .steps
        .iter()
        .map(|s| (s.bs, s.rate, cfg.backhaul()[s.bs]))
        .collect();
    let excess = max_excess(cfg, plan);
    let (source, recommended) = match &detected {
        Some(order) if *order == plan.order => (OrderingSource::Corner, plan.clone()),
        Some(order) => (OrderingSource::Corner, plan_successive(cfg, prec, q, order)?),
        None => {
            if cfg.n_bs() > MAX_BEST_FIT_BS {
                return Err(Error::CapExceeded {
                    what: "base stations for the best-fit order search",
                    cap: MAX_BEST_FIT_BS,
                    got: cfg.n_bs(),
                });
            }
            let mut best: Option<(f64, SuccessivePlan)> = None;
            for order in permutations(cfg.n_bs()) {
                let p = plan_successive(cfg, prec, q, &order)?;
                let e = max_excess(cfg, &p);
                if best.as_ref().is_none_or(|(b, _)| e < *b) {
                    best = Some((e, p));
                }
            }
            (OrderingSource::BestFit, best.expect("at least one order").1)
        }
    };
    Ok(RegionReport {
        detected,
        steps,
        max_excess: excess,
        fits: excess <= tol,
        source,
        recommended,
    })
}
