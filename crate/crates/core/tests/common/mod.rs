//! Random instances shared by the property and acceptance suites.

#![allow(dead_code)]

use cran_core::linalg::{self, CMat, C64};
use cran_core::model::{complex_gaussian, ChannelSet, NetworkConfig};
use cran_core::optimizer::Point;
use cran_core::rates::{self, Precoder, QuantCov};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub cfg: NetworkConfig,
    pub chans: ChannelSet,
    pub prec: Precoder,
    pub q: QuantCov,
}

impl Instance {
    pub fn point(&self) -> Point {
        Point::from_design(&self.prec, &self.q)
    }

    /// `g_S`, with `g_{} = 0`.
    pub fn g(&self, s: &[usize]) -> f64 {
        if s.is_empty() {
            return 0.0;
        }
        rates::backhaul_subset_rate(&self.cfg, s, &self.prec, &self.q).unwrap()
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| complex_gaussian(rng))
}

pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> CMat {
    let m = gaussian(rng, n, n);
    linalg::hermitian_part(&(&m * m.adjoint() + CMat::identity(n, n) * C64::new(floor, 0.0)))
}

/// Single-antenna MSs, Gaussian precoders and channels, and a correlated
/// positive definite `Omega`.
pub fn instance(seed: u64, n_bs: usize, n_ms: usize, bs_ant: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = NetworkConfig::uniform(n_bs, n_ms, bs_ant, 1, 10.0, 2.0).unwrap();
    let nb = cfg.total_bs_antennas();
    let chans = ChannelSet::new(&cfg, (0..n_ms).map(|_| gaussian(&mut rng, 1, nb)).collect()).unwrap();
    let prec = Precoder::new(&cfg, (0..n_ms).map(|_| gaussian(&mut rng, nb, 1)).collect()).unwrap();
    let q = QuantCov::new(&cfg, random_pd(&mut rng, nb, 0.05)).unwrap();
    Instance { cfg, chans, prec, q }
}

/// Instance `i` of a deterministic family cycling through 1 to 4 BSs, 1 to
/// 3 MSs and 1 or 2 BS antennas.
pub fn family(i: u64) -> Instance {
    let n_bs = 1 + (i % 4) as usize;
    let n_ms = 1 + (i / 4 % 3) as usize;
    let ant = 1 + (i / 12 % 2) as usize;
    instance(0x5eed_0000 + i, n_bs, n_ms, ant)
}

pub fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

pub fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.contains(x)).collect()
}
