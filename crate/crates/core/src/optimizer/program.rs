//! Log-det barrier solver.
//!
//! Problems have the form
//!
//! ```text
//! minimize    f_0(x)
//! subject to  f_i(x) <= 0
//!             F_j(x) > 0
//! ```
//!
//! over real vectors `x`, where every `f` is an affine function minus a
//! nonnegative combination of `ln det` of Hermitian matrices affine in `x`,
//! and every cone `F_j` is such an affine Hermitian matrix. Those are the
//! only shapes the majorize-minimize surrogates produce.
//!
//! The solver follows the barrier central path with damped Newton steps.
//! Centering can be run at a fixed `t`, which lets the outer MM loop keep
//! a single path across successive surrogates.

use std::rc::Rc;

use nalgebra::{Cholesky, DVector};

use crate::linalg::{CMat, RMat, C64};

/// `F(x) = offset + sum_v x_v F_v`.
#[derive(Debug, Clone)]
pub(crate) struct AffineHerm {
    pub offset: CMat,
    pub terms: Vec<(usize, CMat)>,
}

impl AffineHerm {
    pub fn dim(&self) -> usize {
        self.offset.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        let mut m = self.offset.clone();
        for (v, f) in &self.terms {
            let xv = x[*v];
            if xv != 0.0 {
                m.zip_apply(f, |a, b| *a += b * xv);
            }
        }
        m
    }
}

/// `linear . x + constant - sum_j w_j ln det F_j(x)` with `w_j >= 0`; the
/// `F_j` are indices into the program's matrix pool.
#[derive(Debug, Clone, Default)]
pub(crate) struct ConvexFn {
    pub linear: Vec<(usize, f64)>,
    pub constant: f64,
    pub logdets: Vec<(f64, usize)>,
}

impl ConvexFn {
    pub fn linear_value(&self, x: &[f64]) -> f64 {
        self.constant + self.linear.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LogDetProgram {
    pub n: usize,
    pub pool: Rc<Vec<AffineHerm>>,
    pub objective: ConvexFn,
    pub constraints: Vec<ConvexFn>,
    pub cones: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierOptions {
    /// Target duality-gap bound `m / t`.
    pub gap: f64,
    /// Barrier growth factor between centerings.
    pub mu: f64,
    /// Newton decrement threshold `lambda^2 / 2` for centering.
    pub center_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            gap: 1e-9,
            mu: 10.0,
            center_tol: 1e-8,
            max_newton: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CenterOutcome {
    pub x: Vec<f64>,
    /// Stationarity residual `|grad Phi_t|_inf / t`.
    pub stationarity: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOutcome {
    pub x: Vec<f64>,
    pub gap: f64,
    pub kkt_residual: f64,
}

/// Cholesky-based per-matrix data at a point.
struct PoolEval {
    ln_det: f64,
    grad: Vec<f64>,
    hess: Option<RMat>,
}

/// Nonzero entries of every term, when each has at most four.
fn sparse_terms(a: &AffineHerm) -> Option<Vec<Vec<(usize, usize, C64)>>> {
    a.terms
        .iter()
        .map(|(_, f)| {
            let mut nz = Vec::new();
            for j in 0..f.ncols() {
                for i in 0..f.nrows() {
                    let z = f[(i, j)];
                    if z.re != 0.0 || z.im != 0.0 {
                        if nz.len() == 4 {
                            return None;
                        }
                        nz.push((i, j, z));
                    }
                }
            }
            Some(nz)
        })
        .collect()
}

fn eval_pool_entry(a: &AffineHerm, x: &[f64], want_hess: bool) -> Option<PoolEval> {
    let f = a.eval(x);
    let d = f.nrows();
    let l = crate::linalg::cholesky_lower(&f)?;
    let ln_det = 2.0 * (0..d).map(|i| l[(i, i)].re.ln()).sum::<f64>();
    let p = a.terms.len();
    let (grad, hess) = if d == 1 {
        let w2 = 1.0 / f[(0, 0)].re;
        let grad: Vec<f64> = a.terms.iter().map(|(_, fv)| w2 * fv[(0, 0)].re).collect();
        (grad, None)
    } else if let Some(sparse) = sparse_terms(a) {
        // Basis-like F_v: read the traces off V = F^{-1} entry by entry.
        let w = l.solve_lower_triangular(&CMat::identity(d, d))?;
        let v = w.adjoint() * &w;
        let grad = sparse
            .iter()
            .map(|nz| nz.iter().map(|&(i, j, c)| (v[(j, i)] * c).re).sum())
            .collect();
        let hess = want_hess.then(|| {
            let mut h = RMat::zeros(p, p);
            for (cu, nu) in sparse.iter().enumerate() {
                for (cv, nv) in sparse.iter().enumerate().skip(cu) {
                    let mut acc = 0.0;
                    for &(i, j, a) in nu {
                        for &(k, l, b) in nv {
                            acc += (v[(j, k)] * b * v[(l, i)] * a).re;
                        }
                    }
                    h[(cu, cv)] = acc;
                    h[(cv, cu)] = acc;
                }
            }
            h
        });
        (grad, hess)
    } else {
        // G_v = W F_v W^H with W = L^{-1}; the Hessian is the Gram matrix of
        // the flattened G_v.
        let w = l.solve_lower_triangular(&CMat::identity(d, d))?;
        let wa = w.adjoint();
        let (zero, one) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        let mut tmp = CMat::zeros(d, d);
        let mut g = CMat::zeros(d, d);
        let mut grad = Vec::with_capacity(p);
        let mut flat = RMat::zeros(if want_hess { 2 * d * d } else { 0 }, p);
        for (col, (_, fv)) in a.terms.iter().enumerate() {
            tmp.gemm(one, &w, fv, zero);
            g.gemm(one, &tmp, &wa, zero);
            grad.push((0..d).map(|i| g[(i, i)].re).sum());
            if want_hess {
                for (r, z) in g.iter().enumerate() {
                    flat[(2 * r, col)] = z.re;
                    flat[(2 * r + 1, col)] = z.im;
                }
            }
        }
        (grad, want_hess.then(|| flat.transpose() * &flat))
    };
    Some(PoolEval { ln_det, grad, hess })
}

impl LogDetProgram {
    /// Barrier parameter: one per scalar constraint plus the cone dimensions.
    pub fn barrier_weight(&self) -> f64 {
        self.constraints.len() as f64 + self.cones.iter().map(|&j| self.pool[j].dim() as f64).sum::<f64>()
    }

    fn pool_values(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.pool
            .iter()
            .map(|a| {
                let f = a.eval(x);
                crate::linalg::ln_det_pd(&f)
            })
            .collect()
    }

    fn fn_value(f: &ConvexFn, x: &[f64], lds: &[f64]) -> f64 {
        f.linear_value(x) - f.logdets.iter().map(|&(w, j)| w * lds[j]).sum::<f64>()
    }

    /// `f_0(x)`, or `None` outside the domain of its log-determinants.
    pub fn objective_value(&self, x: &[f64]) -> Option<f64> {
        let lds = self.pool_values(x)?;
        Some(Self::fn_value(&self.objective, x, &lds))
    }

    /// Whether `x` is strictly inside every constraint and cone.
    pub fn strictly_feasible(&self, x: &[f64]) -> bool {
        match self.pool_values(x) {
            Some(lds) => self.constraints.iter().all(|c| Self::fn_value(c, x, &lds) < 0.0),
            None => false,
        }
    }

    fn barrier_value(&self, x: &[f64], t: f64) -> Option<f64> {
        let lds = self.pool_values(x)?;
        let mut v = t * Self::fn_value(&self.objective, x, &lds);
        for c in &self.constraints {
            let fi = Self::fn_value(c, x, &lds);
            if !(fi < 0.0) {
                return None;
            }
            v -= (-fi).ln();
        }
        for &j in &self.cones {
            v -= lds[j];
        }
        v.is_finite().then_some(v)
    }

    /// Value and gradient of `f` from the pool evaluations.
    fn fn_grad(&self, f: &ConvexFn, evals: &[PoolEval], x: &[f64]) -> (f64, DVector<f64>) {
        let mut grad = DVector::zeros(self.n);
        let mut value = f.linear_value(x);
        for &(v, c) in &f.linear {
            grad[v] += c;
        }
        for &(w, j) in &f.logdets {
            let e = &evals[j];
            value -= w * e.ln_det;
            for (a, (va, _)) in self.pool[j].terms.iter().enumerate() {
                grad[*va] -= w * e.grad[a];
            }
        }
        (value, grad)
    }

    /// Adds `scale` times the Hessian of `-ln det F_j` to `hess`.
    fn add_logdet_hess(&self, hess: &mut RMat, evals: &[PoolEval], j: usize, scale: f64) {
        let terms = &self.pool[j].terms;
        let e = &evals[j];
        if self.pool[j].dim() == 1 {
            // rank one: g g^T
            let mut g = DVector::zeros(self.n);
            for (a, (va, _)) in terms.iter().enumerate() {
                g[*va] += e.grad[a];
            }
            hess.ger(scale, &g, &g, 1.0);
            return;
        }
        let h = e.hess.as_ref().expect("hessian requested");
        for (b, (vb, _)) in terms.iter().enumerate() {
            let src = h.column(b);
            let mut dst = hess.column_mut(*vb);
            for (a, (va, _)) in terms.iter().enumerate() {
                dst[*va] += scale * src[a];
            }
        }
    }

    /// Value, gradient and Hessian of `t f_0 - sum ln(-f_i) - sum ln det F_j`.
    fn barrier_derivs(&self, x: &[f64], t: f64) -> Option<(f64, DVector<f64>, RMat)> {
        let evals: Vec<PoolEval> = self
            .pool
            .iter()
            .map(|a| eval_pool_entry(a, x, true))
            .collect::<Option<_>>()?;
        let n = self.n;
        let mut hess = RMat::zeros(n, n);
        let (v0, g0) = self.fn_grad(&self.objective, &evals, x);
        let mut value = t * v0;
        let mut grad = g0 * t;
        for &(w, j) in &self.objective.logdets {
            self.add_logdet_hess(&mut hess, &evals, j, t * w);
        }
        for c in &self.constraints {
            let (v, g) = self.fn_grad(c, &evals, x);
            if !(v < 0.0) {
                return None;
            }
            let s = -v;
            value -= s.ln();
            grad.axpy(1.0 / s, &g, 1.0);
            for &(w, j) in &c.logdets {
                self.add_logdet_hess(&mut hess, &evals, j, w / s);
            }
            hess.ger(1.0 / (s * s), &g, &g, 1.0);
        }
        for &j in &self.cones {
            let e = &evals[j];
            value -= e.ln_det;
            for (a, (va, _)) in self.pool[j].terms.iter().enumerate() {
                grad[*va] -= e.grad[a];
            }
            self.add_logdet_hess(&mut hess, &evals, j, 1.0);
        }
        Some((value, grad, hess))
    }

    /// Damped Newton centering of the barrier at fixed `t`, starting from a
    /// strictly feasible `x`.
    pub fn center(&self, x0: &[f64], t: f64, opts: &BarrierOptions) -> CenterOutcome {
        let mut x = x0.to_vec();
        let mut steps = 0;
        let mut stationarity = f64::INFINITY;
        while steps < opts.max_newton {
            let Some((value, grad, hess)) = self.barrier_derivs(&x, t) else {
                break;
            };
            stationarity = grad.amax() / t;
            let dx = newton_direction(&hess, &grad);
            let lambda2 = -grad.dot(&dx);
            if !(lambda2 > 2.0 * opts.center_tol) {
                break;
            }
            steps += 1;
            let slope = grad.dot(&dx);
            let mut s = 1.0;
            let mut accepted = false;
            let quadratic = lambda2.sqrt() < 0.2;
            while s > 1e-16 {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + s * b).collect();
                if let Some(v) = self.barrier_value(&trial, t) {
                    if quadratic || v <= value + 0.25 * s * slope {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        CenterOutcome {
            x,
            stationarity,
        }
    }

    /// Full barrier solve from `t0` until `m / t <= opts.gap`.
    pub fn solve(&self, x0: &[f64], t0: f64, opts: &BarrierOptions) -> BarrierOutcome {
        let m = self.barrier_weight().max(1.0);
        let t_final = m / opts.gap;
        let mut t = t0.min(t_final);
        let mut x = x0.to_vec();
        loop {
            let out = if t >= t_final {
                let tight = BarrierOptions {
                    center_tol: opts.center_tol.min(1e-14),
                    max_newton: opts.max_newton.max(200),
                    ..*opts
                };
                self.center(&x, t, &tight)
            } else {
                self.center(&x, t, opts)
            };
            x = out.x;
            if t >= t_final {
                let grad_scale = 1.0 + self.objective.linear.iter().map(|l| l.1.abs()).fold(0.0, f64::max);
                return BarrierOutcome {
                    x,
                    gap: m / t,
                    kkt_residual: (m / t).max(out.stationarity / grad_scale),
                };
            }
            t = (t * opts.mu).min(t_final);
        }
    }
}

/// Solves `H dx = -g` with Jacobi scaling and a ridge fallback.
fn newton_direction(hess: &RMat, grad: &DVector<f64>) -> DVector<f64> {
    let n = grad.len();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = hess[(i, i)];
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut hs = RMat::from_fn(n, n, |i, j| hess[(i, j)] * scale[i] * scale[j]);
    let gs = DVector::from_fn(n, |i, _| -grad[i] * scale[i]);
    let mut ridge = 0.0;
    loop {
        if let Some(ch) = Cholesky::new(hs.clone()) {
            let y = ch.solve(&gs);
            if y.iter().all(|v| v.is_finite()) {
                return DVector::from_fn(n, |i, _| y[i] * scale[i]);
            }
        }
        let next = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
        for i in 0..n {
            hs[(i, i)] += next - ridge;
        }
        ridge = next;
        if ridge > 1e6 {
            return DVector::from_fn(n, |i, _| gs[i] * scale[i] * scale[i]);
        }
    }
}
