//! Discrete s-Laplacian energy `F(v) = (1/s) sum_e |e| |grad_e v|^s - <f, v>` on a
//! uniform grid with homogeneous Dirichlet values, `G = 0`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GradientOperator;
use crate::problem::{CompositeProblem, LocalSolution, Reference, SolverOptions};
use crate::vecspace::{Point, Subspace};

/// Regularization of `|g|` inside the Newton Hessian only (the energy is untouched).
const HESS_EPS: f64 = 1e-10;
/// Gradient magnitude below which the Newton model for `s < 2` uses capped curvature.
const CURVATURE_FLOOR: f64 = 1e-4;

pub struct SLaplacian {
    op: Arc<GradientOperator>,
    s: f64,
    load: Point,
    reference: OnceLock<std::result::Result<Reference, String>>,
}

impl SLaplacian {
    pub fn new(op: Arc<GradientOperator>, s: f64, load: Point) -> Result<Self> {
        if !(s > 1.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponent s must exceed 1, got {s}"
            )));
        }
        if load.len() != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                got: load.len(),
            });
        }
        Ok(Self {
            op,
            s,
            load,
            reference: OnceLock::new(),
        })
    }

    /// `n` interior nodes on (0, 1) with constant source `f`.
    pub fn interval(n: usize, s: f64, f: f64) -> Result<Self> {
        check_grid(n)?;
        let op = Arc::new(GradientOperator::interval(n)?);
        let load = op.load(|_| f);
        Self::new(op, s, load)
    }

    /// `n x n` interior nodes on the unit square with constant source `f`.
    pub fn square(n: usize, s: f64, f: f64) -> Result<Self> {
        check_grid(n)?;
        let op = Arc::new(GradientOperator::square(n)?);
        let load = op.load(|_| f);
        Self::new(op, s, load)
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn operator(&self) -> &Arc<GradientOperator> {
        &self.op
    }

    /// `p = max{s, 2}` and `q = min{s, 2}`.
    pub fn exponents(&self) -> (f64, f64) {
        (self.s.max(2.0), self.s.min(2.0))
    }

    fn element_energy(&self, k: usize, v: &Point) -> f64 {
        let e = &self.op.elements()[k];
        let g = e.gradient(v);
        e.measure * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * self.s) / self.s
    }

    /// Adds `|e| |g|^{s-2} G_e^T g` for element `k`.
    fn add_element_grad(&self, k: usize, v: &Point, out: &mut Point) {
        let e = &self.op.elements()[k];
        let g = e.gradient(v);
        let r2 = g[0] * g[0] + g[1] * g[1];
        if r2 == 0.0 {
            return;
        }
        let c = e.measure * r2.powf(0.5 * (self.s - 2.0));
        for (d, row) in e.rows.iter().enumerate() {
            for &(i, a) in row {
                out[i] += c * a * g[d];
            }
        }
    }

    /// Adds the (regularized) element Hessian restricted to `local` (node -> local index).
    fn add_element_hessian(
        &self,
        k: usize,
        v: &Point,
        local: &[Option<usize>],
        h: &mut DMatrix<f64>,
    ) {
        let e = &self.op.elements()[k];
        let g = e.gradient(v);
        let mut r2 = g[0] * g[0] + g[1] * g[1] + HESS_EPS * HESS_EPS;
        if self.s < 2.0 {
            // Cap the curvature where the gradient vanishes; the model stays positive definite.
            r2 = r2.max(CURVATURE_FLOOR * CURVATURE_FLOOR);
        }
        let a = e.measure * r2.powf(0.5 * (self.s - 2.0));
        let b = e.measure * (self.s - 2.0) * r2.powf(0.5 * (self.s - 4.0));
        let dims = e.rows.len();
        // M = a I + b g g^T on the spatial components.
        let m = |c: usize, d: usize| (if c == d { a } else { 0.0 }) + b * g[c] * g[d];
        for c in 0..dims {
            for d in 0..dims {
                let mcd = m(c, d);
                if mcd == 0.0 {
                    continue;
                }
                for &(i, ai) in &e.rows[c] {
                    let Some(li) = local[i] else { continue };
                    for &(j, aj) in &e.rows[d] {
                        if let Some(lj) = local[j] {
                            h[(li, lj)] += ai * mcd * aj;
                        }
                    }
                }
            }
        }
    }

    /// Damped Newton with Armijo backtracking on `w -> F(v + P w)` for the node set `nodes`.
    fn newton(
        &self,
        nodes: &[usize],
        v: &Point,
        opts: &SolverOptions,
        j: usize,
    ) -> Result<(Point, f64, usize)> {
        let n = self.op.dim();
        let elems = self.op.elements_touching(nodes);
        let mut local = vec![None; n];
        for (k, &i) in nodes.iter().enumerate() {
            local[i] = Some(k);
        }
        let m = nodes.len();
        let mut x = v.clone();
        let partial = |x: &Point| -> f64 {
            elems
                .iter()
                .map(|&k| self.element_energy(k, x))
                .sum::<f64>()
                - nodes.iter().map(|&i| self.load[i] * x[i]).sum::<f64>()
        };
        let grad = |x: &Point| -> Point {
            let mut full = Point::zeros(n);
            for &k in &elems {
                self.add_element_grad(k, x, &mut full);
            }
            Point::from_iterator(m, nodes.iter().map(|&i| full[i] - self.load[i]))
        };
        let mut g = grad(&x);
        let scale = 1.0 + g.norm();
        let mut f = partial(&x);
        let mut f_prev = f;
        let mut stalled = 0;
        for it in 0..opts.max_iter {
            let res = g.norm();
            if res <= opts.tol * scale {
                let w = Point::from_iterator(m, nodes.iter().map(|&i| x[i] - v[i]));
                return Ok((w, res, it));
            }
            let mut h = DMatrix::zeros(m, m);
            for &k in &elems {
                self.add_element_hessian(k, &x, &local, &mut h);
            }
            let mut dir = match h.clone().cholesky() {
                Some(ch) => -ch.solve(&g),
                None => -g.clone(),
            };
            if !(dir.dot(&g) < 0.0) || !dir.iter().all(|d| d.is_finite()) {
                dir = -g.clone();
            }
            let slope = dir.dot(&g);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let mut xt = x.clone();
                for (k, &i) in nodes.iter().enumerate() {
                    xt[i] += t * dir[k];
                }
                let ft = partial(&xt);
                if ft <= f + 1e-4 * t * slope {
                    x = xt;
                    f = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            g = grad(&x);
            // For s < 2 the flux |g|^{s-1} is only Holder continuous, so at minimizers with a
            // vanishing element gradient the residual stalls while the energy is already exact.
            if accepted && f_prev - f <= 1e-14 * (1.0 + f.abs()) {
                stalled += 1;
            } else {
                stalled = 0;
            }
            f_prev = f;
            if stalled >= 3 && g.norm() <= opts.tol.sqrt() * scale {
                let w = Point::from_iterator(m, nodes.iter().map(|&i| x[i] - v[i]));
                return Ok((w, g.norm(), it));
            }
            if !accepted {
                // No decrease representable in floating point: accept if the residual is tiny.
                let res = g.norm();
                if res <= 1e3 * opts.tol * scale {
                    let w = Point::from_iterator(m, nodes.iter().map(|&i| x[i] - v[i]));
                    return Ok((w, res, it));
                }
                return Err(Error::LocalSolver {
                    j,
                    residual: res,
                    iterations: it,
                });
            }
        }
        Err(Error::LocalSolver {
            j,
            residual: g.norm(),
            iterations: opts.max_iter,
        })
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 4 interior nodes per direction, got {n}"
        )));
    }
    Ok(())
}

impl CompositeProblem for SLaplacian {
    fn name(&self) -> &str {
        "s-laplacian"
    }

    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn smooth(&self, v: &Point) -> f64 {
        (0..self.op.elements().len())
            .map(|k| self.element_energy(k, v))
            .sum::<f64>()
            - self.load.dot(v)
    }

    fn smooth_grad(&self, v: &Point) -> Point {
        let mut out = -self.load.clone();
        for k in 0..self.op.elements().len() {
            self.add_element_grad(k, v, &mut out);
        }
        out
    }

    fn nonsmooth(&self, _v: &Point) -> f64 {
        0.0
    }

    fn nonsmooth_is_zero(&self) -> bool {
        true
    }

    fn constant_hessian(&self) -> Option<DMatrix<f64>> {
        (self.s == 2.0).then(|| self.op.stiffness())
    }

    fn exact_local_solve(
        &self,
        sub: &Subspace,
        v: &Point,
        opts: &SolverOptions,
    ) -> Option<Result<LocalSolution>> {
        let nodes = sub.coords()?;
        Some(
            self.newton(nodes, v, opts, sub.index())
                .map(|(w, residual, iterations)| LocalSolution {
                    w,
                    objective: f64::NAN,
                    residual,
                    iterations,
                }),
        )
    }

    fn reference(&self) -> Result<Reference> {
        self.reference
            .get_or_init(|| {
                let nodes: Vec<usize> = (0..self.dim()).collect();
                let opts = SolverOptions {
                    tol: 1e-12,
                    max_iter: 500,
                };
                self.newton(&nodes, &Point::zeros(self.dim()), &opts, 0)
                    .map(|(u, _, _)| {
                        let energy = self.smooth(&u);
                        Reference { u, energy }
                    })
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::ReferenceSolve)
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Point {
        // Smooth-ish random fields at the scale of the solution.
        let scale = self
            .reference()
            .map(|r| r.u.amax())
            .unwrap_or(1.0)
            .max(1e-3);
        Point::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)),
        )
    }
}

/// `inf <d'(w), w> / d(w)` for the scalar `phi(x) = |x|^s / s` over all base points,
/// found by scanning `t = a / w` (the ratio is invariant under joint scaling).
pub fn slaplacian_rho(s: f64) -> f64 {
    let phi = |x: f64| x.abs().powf(s) / s;
    let dphi = |x: f64| x.abs().powf(s - 1.0) * x.signum();
    let ratio = |t: f64| {
        let d = phi(t + 1.0) - phi(t) - dphi(t);
        let pair = dphi(t + 1.0) - dphi(t);
        if d > 0.0 {
            pair / d
        } else {
            f64::INFINITY
        }
    };
    let mut best = 2.0f64;
    let mut arg = 0.0;
    let n = 200_000;
    for k in 0..=n {
        let t = -50.0 + 100.0 * k as f64 / n as f64;
        let r = ratio(t);
        if r < best {
            best = r;
            arg = t;
        }
    }
    // Golden-section refinement around the best grid point.
    let (mut lo, mut hi) = (arg - 1e-3, arg + 1e-3);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = hi - gr * (hi - lo);
        let d = lo + gr * (hi - lo);
        if ratio(c) < ratio(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    best.min(ratio(0.5 * (lo + hi)))
}
