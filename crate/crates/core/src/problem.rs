//! The composite objective `E = F + G`, Bregman divergences, and local
//! surrogate families `E_j(w_j; v) = F_j(w_j; v) + G_j(w_j; v)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::vecspace::{Decomposition, Point, Subspace};

/// A high-accuracy minimizer `u` with its energy `E(u)`.
#[derive(Debug, Clone)]
pub struct Reference {
    pub u: Point,
    pub energy: f64,
}

/// Tolerances for inner (local) solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// `E = F + G` on `R^N`; `G` may take the value `f64::INFINITY`.
pub trait CompositeProblem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// `F(v)`.
    fn smooth(&self, v: &Point) -> f64;

    /// `F'(v)`.
    fn smooth_grad(&self, v: &Point) -> Point;

    /// `G(v)`; `f64::INFINITY` outside its domain, never `-inf`.
    fn nonsmooth(&self, v: &Point) -> f64;

    /// Whether `G` is identically zero.
    fn nonsmooth_is_zero(&self) -> bool {
        false
    }

    /// `argmin_w G(v + P w) + ||w - z||^2 / (2 step)` in local coordinates, when available.
    fn local_prox(&self, _sub: &Subspace, _v: &Point, z: &Point, _step: f64) -> Option<Point> {
        self.nonsmooth_is_zero().then(|| z.clone())
    }

    /// Problem-specific minimizer of `E(v + P w)` over `w`.
    fn exact_local_solve(
        &self,
        _sub: &Subspace,
        _v: &Point,
        _opts: &SolverOptions,
    ) -> Option<Result<LocalSolution>> {
        None
    }

    /// The Hessian of `F` when `F` is quadratic.
    fn constant_hessian(&self) -> Option<DMatrix<f64>> {
        None
    }

    /// Cached reference minimizer.
    fn reference(&self) -> Result<Reference> {
        Err(Error::Unsupported(format!(
            "{} has no reference solver",
            self.name()
        )))
    }

    /// A random point in `dom G` at a problem-appropriate scale.
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Point {
        gaussian(self.dim(), rng)
    }

    fn energy_unchecked(&self, v: &Point) -> f64 {
        let g = self.nonsmooth(v);
        if g == f64::INFINITY {
            f64::INFINITY
        } else {
            self.smooth(v) + g
        }
    }
}

pub(crate) fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Point {
    Point::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `E(v) = F(v) + G(v)`, `+inf` outside `dom G`.
pub fn energy(p: &dyn CompositeProblem, v: &Point) -> Result<f64> {
    check_dim(p.dim(), v.len())?;
    Ok(p.energy_unchecked(v))
}

/// A Bregman divergence value together with its arguments.
#[derive(Debug, Clone, Serialize)]
pub struct BregmanValue {
    pub value: f64,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

/// `d(w; v) = F(v + w) - F(v) - <F'(v), w>`.
pub fn bregman(p: &dyn CompositeProblem, w: &Point, v: &Point) -> Result<BregmanValue> {
    check_dim(p.dim(), w.len())?;
    check_dim(p.dim(), v.len())?;
    let value = p.smooth(&(v + w)) - p.smooth(v) - p.smooth_grad(v).dot(w);
    Ok(BregmanValue {
        value,
        w: w.as_slice().to_vec(),
        v: v.as_slice().to_vec(),
    })
}

/// Declared type of a surrogate family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateKind {
    Exact,
    Proximal { tau: Vec<f64> },
    LinearPreconditioner,
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurrogateKind::Exact => write!(f, "exact"),
            SurrogateKind::Proximal { .. } => write!(f, "proximal"),
            SurrogateKind::LinearPreconditioner => write!(f, "linear"),
        }
    }
}

/// Output of a local solve.
#[derive(Debug, Clone)]
pub struct LocalSolution {
    /// Minimizer `w_j` in local coordinates.
    pub w: Point,
    /// `E_j(w_j; v)`.
    pub objective: f64,
    /// First-order optimality residual at `w_j`.
    pub residual: f64,
    pub iterations: usize,
}

/// Local surrogate functionals `F_j(.; v)`, `G_j(.; v)` for every subspace of a decomposition.
pub trait SurrogateFamily: Send + Sync {
    fn decomposition(&self) -> &Decomposition;

    fn kind(&self) -> SurrogateKind;

    /// Declared stability constant `omega`.
    fn omega(&self) -> f64;

    /// Declared `rho`.
    fn rho(&self) -> f64;

    /// `F_j(w; v)`.
    fn local_smooth(&self, j: usize, w: &Point, v: &Point) -> f64;

    /// Gradient of `F_j(.; v)` at `w`, in local coordinates.
    fn local_smooth_grad(&self, j: usize, w: &Point, v: &Point) -> Point;

    /// `G_j(w; v)`.
    fn local_nonsmooth(&self, j: usize, w: &Point, v: &Point) -> f64;

    /// A minimizer of `E_j(.; v)`.
    fn solve(&self, j: usize, v: &Point) -> Result<LocalSolution>;

    /// Hessian of `d_j(.; v)` when it is a fixed quadratic form.
    fn quadratic_metric(&self, _j: usize, _v: &Point) -> Option<DMatrix<f64>> {
        None
    }

    fn len(&self) -> usize {
        self.decomposition().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn local_objective(&self, j: usize, w: &Point, v: &Point) -> f64 {
        let g = self.local_nonsmooth(j, w, v);
        if g == f64::INFINITY {
            f64::INFINITY
        } else {
            self.local_smooth(j, w, v) + g
        }
    }
}

fn check_local(s: &dyn SurrogateFamily, j: usize, w: &Point, v: &Point) -> Result<()> {
    let sub = s.decomposition().subspace(j)?;
    check_dim(sub.dim(), w.len())?;
    check_dim(sub.ambient_dim(), v.len())
}

/// `d_j(w; v) = F_j(w; v) - F_j(0; v) - <F_j'(0; v), w>`.
pub fn local_bregman(
    s: &dyn SurrogateFamily,
    j: usize,
    w: &Point,
    v: &Point,
) -> Result<BregmanValue> {
    check_local(s, j, w, v)?;
    let zero = Point::zeros(w.len());
    let value = s.local_smooth(j, w, v)
        - s.local_smooth(j, &zero, v)
        - s.local_smooth_grad(j, &zero, v).dot(w);
    Ok(BregmanValue {
        value,
        w: w.as_slice().to_vec(),
        v: v.as_slice().to_vec(),
    })
}

/// `<d_j'(w; v), w>`.
pub fn local_bregman_pairing(
    s: &dyn SurrogateFamily,
    j: usize,
    w: &Point,
    v: &Point,
) -> Result<f64> {
    check_local(s, j, w, v)?;
    let zero = Point::zeros(w.len());
    Ok((s.local_smooth_grad(j, w, v) - s.local_smooth_grad(j, &zero, v)).dot(w))
}

/// `argmin E_j(.; v)` with diagnostics.
pub fn local_solve(s: &dyn SurrogateFamily, j: usize, v: &Point) -> Result<LocalSolution> {
    let sub = s.decomposition().subspace(j)?;
    check_dim(sub.ambient_dim(), v.len())?;
    s.solve(j, v)
}

/// `F_j(w; v) = F(v) + <F'(v), P_j w> + ||P_j w||^2 / (2 tau_j)`, `G_j(w; v) = G(v + P_j w)`.
pub struct ProxSurrogate {
    problem: Arc<dyn CompositeProblem>,
    dec: Arc<Decomposition>,
    tau: Vec<f64>,
    omega: f64,
}

impl ProxSurrogate {
    /// `tau_j` per subspace and the stability constant the caller vouches for.
    pub fn new(
        problem: Arc<dyn CompositeProblem>,
        dec: Arc<Decomposition>,
        tau: Vec<f64>,
        omega: f64,
    ) -> Result<Self> {
        check_dim(problem.dim(), dec.ambient_dim())?;
        check_dim(dec.len(), tau.len())?;
        if tau.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "proximal steps must be positive".into(),
            ));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter("omega must be positive".into()));
        }
        if !problem.nonsmooth_is_zero() && dec.cover_counts().is_none() {
            return Err(Error::Unsupported(
                "proximal surrogates with nonzero G need coordinate blocks".into(),
            ));
        }
        Ok(Self {
            problem,
            dec,
            tau,
            omega,
        })
    }

    /// One step `tau` for every block.
    pub fn uniform(
        problem: Arc<dyn CompositeProblem>,
        dec: Arc<Decomposition>,
        tau: f64,
        omega: f64,
    ) -> Result<Self> {
        let j = dec.len();
        Self::new(problem, dec, vec![tau; j], omega)
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }
}

impl SurrogateFamily for ProxSurrogate {
    fn decomposition(&self) -> &Decomposition {
        &self.dec
    }

    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Proximal {
            tau: self.tau.clone(),
        }
    }

    fn omega(&self) -> f64 {
        self.omega
    }

    fn rho(&self) -> f64 {
        2.0
    }

    fn local_smooth(&self, j: usize, w: &Point, v: &Point) -> f64 {
        let sub = &self.dec.subspaces()[j];
        let n = sub.ambient_norm(w);
        self.problem.smooth(v)
            + self.problem.smooth_grad(v).dot(&sub.prolong(w))
            + n * n / (2.0 * self.tau[j])
    }

    fn local_smooth_grad(&self, j: usize, w: &Point, v: &Point) -> Point {
        let sub = &self.dec.subspaces()[j];
        sub.restrict(&self.problem.smooth_grad(v)) + sub.gram() * w / self.tau[j]
    }

    fn local_nonsmooth(&self, j: usize, w: &Point, v: &Point) -> f64 {
        self.problem
            .nonsmooth(&self.dec.subspaces()[j].add_prolonged(v, w))
    }

    fn solve(&self, j: usize, v: &Point) -> Result<LocalSolution> {
        let sub = &self.dec.subspaces()[j];
        let tau = self.tau[j];
        let g = sub.restrict(&self.problem.smooth_grad(v));
        let w = if self.problem.nonsmooth_is_zero() {
            -linalg::solve_psd(sub.gram(), &g) * tau
        } else {
            self.problem
                .local_prox(sub, v, &(-&g * tau), tau)
                .ok_or_else(|| {
                    Error::Unsupported(format!("{} provides no prox of G", self.problem.name()))
                })?
        };
        let objective = self.local_objective(j, &w, v);
        Ok(LocalSolution {
            w,
            objective,
            residual: 0.0,
            iterations: 1,
        })
    }

    fn quadratic_metric(&self, j: usize, _v: &Point) -> Option<DMatrix<f64>> {
        Some(self.dec.subspaces()[j].gram() / self.tau[j])
    }
}

/// `F_j(w; v) = F(v) + <F'(v), P_j w> + (R_j^{-1} w, w) / 2` with `G = 0`.
pub struct LinearSurrogate {
    problem: Arc<dyn CompositeProblem>,
    dec: Arc<Decomposition>,
    r: Vec<DMatrix<f64>>,
    r_inv: Vec<DMatrix<f64>>,
    omega: f64,
}

impl LinearSurrogate {
    pub fn new(
        problem: Arc<dyn CompositeProblem>,
        dec: Arc<Decomposition>,
        r: Vec<DMatrix<f64>>,
        omega: f64,
    ) -> Result<Self> {
        check_dim(problem.dim(), dec.ambient_dim())?;
        check_dim(dec.len(), r.len())?;
        if !problem.nonsmooth_is_zero() {
            return Err(Error::Unsupported("linear surrogates require G = 0".into()));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter("omega must be positive".into()));
        }
        let mut r_inv = Vec::with_capacity(r.len());
        for (s, rj) in dec.subspaces().iter().zip(&r) {
            check_dim(s.dim(), rj.nrows())?;
            r_inv.push(linalg::spd_cholesky(rj, "local operator R_j")?.inverse());
        }
        Ok(Self {
            problem,
            dec,
            r,
            r_inv,
            omega,
        })
    }

    pub fn operators(&self) -> &[DMatrix<f64>] {
        &self.r
    }
}

impl SurrogateFamily for LinearSurrogate {
    fn decomposition(&self) -> &Decomposition {
        &self.dec
    }

    fn kind(&self) -> SurrogateKind {
        SurrogateKind::LinearPreconditioner
    }

    fn omega(&self) -> f64 {
        self.omega
    }

    fn rho(&self) -> f64 {
        2.0
    }

    fn local_smooth(&self, j: usize, w: &Point, v: &Point) -> f64 {
        let sub = &self.dec.subspaces()[j];
        self.problem.smooth(v)
            + self.problem.smooth_grad(v).dot(&sub.prolong(w))
            + 0.5 * w.dot(&(&self.r_inv[j] * w))
    }

    fn local_smooth_grad(&self, j: usize, w: &Point, v: &Point) -> Point {
        self.dec.subspaces()[j].restrict(&self.problem.smooth_grad(v)) + &self.r_inv[j] * w
    }

    fn local_nonsmooth(&self, _j: usize, _w: &Point, _v: &Point) -> f64 {
        0.0
    }

    fn solve(&self, j: usize, v: &Point) -> Result<LocalSolution> {
        let sub = &self.dec.subspaces()[j];
        let w = -(&self.r[j] * sub.restrict(&self.problem.smooth_grad(v)));
        let objective = self.local_smooth(j, &w, v);
        Ok(LocalSolution {
            w,
            objective,
            residual: 0.0,
            iterations: 1,
        })
    }

    fn quadratic_metric(&self, j: usize, _v: &Point) -> Option<DMatrix<f64>> {
        Some(self.r_inv[j].clone())
    }
}

/// `F_j(w; v) = F(v + P_j w)`, `G_j(w; v) = G(v + P_j w)`: exact subspace minimization.
pub struct ExactSurrogate {
    problem: Arc<dyn CompositeProblem>,
    dec: Arc<Decomposition>,
    rho: f64,
    opts: SolverOptions,
}

impl ExactSurrogate {
    /// `rho` is the value the caller declares for this `F`; it is cross-checked by `estimate_rho`.
    pub fn new(
        problem: Arc<dyn CompositeProblem>,
        dec: Arc<Decomposition>,
        rho: f64,
    ) -> Result<Self> {
        check_dim(problem.dim(), dec.ambient_dim())?;
        if !(rho > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho must exceed 1, got {rho}"
            )));
        }
        Ok(Self {
            problem,
            dec,
            rho,
            opts: SolverOptions::default(),
        })
    }

    pub fn with_options(mut self, opts: SolverOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn problem(&self) -> &Arc<dyn CompositeProblem> {
        &self.problem
    }
}

impl SurrogateFamily for ExactSurrogate {
    fn decomposition(&self) -> &Decomposition {
        &self.dec
    }

    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Exact
    }

    fn omega(&self) -> f64 {
        1.0
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn local_smooth(&self, j: usize, w: &Point, v: &Point) -> f64 {
        self.problem
            .smooth(&self.dec.subspaces()[j].add_prolonged(v, w))
    }

    fn local_smooth_grad(&self, j: usize, w: &Point, v: &Point) -> Point {
        let sub = &self.dec.subspaces()[j];
        sub.restrict(&self.problem.smooth_grad(&sub.add_prolonged(v, w)))
    }

    fn local_nonsmooth(&self, j: usize, w: &Point, v: &Point) -> f64 {
        self.problem
            .nonsmooth(&self.dec.subspaces()[j].add_prolonged(v, w))
    }

    fn solve(&self, j: usize, v: &Point) -> Result<LocalSolution> {
        let sub = &self.dec.subspaces()[j];
        let mut sol = match self.problem.exact_local_solve(sub, v, &self.opts) {
            Some(r) => r?,
            None => match (
                self.problem.nonsmooth_is_zero(),
                self.problem.constant_hessian(),
            ) {
                (true, Some(h)) => {
                    let pm = sub.prolongation();
                    let hjj = pm.transpose() * h * pm;
                    let r = sub.restrict(&self.problem.smooth_grad(v));
                    let w = -crate::linalg::solve_psd(&hjj, &r);
                    let residual = (&hjj * &w + &r).norm();
                    LocalSolution {
                        w,
                        objective: f64::NAN,
                        residual,
                        iterations: 1,
                    }
                }
                _ => prox_gradient(self.problem.as_ref(), sub, v, &self.opts)?,
            },
        };
        sol.objective = self.local_objective(j, &sol.w, v);
        Ok(sol)
    }

    fn quadratic_metric(&self, j: usize, _v: &Point) -> Option<DMatrix<f64>> {
        let h = self.problem.constant_hessian()?;
        let p = self.dec.subspaces()[j].prolongation();
        Some(p.transpose() * h * p)
    }
}

/// Proximal gradient with backtracking on `w -> F(v + P w) + G(v + P w)`.
///
/// Terminates when the gradient-mapping norm drops below `tol * (1 + ||P^T F'(v)||)`.
pub fn prox_gradient(
    p: &dyn CompositeProblem,
    sub: &Subspace,
    v: &Point,
    opts: &SolverOptions,
) -> Result<LocalSolution> {
    let phi = |w: &Point| p.smooth(&sub.add_prolonged(v, w));
    let grad = |w: &Point| sub.restrict(&p.smooth_grad(&sub.add_prolonged(v, w)));
    let prox = |z: &Point, t: f64| {
        p.local_prox(sub, v, z, t)
            .ok_or_else(|| Error::Unsupported(format!("{} provides no prox of G", p.name())))
    };
    let mut w = Point::zeros(sub.dim());
    let g0 = grad(&w);
    let scale = 1.0 + g0.norm();
    let mut t = 1.0 / scale;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let g = grad(&w);
        let f = phi(&w);
        loop {
            let cand = prox(&(&w - &g * t), t)?;
            let d = &cand - &w;
            let fc = phi(&cand);
            if fc <= f + g.dot(&d) + d.norm_squared() / (2.0 * t) + 1e-15 * f.abs().max(1.0) {
                residual = d.norm() / t;
                w = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-300 {
                return Err(Error::LocalSolver {
                    j: sub.index(),
                    residual,
                    iterations: it,
                });
            }
        }
        if residual <= opts.tol * scale {
            return Ok(LocalSolution {
                w,
                objective: f64::NAN,
                residual,
                iterations: it + 1,
            });
        }
        t *= 1.5;
    }
    Err(Error::LocalSolver {
        j: sub.index(),
        residual,
        iterations: opts.max_iter,
    })
}
