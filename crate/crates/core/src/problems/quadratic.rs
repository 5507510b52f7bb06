//! `F(v) = (A v, v)/2 - (f, v)`, `G = 0`: the linear system `A u = f`.

use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{CompositeProblem, LinearSurrogate, LocalSolution, Reference, SolverOptions};
use crate::vecspace::{Decomposition, Point, Subspace};

pub struct QuadraticProblem {
    name: String,
    a: DMatrix<f64>,
    f: Point,
    chol: Cholesky<f64, Dyn>,
    reference: OnceLock<Reference>,
}

impl QuadraticProblem {
    pub fn new(name: &str, a: DMatrix<f64>, f: Point) -> Result<Self> {
        if f.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: f.len(),
            });
        }
        let chol = linalg::spd_cholesky(&a, "A")?;
        Ok(Self {
            name: name.to_string(),
            a,
            f,
            chol,
            reference: OnceLock::new(),
        })
    }

    pub fn diagonal(diag: &[f64], f: &[f64]) -> Result<Self> {
        let a = DMatrix::from_diagonal(&Point::from_column_slice(diag));
        Self::new("quadratic-diagonal", a, Point::from_column_slice(f))
    }

    /// `tridiag(-1, 2, -1)` of size `n` with load `f`.
    pub fn laplacian_1d(n: usize, f: Point) -> Result<Self> {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0;
            if i + 1 < n {
                a[(i, i + 1)] = -1.0;
                a[(i + 1, i)] = -1.0;
            }
        }
        Self::new("quadratic-laplacian", a, f)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn load(&self) -> &Point {
        &self.f
    }

    /// `P^T A P`.
    pub fn local_matrix(&self, sub: &Subspace) -> DMatrix<f64> {
        let p = sub.prolongation();
        p.transpose() * &self.a * p
    }
}

impl CompositeProblem for QuadraticProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.f.len()
    }

    fn smooth(&self, v: &Point) -> f64 {
        0.5 * v.dot(&(&self.a * v)) - self.f.dot(v)
    }

    fn smooth_grad(&self, v: &Point) -> Point {
        &self.a * v - &self.f
    }

    fn nonsmooth(&self, _v: &Point) -> f64 {
        0.0
    }

    fn nonsmooth_is_zero(&self) -> bool {
        true
    }

    fn constant_hessian(&self) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }

    fn exact_local_solve(
        &self,
        sub: &Subspace,
        v: &Point,
        _opts: &SolverOptions,
    ) -> Option<Result<LocalSolution>> {
        let r = sub.restrict(&self.smooth_grad(v));
        let ajj = self.local_matrix(sub);
        let w = -linalg::solve_psd(&ajj, &r);
        let residual = (&ajj * &w + &r).norm();
        Some(Ok(LocalSolution {
            w,
            objective: f64::NAN,
            residual,
            iterations: 1,
        }))
    }

    fn reference(&self) -> Result<Reference> {
        Ok(self
            .reference
            .get_or_init(|| {
                let u = self.chol.solve(&self.f);
                let energy = self.smooth(&u);
                Reference { u, energy }
            })
            .clone())
    }
}

/// Choice of the local operators `R_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalOperator {
    /// `R_j = (P_j^T A P_j)^{-1}`.
    Exact,
    /// `R_j = c (P_j^T A P_j)^{-1}`.
    Damped(f64),
    /// `R_j = (c / lambda_max(A)) I`.
    Richardson(f64),
}

/// Linear surrogates with `omega = max_j lambda_max(R_j A_jj)` verified at construction.
pub fn build_linear_surrogates(
    problem: Arc<QuadraticProblem>,
    dec: Arc<Decomposition>,
    op: LocalOperator,
) -> Result<LinearSurrogate> {
    let (_, amax) = linalg::sym_extreme_eigenvalues(problem.matrix());
    let mut r = Vec::with_capacity(dec.len());
    let mut omega: f64 = 0.0;
    for sub in dec.subspaces() {
        let ajj = problem.local_matrix(sub);
        let rj = match op {
            LocalOperator::Exact => linalg::spd_cholesky(&ajj, "local block")?.inverse(),
            LocalOperator::Damped(c) if c > 0.0 => {
                linalg::spd_cholesky(&ajj, "local block")?.inverse() * c
            }
            LocalOperator::Richardson(c) if c > 0.0 => {
                DMatrix::identity(sub.dim(), sub.dim()) * (c / amax)
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "local operator scale must be positive".into(),
                ))
            }
        };
        let lr = linalg::spd_cholesky(&rj, "R_j")?.l();
        let (_, hi) = linalg::sym_extreme_eigenvalues(&(lr.transpose() * &ajj * &lr));
        omega = omega.max(hi);
        r.push(rj);
    }
    let declared = match op {
        LocalOperator::Exact => 1.0,
        LocalOperator::Damped(c) => c,
        LocalOperator::Richardson(_) => omega,
    };
    if omega > declared * (1.0 + 1e-10) {
        return Err(Error::InvalidParameter(format!(
            "stability check failed: {omega} > declared {declared}"
        )));
    }
    if declared >= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "omega = {declared} is not below rho = 2"
        )));
    }
    LinearSurrogate::new(problem, dec, r, declared)
}
