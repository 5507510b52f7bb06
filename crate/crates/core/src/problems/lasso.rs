//! Block-separable composite problem `F(x) = ||M x - b||^2 / 2 + (mu_F / 2) ||x||^2`,
//! `G(x) = lambda ||x||_1`, solved by randomized block coordinate descent.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{CompositeProblem, ProxSurrogate, Reference};
use crate::vecspace::{Decomposition, NormSpec, Point, Subspace};

pub struct LassoProblem {
    m: DMatrix<f64>,
    b: Point,
    lambda: f64,
    mu_f: f64,
    gram: DMatrix<f64>,
    reference: OnceLock<std::result::Result<Reference, String>>,
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

impl LassoProblem {
    pub fn new(m: DMatrix<f64>, b: Point, lambda: f64, mu_f: f64) -> Result<Self> {
        if b.len() != m.nrows() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: b.len(),
            });
        }
        if !(lambda >= 0.0) || !(mu_f >= 0.0) {
            return Err(Error::InvalidParameter(
                "lambda and mu_F must be nonnegative".into(),
            ));
        }
        let gram = m.transpose() * &m + DMatrix::identity(m.ncols(), m.ncols()) * mu_f;
        Ok(Self {
            m,
            b,
            lambda,
            mu_f,
            gram,
            reference: OnceLock::new(),
        })
    }

    /// Gaussian design `rows x cols` scaled by `1/sqrt(rows)` with a sparse planted signal.
    pub fn synthetic(rows: usize, cols: usize, lambda: f64, mu_f: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (rows as f64).sqrt();
        let m = DMatrix::from_fn(rows, cols, |_, _| {
            rng.sample::<f64, _>(StandardNormal) * scale
        });
        let x = Point::from_fn(cols, |i, _| {
            if i % 4 == 0 {
                1.0 + (i % 3) as f64
            } else {
                0.0
            }
        });
        let noise = Point::from_fn(rows, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
        let b = &m * x + noise;
        Self::new(m, b, lambda, mu_f)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu_f(&self) -> f64 {
        self.mu_f
    }

    /// Hessian `M^T M + mu_F I`.
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `L_j = lambda_max(P_j^T (M^T M + mu_F I) P_j)`.
    pub fn block_lipschitz(&self, dec: &Decomposition) -> Vec<f64> {
        dec.subspaces()
            .iter()
            .map(|s| {
                linalg::sym_extreme_eigenvalues(
                    &(s.prolongation().transpose() * &self.gram * s.prolongation()),
                )
                .1
            })
            .collect()
    }

    /// Strong convexity modulus of `F` in the L-norm: `lambda_min(L^{-1/2} H L^{-1/2})`.
    pub fn mu_f_in_l_norm(&self, dec: &Decomposition) -> Result<f64> {
        let l = self.block_lipschitz(dec);
        let NormSpec::Weighted(w) = NormSpec::block_l(dec, &l)? else {
            unreachable!()
        };
        let n = w.len();
        let s = DMatrix::from_fn(n, n, |i, j| self.gram[(i, j)] / (w[i] * w[j]).sqrt());
        Ok(linalg::sym_extreme_eigenvalues(&s).0.max(0.0))
    }

    fn prox_full(&self, z: &Point, t: f64) -> Point {
        z.map(|x| soft(x, self.lambda * t))
    }

    fn solve_reference(&self) -> std::result::Result<Reference, String> {
        // FISTA with adaptive restart on the full problem.
        let (_, lmax) = linalg::sym_extreme_eigenvalues(&self.gram);
        let t = 1.0 / lmax;
        let n = self.dim();
        let mut x = Point::zeros(n);
        let mut y = x.clone();
        let mut k = 1.0f64;
        let tol = 1e-12 * (1.0 + self.smooth_grad(&x).norm());
        for _ in 0..2_000_000 {
            let g = self.smooth_grad(&y);
            let xn = self.prox_full(&(&y - &g * t), t);
            let kn = 0.5 * (1.0 + (1.0 + 4.0 * k * k).sqrt());
            if (&y - &xn).dot(&(&xn - &x)) > 0.0 {
                y = xn.clone();
                k = 1.0;
            } else {
                y = &xn + (&xn - &x) * ((k - 1.0) / kn);
                k = kn;
            }
            x = xn;
            let gm = (&x - self.prox_full(&(&x - self.smooth_grad(&x) * t), t)).norm() / t;
            if gm <= tol {
                let energy = self.energy_unchecked(&x);
                return Ok(Reference { u: x, energy });
            }
        }
        Err("proximal gradient did not reach the residual target".into())
    }
}

impl CompositeProblem for LassoProblem {
    fn name(&self) -> &str {
        "lasso"
    }

    fn dim(&self) -> usize {
        self.m.ncols()
    }

    fn smooth(&self, v: &Point) -> f64 {
        0.5 * (&self.m * v - &self.b).norm_squared() + 0.5 * self.mu_f * v.norm_squared()
    }

    fn smooth_grad(&self, v: &Point) -> Point {
        self.m.tr_mul(&(&self.m * v - &self.b)) + v * self.mu_f
    }

    fn nonsmooth(&self, v: &Point) -> f64 {
        self.lambda * v.lp_norm(1)
    }

    fn nonsmooth_is_zero(&self) -> bool {
        self.lambda == 0.0
    }

    fn constant_hessian(&self) -> Option<DMatrix<f64>> {
        Some(self.gram.clone())
    }

    fn local_prox(&self, sub: &Subspace, v: &Point, z: &Point, step: f64) -> Option<Point> {
        sub.coords()?;
        let base = sub.restrict(v);
        Some(Point::from_iterator(
            z.len(),
            base.iter()
                .zip(z.iter())
                .map(|(b, z)| soft(b + z, self.lambda * step) - b),
        ))
    }

    fn reference(&self) -> Result<Reference> {
        self.reference
            .get_or_init(|| self.solve_reference())
            .clone()
            .map_err(Error::ReferenceSolve)
    }
}

/// Proximal surrogates with `tau_j = 1 / L_j` (block coordinate descent), `omega = 1`.
pub fn build_bcd_surrogates(
    problem: Arc<LassoProblem>,
    dec: Arc<Decomposition>,
) -> Result<ProxSurrogate> {
    if !dec.is_disjoint() {
        return Err(Error::InvalidParameter(
            "block coordinate descent needs disjoint coordinate blocks".into(),
        ));
    }
    let l = problem.block_lipschitz(&dec);
    if l.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidParameter(
            "block Lipschitz constants must be positive".into(),
        ));
    }
    ProxSurrogate::new(problem, dec, l.iter().map(|x| 1.0 / x).collect(), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::local_solve;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_reference_is_soft_threshold() {
        let p = LassoProblem::new(
            DMatrix::identity(1, 1),
            Point::from_element(1, 1.0),
            0.5,
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(p.reference().unwrap().u[0], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn bcd_local_solves() {
        // F'(v) = v - b on a scalar block with L = 1.
        let lam = 0.0;
        let p = Arc::new(
            LassoProblem::new(
                DMatrix::identity(2, 2),
                Point::from_column_slice(&[0.0, 3.0]),
                lam,
                0.0,
            )
            .unwrap(),
        );
        let dec = Arc::new(Decomposition::from_blocks(2, vec![vec![0], vec![1]]).unwrap());
        let s = build_bcd_surrogates(p, dec.clone()).unwrap();
        let v = Point::zeros(2);
        assert_eq!(local_solve(&s, 0, &v).unwrap().w[0], 0.0);
        assert_abs_diff_eq!(local_solve(&s, 1, &v).unwrap().w[0], 3.0, epsilon = 1e-15);

        let p = Arc::new(
            LassoProblem::new(
                DMatrix::identity(2, 2),
                Point::from_column_slice(&[0.0, 3.0]),
                1.0,
                0.0,
            )
            .unwrap(),
        );
        let s = build_bcd_surrogates(p, dec).unwrap();
        assert_eq!(local_solve(&s, 0, &v).unwrap().w[0], 0.0);
        assert_abs_diff_eq!(local_solve(&s, 1, &v).unwrap().w[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let p = Arc::new(LassoProblem::synthetic(10, 4, 0.1, 0.0, 1).unwrap());
        let dec = Arc::new(Decomposition::overlap_1d(4, 2, 1).unwrap());
        assert!(build_bcd_surrogates(p, dec).is_err());
    }
}
