//! Discrete obstacle problem: `F(v) = (K v, v)/2 - (f, v)` with the 5-point
//! stiffness `K`, and `G` the indicator of `{v <= g}`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GradientOperator;
use crate::linalg;
use crate::problem::{CompositeProblem, LocalSolution, Reference, SolverOptions};
use crate::vecspace::{Point, Subspace};

/// Slack allowed in the constraint `v <= g` before `G` becomes infinite.
pub const FEASIBILITY_TOL: f64 = 1e-12;

pub struct ObstacleProblem {
    op: Arc<GradientOperator>,
    k: DMatrix<f64>,
    load: Point,
    obstacle: Point,
    reference: OnceLock<std::result::Result<Reference, String>>,
}

impl ObstacleProblem {
    pub fn new(op: Arc<GradientOperator>, load: Point, obstacle: Point) -> Result<Self> {
        let n = op.dim();
        if load.len() != n || obstacle.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: load.len().min(obstacle.len()),
            });
        }
        let k = op.stiffness();
        Ok(Self {
            op,
            k,
            load,
            obstacle,
            reference: OnceLock::new(),
        })
    }

    /// `n x n` interior grid with constant source `f` and obstacle `g(x, y)`.
    pub fn square(n: usize, f: f64, g: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 4 interior nodes per direction, got {n}"
            )));
        }
        let op = Arc::new(GradientOperator::square(n)?);
        let load = op.load(|_| f);
        let obstacle = Point::from_iterator(op.dim(), (0..op.dim()).map(|i| g(&op.node_coords(i))));
        Self::new(op, load, obstacle)
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn obstacle(&self) -> &Point {
        &self.obstacle
    }

    pub fn operator(&self) -> &Arc<GradientOperator> {
        &self.op
    }

    pub fn is_feasible(&self, v: &Point) -> bool {
        v.iter()
            .zip(self.obstacle.iter())
            .all(|(x, g)| *x <= g + FEASIBILITY_TOL)
    }

    /// Primal-dual active set for `min (K_II z, z)/2 - (r, z)` subject to `z <= g` on `nodes`,
    /// with the other entries of `x` held fixed. Returns the new `z` and the KKT residual.
    fn active_set(
        &self,
        nodes: &[usize],
        x: &Point,
        max_iter: usize,
    ) -> std::result::Result<(Point, f64, usize), f64> {
        let m = nodes.len();
        let mut inside = vec![false; self.op.dim()];
        for &i in nodes {
            inside[i] = true;
        }
        // r = f_I - K_{I,rest} x_rest
        let mut r = Point::from_iterator(m, nodes.iter().map(|&i| self.load[i]));
        for (a, &i) in nodes.iter().enumerate() {
            for j in 0..self.op.dim() {
                if !inside[j] && self.k[(i, j)] != 0.0 {
                    r[a] -= self.k[(i, j)] * x[j];
                }
            }
        }
        let kii = DMatrix::from_fn(m, m, |a, b| self.k[(nodes[a], nodes[b])]);
        let g = Point::from_iterator(m, nodes.iter().map(|&i| self.obstacle[i]));
        let mut active: Vec<bool> = nodes.iter().map(|&i| x[i] >= self.obstacle[i]).collect();
        let mut z = Point::zeros(m);
        let mut last_res = f64::INFINITY;
        for it in 0..max_iter {
            let free: Vec<usize> = (0..m).filter(|&a| !active[a]).collect();
            for a in 0..m {
                if active[a] {
                    z[a] = g[a];
                }
            }
            if !free.is_empty() {
                let kff = DMatrix::from_fn(free.len(), free.len(), |a, b| kii[(free[a], free[b])]);
                let mut rhs = Point::from_iterator(free.len(), free.iter().map(|&a| r[a]));
                for (fa, &a) in free.iter().enumerate() {
                    for b in 0..m {
                        if active[b] {
                            rhs[fa] -= kii[(a, b)] * g[b];
                        }
                    }
                }
                let zf = linalg::solve_psd(&kff, &rhs);
                for (fa, &a) in free.iter().enumerate() {
                    z[a] = zf[fa];
                }
            }
            let lam = &r - &kii * &z;
            let next: Vec<bool> = (0..m).map(|a| lam[a] + (z[a] - g[a]) > 0.0).collect();
            let res = (0..m)
                .map(|a| lam[a].min(g[a] - z[a]).abs())
                .fold(0.0, f64::max);
            last_res = res;
            if next == active {
                let zc = z.zip_map(&g, |a, b| a.min(b));
                return Ok((zc, res, it + 1));
            }
            active = next;
        }
        Err(last_res)
    }
}

impl CompositeProblem for ObstacleProblem {
    fn name(&self) -> &str {
        "obstacle"
    }

    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn smooth(&self, v: &Point) -> f64 {
        0.5 * v.dot(&(&self.k * v)) - self.load.dot(v)
    }

    fn smooth_grad(&self, v: &Point) -> Point {
        &self.k * v - &self.load
    }

    fn nonsmooth(&self, v: &Point) -> f64 {
        if self.is_feasible(v) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn constant_hessian(&self) -> Option<DMatrix<f64>> {
        Some(self.k.clone())
    }

    fn local_prox(&self, sub: &Subspace, v: &Point, z: &Point, _step: f64) -> Option<Point> {
        let nodes = sub.coords()?;
        Some(Point::from_iterator(
            z.len(),
            nodes
                .iter()
                .zip(z.iter())
                .map(|(&i, z)| z.min(self.obstacle[i] - v[i])),
        ))
    }

    fn exact_local_solve(
        &self,
        sub: &Subspace,
        v: &Point,
        opts: &SolverOptions,
    ) -> Option<Result<LocalSolution>> {
        let nodes = sub.coords()?;
        Some(match self.active_set(nodes, v, opts.max_iter) {
            Ok((z, residual, iterations)) => {
                let w = Point::from_iterator(
                    nodes.len(),
                    nodes.iter().zip(z.iter()).map(|(&i, z)| z - v[i]),
                );
                Ok(LocalSolution {
                    w,
                    objective: f64::NAN,
                    residual,
                    iterations,
                })
            }
            Err(residual) => Err(Error::LocalSolver {
                j: sub.index(),
                residual,
                iterations: opts.max_iter,
            }),
        })
    }

    fn reference(&self) -> Result<Reference> {
        self.reference
            .get_or_init(|| {
                let nodes: Vec<usize> = (0..self.dim()).collect();
                let start = self.obstacle.map(|g| g.min(0.0));
                self.active_set(&nodes, &start, 10_000)
                    .map(|(u, _, _)| {
                        let energy = self.smooth(&u);
                        Reference { u, energy }
                    })
                    .map_err(|r| format!("active set did not settle (residual {r:e})"))
            })
            .clone()
            .map_err(Error::ReferenceSolve)
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Point {
        let scale = self
            .obstacle
            .iter()
            .filter(|g| g.is_finite())
            .fold(1e-2, |a: f64, g| a.max(g.abs()));
        Point::from_iterator(
            self.dim(),
            self.obstacle
                .iter()
                .map(|&g| (scale * (2.0 * rng.random::<f64>() - 1.0)).min(g)),
        )
    }
}
