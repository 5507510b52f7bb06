//! Multinomial logistic regression as a split problem, and its dual over a
//! product of probability simplices.
//!
//! With augmented features `x~_j = [x_j; 1]`, `X_j = I_k (x) x~_j`, and
//! `x^ = sum_j X_j e_{y_j}`, the primal is
//! `min_theta (J alpha / 2) ||theta||^2 - <x^, theta> + sum_j LSE_k(X_j^T theta)`
//! and the dual is
//! `min_p (1 / (2 J alpha)) ||sum_j X_j p_j - x^||^2 + sum_j LSE_k^*(p_j)`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::algorithms::{SplitProblem, SplitTerm};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{CompositeProblem, LocalSolution, Reference, SolverOptions};
use crate::vecspace::{Decomposition, Point, Subspace};

/// Slack allowed in the simplex constraints before `LSE*` becomes infinite.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Labelled points `(x_j, y_j)` with `y_j in 0..classes`.
#[derive(Debug, Clone, Serialize)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if points.is_empty() || points.len() != labels.len() {
            return Err(Error::InvalidParameter(
                "dataset needs one label per point and at least one point".into(),
            ));
        }
        if classes < 2 {
            return Err(Error::InvalidParameter(
                "at least two classes are required".into(),
            ));
        }
        let d = points[0].len();
        if points.iter().any(|x| x.len() != d) || labels.iter().any(|&y| y >= classes) {
            return Err(Error::InvalidParameter(
                "inconsistent feature dimension or label".into(),
            ));
        }
        Ok(Self {
            points,
            labels,
            classes,
        })
    }

    /// Gaussian blobs: class `c` centred at `2 e_{c mod d}` (sign alternating), unit spread.
    pub fn blobs(n_points: usize, dim: usize, classes: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "feature dimension must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n_points);
        let mut labels = Vec::with_capacity(n_points);
        for j in 0..n_points {
            let c = j % classes.max(1);
            let mut x: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let sign = if (c / dim).is_multiple_of(2) {
                2.0
            } else {
                -2.0
            };
            x[c % dim] += sign;
            points.push(x);
            labels.push(c);
        }
        Self::new(points, labels, classes)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// `[x_j; 1]`.
    pub fn augmented(&self, j: usize) -> Point {
        let x = &self.points[j];
        Point::from_iterator(x.len() + 1, x.iter().copied().chain(std::iter::once(1.0)))
    }

    /// `X_j = I_k (x) [x_j; 1]`, of size `k (d + 1) x k`.
    pub fn x_matrix(&self, j: usize) -> DMatrix<f64> {
        let xt = self.augmented(j);
        let m = xt.len();
        let k = self.classes;
        let mut out = DMatrix::zeros(k * m, k);
        for c in 0..k {
            for i in 0..m {
                out[(c * m + i, c)] = xt[i];
            }
        }
        out
    }

    /// `x^ = sum_j X_j e_{y_j}`.
    pub fn x_hat(&self) -> Point {
        let m = self.dim() + 1;
        let mut out = Point::zeros(self.classes * m);
        for j in 0..self.len() {
            let xt = self.augmented(j);
            let c = self.labels[j];
            for i in 0..m {
                out[c * m + i] += xt[i];
            }
        }
        out
    }
}

/// Numerically stable `log sum exp`.
pub fn lse(z: &Point) -> f64 {
    let m = z.max();
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &Point) -> Point {
    let m = z.max();
    let e = z.map(|x| (x - m).exp());
    let s = e.sum();
    e / s
}

/// `sum_i q_i log q_i` on the simplex (with `0 log 0 = 0`), `inf` elsewhere.
pub fn neg_entropy(q: &Point) -> f64 {
    if q.iter().any(|&x| x < -SIMPLEX_TOL) || (q.sum() - 1.0).abs() > SIMPLEX_TOL {
        return f64::INFINITY;
    }
    q.iter()
        .map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 })
        .sum()
}

/// Solves `h e^x + x = t` for `x` (`h >= 0`) by Newton from a point right of the root.
fn entropic_coordinate(h: f64, t: f64) -> f64 {
    if h == 0.0 {
        return t;
    }
    let mut x = if t > 0.0 && t >= h {
        t.min((t / h).ln())
    } else {
        t
    };
    for _ in 0..200 {
        let e = h * x.exp();
        let g = e + x - t;
        let step = g / (e + 1.0);
        x -= step;
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// `argmin_{q in simplex} sum_i (h_i q_i^2 / 2 - c_i q_i + q_i log q_i)`.
///
/// Stationarity gives `h_i q_i + log q_i = c_i - 1 - nu`; each `q_i(nu)` is found by a
/// scalar Newton solve in `x = log q_i`, and `nu` by safeguarded Newton on `sum_i q_i(nu) = 1`.
/// Returns the minimizer and the final `|sum_i q_i - 1|`.
pub fn entropy_simplex_solve(h: &[f64], c: &Point, opts: &SolverOptions) -> Result<(Point, f64)> {
    let k = c.len();
    let q_of = |nu: f64| {
        Point::from_iterator(
            k,
            (0..k).map(|i| entropic_coordinate(h[i], c[i] - 1.0 - nu).exp()),
        )
    };
    // At nu_hi every q_i <= exp(c_i - 1 - nu), whose sum is 1; at nu_lo some q_i >= 1.
    let cm = c.max();
    let mut nu_hi = cm - 1.0 + c.iter().map(|x| (x - cm).exp()).sum::<f64>().ln();
    let mut nu_lo = (0..k)
        .map(|i| c[i] - 1.0 - h[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut nu = nu_hi;
    let mut res = f64::INFINITY;
    for _ in 0..opts.max_iter.min(200) {
        let q = q_of(nu);
        let s = q.sum() - 1.0;
        res = s.abs();
        if res <= opts.tol.min(1e-13) {
            let q = &q / q.sum();
            return Ok((q, res));
        }
        if s > 0.0 {
            nu_lo = nu;
        } else {
            nu_hi = nu;
        }
        // d q_i / d nu = -q_i / (h_i q_i + 1)
        let ds: f64 = (0..k).map(|i| -q[i] / (h[i] * q[i] + 1.0)).sum();
        let mut next = nu - s / ds;
        if !(next > nu_lo && next < nu_hi) {
            next = 0.5 * (nu_lo + nu_hi);
        }
        if next == nu {
            break;
        }
        nu = next;
    }
    let q = q_of(nu);
    let res2 = (q.sum() - 1.0).abs();
    if res2 <= 1e-12 {
        let q = &q / q.sum();
        return Ok((q, res2));
    }
    Err(Error::LocalSolver {
        j: 0,
        residual: res.min(res2),
        iterations: 200,
    })
}

/// `G(z) = LSE_k(z)`.
pub struct LseTerm;

impl SplitTerm for LseTerm {
    fn name(&self) -> &str {
        "lse"
    }

    fn value(&self, z: &Point) -> f64 {
        lse(z)
    }

    fn conjugate(&self, q: &Point) -> f64 {
        neg_entropy(q)
    }

    /// Newton on `z + (B B^T / mu) softmax(z) = B y`, then `v = y - B^T softmax(z) / mu`.
    fn primal_prox(
        &self,
        b: &DMatrix<f64>,
        y: &Point,
        mu: f64,
        opts: &SolverOptions,
    ) -> Result<(Point, f64)> {
        let m = b * b.transpose() / mu;
        let z0 = b * y;
        let f = |z: &Point| z + &m * softmax(z) - &z0;
        let mut z = z0.clone();
        let mut fz = f(&z);
        let k = z.len();
        for _ in 0..opts.max_iter.min(500) {
            if fz.norm() <= 1e-14 * (1.0 + z0.norm()) {
                break;
            }
            let s = softmax(&z);
            let jac =
                DMatrix::identity(k, k) + &m * (DMatrix::from_diagonal(&s) - &s * s.transpose());
            let d = jac.lu().solve(&(-&fz)).ok_or_else(|| Error::LocalSolver {
                j: 0,
                residual: fz.norm(),
                iterations: 0,
            })?;
            let mut t = 1.0;
            loop {
                let zt = &z + &d * t;
                let ft = f(&zt);
                if ft.norm() <= (1.0 - 1e-4 * t) * fz.norm() || t < 1e-12 {
                    z = zt;
                    fz = ft;
                    break;
                }
                t *= 0.5;
            }
        }
        let v = y - b.tr_mul(&softmax(&z)) / mu;
        let residual = ((&v - y) * mu + b.tr_mul(&softmax(&(b * &v)))).norm();
        Ok((v, residual))
    }

    /// Requires `B B^T` diagonal (true for `B = X_j^T`).
    fn conjugate_prox(
        &self,
        b: &DMatrix<f64>,
        r: &Point,
        mu: f64,
        opts: &SolverOptions,
    ) -> Result<(Point, f64)> {
        let bbt = b * b.transpose();
        let k = bbt.nrows();
        let scale = bbt.amax().max(1.0);
        for i in 0..k {
            for j in 0..k {
                if i != j && bbt[(i, j)].abs() > 1e-14 * scale {
                    return Err(Error::Unsupported(
                        "entropic block solver needs B B^T diagonal".into(),
                    ));
                }
            }
        }
        let h: Vec<f64> = (0..k).map(|i| bbt[(i, i)] / mu).collect();
        entropy_simplex_solve(&h, &(b * r / mu), opts)
    }

    fn dual_start(&self, m: usize) -> Point {
        Point::from_element(m, 1.0 / m as f64)
    }
}

/// The dual objective on stacked `p = (p_1, ..., p_J)`, `p_j in R^k`.
pub struct LogisticDual {
    data: Arc<Dataset>,
    /// `X = [X_1, ..., X_J]`.
    x: DMatrix<f64>,
    x_hat: Point,
    alpha: f64,
    reference: OnceLock<std::result::Result<Reference, String>>,
}

impl LogisticDual {
    pub fn new(data: Arc<Dataset>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter("alpha must be positive".into()));
        }
        let k = data.classes;
        let m = data.dim() + 1;
        let jn = data.len();
        let mut x = DMatrix::zeros(k * m, jn * k);
        for j in 0..jn {
            x.view_mut((0, j * k), (k * m, k))
                .copy_from(&data.x_matrix(j));
        }
        let x_hat = data.x_hat();
        Ok(Self {
            data,
            x,
            x_hat,
            alpha,
            reference: OnceLock::new(),
        })
    }

    fn scale(&self) -> f64 {
        self.data.len() as f64 * self.alpha
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    /// `theta = -(1/(J alpha)) (sum_j X_j p_j - x^)`.
    pub fn primal_from_dual(&self, p: &Point) -> Point {
        -(&self.x * p - &self.x_hat) / self.scale()
    }

    /// Uniform distribution in every block.
    pub fn uniform_point(&self) -> Point {
        Point::from_element(self.dim(), 1.0 / self.data.classes as f64)
    }

    fn block_ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.data.classes;
        (0..self.data.len()).map(move |j| (j * k, k))
    }

    /// Equality-constrained Newton on the product of simplices.
    fn solve_reference(&self) -> std::result::Result<Reference, String> {
        let n = self.dim();
        let jn = self.data.len();
        let hq = self.x.transpose() * &self.x / self.scale();
        let mut p = self.uniform_point();
        let mut e = self.energy_unchecked(&p);
        for _ in 0..200 {
            let g = self.smooth_grad(&p) + p.map(|x| x.ln() + 1.0);
            let mut h = hq.clone();
            for i in 0..n {
                h[(i, i)] += 1.0 / p[i];
            }
            let chol = h
                .cholesky()
                .ok_or("dual Hessian is not positive definite")?;
            // Block constraints A d = 0 with A = blockdiag(1^T).
            let hinv_g = chol.solve(&g);
            let mut a = DMatrix::zeros(jn, n);
            for (j, (off, len)) in self.block_ranges().enumerate() {
                for i in off..off + len {
                    a[(j, i)] = 1.0;
                }
            }
            let hinv_at = chol.solve(&a.transpose());
            let s = &a * &hinv_at;
            let nu = linalg::solve_psd(&s, &(-(&a * &hinv_g)));
            let d = -(hinv_g + hinv_at * nu);
            let decrement = -g.dot(&d);
            if decrement <= 1e-26 * (1.0 + e.abs()) {
                let residual = self.kkt_residual(&p);
                if residual > 1e-9 {
                    return Err(format!("Newton stalled with KKT residual {residual:e}"));
                }
                return Ok(Reference { u: p, energy: e });
            }
            let mut t: f64 = 1.0;
            for i in 0..n {
                if d[i] < 0.0 {
                    t = t.min(-0.99 * p[i] / d[i]);
                }
            }
            loop {
                let pt = &p + &d * t;
                let et = self.energy_unchecked(&pt);
                if et <= e - 1e-4 * t * decrement || t < 1e-14 {
                    p = pt;
                    break;
                }
                t *= 0.5;
            }
            // Re-project blocks onto the affine constraint to avoid drift.
            for (off, len) in self.block_ranges().collect::<Vec<_>>() {
                let s: f64 = p.rows(off, len).sum();
                for i in off..off + len {
                    p[i] /= s;
                }
            }
            e = self.energy_unchecked(&p);
        }
        Err("dual Newton did not converge in 200 iterations".into())
    }

    /// Max over blocks of the spread of `grad_j + log p_j` (zero at the optimum).
    pub fn kkt_residual(&self, p: &Point) -> f64 {
        let g = self.smooth_grad(p);
        let mut r: f64 = 0.0;
        for (off, len) in self.block_ranges() {
            let vals: Vec<f64> = (off..off + len).map(|i| g[i] + p[i].ln()).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            r = r.max(hi - lo);
        }
        r
    }
}

impl CompositeProblem for LogisticDual {
    fn name(&self) -> &str {
        "logistic-dual"
    }

    fn dim(&self) -> usize {
        self.data.len() * self.data.classes
    }

    fn smooth(&self, p: &Point) -> f64 {
        (&self.x * p - &self.x_hat).norm_squared() / (2.0 * self.scale())
    }

    fn smooth_grad(&self, p: &Point) -> Point {
        self.x.tr_mul(&(&self.x * p - &self.x_hat)) / self.scale()
    }

    fn nonsmooth(&self, p: &Point) -> f64 {
        let mut g = 0.0;
        for (off, len) in self.block_ranges() {
            let v = neg_entropy(&p.rows(off, len).into_owned());
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            g += v;
        }
        g
    }

    fn constant_hessian(&self) -> Option<DMatrix<f64>> {
        Some(self.x.transpose() * &self.x / self.scale())
    }

    fn exact_local_solve(
        &self,
        sub: &Subspace,
        p: &Point,
        opts: &SolverOptions,
    ) -> Option<Result<LocalSolution>> {
        let j = sub.index();
        let k = self.data.classes;
        if sub.dim() != k || sub.coords().map(|c| c[0]) != Some(j * k) {
            return None;
        }
        let pj = p.rows(j * k, k).into_owned();
        let xj = self.data.x_matrix(j);
        // r = x^ - sum_{i != j} X_i p_i
        let r = &self.x_hat - (&self.x * p - &xj * &pj);
        let nx = self.data.augmented(j).norm_squared();
        let h = vec![nx / self.scale(); k];
        let c = xj.tr_mul(&r) / self.scale();
        Some(
            entropy_simplex_solve(&h, &c, opts)
                .map(|(q, residual)| LocalSolution {
                    w: q - pj,
                    objective: f64::NAN,
                    residual,
                    iterations: 0,
                })
                .map_err(|e| match e {
                    Error::LocalSolver {
                        residual,
                        iterations,
                        ..
                    } => Error::LocalSolver {
                        j,
                        residual,
                        iterations,
                    },
                    other => other,
                }),
        )
    }

    fn reference(&self) -> Result<Reference> {
        self.reference
            .get_or_init(|| self.solve_reference())
            .clone()
            .map_err(Error::ReferenceSolve)
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Point {
        let mut p = Point::zeros(self.dim());
        for (off, len) in self.block_ranges().collect::<Vec<_>>() {
            let e: Vec<f64> = (0..len)
                .map(|_| (2.0 * rng.sample::<f64, _>(StandardNormal)).exp())
                .collect();
            let s: f64 = e.iter().sum();
            for i in 0..len {
                p[off + i] = e[i] / s;
            }
        }
        p
    }
}

/// Primal split problem, its dual composite problem, and the dual block decomposition.
pub struct LogisticPair {
    pub data: Arc<Dataset>,
    pub alpha: f64,
    pub primal: Arc<SplitProblem>,
    pub dual: Arc<LogisticDual>,
    pub dual_dec: Arc<Decomposition>,
}

impl LogisticPair {
    /// Minimizer of the primal by Newton's method (used as an independent oracle).
    pub fn primal_newton(&self) -> Result<Point> {
        let sp = &self.primal;
        let n = sp.dim();
        let mut th = Point::zeros(n);
        for _ in 0..100 {
            let mut g = sp.f_grad(&th);
            let mut h = DMatrix::identity(n, n) * sp.mu();
            for (b, _) in sp.terms() {
                let s = softmax(&(b * &th));
                g += b.tr_mul(&s);
                let w = DMatrix::from_diagonal(&s) - &s * s.transpose();
                h += b.transpose() * w * b;
            }
            if g.norm() <= 1e-13 * (1.0 + sp.linear_term().norm()) {
                return Ok(th);
            }
            let d = linalg::solve_psd(&h, &g);
            let e0 = sp.energy(&th);
            let mut t = 1.0;
            while sp.energy(&(&th - &d * t)) > e0 - 1e-4 * t * g.dot(&d) && t > 1e-12 {
                t *= 0.5;
            }
            th -= d * t;
        }
        Err(Error::ReferenceSolve(
            "primal Newton did not converge".into(),
        ))
    }
}

/// Builds the primal split problem (`mu = J alpha`, `b = x^`, `B_j = X_j^T`, `G_j = LSE_k`) and the dual.
pub fn build_logistic_pair(data: Dataset, alpha: f64) -> Result<LogisticPair> {
    if data.classes < 2 || data.is_empty() {
        return Err(Error::InvalidParameter("degenerate dataset".into()));
    }
    let data = Arc::new(data);
    let jn = data.len();
    let terms: Vec<(DMatrix<f64>, Arc<dyn SplitTerm>)> = (0..jn)
        .map(|j| {
            (
                data.x_matrix(j).transpose(),
                Arc::new(LseTerm) as Arc<dyn SplitTerm>,
            )
        })
        .collect();
    let primal = Arc::new(SplitProblem::new(jn as f64 * alpha, data.x_hat(), terms)?);
    let dual = Arc::new(LogisticDual::new(data.clone(), alpha)?);
    let k = data.classes;
    let dual_dec = Arc::new(Decomposition::from_blocks(
        jn * k,
        (0..jn).map(|j| (j * k..(j + 1) * k).collect()).collect(),
    )?);
    Ok(LogisticPair {
        data,
        alpha,
        primal,
        dual,
        dual_dec,
    })
}
