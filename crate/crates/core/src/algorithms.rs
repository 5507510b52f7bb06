//! Iteration drivers: parallel subspace correction (PSC), randomized subspace
//! correction (RSC) and randomized Peaceman-Rachford splitting (RPR).

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{local_corrections, psi};
use crate::error::{Error, Result};
use crate::problem::{CompositeProblem, LocalSolution, Reference, SolverOptions, SurrogateFamily};
use crate::rates::theta;
use crate::vecspace::{Decomposition, Point, Subspace};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator: word `k` of stream `seed` is a fixed function of `(seed, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    key: u64,
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix(seed ^ 0x5DEE_CE66_D1CE_4E5B),
            seed,
            counter: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = splitmix(self.key ^ splitmix(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        x
    }

    /// Uniform index in `0..n` by rejection (no modulo bias).
    pub fn uniform_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "uniform_index on an empty range");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return (x % n) as usize;
            }
        }
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Driver settings.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub n_iter: usize,
    /// Store every `k`-th iterate (plus the last); `None` stores none.
    pub store_every: Option<usize>,
}

impl RunOptions {
    pub fn new(n_iter: usize) -> Self {
        Self {
            n_iter,
            store_every: None,
        }
    }

    pub fn storing(n_iter: usize, every: usize) -> Self {
        Self {
            n_iter,
            store_every: Some(every.max(1)),
        }
    }
}

/// Per-iteration record of a run; index `n` refers to `u^(n)`.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub algorithm: String,
    pub energies: Vec<f64>,
    /// Sampled subspace per iteration (`None` at `n = 0` and for PSC).
    pub sampled: Vec<Option<usize>>,
    /// Euclidean norm of the applied correction (0 at `n = 0`).
    pub correction_norms: Vec<f64>,
    pub wall_times_ns: Vec<u64>,
    #[serde(skip)]
    pub iterates: Vec<(usize, Point)>,
    #[serde(skip)]
    pub last: Point,
}

impl Trajectory {
    fn start(algorithm: &str, u0: &Point, e0: f64, opts: &RunOptions) -> Self {
        let mut t = Self {
            algorithm: algorithm.to_string(),
            energies: Vec::with_capacity(opts.n_iter + 1),
            sampled: Vec::with_capacity(opts.n_iter + 1),
            correction_norms: Vec::with_capacity(opts.n_iter + 1),
            wall_times_ns: Vec::with_capacity(opts.n_iter + 1),
            iterates: Vec::new(),
            last: u0.clone(),
        };
        t.energies.push(e0);
        t.sampled.push(None);
        t.correction_norms.push(0.0);
        t.wall_times_ns.push(0);
        if opts.store_every.is_some() {
            t.iterates.push((0, u0.clone()));
        }
        t
    }

    fn push(
        &mut self,
        u: &Point,
        e: f64,
        j: Option<usize>,
        corr: f64,
        t0: &Instant,
        opts: &RunOptions,
    ) {
        let n = self.energies.len();
        self.energies.push(e);
        self.sampled.push(j);
        self.correction_norms.push(corr);
        self.wall_times_ns.push(t0.elapsed().as_nanos() as u64);
        if let Some(k) = opts.store_every {
            if n.is_multiple_of(k) || n == opts.n_iter {
                self.iterates.push((n, u.clone()));
            }
        }
        self.last.clone_from(u);
    }

    /// Number of iterations performed.
    pub fn len(&self) -> usize {
        self.energies.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sampled indices for iterations `1..=n`.
    pub fn indices(&self) -> Vec<usize> {
        self.sampled.iter().flatten().copied().collect()
    }

    /// `E(u^(n)) - E(u)` for every `n`.
    pub fn gaps(&self, reference: &Reference) -> Vec<f64> {
        self.energies.iter().map(|e| e - reference.energy).collect()
    }

    /// CSV with columns `n,energy,sampled_j,correction_norm,wall_time_ns`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,energy,sampled_j,correction_norm,wall_time_ns\n");
        for n in 0..self.energies.len() {
            let j = self.sampled[n].map(|j| j.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{n},{:e},{j},{:e},{}",
                self.energies[n], self.correction_norms[n], self.wall_times_ns[n]
            );
        }
        s
    }

    /// JSON run record.
    pub fn run_record(
        &self,
        problem: &str,
        decomposition: &str,
        surrogate: &str,
        seed: Option<u64>,
        tau: Option<f64>,
    ) -> serde_json::Value {
        serde_json::json!({
            "algorithm": self.algorithm,
            "problem": problem,
            "decomposition": decomposition,
            "surrogate": surrogate,
            "seed": seed,
            "tau": tau,
            "n_iter": self.len(),
            "energies": self.energies,
        })
    }
}

fn start_energy(p: &dyn CompositeProblem, u0: &Point) -> Result<f64> {
    if u0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: u0.len(),
        });
    }
    let e = p.energy_unchecked(u0);
    if !e.is_finite() {
        return Err(Error::InvalidParameter(
            "initial iterate is outside dom G".into(),
        ));
    }
    Ok(e)
}

/// Parallel subspace correction: `u <- u + tau sum_j w_j` with all `J` local problems solved concurrently.
pub fn run_psc(
    p: &dyn CompositeProblem,
    s: &dyn SurrogateFamily,
    tau: f64,
    u0: &Point,
    opts: RunOptions,
) -> Result<Trajectory> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must lie in (0, 1], got {tau}"
        )));
    }
    let mut traj = Trajectory::start("psc", u0, start_energy(p, u0)?, &opts);
    let dec = s.decomposition();
    let mut u = u0.clone();
    let t0 = Instant::now();
    for n in 0..opts.n_iter {
        let parts = local_corrections(s, &u).map_err(|e| e.at_iteration(n + 1))?;
        let step = dec.assemble(&parts)? * tau;
        u += &step;
        traj.push(&u, p.energy_unchecked(&u), None, step.norm(), &t0, &opts);
    }
    Ok(traj)
}

/// Randomized subspace correction: one uniformly sampled local problem per iteration.
pub fn run_rsc(
    p: &dyn CompositeProblem,
    s: &dyn SurrogateFamily,
    u0: &Point,
    opts: RunOptions,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let mut traj = Trajectory::start("rsc", u0, start_energy(p, u0)?, &opts);
    let dec = s.decomposition();
    let mut u = u0.clone();
    let t0 = Instant::now();
    for n in 0..opts.n_iter {
        let j = rng.uniform_index(dec.len());
        let sol = s.solve(j, &u).map_err(|e| e.at_iteration(n + 1))?;
        let sub = &dec.subspaces()[j];
        u = sub.add_prolonged(&u, &sol.w);
        traj.push(
            &u,
            p.energy_unchecked(&u),
            Some(j),
            sub.ambient_norm(&sol.w),
            &t0,
            &opts,
        );
    }
    Ok(traj)
}

/// `E[E(u^+) | u = v] = (1/J) sum_j E(v + P_j w_j)` by enumeration.
pub fn expected_next_energy(
    p: &dyn CompositeProblem,
    s: &dyn SurrogateFamily,
    v: &Point,
) -> Result<f64> {
    start_energy(p, v)?;
    let dec = s.decomposition();
    let parts = local_corrections(s, v)?;
    let sum: f64 = parts
        .iter()
        .zip(dec.subspaces())
        .map(|(w, sub)| p.energy_unchecked(&sub.add_prolonged(v, w)))
        .sum();
    Ok(sum / dec.len() as f64)
}

/// Both sides of the one-step descent estimate at a point.
#[derive(Debug, Clone, Serialize)]
pub struct OneStepBound {
    pub energy: f64,
    pub expected_next: f64,
    pub psi: f64,
    pub theta: f64,
    pub subspaces: usize,
    /// `E(v) + (theta / J) Psi(v)` for one randomized step.
    pub rsc_bound: f64,
    /// `E(v) + tau theta Psi(v)` for one parallel step with `tau = 1/J`.
    pub psc_bound: f64,
    /// `E(v + (1/J) sum_j w_j)`.
    pub psc_next: f64,
}

/// Evaluates the exact expectation and the bounds for RSC and PSC (with `tau = 1/J`) from one `Psi`.
pub fn one_step_bound(
    p: &dyn CompositeProblem,
    s: &dyn SurrogateFamily,
    v: &Point,
) -> Result<OneStepBound> {
    let energy = start_energy(p, v)?;
    let th = theta(s.omega(), s.rho())?;
    let ps = psi(s, p, v)?;
    let dec = s.decomposition();
    let jn = dec.len() as f64;
    let expected_next = ps
        .corrections
        .iter()
        .zip(dec.subspaces())
        .map(|(w, sub)| p.energy_unchecked(&sub.add_prolonged(v, w)))
        .sum::<f64>()
        / jn;
    let psc_next = p.energy_unchecked(&(v + dec.assemble(&ps.corrections)? / jn));
    Ok(OneStepBound {
        energy,
        expected_next,
        psi: ps.psi,
        theta: th,
        subspaces: dec.len(),
        rsc_bound: energy + th / jn * ps.psi,
        psc_bound: energy + (1.0 / jn) * th * ps.psi,
        psc_next,
    })
}

/// A convex functional `G_j` on `W_j` paired with the two proximal-type solves RPR and its dual need.
pub trait SplitTerm: Send + Sync {
    fn name(&self) -> &str;

    /// `G(z)`.
    fn value(&self, z: &Point) -> f64;

    /// `G*(q)`.
    fn conjugate(&self, q: &Point) -> f64;

    /// `argmin_v (mu/2) ||v - y||^2 + G(B v)` with an optimality residual.
    fn primal_prox(
        &self,
        b: &DMatrix<f64>,
        y: &Point,
        mu: f64,
        opts: &SolverOptions,
    ) -> Result<(Point, f64)>;

    /// `argmin_q ||r - B^T q||^2 / (2 mu) + G*(q)` with an optimality residual.
    fn conjugate_prox(
        &self,
        b: &DMatrix<f64>,
        r: &Point,
        mu: f64,
        opts: &SolverOptions,
    ) -> Result<(Point, f64)>;

    /// A point in `dom G*`.
    fn dual_start(&self, m: usize) -> Point {
        Point::zeros(m)
    }
}

/// `min_v F(v) + sum_j G_j(B_j v)` with `F(v) = (mu/2) ||v||^2 - <b, v>`.
///
/// Restricting `F` to isotropic quadratics makes `d(w; u) = (mu/2) ||w||^2`,
/// `F'` and `(F*)'` affine, and every RPR inner problem a prox of `G_j o B_j`.
#[derive(Clone)]
pub struct SplitProblem {
    mu: f64,
    b: Point,
    terms: Vec<(DMatrix<f64>, Arc<dyn SplitTerm>)>,
    opts: SolverOptions,
}

impl SplitProblem {
    pub fn new(mu: f64, b: Point, terms: Vec<(DMatrix<f64>, Arc<dyn SplitTerm>)>) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(
                "F must be strongly convex (mu > 0)".into(),
            ));
        }
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "split problem needs at least one term".into(),
            ));
        }
        for (bj, _) in &terms {
            if bj.ncols() != b.len() || bj.nrows() == 0 {
                return Err(Error::DimensionMismatch {
                    expected: b.len(),
                    got: bj.ncols(),
                });
            }
        }
        Ok(Self {
            mu,
            b,
            terms,
            opts: SolverOptions::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn linear_term(&self) -> &Point {
        &self.b
    }

    pub fn terms(&self) -> &[(DMatrix<f64>, Arc<dyn SplitTerm>)] {
        &self.terms
    }

    pub fn f(&self, v: &Point) -> f64 {
        0.5 * self.mu * v.norm_squared() - self.b.dot(v)
    }

    pub fn f_grad(&self, v: &Point) -> Point {
        v * self.mu - &self.b
    }

    pub fn f_conj(&self, y: &Point) -> f64 {
        (y + &self.b).norm_squared() / (2.0 * self.mu)
    }

    /// `(F*)'(y) = (y + b) / mu`.
    pub fn f_conj_grad(&self, y: &Point) -> Point {
        (y + &self.b) / self.mu
    }

    /// `F(v) + sum_j G_j(B_j v)`.
    pub fn energy(&self, v: &Point) -> f64 {
        let mut e = self.f(v);
        for (bj, g) in &self.terms {
            e += g.value(&(bj * v));
        }
        e
    }

    /// `-sum_j B_j^T p_j`.
    pub fn dual_map(&self, p: &[Point]) -> Point {
        let mut y = Point::zeros(self.dim());
        for ((bj, _), pj) in self.terms.iter().zip(p) {
            y -= bj.tr_mul(pj);
        }
        y
    }

    /// Block sizes `m_j` of the dual variable.
    pub fn dual_blocks(&self) -> Vec<usize> {
        self.terms.iter().map(|(b, _)| b.nrows()).collect()
    }

    /// Flattens `(p_1, ..., p_J)`.
    pub fn stack(&self, p: &[Point]) -> Point {
        let parts: Vec<f64> = p.iter().flat_map(|x| x.iter().copied()).collect();
        Point::from_vec(parts)
    }

    pub fn unstack(&self, p: &Point) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.len());
        let mut off = 0;
        for m in self.dual_blocks() {
            out.push(p.rows(off, m).into_owned());
            off += m;
        }
        out
    }

    /// The dual problem `F*(-sum_j B_j^T p_j) + sum_j G_j*(p_j)` with its block decomposition.
    pub fn dual(self: &Arc<Self>) -> Result<(Arc<SplitDual>, Arc<Decomposition>)> {
        let total: usize = self.dual_blocks().iter().sum();
        let mut blocks = Vec::with_capacity(self.len());
        let mut off = 0;
        for m in self.dual_blocks() {
            blocks.push((off..off + m).collect());
            off += m;
        }
        let dec = Decomposition::from_blocks(total, blocks)?;
        Ok((
            Arc::new(SplitDual {
                primal: self.clone(),
            }),
            Arc::new(dec),
        ))
    }
}

/// The dual of a [`SplitProblem`] as a composite problem on the stacked `p`.
pub struct SplitDual {
    primal: Arc<SplitProblem>,
}

impl SplitDual {
    pub fn primal(&self) -> &SplitProblem {
        &self.primal
    }
}

impl CompositeProblem for SplitDual {
    fn name(&self) -> &str {
        "split-dual"
    }

    fn dim(&self) -> usize {
        self.primal.dual_blocks().iter().sum()
    }

    fn smooth(&self, p: &Point) -> f64 {
        self.primal
            .f_conj(&self.primal.dual_map(&self.primal.unstack(p)))
    }

    fn smooth_grad(&self, p: &Point) -> Point {
        // d/dp_j F*(-sum B_i^T p_i) = -B_j (F*)'(y)
        let u = self
            .primal
            .f_conj_grad(&self.primal.dual_map(&self.primal.unstack(p)));
        let parts: Vec<Point> = self.primal.terms.iter().map(|(bj, _)| -(bj * &u)).collect();
        self.primal.stack(&parts)
    }

    fn nonsmooth(&self, p: &Point) -> f64 {
        let parts = self.primal.unstack(p);
        let mut g = 0.0;
        for ((_, t), pj) in self.primal.terms.iter().zip(&parts) {
            let v = t.conjugate(pj);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            g += v;
        }
        g
    }

    fn exact_local_solve(
        &self,
        sub: &Subspace,
        p: &Point,
        opts: &SolverOptions,
    ) -> Option<Result<LocalSolution>> {
        let j = sub.index();
        let sp = &self.primal;
        let mut parts = sp.unstack(p);
        let pj = parts[j].clone();
        parts[j].fill(0.0);
        // r = b - sum_{i != j} B_i^T p_i
        let r = sp.dual_map(&parts) + &sp.b;
        let (bj, term) = &sp.terms[j];
        Some(
            term.conjugate_prox(bj, &r, sp.mu, opts)
                .map(|(q, residual)| LocalSolution {
                    w: q - pj,
                    objective: f64::NAN,
                    residual,
                    iterations: 0,
                }),
        )
    }

    fn sample_point(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Point {
        let _ = rng;
        let parts: Vec<Point> = self
            .primal
            .terms
            .iter()
            .map(|(b, t)| t.dual_start(b.nrows()))
            .collect();
        self.primal.stack(&parts)
    }
}

/// RPR output: primal trajectory plus the history of the auxiliary variables.
#[derive(Debug, Clone)]
pub struct RprTrajectory {
    pub trajectory: Trajectory,
    /// `u^(n)` for every `n`.
    pub u: Vec<Point>,
    /// `(v_1^(n), ..., v_J^(n))` for every `n`.
    pub v: Vec<Vec<Point>>,
}

/// Randomized Peaceman-Rachford splitting.
pub fn run_rpr(
    sp: &SplitProblem,
    u0: &Point,
    v0: &[Point],
    n_iter: usize,
    rng: &mut RngStream,
) -> Result<RprTrajectory> {
    if u0.len() != sp.dim() {
        return Err(Error::DimensionMismatch {
            expected: sp.dim(),
            got: u0.len(),
        });
    }
    if v0.len() != sp.len() {
        return Err(Error::DimensionMismatch {
            expected: sp.len(),
            got: v0.len(),
        });
    }
    for vj in v0 {
        if vj.len() != sp.dim() {
            return Err(Error::DimensionMismatch {
                expected: sp.dim(),
                got: vj.len(),
            });
        }
    }
    let opts = RunOptions::new(n_iter);
    let mut traj = Trajectory::start("rpr", u0, sp.energy(u0), &opts);
    let mut u = u0.clone();
    let mut v = v0.to_vec();
    let mut us = vec![u.clone()];
    let mut vs = vec![v.clone()];
    let t0 = Instant::now();
    for n in 0..n_iter {
        let j = rng.uniform_index(sp.len());
        let (bj, term) = &sp.terms[j];
        let y = &u - &v[j] / sp.mu;
        let (u_next, residual) = term
            .primal_prox(bj, &y, sp.mu, &sp.opts)
            .map_err(|e| e.at_iteration(n + 1))?;
        if !(residual <= sp.opts.tol * (1.0 + y.norm())) {
            return Err(Error::LocalSolver {
                j,
                residual,
                iterations: sp.opts.max_iter,
            }
            .at_iteration(n + 1));
        }
        v[j] += sp.f_grad(&u_next) - sp.f_grad(&u);
        let corr = (&u_next - &u).norm();
        u = u_next;
        traj.push(&u, sp.energy(&u), Some(j), corr, &t0, &opts);
        us.push(u.clone());
        vs.push(v.clone());
    }
    Ok(RprTrajectory {
        trajectory: traj,
        u: us,
        v: vs,
    })
}

/// Per-iteration agreement between RPR and dual RSC driven by one index sequence.
#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    /// `max(||u^n - (F*)'(-sum B_j^T p_j^n)||, max_j ||v_j^n + B_j^T p_j^n||) / (1 + ||u^n||)`.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub threshold: f64,
    pub first_failure: Option<usize>,
    pub indices_match: bool,
}

impl DualityReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none() && self.indices_match
    }
}

/// Runs RPR from the dual-consistent start and RSC with exact local solves on the dual with the same seed.
pub fn check_duality(
    sp: &Arc<SplitProblem>,
    dual_p: &dyn CompositeProblem,
    dual_s: &dyn SurrogateFamily,
    p0: &[Point],
    n_iter: usize,
    seed: u64,
    threshold: f64,
) -> Result<DualityReport> {
    if p0.len() != sp.len() {
        return Err(Error::DimensionMismatch {
            expected: sp.len(),
            got: p0.len(),
        });
    }
    let u0 = sp.f_conj_grad(&sp.dual_map(p0));
    let v0: Vec<Point> = sp
        .terms
        .iter()
        .zip(p0)
        .map(|((bj, _), pj)| -bj.tr_mul(pj))
        .collect();
    let primal = run_rpr(sp, &u0, &v0, n_iter, &mut RngStream::new(seed))?;
    let dual = run_rsc(
        dual_p,
        dual_s,
        &sp.stack(p0),
        RunOptions::storing(n_iter, 1),
        &mut RngStream::new(seed),
    )?;
    let indices_match = primal.trajectory.indices() == dual.indices();
    let mut deviations = Vec::with_capacity(n_iter + 1);
    for (n, (_, pn)) in dual.iterates.iter().enumerate() {
        let parts = sp.unstack(pn);
        let un = &primal.u[n];
        let mut dev = (un - sp.f_conj_grad(&sp.dual_map(&parts))).norm();
        for ((bj, _), (vj, pj)) in sp.terms.iter().zip(primal.v[n].iter().zip(&parts)) {
            dev = dev.max((vj + bj.tr_mul(pj)).norm());
        }
        deviations.push(dev / (1.0 + un.norm()));
    }
    let max_deviation = deviations.iter().cloned().fold(0.0, f64::max);
    let first_failure = deviations.iter().position(|d| !(*d <= threshold));
    Ok(DualityReport {
        deviations,
        max_deviation,
        threshold,
        first_failure,
        indices_match,
    })
}

/// Runs `M` independent RSC trajectories with seeds `base_seed..base_seed + M` concurrently.
pub fn replicate_rsc(
    p: &dyn CompositeProblem,
    s: &dyn SurrogateFamily,
    u0: &Point,
    opts: RunOptions,
    base_seed: u64,
    replications: usize,
) -> Result<Vec<Trajectory>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|k| {
            run_rsc(
                p,
                s,
                u0,
                opts,
                &mut RngStream::new(base_seed.wrapping_add(k)),
            )
        })
        .collect()
}
