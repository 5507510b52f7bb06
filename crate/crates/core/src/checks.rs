//! Sampling-based verifiers for the surrogate assumptions (consistency,
//! stability, `rho`), the descent inequality, `Psi`, and the stable
//! decomposition constant `C_K`.
//!
//! Sampling can refute an assumption but never certify it; a clean report
//! means "no violation found in `n_samples` samples".

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{
    gaussian, local_bregman, local_bregman_pairing, local_solve, CompositeProblem, SurrogateFamily,
};
use crate::vecspace::{NormSpec, Point};

/// One refuting sample.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub v: Vec<f64>,
    pub j: usize,
    pub w: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Serializable outcome of a check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub max_deviation: f64,
    pub n_samples: usize,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            max_deviation: 0.0,
            n_samples: 0,
            violations: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        if self.passed() {
            format!(
                "{}: no violation found in {} samples (max deviation {:.3e})",
                self.check, self.n_samples, self.max_deviation
            )
        } else {
            format!(
                "{}: {} violations in {} samples (max deviation {:.3e})",
                self.check,
                self.violations.len(),
                self.n_samples,
                self.max_deviation
            )
        }
    }

    fn record(&mut self, dev: f64) {
        self.n_samples += 1;
        if dev > self.max_deviation || dev.is_nan() {
            self.max_deviation = dev;
        }
    }

    fn violate(&mut self, v: &Point, j: usize, w: &Point, lhs: f64, rhs: f64) {
        self.violations.push(Violation {
            v: v.as_slice().to_vec(),
            j,
            w: w.as_slice().to_vec(),
            lhs,
            rhs,
        });
    }
}

/// A base point, a subspace index and a local direction.
#[derive(Debug, Clone)]
pub struct Sample {
    pub v: Point,
    pub j: usize,
    pub w: Point,
}

/// Random local directions at every point, every subspace, at the given scales.
pub fn random_samples(
    s: &dyn SurrogateFamily,
    points: &[Point],
    dirs_per_point: usize,
    scales: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<Sample> {
    let mut out = Vec::new();
    for v in points {
        for (j, sub) in s.decomposition().subspaces().iter().enumerate() {
            for k in 0..dirs_per_point {
                let mut w = gaussian(sub.dim(), rng);
                let n = w.norm();
                if n > 0.0 {
                    w /= n;
                }
                w *= scales[k % scales.len()];
                out.push(Sample { v: v.clone(), j, w });
            }
        }
    }
    out
}

fn same_or_dev(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// `F_j(0;v) = F(v)`, `G_j(0;v) = G(v)` and `<F_j'(0;v), w> = <F'(v), P_j w>` over `n_dirs`
/// directions (the first is the normalized restricted gradient).
pub fn check_consistency(
    s: &dyn SurrogateFamily,
    p: &dyn CompositeProblem,
    v: &Point,
    j: usize,
    n_dirs: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CheckReport> {
    let sub = s.decomposition().subspace(j)?;
    if v.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: v.len(),
        });
    }
    let mut rep = CheckReport::new("consistency");
    let zero = Point::zeros(sub.dim());
    let df = same_or_dev(s.local_smooth(j, &zero, v), p.smooth(v));
    rep.record(df);
    if df > tol {
        rep.violate(v, j, &zero, s.local_smooth(j, &zero, v), p.smooth(v));
    }
    let dg = same_or_dev(s.local_nonsmooth(j, &zero, v), p.nonsmooth(v));
    rep.record(dg);
    if dg > tol {
        rep.violate(v, j, &zero, s.local_nonsmooth(j, &zero, v), p.nonsmooth(v));
    }
    let grad = p.smooth_grad(v);
    let local_grad = s.local_smooth_grad(j, &zero, v);
    let restricted = sub.restrict(&grad);
    for k in 0..n_dirs {
        let w = if k == 0 && restricted.norm() > 0.0 {
            &restricted / restricted.norm()
        } else {
            let g = gaussian(sub.dim(), rng);
            let n = g.norm();
            g / n
        };
        let lhs = local_grad.dot(&w);
        let rhs = grad.dot(&sub.prolong(&w));
        let dev = (lhs - rhs).abs();
        rep.record(dev);
        if dev > tol {
            rep.violate(v, j, &w, lhs, rhs);
        }
    }
    Ok(rep)
}

/// Stability report with the largest observed ratio `d(P_j w; v) / d_j(w; v)`.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub omega_empirical: f64,
    pub omega_declared: f64,
    pub report: CheckReport,
}

/// `d(P_j w; v) <= omega d_j(w; v)` and `G(v + P_j w) <= G_j(w; v)` on the samples.
///
/// Ratios use `0/0 = 0`. A violation is recorded when the ratio exceeds the declared
/// `omega` by more than `rel_tol` relative to the divergence scale.
pub fn check_stability(
    s: &dyn SurrogateFamily,
    p: &dyn CompositeProblem,
    samples: &[Sample],
    rel_tol: f64,
) -> Result<StabilityReport> {
    let omega = s.omega();
    let mut rep = CheckReport::new("stability");
    let mut emp: f64 = 0.0;
    for smp in samples {
        let sub = s.decomposition().subspace(smp.j)?;
        let pw = sub.prolong(&smp.w);
        let d = crate::problem::bregman(p, &pw, &smp.v)?.value;
        let dj = local_bregman(s, smp.j, &smp.w, &smp.v)?.value;
        let floor = rel_tol * (1.0 + d.abs() + dj.abs());
        let ratio = if d.abs() <= floor && dj.abs() <= floor {
            0.0
        } else if dj <= 0.0 {
            f64::INFINITY
        } else {
            d / dj
        };
        emp = emp.max(ratio);
        let excess = d - omega * dj;
        rep.record(excess.max(0.0));
        if excess > floor {
            rep.violate(&smp.v, smp.j, &smp.w, d, omega * dj);
        }
        let g_full = p.nonsmooth(&sub.add_prolonged(&smp.v, &smp.w));
        let g_loc = s.local_nonsmooth(smp.j, &smp.w, &smp.v);
        if g_full != g_loc && !(g_full <= g_loc + rel_tol * (1.0 + g_loc.abs())) {
            rep.violate(&smp.v, smp.j, &smp.w, g_full, g_loc);
        }
    }
    Ok(StabilityReport {
        omega_empirical: emp,
        omega_declared: omega,
        report: rep,
    })
}

/// Sampled value of `rho` with per-base-point minima for spotting `v`-dependence.
#[derive(Debug, Clone, Serialize)]
pub struct RhoEstimate {
    pub rho: f64,
    pub n_used: usize,
    pub n_excluded: usize,
    /// Max minus min over base points of the per-point estimate.
    pub v_spread: f64,
}

/// `min <d_j'(w; v), w> / d_j(w; v)` over the samples; `0/0 = inf` (such samples are excluded).
pub fn estimate_rho(s: &dyn SurrogateFamily, samples: &[Sample]) -> Result<RhoEstimate> {
    let mut rho = f64::INFINITY;
    let mut used = 0;
    let mut excluded = 0;
    let mut per_v: Vec<(Point, f64)> = Vec::new();
    for smp in samples {
        let dj = local_bregman(s, smp.j, &smp.w, &smp.v)?.value;
        let pair = local_bregman_pairing(s, smp.j, &smp.w, &smp.v)?;
        let scale = 1e-12
            * (1.0
                + s.local_smooth(smp.j, &Point::zeros(smp.w.len()), &smp.v)
                    .abs());
        if dj <= scale {
            excluded += 1;
            continue;
        }
        used += 1;
        let r = pair / dj;
        rho = rho.min(r);
        match per_v.iter_mut().find(|(v, _)| *v == smp.v) {
            Some((_, m)) => *m = m.min(r),
            None => per_v.push((smp.v.clone(), r)),
        }
    }
    let lo = per_v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let hi = per_v.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let v_spread = if per_v.is_empty() { 0.0 } else { hi - lo };
    Ok(RhoEstimate {
        rho,
        n_used: used,
        n_excluded: excluded,
        v_spread,
    })
}

/// Solves all `J` local problems at `v` concurrently.
pub fn local_corrections(s: &dyn SurrogateFamily, v: &Point) -> Result<Vec<Point>> {
    (0..s.len())
        .into_par_iter()
        .map(|j| local_solve(s, j, v).map(|sol| sol.w))
        .collect()
}

/// `<F'(v), sum_j P_j w_j> + sum_j (d_j + G_j)(w_j; v)`.
pub fn schwarz_functional(
    s: &dyn SurrogateFamily,
    p: &dyn CompositeProblem,
    v: &Point,
    parts: &[Point],
) -> Result<f64> {
    let dec = s.decomposition();
    let total = dec.assemble(parts)?;
    let mut val = p.smooth_grad(v).dot(&total);
    for (j, w) in parts.iter().enumerate() {
        val += local_bregman(s, j, w, v)?.value + s.local_nonsmooth(j, w, v);
    }
    Ok(val)
}

/// `Psi(v)` evaluated at the exact local minimizers together with the corrections.
#[derive(Debug, Clone)]
pub struct PsiValue {
    pub psi: f64,
    pub corrections: Vec<Point>,
}

/// `Psi(v) = <F'(v), w> + sum_j (d_j + G_j)(w_j; v) - J G(v)` with `w_j` the local minimizers.
pub fn psi(s: &dyn SurrogateFamily, p: &dyn CompositeProblem, v: &Point) -> Result<PsiValue> {
    let g = p.nonsmooth(v);
    if !g.is_finite() {
        return Err(Error::InvalidParameter("Psi requires v in dom G".into()));
    }
    let corrections = local_corrections(s, v)?;
    let psi = schwarz_functional(s, p, v, &corrections)? - s.len() as f64 * g;
    Ok(PsiValue { psi, corrections })
}

/// Point, subspace, correction, left side, right side.
type DescentRow = (Point, usize, Point, f64, f64);

/// `E(v) - E(v + P_j w_j) >= (1 - omega/rho) <d_j'(w_j; v), w_j>` and nonnegativity of the right side.
pub fn check_descent(
    s: &dyn SurrogateFamily,
    p: &dyn CompositeProblem,
    points: &[Point],
    tol: f64,
) -> Result<CheckReport> {
    let factor = 1.0 - s.omega() / s.rho();
    let rows: Vec<Result<Vec<DescentRow>>> = points
        .par_iter()
        .map(|v| {
            let ev = p.energy_unchecked(v);
            let mut out = Vec::with_capacity(s.len());
            for j in 0..s.len() {
                let sol = local_solve(s, j, v)?;
                let sub = s.decomposition().subspace(j)?;
                let lhs = ev - p.energy_unchecked(&sub.add_prolonged(v, &sol.w));
                let rhs = factor * local_bregman_pairing(s, j, &sol.w, v)?;
                out.push((v.clone(), j, sol.w, lhs, rhs));
            }
            Ok(out)
        })
        .collect();
    let mut rep = CheckReport::new("descent");
    for row in rows {
        for (v, j, w, lhs, rhs) in row? {
            let slack = (rhs - lhs).max(-rhs);
            rep.record(slack.max(0.0));
            if lhs.is_nan() || rhs.is_nan() || lhs - rhs < -tol || rhs < -tol {
                rep.violate(&v, j, &w, lhs, rhs);
            }
        }
    }
    Ok(rep)
}

/// Outcome of the sampled stable-decomposition estimate.
#[derive(Debug, Clone, Serialize)]
pub struct CkEstimate {
    pub ck: f64,
    pub n_used: usize,
    pub n_skipped_infeasible: usize,
    pub n_zero: usize,
}

/// `C_K ~ q max_{(v, w)} min_split sum_j d_j(w_j; v) / ||w||^q` over candidate splittings.
///
/// Candidates are the minimal-norm splitting and, when every `d_j(.; v)` is a fixed quadratic
/// form, the splitting minimizing `sum_j d_j`. A candidate counts only if
/// `sum_j G_j(w_j; v) <= G(v + w) + (J - 1) G(v)` holds to `g_tol`.
pub fn estimate_ck(
    s: &dyn SurrogateFamily,
    p: &dyn CompositeProblem,
    norm: &NormSpec,
    q: f64,
    pairs: &[(Point, Point)],
    g_tol: f64,
) -> Result<CkEstimate> {
    let dec = s.decomposition();
    let jj = dec.len() as f64;
    let mut est = CkEstimate {
        ck: 0.0,
        n_used: 0,
        n_skipped_infeasible: 0,
        n_zero: 0,
    };
    for (v, w) in pairs {
        let nw = norm.norm(w)?;
        if nw == 0.0 {
            est.n_zero += 1;
            continue;
        }
        let mut candidates = vec![dec.min_norm_split(w)?];
        let metrics: Option<Vec<DMatrix<f64>>> =
            (0..dec.len()).map(|j| s.quadratic_metric(j, v)).collect();
        if let Some(m) = metrics {
            candidates.push(dec.weighted_split(w, &m)?);
        }
        let g_rhs = p.nonsmooth(&(v + w)) + (jj - 1.0) * p.nonsmooth(v);
        let mut best = f64::INFINITY;
        for parts in &candidates {
            let g_lhs: f64 = parts
                .iter()
                .enumerate()
                .map(|(j, wj)| s.local_nonsmooth(j, wj, v))
                .sum();
            let feasible = g_lhs == g_rhs || g_lhs <= g_rhs + g_tol * (1.0 + g_rhs.abs());
            if !feasible {
                continue;
            }
            let mut sum = 0.0;
            for (j, wj) in parts.iter().enumerate() {
                sum += local_bregman(s, j, wj, v)?.value;
            }
            best = best.min(sum);
        }
        if best.is_finite() {
            est.n_used += 1;
            est.ck = est.ck.max(q * best / nw.powf(q));
        } else {
            est.n_skipped_infeasible += 1;
        }
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ExactSurrogate, LinearSurrogate, ProxSurrogate};
    use crate::vecspace::Decomposition;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use std::sync::Arc;

    struct Quad {
        a: DMatrix<f64>,
        f: Point,
    }

    impl CompositeProblem for Quad {
        fn name(&self) -> &str {
            "quad"
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
    }

    /// Prox surrogate whose linear term is doubled, violating consistency.
    struct Doubled(ProxSurrogate, Arc<dyn CompositeProblem>);

    impl SurrogateFamily for Doubled {
        fn decomposition(&self) -> &Decomposition {
            self.0.decomposition()
        }
        fn kind(&self) -> crate::problem::SurrogateKind {
            self.0.kind()
        }
        fn omega(&self) -> f64 {
            1.0
        }
        fn rho(&self) -> f64 {
            2.0
        }
        fn local_smooth(&self, j: usize, w: &Point, v: &Point) -> f64 {
            self.0.local_smooth(j, w, v)
        }
        fn local_smooth_grad(&self, j: usize, w: &Point, v: &Point) -> Point {
            let sub = &self.decomposition().subspaces()[j];
            self.0.local_smooth_grad(j, w, v) + sub.restrict(&self.1.smooth_grad(v))
        }
        fn local_nonsmooth(&self, j: usize, w: &Point, v: &Point) -> f64 {
            self.0.local_nonsmooth(j, w, v)
        }
        fn solve(&self, j: usize, v: &Point) -> Result<crate::problem::LocalSolution> {
            self.0.solve(j, v)
        }
    }

    fn diag2() -> Arc<dyn CompositeProblem> {
        Arc::new(Quad {
            a: DMatrix::identity(2, 2),
            f: Point::zeros(2),
        })
    }

    fn coord2() -> Arc<Decomposition> {
        Arc::new(Decomposition::from_blocks(2, vec![vec![0], vec![1]]).unwrap())
    }

    fn pt(x: &[f64]) -> Point {
        Point::from_column_slice(x)
    }

    #[test]
    fn consistency_of_prox_and_injected_fault() {
        let p: Arc<dyn CompositeProblem> = Arc::new(Quad {
            a: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            f: pt(&[1.0, -1.0]),
        });
        let dec = Arc::new(Decomposition::from_blocks(2, vec![vec![0, 1]]).unwrap());
        let s = ProxSurrogate::uniform(p.clone(), dec.clone(), 0.3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = pt(&[0.4, 2.0]);
        let rep = check_consistency(&s, p.as_ref(), &v, 0, 10, 1e-10, &mut rng).unwrap();
        assert!(rep.passed() && rep.max_deviation <= 1e-10);
        let bad = Doubled(
            ProxSurrogate::uniform(p.clone(), dec, 0.3, 1.0).unwrap(),
            p.clone(),
        );
        let rep = check_consistency(&bad, p.as_ref(), &v, 0, 10, 1e-10, &mut rng).unwrap();
        assert_abs_diff_eq!(rep.max_deviation, p.smooth_grad(&v).norm(), epsilon = 1e-12);
        assert!(!rep.passed());
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["check"], "consistency");
        assert!(json["violations"][0]["lhs"].is_number());
    }

    #[test]
    fn stability_examples() {
        let p = diag2();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let exact = ExactSurrogate::new(p.clone(), coord2(), 2.0).unwrap();
        let pts = vec![pt(&[1.0, -2.0]), pt(&[0.0, 0.5])];
        let smp = random_samples(&exact, &pts, 5, &[1.0, 1e-2], &mut rng);
        let r = check_stability(&exact, p.as_ref(), &smp, 1e-9).unwrap();
        assert!(r.report.passed());
        assert_abs_diff_eq!(r.omega_empirical, 1.0, epsilon = 1e-9);

        // tau = 2/L with L = 1 halves the local curvature.
        let prox = ProxSurrogate::uniform(p.clone(), coord2(), 2.0, 1.0).unwrap();
        let r = check_stability(&prox, p.as_ref(), &smp, 1e-9).unwrap();
        assert!(!r.report.passed());
        assert_abs_diff_eq!(r.omega_empirical, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn rho_of_quadratic_is_two() {
        let p: Arc<dyn CompositeProblem> = Arc::new(Quad {
            a: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            f: pt(&[1.0, -1.0]),
        });
        let s = ExactSurrogate::new(p, coord2(), 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut smp = random_samples(
            &s,
            &[pt(&[0.1, 0.2]), pt(&[3.0, -1.0])],
            4,
            &[1.0, 10.0],
            &mut rng,
        );
        let est = estimate_rho(&s, &smp).unwrap();
        assert_abs_diff_eq!(est.rho, 2.0, epsilon = 1e-8);
        smp.push(Sample {
            v: pt(&[0.1, 0.2]),
            j: 0,
            w: pt(&[0.0]),
        });
        let est2 = estimate_rho(&s, &smp).unwrap();
        assert_eq!(est2.n_excluded, est.n_excluded + 1);
        assert_eq!(est2.rho, est.rho);
    }

    #[test]
    fn psi_examples() {
        let p = diag2();
        let s = ExactSurrogate::new(p.clone(), coord2(), 2.0).unwrap();
        assert_abs_diff_eq!(
            psi(&s, p.as_ref(), &pt(&[1.0, 1.0])).unwrap().psi,
            -1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            psi(&s, p.as_ref(), &pt(&[1.0, 0.0])).unwrap().psi,
            -0.5,
            epsilon = 1e-12
        );
        assert_eq!(psi(&s, p.as_ref(), &pt(&[0.0, 0.0])).unwrap().psi, 0.0);
    }

    #[test]
    fn ck_linear_case_bounded_by_inverse_lambda_min() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let p: Arc<dyn CompositeProblem> = Arc::new(Quad {
            a: a.clone(),
            f: Point::zeros(3),
        });
        let dec = Arc::new(Decomposition::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).unwrap());
        let r: Vec<DMatrix<f64>> = dec
            .subspaces()
            .iter()
            .map(|s| {
                (s.prolongation().transpose() * &a * s.prolongation())
                    .try_inverse()
                    .unwrap()
            })
            .collect();
        let s = LinearSurrogate::new(p.clone(), dec.clone(), r.clone(), 1.0).unwrap();
        let mut b = DMatrix::zeros(3, 3);
        for (sub, rj) in dec.subspaces().iter().zip(&r) {
            b += sub.prolongation() * rj * sub.prolongation().transpose();
        }
        let eig = (&b * &a).eigenvalues().unwrap();
        let lmin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<_> = (0..200)
            .map(|_| (gaussian(3, &mut rng), gaussian(3, &mut rng)))
            .collect();
        let norm = NormSpec::energy(a).unwrap();
        let est = estimate_ck(&s, p.as_ref(), &norm, 2.0, &pairs, 1e-12).unwrap();
        assert!(est.ck <= 1.0 / lmin + 1e-10);
        assert!(est.ck >= 0.9 / lmin);
        assert_eq!(est.n_used, 200);
    }
}
