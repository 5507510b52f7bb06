//! Theoretical constants, bound curves for `E[E(u^(n))] - E(u)`, and
//! empirical rate fits.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::vecspace::{Decomposition, NormSpec, Point};

/// `theta = 1` for `omega <= 1`, `(rho - omega) / (rho - 1)` for `omega in (1, rho)`.
pub fn theta(omega: f64, rho: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega must be positive, got {omega}"
        )));
    }
    if omega <= 1.0 {
        return Ok(1.0);
    }
    if !(rho > 1.0) || omega >= rho {
        return Err(Error::InvalidParameter(format!(
            "omega = {omega} must be below rho = {rho}"
        )));
    }
    Ok((rho - omega) / (rho - 1.0))
}

/// Constants entering the bounds. Optional fields are required only by the bounds that use them.
#[derive(Debug, Clone, Serialize)]
pub struct RateBundle {
    pub theta: f64,
    pub omega: f64,
    pub rho: f64,
    pub q: f64,
    pub p: Option<f64>,
    pub c_k0: f64,
    pub mu_k0: Option<f64>,
    pub mu_f_k0: Option<f64>,
    pub r0: f64,
    pub zeta0: f64,
    pub j: usize,
    pub lambda_min_t: Option<f64>,
    pub c_v: Option<f64>,
}

impl RateBundle {
    /// A bundle with `theta` derived from `omega` and `rho`.
    pub fn new(
        omega: f64,
        rho: f64,
        q: f64,
        c_k0: f64,
        r0: f64,
        zeta0: f64,
        j: usize,
    ) -> Result<Self> {
        let b = Self {
            theta: theta(omega, rho)?,
            omega,
            rho,
            q,
            p: None,
            c_k0,
            mu_k0: None,
            mu_f_k0: None,
            r0,
            zeta0,
            j,
            lambda_min_t: None,
            c_v: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad("theta must lie in (0, 1]");
        }
        if !(self.q > 1.0) {
            return bad("q must exceed 1");
        }
        if let Some(p) = self.p {
            if !(p > 1.0) {
                return bad("p must exceed 1");
            }
        }
        if !(self.r0 >= 0.0) || !(self.zeta0 >= 0.0) || !(self.c_k0 >= 0.0) {
            return bad("R0, zeta0 and C_K0 must be nonnegative");
        }
        if self.j == 0 {
            return bad("J must be positive");
        }
        Ok(())
    }

    fn jf(&self) -> f64 {
        self.j as f64
    }

    fn mu(&self) -> Result<f64> {
        match self.mu_k0 {
            Some(m) if m > 0.0 => Ok(m),
            _ => Err(Error::InvalidParameter(
                "a positive mu_K0 is required".into(),
            )),
        }
    }
}

/// `C / (n + (C / zeta)^(1/beta))^beta`.
fn sublinear(c: f64, beta: f64, zeta: f64, n: f64) -> f64 {
    if zeta <= 0.0 {
        return 0.0;
    }
    if c <= 0.0 {
        return if n == 0.0 { zeta } else { 0.0 };
    }
    c / (n + (c / zeta).powf(1.0 / beta)).powf(beta)
}

/// Linear factor while the running bound exceeds `threshold`, then the sublinear curve restarted there.
fn piecewise(zeta0: f64, factor: f64, threshold: f64, c: f64, beta: f64, n: usize) -> f64 {
    let mut z = zeta0;
    for k in 0..n {
        if z > threshold {
            z *= factor;
        } else {
            return sublinear(c, beta, z, (n - k) as f64);
        }
    }
    z
}

/// Linear contraction factor of the large-`zeta0` phase, `1 - (theta/J)(1 - 1/q)`.
pub fn general_linear_factor(b: &RateBundle) -> f64 {
    1.0 - b.theta / b.jf() * (1.0 - 1.0 / b.q)
}

/// `C = (J q / theta)^(q-1) C_K0 R0^q` and `beta = q - 1`.
pub fn general_constants(b: &RateBundle) -> (f64, f64) {
    let beta = b.q - 1.0;
    (
        (b.jf() * b.q / b.theta).powf(beta) * b.c_k0 * b.r0.powf(b.q),
        beta,
    )
}

/// General convex bound.
///
/// When `zeta0 <= C_K0 R0^q` this is `C / (n + (C/zeta0)^(1/beta))^beta`. Otherwise the
/// one-step factor `1 - (theta/J)(1 - 1/q)` is applied while the bound stays above
/// `C_K0 R0^q`, after which the sublinear curve restarts from the current value.
pub fn bound_general(b: &RateBundle, n: usize) -> Result<f64> {
    b.validate()?;
    let (c, beta) = general_constants(b);
    let threshold = b.c_k0 * b.r0.powf(b.q);
    Ok(piecewise(
        b.zeta0,
        general_linear_factor(b),
        threshold,
        c,
        beta,
        n,
    ))
}

/// Bound at iteration `n J` with the `J`-independent constant `C^ = (q/theta)^(q-1) C_K0 R0^q`.
pub fn bound_j_multiple(b: &RateBundle, n: usize) -> Result<f64> {
    b.validate()?;
    let beta = b.q - 1.0;
    let c_hat = (b.q / b.theta).powf(beta) * b.c_k0 * b.r0.powf(b.q);
    Ok(sublinear(c_hat, beta, b.zeta0, n as f64))
}

/// Contraction factor of the sharp bound with `p = q`.
pub fn sharp_eq_factor(b: &RateBundle) -> Result<f64> {
    let mu = b.mu()?;
    let m = if b.c_k0 > 0.0 {
        (mu / (b.q * b.c_k0)).min(1.0)
    } else {
        1.0
    };
    Ok(1.0 - b.theta / b.jf() * (1.0 - 1.0 / b.q) * m.powf(1.0 / (b.q - 1.0)))
}

/// `beta = p(q-1)/(p-q)` and `C` of the sharp bound with `p > q`, plus the linear-phase threshold.
pub fn sharp_gt_constants(b: &RateBundle) -> Result<(f64, f64, f64)> {
    let mu = b.mu()?;
    let p =
        b.p.ok_or_else(|| Error::InvalidParameter("sharp bound needs p".into()))?;
    let q = b.q;
    if p <= q {
        return Err(Error::InvalidParameter(
            "p must exceed q for the sublinear sharp bound".into(),
        ));
    }
    let beta = p * (q - 1.0) / (p - q);
    let tail = (p / mu).powf(q / (p - q)) * b.c_k0.powf(p / (p - q));
    let c = (b.jf() * p * q / ((p - q) * b.theta)).powf(beta) * tail;
    Ok((beta, c, tail))
}

/// Sharpness bound: linear for `p = q`, piecewise sublinear for `p > q`; `p < q` is rejected.
pub fn bound_sharp(b: &RateBundle, n: usize) -> Result<f64> {
    b.validate()?;
    let p =
        b.p.ok_or_else(|| Error::InvalidParameter("sharp bound needs p".into()))?;
    if p < b.q - 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "p = {p} below q = {}",
            b.q
        )));
    }
    if (p - b.q).abs() <= 1e-12 {
        return Ok(b.zeta0 * sharp_eq_factor(b)?.powi(n as i32));
    }
    let (beta, c, threshold) = sharp_gt_constants(b)?;
    Ok(piecewise(
        b.zeta0,
        general_linear_factor(b),
        threshold,
        c,
        beta,
        n,
    ))
}

/// `exp(-n theta (1 - 1/q) min{1, mu/(q C)}^(1/(q-1))) zeta0`, the `p = q` bound at iteration `n J`.
pub fn bound_sharp_j_multiple(b: &RateBundle, n: usize) -> Result<f64> {
    let mu = b.mu()?;
    let m = if b.c_k0 > 0.0 {
        (mu / (b.q * b.c_k0)).min(1.0)
    } else {
        1.0
    };
    Ok((-(n as f64) * b.theta * (1.0 - 1.0 / b.q) * m.powf(1.0 / (b.q - 1.0))).exp() * b.zeta0)
}

/// `p = q` factor with the global constant `C_V` in place of `C_K0` (no clamp).
pub fn sharp_eq_factor_cv(b: &RateBundle) -> Result<f64> {
    let mu = b.mu()?;
    let cv = b
        .c_v
        .ok_or_else(|| Error::InvalidParameter("C_V required".into()))?;
    Ok(1.0 - b.theta / b.jf() * (1.0 - 1.0 / b.q) * (mu / (b.q * cv)).powf(1.0 / (b.q - 1.0)))
}

fn require_q2(b: &RateBundle) -> Result<()> {
    if (b.q - 2.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "strong convexity bound needs q = 2, got {}",
            b.q
        )));
    }
    Ok(())
}

/// `1 - (theta/J) min{1, mu/(C_K0 + mu - mu_F)}`.
pub fn strong_factor(b: &RateBundle) -> Result<f64> {
    require_q2(b)?;
    let mu = b.mu()?;
    let mu_f = b.mu_f_k0.unwrap_or(0.0);
    let denom = b.c_k0 + mu - mu_f;
    let m = if denom > 0.0 {
        (mu / denom).min(1.0)
    } else {
        1.0
    };
    Ok(1.0 - b.theta / b.jf() * m)
}

/// `1 - (theta/J) mu/(C_V + mu - mu_F)` for smooth problems with a global constant.
pub fn strong_factor_cv(b: &RateBundle) -> Result<f64> {
    require_q2(b)?;
    let mu = b.mu()?;
    let cv = b
        .c_v
        .ok_or_else(|| Error::InvalidParameter("C_V required".into()))?;
    Ok(1.0 - b.theta / b.jf() * mu / (cv + mu - b.mu_f_k0.unwrap_or(0.0)))
}

pub fn bound_strong(b: &RateBundle, n: usize) -> Result<f64> {
    b.validate()?;
    Ok(b.zeta0 * strong_factor(b)?.powi(n as i32))
}

/// `zeta0 (1 - theta lambda_min(T) / J)^n`.
pub fn bound_linear_spectral(b: &RateBundle, n: usize) -> Result<f64> {
    let l = b
        .lambda_min_t
        .ok_or_else(|| Error::InvalidParameter("lambda_min(T) required".into()))?;
    Ok(b.zeta0 * (1.0 - b.theta * l / b.jf()).powi(n as i32))
}

/// Which bound a [`BoundCurve`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    General,
    SharpEq,
    SharpGt,
    Strong,
    StrongCv,
    LinearSpectral,
    /// Remark-style `J`-independent curve, indexed by multiples of `J`.
    JMultiple,
}

/// A bound curve `n -> bound` over a fixed bundle.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCurve {
    pub kind: BoundKind,
    pub bundle: RateBundle,
}

impl BoundCurve {
    pub fn new(kind: BoundKind, bundle: RateBundle) -> Result<Self> {
        let c = Self { kind, bundle };
        c.eval(0)?;
        c.eval(1)?;
        Ok(c)
    }

    pub fn eval(&self, n: usize) -> Result<f64> {
        let b = &self.bundle;
        match self.kind {
            BoundKind::General => bound_general(b, n),
            BoundKind::SharpEq | BoundKind::SharpGt => bound_sharp(b, n),
            BoundKind::Strong => bound_strong(b, n),
            BoundKind::StrongCv => Ok(b.zeta0 * strong_factor_cv(b)?.max(0.0).powi(n as i32)),
            BoundKind::LinearSpectral => bound_linear_spectral(b, n),
            BoundKind::JMultiple => bound_j_multiple(b, n),
        }
    }

    /// Values for `n = 0..=n_max`.
    pub fn values(&self, n_max: usize) -> Result<Vec<f64>> {
        (0..=n_max).map(|n| self.eval(n)).collect()
    }

    /// CSV with columns `n,bound`.
    pub fn to_csv(&self, n_max: usize) -> Result<String> {
        let mut s = String::from("n,bound\n");
        for (n, v) in self.values(n_max)?.into_iter().enumerate() {
            s.push_str(&format!("{n},{v:e}\n"));
        }
        Ok(s)
    }
}

/// Smallest eigenvalue of `T = sum_j P_j R_j P_j^T A` and the resulting factor.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralRate {
    pub lambda_min_t: f64,
    pub lambda_max_t: f64,
    /// `max_j lambda_max(R_j A_jj)`.
    pub omega: f64,
    pub theta: f64,
    pub factor: f64,
}

/// `lambda_min(T)` from the symmetric form `L^T B L` (`A = L L^T`, `B = sum_j P_j R_j P_j^T`).
pub fn spectral_rate_linear(
    a: &DMatrix<f64>,
    dec: &Decomposition,
    r: &[DMatrix<f64>],
) -> Result<SpectralRate> {
    let chol = linalg::spd_cholesky(a, "A")?;
    if r.len() != dec.len() {
        return Err(Error::DimensionMismatch {
            expected: dec.len(),
            got: r.len(),
        });
    }
    let n = dec.ambient_dim();
    let mut bsum = DMatrix::zeros(n, n);
    let mut omega: f64 = 0.0;
    for (sub, rj) in dec.subspaces().iter().zip(r) {
        let rchol = linalg::spd_cholesky(rj, "R_j")?;
        let p = sub.prolongation();
        bsum += p * rj * p.transpose();
        // lambda_max(R_j A_jj) = lambda_max(L_r^T A_jj L_r).
        let ajj = p.transpose() * a * p;
        let lr = rchol.l();
        let (_, hi) = linalg::sym_extreme_eigenvalues(&(lr.transpose() * ajj * &lr));
        omega = omega.max(hi);
    }
    let l = chol.l();
    let s = l.transpose() * bsum * &l;
    let s = (&s + s.transpose()) * 0.5;
    let (lo, hi) = linalg::sym_extreme_eigenvalues(&s);
    let th = theta(omega, 2.0)?;
    Ok(SpectralRate {
        lambda_min_t: lo,
        lambda_max_t: hi,
        omega,
        theta: th,
        factor: 1.0 - th * lo / dec.len() as f64,
    })
}

/// Kind of empirical fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `log gap ~ a + n log r`; reports `r`.
    Linear,
    /// `log gap ~ a + s log n`; reports `s` (that is `-beta`).
    Sublinear,
}

/// Result of a least-squares rate fit.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub kind: FitKind,
    /// Contraction factor (linear) or log-log slope (sublinear).
    pub value: f64,
    /// Standard error of `value` from the regression.
    pub std_err: f64,
    /// Root-mean-square residual of the regression.
    pub residual: f64,
    pub window: (usize, usize),
    pub shrunk: bool,
}

/// Fits the gaps `gaps[n]` on `window = (n_start, n_end)` (inclusive).
///
/// The window end is moved before the first nonpositive gap; fewer than three usable
/// points or a nonnegative slope reject the fit.
pub fn fit_rate(gaps: &[f64], kind: FitKind, window: (usize, usize)) -> Result<RateFit> {
    let (start, mut end) = window;
    end = end.min(gaps.len().saturating_sub(1));
    let start = if kind == FitKind::Sublinear {
        start.max(1)
    } else {
        start
    };
    let mut shrunk = end < window.1;
    if let Some(k) = (start..=end).find(|&n| !(gaps[n] > 0.0)) {
        end = k.saturating_sub(1);
        shrunk = true;
    }
    if end < start + 2 {
        return Err(Error::DegenerateFit(format!(
            "fewer than three positive gaps in [{start}, {}]",
            window.1
        )));
    }
    let xs: Vec<f64> = (start..=end)
        .map(|n| match kind {
            FitKind::Linear => n as f64,
            FitKind::Sublinear => (n as f64).ln(),
        })
        .collect();
    let ys: Vec<f64> = (start..=end).map(|n| gaps[n].ln()).collect();
    let m = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let icpt = ym - slope * xm;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum();
    let residual = (ssr / m).sqrt();
    let slope_se = (ssr / (m - 2.0) / sxx).sqrt();
    if !(slope < 0.0) || !(slope.abs() > 10.0 * f64::EPSILON * (1.0 + ym.abs())) {
        return Err(Error::DegenerateFit(format!(
            "gaps are not decreasing (slope {slope:e}, residual {residual:e})"
        )));
    }
    let (value, std_err) = match kind {
        FitKind::Linear => (slope.exp(), slope.exp() * slope_se),
        FitKind::Sublinear => (slope, slope_se),
    };
    Ok(RateFit {
        kind,
        value,
        std_err,
        residual,
        window: (start, end),
        shrunk,
    })
}

/// Fit of the mean curve over replications with a batch-means standard error.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicatedFit {
    pub fit: RateFit,
    /// Standard error of the fitted value across `batches` disjoint replication groups.
    pub batch_std_err: f64,
    pub batches: usize,
}

/// Fits the mean of `runs` (each a gap sequence) and estimates the spread via batch means.
pub fn fit_rate_replicated(
    runs: &[Vec<f64>],
    kind: FitKind,
    window: (usize, usize),
    batches: usize,
) -> Result<ReplicatedFit> {
    if runs.is_empty() {
        return Err(Error::DegenerateFit("no replications".into()));
    }
    let mean = mean_curve(runs);
    let fit = fit_rate(&mean, kind, window)?;
    let batches = batches.clamp(2, runs.len().max(2));
    let size = runs.len() / batches;
    if size == 0 {
        return Ok(ReplicatedFit {
            fit,
            batch_std_err: f64::NAN,
            batches,
        });
    }
    let vals: Vec<f64> = (0..batches)
        .filter_map(|k| {
            fit_rate(
                &mean_curve(&runs[k * size..(k + 1) * size]),
                kind,
                fit.window,
            )
            .ok()
        })
        .map(|f| f.value)
        .collect();
    let nb = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / nb;
    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nb - 1.0);
    Ok(ReplicatedFit {
        fit,
        batch_std_err: (var / nb).sqrt(),
        batches: vals.len(),
    })
}

fn mean_curve(runs: &[Vec<f64>]) -> Vec<f64> {
    let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    (0..len)
        .map(|n| runs.iter().map(|r| r[n]).sum::<f64>() / runs.len() as f64)
        .collect()
}

/// Largest `||v - u||` over recorded points (an under-approximation of `R0`).
pub fn empirical_r0(points: &[Point], u: &Point, norm: &NormSpec) -> Result<f64> {
    let mut r: f64 = 0.0;
    for v in points {
        r = r.max(norm.norm(&(v - u))?);
    }
    Ok(r)
}

/// `p min (f(v) - f(u)) / ||v - u||^p` over points with `v != u`.
pub fn estimate_sharpness(
    points: &[Point],
    u: &Point,
    f: impl Fn(&Point) -> f64,
    norm: &NormSpec,
    p: f64,
) -> Result<f64> {
    let fu = f(u);
    let mut mu = f64::INFINITY;
    for v in points {
        let d = norm.norm(&(v - u))?;
        if d == 0.0 {
            continue;
        }
        mu = mu.min(p * (f(v) - fu) / d.powf(p));
    }
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bundle(zeta0: f64) -> RateBundle {
        RateBundle::new(1.0, 2.0, 2.0, 1.0, 1.0, zeta0, 2).unwrap()
    }

    #[test]
    fn theta_cases() {
        assert_eq!(theta(1.0, 2.0).unwrap(), 1.0);
        assert_eq!(theta(1.5, 2.0).unwrap(), 0.5);
        assert!(theta(2.0 - 1e-9, 2.0).unwrap() < 1e-8);
        assert!(theta(2.0, 2.0).is_err());
        assert!(theta(2.5, 2.0).is_err());
    }

    #[test]
    fn general_examples() {
        let b = bundle(0.25);
        for n in [0usize, 1, 5, 100] {
            assert_abs_diff_eq!(
                bound_general(&b, n).unwrap(),
                4.0 / (n as f64 + 16.0),
                epsilon = 1e-14
            );
        }
        assert_eq!(bound_general(&b, 0).unwrap(), 0.25);
        let big = bundle(3.0);
        assert_eq!(general_linear_factor(&big), 0.75);
        assert_abs_diff_eq!(bound_general(&big, 1).unwrap(), 2.25, epsilon = 1e-15);
    }

    #[test]
    fn sharp_examples() {
        let mut b = bundle(1.0);
        b.p = Some(2.0);
        b.mu_k0 = Some(1.0);
        assert_abs_diff_eq!(sharp_eq_factor(&b).unwrap(), 0.875, epsilon = 1e-15);
        b.mu_k0 = Some(10.0);
        assert_abs_diff_eq!(sharp_eq_factor(&b).unwrap(), 0.75, epsilon = 1e-15);
        b.p = Some(4.0);
        assert_eq!(sharp_gt_constants(&b).unwrap().0, 2.0);
        b.p = Some(1.5);
        assert!(bound_sharp(&b, 1).is_err());
    }

    #[test]
    fn strong_examples() {
        let mut b = bundle(1.0);
        b.mu_k0 = Some(1.0);
        b.mu_f_k0 = Some(1.0);
        assert_eq!(strong_factor(&b).unwrap(), 0.5);
        b.mu_f_k0 = Some(0.0);
        assert_abs_diff_eq!(strong_factor(&b).unwrap(), 1.0 - 0.5 * 0.5, epsilon = 1e-15);
        b.c_k0 = 0.5;
        b.mu_f_k0 = Some(0.75);
        assert_eq!(strong_factor(&b).unwrap(), 0.5);
        b.q = 1.5;
        assert!(strong_factor(&b).is_err());
    }

    #[test]
    fn spectral_examples() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 5.0, 1.0]));
        let dec = Decomposition::from_blocks(3, vec![vec![0, 1], vec![2]]).unwrap();
        let r = vec![
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.2])),
            DMatrix::identity(1, 1),
        ];
        let s = spectral_rate_linear(&a, &dec, &r).unwrap();
        assert_abs_diff_eq!(s.lambda_min_t, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.factor, 0.5, epsilon = 1e-12);

        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let full = Decomposition::from_blocks(2, vec![vec![0, 1]]).unwrap();
        let (lo, hi) = linalg::sym_extreme_eigenvalues(&a);
        let s = spectral_rate_linear(&a, &full, &[DMatrix::identity(2, 2) / hi]).unwrap();
        assert_abs_diff_eq!(s.lambda_min_t, lo / hi, epsilon = 1e-12);
        assert!(spectral_rate_linear(&(-a), &full, &[DMatrix::identity(2, 2)]).is_err());
    }

    #[test]
    fn fit_examples() {
        let g: Vec<f64> = (0..40).map(|n| 3.0 * 0.5f64.powi(n)).collect();
        let f = fit_rate(&g, FitKind::Linear, (0, 39)).unwrap();
        assert_abs_diff_eq!(f.value, 0.5, epsilon = 1e-12);
        let h: Vec<f64> = (0..100_001).map(|n| 4.0 / (n as f64 + 16.0)).collect();
        let s1 = fit_rate(&h, FitKind::Sublinear, (10, 100)).unwrap().value;
        let s2 = fit_rate(&h, FitKind::Sublinear, (1000, 100_000))
            .unwrap()
            .value;
        assert!((s2 + 1.0).abs() < (s1 + 1.0).abs() && (s2 + 1.0).abs() < 0.01);
        assert!(matches!(
            fit_rate(&[1.0; 20], FitKind::Linear, (0, 19)),
            Err(Error::DegenerateFit(_))
        ));
        let mut z = g.clone();
        z[30] = 0.0;
        let f = fit_rate(&z, FitKind::Linear, (0, 39)).unwrap();
        assert!(f.shrunk && f.window.1 == 29);
    }
}
