//! Replicated runs, Monte Carlo aggregation, assumption checks and bound comparison.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use subcorr::checks::{
    check_consistency, check_descent, check_stability, estimate_ck, random_samples,
};
use subcorr::problem::ExactSurrogate;
use subcorr::rates::{
    bound_j_multiple, empirical_r0, estimate_sharpness, spectral_rate_linear, BoundCurve,
    BoundKind, RateBundle,
};
use subcorr::{
    algorithms, check_duality, expected_next_energy, run_psc, run_rpr, run_rsc, Point, RngStream,
    RunOptions,
};

use crate::build::{build_instance, build_norm, Family, Instance};
use crate::config::{Algorithm, BoundKindSpec, CheckKind, ExperimentConfig};
use crate::HarnessError;

/// Tolerances of the enabled checks.
pub const CONSISTENCY_TOL: f64 = 1e-9;
pub const STABILITY_REL_TOL: f64 = 1e-9;
pub const DESCENT_TOL: f64 = 1e-9;
pub const ONE_STEP_TOL: f64 = 1e-8;
pub const DUALITY_TOL: f64 = 1e-7;

/// Count, mean, sum of squared deviations, min and max of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Moments {
    fn single(x: f64) -> Self {
        Self {
            count: 1,
            mean: x,
            m2: 0.0,
            min: x,
            max: x,
        }
    }

    /// Combines two disjoint samples.
    pub fn merge(a: Self, b: Self) -> Self {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let n = (a.count + b.count) as f64;
        let delta = b.mean - a.mean;
        Self {
            count: a.count + b.count,
            mean: a.mean + delta * b.count as f64 / n,
            m2: a.m2 + b.m2 + delta * delta * a.count as f64 * b.count as f64 / n,
            min: a.min.min(b.min),
            max: a.max.max(b.max),
        }
    }

    /// Moments by pairwise (tree) reduction in index order.
    pub fn pairwise(xs: &[f64]) -> Self {
        match xs.len() {
            0 => Self {
                count: 0,
                mean: 0.0,
                m2: 0.0,
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            1 => Self::single(xs[0]),
            n => Self::merge(Self::pairwise(&xs[..n / 2]), Self::pairwise(&xs[n / 2..])),
        }
    }

    /// Sample standard deviation (0 for a single value).
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0).sqrt()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationStats {
    pub n: usize,
    pub mean_gap: f64,
    pub std_gap: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub summary: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, summary: String) -> Self {
        Self {
            name: name.into(),
            passed,
            summary,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JMultipleVerdict {
    pub passed: bool,
    pub first_violation: Option<usize>,
    pub checked: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundVerdict {
    pub passed: bool,
    /// First `n` with `mean_gap > bound + 4 std / sqrt(M)`.
    pub first_violation: Option<usize>,
    /// Largest `mean_gap - bound - 4 std / sqrt(M)`.
    pub max_excess: f64,
    pub j_multiple: Option<JMultipleVerdict>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRecord {
    pub name: String,
    pub algorithm: Algorithm,
    pub replications: usize,
    pub base_seed: u64,
    pub reference_energy: f64,
    pub zeta0: f64,
    pub rows: Vec<IterationStats>,
    pub bound_kind: BoundKindSpec,
    pub bundle: Option<RateBundle>,
    /// Where each constant came from: `given`, `derived` or `estimated`.
    pub constant_sources: BTreeMap<String, String>,
    pub checks: Vec<CheckOutcome>,
    pub bounds: Option<BoundVerdict>,
}

impl AggregateRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.bounds.as_ref().is_none_or(|b| b.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.summary))
            .collect();
        if let Some(b) = &self.bounds {
            if !b.passed {
                out.push(match b.first_violation {
                    Some(n) => format!(
                        "bounds: mean gap exceeds the bound first at n = {n} (max excess {:.3e})",
                        b.max_excess
                    ),
                    None => "bounds: J-multiple curve violated".to_string(),
                });
            }
        }
        out
    }
}

/// Per-iteration statistics of gap sequences (all of equal length).
pub fn aggregate(gaps: &[Vec<f64>]) -> Vec<IterationStats> {
    let len = gaps.first().map_or(0, |g| g.len());
    (0..len)
        .map(|n| {
            let col: Vec<f64> = gaps.iter().map(|g| g[n]).collect();
            let m = Moments::pairwise(&col);
            IterationStats {
                n,
                mean_gap: m.mean.clamp(m.min, m.max),
                std_gap: m.std(),
                min_gap: m.min,
                max_gap: m.max,
                bound: None,
            }
        })
        .collect()
}

/// `mean_gap <= bound + 4 std / sqrt(M)` at every `n`, plus the curve at multiples of `J` when given.
pub fn compare_bounds(
    rows: &[IterationStats],
    replications: usize,
    bound: &[f64],
    j_multiple: Option<(usize, &[f64])>,
) -> BoundVerdict {
    let sq = (replications as f64).sqrt();
    let slack = |r: &IterationStats, b: f64| {
        r.mean_gap - b - 4.0 * r.std_gap / sq - 1e-12 * (1.0 + b.abs())
    };
    let mut first = None;
    let mut max_excess = f64::NEG_INFINITY;
    for (r, &b) in rows.iter().zip(bound) {
        let e = slack(r, b);
        max_excess = max_excess.max(e + 1e-12 * (1.0 + b.abs()));
        if e > 0.0 && first.is_none() {
            first = Some(r.n);
        }
    }
    let jm = j_multiple.map(|(j, curve)| {
        let mut fv = None;
        let mut checked = 0;
        for (m, &b) in curve.iter().enumerate() {
            let Some(r) = rows.get(m * j) else { break };
            checked += 1;
            if slack(r, b) > 0.0 && fv.is_none() {
                fv = Some(r.n);
            }
        }
        JMultipleVerdict {
            passed: fv.is_none(),
            first_violation: fv,
            checked,
        }
    });
    BoundVerdict {
        passed: first.is_none() && jm.as_ref().is_none_or(|v| v.passed),
        first_violation: first,
        max_excess,
        j_multiple: jm,
    }
}

fn logistic(inst: &Instance) -> Result<&subcorr::problems::LogisticPair, HarnessError> {
    match &inst.family {
        Family::Logistic(p) => Ok(p),
        _ => Err(HarnessError::Config(
            "this operation needs kind = \"logistic\"".into(),
        )),
    }
}

/// Energy of the minimizer of the problem that `cfg.algorithm` runs on.
pub fn reference_energy(cfg: &ExperimentConfig, inst: &Instance) -> Result<f64, HarnessError> {
    match cfg.algorithm {
        Algorithm::Rpr => {
            let pair = logistic(inst)?;
            Ok(pair.primal.energy(&pair.primal_newton()?))
        }
        _ => Ok(inst.problem.reference()?.energy),
    }
}

/// Energy sequences of `M` replications with seeds `base_seed..base_seed + M`.
pub fn run_replications(
    cfg: &ExperimentConfig,
    inst: &Instance,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let p = inst.problem.as_ref();
    let s = inst.surrogate.as_ref();
    let m = cfg.replications as u64;
    let opts = RunOptions::new(cfg.n_iter);
    let runs: Result<Vec<Vec<f64>>, subcorr::Error> = match cfg.algorithm {
        Algorithm::Psc => {
            // Deterministic: every replication is the same trajectory.
            let tau = cfg.tau.unwrap_or(1.0 / inst.decomposition.len() as f64);
            let t = run_psc(p, s, tau, &inst.start, opts)?;
            Ok(vec![t.energies; cfg.replications])
        }
        Algorithm::Rsc => (0..m)
            .into_par_iter()
            .map(|k| {
                run_rsc(
                    p,
                    s,
                    &inst.start,
                    opts,
                    &mut RngStream::new(cfg.base_seed.wrapping_add(k)),
                )
                .map(|t| t.energies)
            })
            .collect(),
        Algorithm::Rpr => {
            let pair = logistic(inst)?;
            let sp = &pair.primal;
            let p0 = sp.unstack(&inst.start);
            let u0 = sp.f_conj_grad(&sp.dual_map(&p0));
            let v0: Vec<Point> = sp
                .terms()
                .iter()
                .zip(&p0)
                .map(|((b, _), pj)| -b.tr_mul(pj))
                .collect();
            (0..m)
                .into_par_iter()
                .map(|k| {
                    run_rpr(
                        sp,
                        &u0,
                        &v0,
                        cfg.n_iter,
                        &mut RngStream::new(cfg.base_seed.wrapping_add(k)),
                    )
                    .map(|t| t.trajectory.energies)
                })
                .collect()
        }
    };
    Ok(runs?)
}

/// Drops the `name: ` prefix of a core check summary.
fn body(summary: String) -> String {
    summary
        .split_once(": ")
        .map_or(summary.clone(), |(_, b)| b.to_string())
}

fn check_points(cfg: &ExperimentConfig, inst: &Instance) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
    let mut pts = vec![inst.start.clone()];
    pts.extend((1..cfg.check_points.max(1)).map(|_| inst.problem.sample_point(&mut rng)));
    pts
}

/// Runs the enabled assumption, one-step and duality checks.
pub fn run_checks(
    cfg: &ExperimentConfig,
    inst: &Instance,
) -> Result<Vec<CheckOutcome>, HarnessError> {
    let p = inst.problem.as_ref();
    let s = inst.surrogate.as_ref();
    let points = check_points(cfg, inst);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed ^ 0x5eed);
    let mut out = Vec::new();
    for kind in &cfg.checks {
        match kind {
            CheckKind::Consistency => {
                let mut max_dev: f64 = 0.0;
                let mut n = 0;
                let mut failed = Vec::new();
                for v in &points {
                    for j in 0..s.len() {
                        let rep = check_consistency(s, p, v, j, 4, CONSISTENCY_TOL, &mut rng)?;
                        max_dev = max_dev.max(rep.max_deviation);
                        n += rep.n_samples;
                        if !rep.passed() {
                            failed.push(j);
                        }
                    }
                }
                let summary = if failed.is_empty() {
                    format!("no violation found in {n} samples (max deviation {max_dev:.3e})")
                } else {
                    format!(
                        "{} violations in {n} samples (max deviation {max_dev:.3e})",
                        failed.len()
                    )
                };
                out.push(CheckOutcome::new("consistency", failed.is_empty(), summary));
            }
            CheckKind::Stability => {
                let samples = random_samples(s, &points, 4, &[1e-3, 1e-1, 1.0], &mut rng);
                let st = check_stability(s, p, &samples, STABILITY_REL_TOL)?;
                let summary = format!(
                    "{} (empirical omega {:.6}, declared {:.6})",
                    body(st.report.summary()),
                    st.omega_empirical,
                    st.omega_declared
                );
                out.push(CheckOutcome::new("stability", st.report.passed(), summary));
            }
            CheckKind::Descent => {
                let rep = check_descent(s, p, &points, DESCENT_TOL)?;
                out.push(CheckOutcome::new(
                    "descent",
                    rep.passed(),
                    body(rep.summary()),
                ));
            }
            CheckKind::OneStep => {
                let mut worst = f64::NEG_INFINITY;
                for v in &points {
                    let b = algorithms::one_step_bound(p, s, v)?;
                    worst = worst.max(b.expected_next - b.rsc_bound);
                    if cfg.algorithm == Algorithm::Psc {
                        worst = worst.max(b.psc_next - b.psc_bound);
                    }
                }
                let passed = worst <= ONE_STEP_TOL;
                let summary = format!(
                    "max excess over E + (theta/J) Psi: {worst:.3e} at {} points",
                    points.len()
                );
                out.push(CheckOutcome::new("one_step", passed, summary));
            }
            CheckKind::Duality => {
                let pair = logistic(inst)?;
                let ds = ExactSurrogate::new(pair.dual.clone(), pair.dual_dec.clone(), 2.0)?;
                let p0 = pair.primal.unstack(&inst.start);
                let rep = check_duality(
                    &pair.primal,
                    pair.dual.as_ref(),
                    &ds,
                    &p0,
                    cfg.n_iter,
                    cfg.base_seed,
                    DUALITY_TOL,
                )?;
                let summary = format!(
                    "max deviation {:.3e} over {} iterates (threshold {:.0e}), index sequences {}",
                    rep.max_deviation,
                    rep.deviations.len(),
                    rep.threshold,
                    if rep.indices_match { "match" } else { "differ" }
                );
                out.push(CheckOutcome::new("duality", rep.passed(), summary));
            }
            CheckKind::Bounds => {}
        }
    }
    Ok(out)
}

/// Rate constants and the bound curve for `n = 0..=n_iter`.
pub struct BoundTable {
    pub kind: BoundKindSpec,
    pub bundle: RateBundle,
    pub values: Vec<f64>,
    pub j_multiple: Option<Vec<f64>>,
    pub sources: BTreeMap<String, String>,
}

fn source(map: &mut BTreeMap<String, String>, key: &str, given: bool, otherwise: &str) {
    map.insert(
        key.into(),
        if given {
            "given".into()
        } else {
            otherwise.into()
        },
    );
}

/// Assembles the rate bundle from given values, instance-derived values and estimates.
///
/// Estimates use the iterates of one RSC run (seed `base_seed`) from the start point.
pub fn bound_table(
    cfg: &ExperimentConfig,
    inst: &Instance,
    zeta0: f64,
) -> Result<Option<BoundTable>, HarnessError> {
    let spec = &cfg.bounds;
    if spec.kind == BoundKindSpec::None {
        return Ok(None);
    }
    if cfg.algorithm == Algorithm::Rpr {
        return Err(HarnessError::Config(
            "bound curves apply to psc/rsc runs only".into(),
        ));
    }
    let p = inst.problem.as_ref();
    let s = inst.surrogate.as_ref();
    let u = inst.problem.reference()?.u;
    let norm = build_norm(spec.norm, inst)?;
    let every = (cfg.n_iter / spec.estimation_samples.max(1)).max(1);
    let pilot = run_rsc(
        p,
        s,
        &inst.start,
        RunOptions::storing(cfg.n_iter, every),
        &mut RngStream::new(cfg.base_seed),
    )?;
    let points: Vec<Point> = pilot.iterates.into_iter().map(|(_, v)| v).collect();
    let mut sources = BTreeMap::new();

    let (q_default, p_default) = match &inst.family {
        Family::SLaplacian(sl) => {
            let (p, q) = sl.exponents();
            (q, p)
        }
        _ => (2.0, 2.0),
    };
    let q = spec.q.unwrap_or(q_default);
    source(&mut sources, "q", spec.q.is_some(), "derived");

    let c_k0 = match spec.c_k0 {
        Some(c) => c,
        None => {
            let pairs: Vec<(Point, Point)> = points.iter().map(|v| (v.clone(), &u - v)).collect();
            let est = estimate_ck(s, p, &norm, q, &pairs, 1e-12)?;
            if est.n_used == 0 {
                return Err(HarnessError::Config(
                    "no admissible pair for estimating C_K0; give c_k0 explicitly".into(),
                ));
            }
            est.ck
        }
    };
    source(&mut sources, "c_k0", spec.c_k0.is_some(), "estimated");
    let r0 = match spec.r0 {
        Some(r) => r,
        None => empirical_r0(&points, &u, &norm)?,
    };
    source(&mut sources, "r0", spec.r0.is_some(), "estimated");

    let mut bundle = RateBundle::new(
        s.omega(),
        s.rho(),
        q,
        c_k0,
        r0,
        zeta0,
        inst.decomposition.len(),
    )?;
    if matches!(spec.kind, BoundKindSpec::Sharp | BoundKindSpec::Strong) {
        let pp = spec.p.unwrap_or(p_default);
        source(&mut sources, "p", spec.p.is_some(), "derived");
        let derived: Option<(f64, f64)> = match (&inst.family, spec.norm) {
            (Family::Quadratic { .. } | Family::Obstacle(_), crate::config::NormKind::Energy) => {
                Some((1.0, 1.0))
            }
            (Family::Lasso(l), crate::config::NormKind::BlockL) => {
                let m = l.mu_f_in_l_norm(&inst.decomposition)?;
                Some((m, m))
            }
            _ => None,
        };
        let mu = match (spec.mu_k0, derived) {
            (Some(m), _) => {
                source(&mut sources, "mu_k0", true, "");
                m
            }
            (None, Some((m, _))) => {
                source(&mut sources, "mu_k0", false, "derived");
                m
            }
            (None, None) => {
                source(&mut sources, "mu_k0", false, "estimated");
                estimate_sharpness(&points, &u, |v| p.energy_unchecked(v), &norm, pp)?
            }
        };
        let mu_f = match (spec.mu_f_k0, derived) {
            (Some(m), _) => {
                source(&mut sources, "mu_f_k0", true, "");
                m
            }
            (None, Some((_, m))) => {
                source(&mut sources, "mu_f_k0", false, "derived");
                m
            }
            (None, None) => {
                source(&mut sources, "mu_f_k0", false, "assumed zero");
                0.0
            }
        };
        bundle.p = Some(pp);
        bundle.mu_k0 = Some(mu);
        bundle.mu_f_k0 = Some(mu_f);
    }
    let kind = match spec.kind {
        BoundKindSpec::General => BoundKind::General,
        BoundKindSpec::Sharp if (bundle.p.unwrap_or(q) - q).abs() <= 1e-12 => BoundKind::SharpEq,
        BoundKindSpec::Sharp => BoundKind::SharpGt,
        BoundKindSpec::Strong => BoundKind::Strong,
        BoundKindSpec::LinearSpectral => {
            let Family::Quadratic { problem, operators } = &inst.family else {
                return Err(HarnessError::Config(
                    "linear_spectral needs a quadratic problem".into(),
                ));
            };
            if operators.is_empty() {
                return Err(HarnessError::Config(
                    "linear_spectral needs exact or linear surrogates".into(),
                ));
            }
            let sr = spectral_rate_linear(problem.matrix(), &inst.decomposition, operators)?;
            bundle.lambda_min_t = Some(sr.lambda_min_t);
            bundle.omega = sr.omega;
            bundle.theta = sr.theta;
            sources.insert("lambda_min_t".into(), "derived".into());
            BoundKind::LinearSpectral
        }
        BoundKindSpec::None => unreachable!(),
    };
    let curve = BoundCurve::new(kind, bundle.clone())?;
    let values = curve.values(cfg.n_iter)?;
    let j_multiple = if kind == BoundKind::General {
        let jn = inst.decomposition.len();
        Some(
            (0..=cfg.n_iter / jn)
                .map(|m| bound_j_multiple(&bundle, m))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    Ok(Some(BoundTable {
        kind: spec.kind,
        bundle,
        values,
        j_multiple,
        sources,
    }))
}

/// Builds the instance, runs the enabled checks and `M` replications, and compares with the bound.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateRecord, HarnessError> {
    let inst = build_instance(cfg)?;
    let mut checks = run_checks(cfg, &inst)?;
    let reference = reference_energy(cfg, &inst)?;
    let runs = run_replications(cfg, &inst)?;
    let finite = runs.iter().all(|r| r.iter().all(|e| e.is_finite()));
    checks.push(CheckOutcome::new(
        "finite_energies",
        finite,
        if finite {
            "every iterate lies in dom G".into()
        } else {
            "an iterate left dom G".into()
        },
    ));
    let gaps: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.iter().map(|e| e - reference).collect())
        .collect();
    let mut rows = aggregate(&gaps);
    let zeta0 = gaps.first().map_or(0.0, |g| g[0]);

    if cfg.checks.contains(&CheckKind::OneStep)
        && cfg.algorithm == Algorithm::Rsc
        && cfg.n_iter >= 1
        && cfg.replications >= 30
    {
        let exact =
            expected_next_energy(inst.problem.as_ref(), inst.surrogate.as_ref(), &inst.start)?
                - reference;
        let r = &rows[1];
        let allowed =
            4.0 * r.std_gap / (cfg.replications as f64).sqrt() + 1e-12 * (1.0 + exact.abs());
        let dev = (r.mean_gap - exact).abs();
        checks.push(CheckOutcome::new(
            "one_step_mean",
            dev <= allowed,
            format!("|mean gap at n = 1 - exact expectation| = {dev:.3e} (allowed {allowed:.3e})"),
        ));
    }

    let table = bound_table(cfg, &inst, zeta0)?;
    let mut bounds = None;
    let mut bundle = None;
    let mut sources = BTreeMap::new();
    if let Some(t) = table {
        for (r, b) in rows.iter_mut().zip(&t.values) {
            r.bound = Some(*b);
        }
        if cfg.checks.contains(&CheckKind::Bounds) {
            let jm = t
                .j_multiple
                .as_deref()
                .map(|c| (inst.decomposition.len(), c));
            bounds = Some(compare_bounds(&rows, cfg.replications, &t.values, jm));
        }
        bundle = Some(t.bundle);
        sources = t.sources;
    }
    Ok(AggregateRecord {
        name: cfg.name.clone(),
        algorithm: cfg.algorithm,
        replications: cfg.replications,
        base_seed: cfg.base_seed,
        reference_energy: reference,
        zeta0,
        rows,
        bound_kind: cfg.bounds.kind,
        bundle,
        constant_sources: sources,
        checks,
        bounds,
    })
}
