//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subcorr::algorithms::one_step_bound;
use subcorr::checks::{estimate_ck, psi, schwarz_functional};
use subcorr::problem::{CompositeProblem, ExactSurrogate, SurrogateFamily};
use subcorr::problems::{build_bcd_surrogates, LassoProblem, QuadraticProblem, SLaplacian};
use subcorr::rates::{
    bound_general, bound_j_multiple, fit_rate, fit_rate_replicated, sharp_eq_factor, strong_factor,
    FitKind, RateBundle,
};
use subcorr::{
    expected_next_energy, run_rpr, run_rsc, Decomposition, NormSpec, Point, RngStream, RunOptions,
};
use subcorr_cli::build::{build_instance, Family};
use subcorr_cli::config::{BoundKindSpec, CheckKind, ExperimentConfig, ProblemSpec};
use subcorr_cli::demos::{demo_config, names};
use subcorr_cli::harness::{reference_energy, run_checks, run_replications};
use subcorr_cli::output::to_csv;
use subcorr_cli::run_experiment;

const FAMILIES: [&str; 5] = [
    "quad-overlap",
    "lasso-bcd",
    "slap-1d",
    "obstacle-2d",
    "logistic-dual",
];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn demo(name: &str) -> ExperimentConfig {
    demo_config(name).expect("shipped demo parses")
}

fn with_checks(name: &str, checks: Vec<CheckKind>, points: usize) -> ExperimentConfig {
    let mut c = demo(name);
    c.checks = checks;
    c.check_points = points;
    c
}

/// Local descent inequality at 20 random points per family, every subspace.
fn descent_suite() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for name in FAMILIES {
        let cfg = with_checks(name, vec![CheckKind::Descent], 20);
        let inst = build_instance(&cfg).unwrap();
        let out = run_checks(&cfg, &inst).unwrap();
        if !out[0].passed {
            failed.push(format!("{name}: {}", out[0].summary));
        }
        let p = inst.problem.as_ref();
        let s = inst.surrogate.as_ref();
        let f = 1.0 - s.omega() / s.rho();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
        let pts: Vec<Point> = std::iter::once(inst.start.clone())
            .chain((1..20).map(|_| p.sample_point(&mut rng)))
            .collect();
        for v in &pts {
            for j in 0..s.len() {
                let w = s.solve(j, v).unwrap().w;
                let sub = &inst.decomposition.subspaces()[j];
                let lhs = p.energy_unchecked(v) - p.energy_unchecked(&sub.add_prolonged(v, &w));
                let rhs = f * subcorr::problem::local_bregman_pairing(s, j, &w, v).unwrap();
                worst = worst.min(lhs - rhs);
            }
        }
    }
    let passed = failed.is_empty() && worst >= -1e-9;
    outcome(
        passed,
        format!(
            "min slack {worst:.3e} over 5 families x 20 points x all j{}",
            fmt_fail(&failed)
        ),
    )
}

fn fmt_fail(f: &[String]) -> String {
    if f.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", f.join("; "))
    }
}

/// One-step expectation bound at 20 points per family plus the two-coordinate equality case.
fn one_step_expectation() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for name in FAMILIES {
        let cfg = with_checks(name, vec![], 20);
        let inst = build_instance(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
        let p = inst.problem.as_ref();
        let pts: Vec<Point> = std::iter::once(inst.start.clone())
            .chain((1..20).map(|_| p.sample_point(&mut rng)))
            .collect();
        for v in &pts {
            let b = one_step_bound(p, inst.surrogate.as_ref(), v).unwrap();
            worst = worst.max(b.expected_next - b.rsc_bound);
        }
    }
    let q = Arc::new(QuadraticProblem::diagonal(&[1.0, 1.0], &[0.0, 0.0]).unwrap());
    let dec = Arc::new(Decomposition::from_blocks(2, vec![vec![0], vec![1]]).unwrap());
    let s = ExactSurrogate::new(q.clone(), dec, 2.0).unwrap();
    let v = Point::from_column_slice(&[1.0, 1.0]);
    let exact = expected_next_energy(q.as_ref(), &s, &v).unwrap();
    let b = one_step_bound(q.as_ref(), &s, &v).unwrap();
    let eq = (exact - 0.5).abs().max((b.rsc_bound - 0.5).abs());
    outcome(worst <= 1e-8 && eq <= 1e-12, format!("max excess {worst:.3e} (tol 1e-8); 2D diagonal |E[E(u1)] - 0.5| and |bound - 0.5| <= {eq:.1e}"))
}

/// No energy increase over 100 seeds x 200 iterations per family.
fn monotonicity() -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    for name in FAMILIES {
        let mut cfg = demo(name);
        cfg.replications = 100;
        cfg.n_iter = 200;
        let inst = build_instance(&cfg).unwrap();
        for run in run_replications(&cfg, &inst).unwrap() {
            for w in run.windows(2) {
                worst = worst.max(w[1] - w[0]);
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("largest increase {worst:.3e} (tol 1e-9)"),
    )
}

fn gap_runs(cfg: &ExperimentConfig) -> (Vec<Vec<f64>>, subcorr_cli::Instance) {
    let inst = build_instance(cfg).unwrap();
    let e = reference_energy(cfg, &inst).unwrap();
    let runs = run_replications(cfg, &inst).unwrap();
    (
        runs.into_iter()
            .map(|r| r.into_iter().map(|x| x - e).collect())
            .collect(),
        inst,
    )
}

/// Linear spectral rate on the overlapping 1D Laplacian.
fn linear_spectral_rate() -> Outcome {
    let mut cfg = demo("quad-overlap");
    cfg.checks = vec![CheckKind::Bounds];
    assert_eq!((cfg.replications, cfg.n_iter), (1000, 50));
    let rec = run_experiment(&cfg).unwrap();
    let verdict = rec.bounds.as_ref().unwrap();
    let b = rec.bundle.as_ref().unwrap();
    let theory = 1.0 - b.theta * b.lambda_min_t.unwrap() / b.j as f64;
    let (gaps, _) = gap_runs(&cfg);
    let fit = fit_rate_replicated(&gaps, FitKind::Linear, (0, 50), 20).unwrap();
    let se = fit.batch_std_err.max(fit.fit.std_err);
    let within = (fit.fit.value - theory).abs() <= 3.0 * se;
    outcome(
        verdict.passed && within,
        format!(
            "bound {} (first violation {:?}); fitted factor {:.5} +- {:.1e} vs theoretical {:.5}",
            if verdict.passed { "holds" } else { "violated" },
            verdict.first_violation,
            fit.fit.value,
            se,
            theory
        ),
    )
}

fn mean_below_bound(rec: &subcorr_cli::AggregateRecord) -> (bool, Option<usize>) {
    let first = rec
        .rows
        .iter()
        .find(|r| r.mean_gap.is_nan() || r.mean_gap > r.bound.unwrap() * (1.0 + 1e-12) + 1e-15)
        .map(|r| r.n);
    (first.is_none(), first)
}

/// Strong-convexity rate of block coordinate descent.
fn bcd_strong_rate() -> Outcome {
    let mut cfg = demo("lasso-bcd");
    cfg.checks = vec![];
    assert_eq!(
        (cfg.replications, cfg.n_iter, cfg.bounds.kind),
        (500, 200, BoundKindSpec::Strong)
    );
    let rec = run_experiment(&cfg).unwrap();
    let (ok, first) = mean_below_bound(&rec);
    let b = rec.bundle.unwrap();
    outcome(
        ok,
        format!(
            "factor {:.5} (mu_F = {:.4}, J = {}); first violation {first:?}",
            strong_factor(&b).unwrap(),
            b.mu_f_k0.unwrap(),
            b.j
        ),
    )
}

/// `C_K = 1` in the L-norm on disjoint blocks.
fn bcd_constants() -> Outcome {
    let cfg = demo("lasso-bcd");
    let ProblemSpec::Lasso {
        rows,
        cols,
        lambda,
        mu_f,
        seed,
    } = cfg.problem
    else {
        unreachable!()
    };
    let p = Arc::new(LassoProblem::synthetic(rows, cols, lambda, mu_f, seed).unwrap());
    let dec = Arc::new(
        Decomposition::from_blocks(
            cols,
            (0..cols).step_by(5).map(|s| (s..s + 5).collect()).collect(),
        )
        .unwrap(),
    );
    let s = build_bcd_surrogates(p.clone(), dec.clone()).unwrap();
    let norm = NormSpec::block_l(&dec, &p.block_lipschitz(&dec)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs: Vec<(Point, Point)> = (0..200)
        .map(|_| {
            let v = p.sample_point(&mut rng);
            let w = Point::from_fn(cols, |_, _| rng.random_range(-2.0..2.0));
            (v, w)
        })
        .collect();
    let est = estimate_ck(&s, p.as_ref(), &norm, 2.0, &pairs, 1e-12).unwrap();
    outcome(
        (est.ck - 1.0).abs() <= 1e-6 && est.n_used == 200,
        format!("C_K = {:.12} over {} pairs", est.ck, est.n_used),
    )
}

/// Log-log slope of the mean gap on n in [50, 500] for s = 4 and s = 1.5.
fn sublinear_exponent() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (s, beta) in [(4.0, 1.0), (1.5, 0.5)] {
        let mut cfg = demo("slap-1d");
        if let ProblemSpec::SLaplacian { s: ref mut e, .. } = cfg.problem {
            *e = s;
        }
        assert_eq!((cfg.replications, cfg.n_iter), (200, 500));
        let (gaps, _) = gap_runs(&cfg);
        let len = gaps[0].len();
        let mean: Vec<f64> = (0..len)
            .map(|n| gaps.iter().map(|g| g[n]).sum::<f64>() / gaps.len() as f64)
            .collect();
        match fit_rate(&mean, FitKind::Sublinear, (50, 500)) {
            Ok(f) => {
                let hit = (f.value + beta).abs() <= 0.25;
                ok &= hit;
                parts.push(format!(
                    "s = {s}: slope {:.3} vs {:.2} on [{}, {}]",
                    f.value, -beta, f.window.0, f.window.1
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("s = {s}: {e}"));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

/// Obstacle: feasibility of every iterate and the strong-convexity curve with estimated constants.
fn obstacle() -> Outcome {
    let mut cfg = demo("obstacle-2d");
    cfg.checks = vec![];
    let inst = build_instance(&cfg).unwrap();
    let Family::Obstacle(p) = &inst.family else {
        unreachable!()
    };
    let mut feasible = true;
    for k in 0..cfg.replications as u64 {
        let t = run_rsc(
            p.as_ref(),
            inst.surrogate.as_ref(),
            &inst.start,
            RunOptions::storing(cfg.n_iter, 1),
            &mut RngStream::new(cfg.base_seed + k),
        )
        .unwrap();
        feasible &= t.iterates.iter().all(|(_, v)| {
            v.iter()
                .zip(p.obstacle().iter())
                .all(|(x, g)| *x <= g + 1e-12)
        });
    }
    let rec = run_experiment(&cfg).unwrap();
    let (ok, first) = mean_below_bound(&rec);
    let b = rec.bundle.as_ref().unwrap();
    outcome(
        feasible && ok,
        format!("all iterates feasible: {feasible}; C_K0 = {:.4} (estimated), factor {:.5}; first violation {first:?}", b.c_k0, strong_factor(b).unwrap()),
    )
}

/// Splitting iterates against dual randomized iterates on a shared index sequence.
fn duality() -> Outcome {
    let cfg = demo("logistic-duality-check");
    let inst = build_instance(&cfg).unwrap();
    let Family::Logistic(pair) = &inst.family else {
        unreachable!()
    };
    let sp = &pair.primal;
    let p0 = sp.unstack(&inst.start);
    let u0 = sp.f_conj_grad(&sp.dual_map(&p0));
    let v0: Vec<Point> = sp
        .terms()
        .iter()
        .zip(&p0)
        .map(|((b, _), pj)| -b.tr_mul(pj))
        .collect();
    let primal = run_rpr(sp, &u0, &v0, cfg.n_iter, &mut RngStream::new(cfg.base_seed)).unwrap();
    let ds = ExactSurrogate::new(pair.dual.clone(), pair.dual_dec.clone(), 2.0).unwrap();
    let dual = run_rsc(
        pair.dual.as_ref(),
        &ds,
        &inst.start,
        RunOptions::storing(cfg.n_iter, 1),
        &mut RngStream::new(cfg.base_seed),
    )
    .unwrap();
    let same = primal.trajectory.indices() == dual.indices();
    let dev = dual
        .iterates
        .iter()
        .map(|(n, p)| (&primal.u[*n] - sp.f_conj_grad(&sp.dual_map(&sp.unstack(p)))).norm())
        .fold(0.0, f64::max);
    let dims = (pair.data.len(), pair.data.classes, pair.data.dim());
    outcome(
        dev <= 1e-7 && same && dims == (3, 3, 2),
        format!(
            "max deviation {dev:.3e} over {} iterations, indices shared: {same}",
            cfg.n_iter
        ),
    )
}

/// Internal consistency of the bound formulas over random parameter bundles.
fn bound_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_factor = f64::NEG_INFINITY;
    for _ in 0..100 {
        let q = rng.random_range(1.1..3.0);
        let c = rng.random_range(0.1..10.0);
        let r0 = rng.random_range(0.1..3.0);
        let j = rng.random_range(1..10);
        let zeta0 = rng.random_range(0.01..1.0) * c * f64::powf(r0, q);
        let b = RateBundle::new(rng.random_range(0.1..1.9), 2.0, q, c, r0, zeta0, j).unwrap();
        for m in 0..50 {
            worst = worst.max(bound_general(&b, m * j).unwrap() - bound_j_multiple(&b, m).unwrap());
        }
        let mut s = RateBundle::new(rng.random_range(0.1..1.9), 2.0, 2.0, c, 1.0, 1.0, j).unwrap();
        let mu = rng.random_range(0.01..10.0);
        s.p = Some(2.0);
        s.mu_k0 = Some(mu);
        s.mu_f_k0 = Some(rng.random_range(0.0..1.0) * mu);
        worst_factor = worst_factor.max(strong_factor(&s).unwrap() - sharp_eq_factor(&s).unwrap());
    }
    outcome(
        worst <= 1e-12 && worst_factor <= 0.0,
        format!("max(general - J-multiple) = {worst:.3e}; max(strong - sharp factor) = {worst_factor:.3e}"),
    )
}

/// Grid search over splittings never beats the computed Psi.
fn brute_force_psi() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut cases: Vec<(Arc<dyn CompositeProblem>, Arc<dyn SurrogateFamily>)> = Vec::new();
    let q = Arc::new(QuadraticProblem::laplacian_1d(4, Point::from_element(4, 1.0)).unwrap());
    let dec = Arc::new(Decomposition::from_blocks(4, vec![vec![0, 1, 2], vec![1, 2, 3]]).unwrap());
    cases.push((
        q.clone(),
        Arc::new(ExactSurrogate::new(q, dec.clone(), 2.0).unwrap()),
    ));
    let sl = Arc::new(SLaplacian::interval(4, 3.0, 1.0).unwrap());
    cases.push((
        sl.clone(),
        Arc::new(ExactSurrogate::new(sl, dec, subcorr::problems::slaplacian_rho(3.0)).unwrap()),
    ));
    let la = Arc::new(LassoProblem::synthetic(6, 4, 0.3, 0.1, 4).unwrap());
    let blocks = Arc::new(Decomposition::from_blocks(4, vec![vec![0, 1], vec![2, 3]]).unwrap());
    cases.push((
        la.clone(),
        Arc::new(build_bcd_surrogates(la, blocks).unwrap()),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let offsets = [-0.5, -0.2, -0.05, 0.0, 0.05, 0.2, 0.5];
    for (p, s) in &cases {
        for _ in 0..3 {
            let v = p.sample_point(&mut rng);
            let ps = psi(s.as_ref(), p.as_ref(), &v).unwrap();
            let jg = s.len() as f64 * p.nonsmooth(&v);
            let dims: Vec<usize> = ps.corrections.iter().map(|w| w.len()).collect();
            let total: usize = dims.iter().sum();
            let mut idx = vec![0usize; total];
            loop {
                let mut parts = Vec::new();
                let mut k = 0;
                for (w, &d) in ps.corrections.iter().zip(&dims) {
                    parts.push(DVector::from_fn(d, |i, _| w[i] + offsets[idx[k + i]]));
                    k += d;
                }
                let val = schwarz_functional(s.as_ref(), p.as_ref(), &v, &parts).unwrap() - jg;
                worst = worst.max(ps.psi - val);
                // odometer
                let mut t = 0;
                while t < total {
                    idx[t] += 1;
                    if idx[t] < offsets.len() {
                        break;
                    }
                    idx[t] = 0;
                    t += 1;
                }
                if t == total {
                    break;
                }
            }
        }
    }
    outcome(
        worst <= 1e-7,
        format!("largest improvement over Psi: {worst:.3e} (3 instances, N = 4, J = 2)"),
    )
}

/// Byte-identical CSV across reruns and across thread counts.
fn reproducibility() -> Outcome {
    let mut bad = Vec::new();
    for name in names() {
        let cfg = demo(name);
        let a = to_csv(&run_experiment(&cfg).unwrap());
        let b = to_csv(&run_experiment(&cfg).unwrap());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| to_csv(&run_experiment(&cfg).unwrap()));
        if a != b || a != c {
            bad.push(name.to_string());
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} demos compared (rerun and single-threaded){}",
            names().len(),
            fmt_fail(&bad)
        ),
    )
}

/// Number, name, runtime budget in seconds, body.
type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "local descent suite", 60, descent_suite),
        (2, "exact one-step expectation", 60, one_step_expectation),
        (3, "monotonicity", 180, monotonicity),
        (4, "linear spectral rate", 120, linear_spectral_rate),
        (5, "BCD strong-convexity rate", 120, bcd_strong_rate),
        (6, "BCD constants", 30, bcd_constants),
        (7, "sublinear exponent", 300, sublinear_exponent),
        (8, "obstacle feasibility and rate", 180, obstacle),
        (9, "primal-dual equivalence", 60, duality),
        (10, "bound-internal consistency", 10, bound_consistency),
        (11, "brute-force Schwarz minimum", 120, brute_force_psi),
        (12, "reproducibility", 60, reproducibility),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failures = 0;
    for (id, name, budget, f) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|x| name.contains(x.as_str()) || *x == id.to_string())
        {
            continue;
        }
        let t = Instant::now();
        let out = f();
        let el = t.elapsed();
        let in_time = el <= Duration::from_secs(budget);
        let passed = out.passed && in_time;
        if !passed {
            failures += 1;
        }
        println!(
            "{} criterion {id:>2} ({name}): {} [{:.1} s / {budget} s]",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            el.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
