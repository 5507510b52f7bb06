use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subcorr::checks::{check_descent, psi, schwarz_functional};
use subcorr::problem::{bregman, energy, CompositeProblem, ExactSurrogate, SurrogateFamily};
use subcorr::problems::{
    build_bcd_surrogates, build_linear_surrogates, LassoProblem, LocalOperator, QuadraticProblem,
    SLaplacian,
};
use subcorr::rates::{bound_general, bound_j_multiple, sharp_eq_factor, strong_factor, RateBundle};
use subcorr::{
    expected_next_energy, run_rsc, Decomposition, NormSpec, Point, RngStream, RunOptions, Subspace,
};

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

fn spd(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let b = DMatrix::from_column_slice(n, n, &entries[..n * n]);
    b.transpose() * &b + DMatrix::identity(n, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_self_adjoint(p in vec_strategy(8), x in vec_strategy(4), y in vec_strategy(4)) {
        let pm = DMatrix::from_column_slice(4, 2, &p) + DMatrix::from_fn(4, 2, |i, j| if i == j { 4.0 } else { 0.0 });
        let sub = Subspace::from_matrix(0, pm).unwrap();
        let (x, y) = (Point::from_vec(x), Point::from_vec(y));
        let px = sub.project(&x);
        prop_assert!((sub.project(&px) - &px).norm() <= 1e-10 * (1.0 + x.norm()));
        prop_assert!((px.dot(&y) - x.dot(&sub.project(&y))).abs() <= 1e-9 * (1.0 + x.norm() * y.norm()));
    }

    #[test]
    fn minimal_split_reconstructs(w in vec_strategy(12), overlap in 0usize..3) {
        let dec = Decomposition::overlap_1d(12, 3, overlap).unwrap();
        let w = Point::from_vec(w);
        let parts = dec.min_norm_split(&w).unwrap();
        prop_assert!((dec.assemble(&parts).unwrap() - &w).norm() <= 1e-12 * (1.0 + w.norm()));
    }

    #[test]
    fn weighted_split_reconstructs(w in vec_strategy(6), m in vec_strategy(16)) {
        let dec = Decomposition::from_blocks(6, vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5]]).unwrap();
        let metrics = vec![spd(4, &m), DMatrix::identity(4, 4) * 2.0];
        let w = Point::from_vec(w);
        let parts = dec.weighted_split(&w, &metrics).unwrap();
        prop_assert!((dec.assemble(&parts).unwrap() - &w).norm() <= 1e-9 * (1.0 + w.norm()));
    }

    #[test]
    fn norms_are_homogeneous_and_subadditive(x in vec_strategy(5), y in vec_strategy(5), c in -4.0..4.0f64, a in vec_strategy(25)) {
        let (x, y) = (Point::from_vec(x), Point::from_vec(y));
        let norms = [
            NormSpec::Euclidean,
            NormSpec::weighted(vec![1.0, 2.0, 0.5, 3.0, 1.0]).unwrap(),
            NormSpec::energy(spd(5, &a)).unwrap(),
        ];
        for n in &norms {
            let nx = n.norm(&x).unwrap();
            prop_assert!((n.norm(&(&x * c)).unwrap() - c.abs() * nx).abs() <= 1e-10 * (1.0 + nx));
            prop_assert!(n.norm(&(&x + &y)).unwrap() <= nx + n.norm(&y).unwrap() + 1e-10);
        }
    }

    #[test]
    fn gradients_match_finite_differences(v in vec_strategy(6), d in vec_strategy(6), s in 1.5..4.0f64) {
        let problems: Vec<Arc<dyn CompositeProblem>> = vec![
            Arc::new(SLaplacian::interval(6, s, 1.0).unwrap()),
            Arc::new(LassoProblem::synthetic(8, 6, 0.1, 0.5, 3).unwrap()),
            Arc::new(QuadraticProblem::laplacian_1d(6, Point::from_element(6, 1.0)).unwrap()),
        ];
        let v = Point::from_vec(v) * 0.3;
        let d = Point::from_vec(d);
        let h = 1e-6;
        for p in &problems {
            let fd = (p.smooth(&(&v + &d * h)) - p.smooth(&(&v - &d * h))) / (2.0 * h);
            let an = p.smooth_grad(&v).dot(&d);
            prop_assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "{}: {fd} vs {an}", p.name());
        }
    }

    #[test]
    fn bregman_is_nonnegative(v in vec_strategy(6), w in vec_strategy(6), s in 1.2..5.0f64) {
        let p = SLaplacian::interval(6, s, 1.0).unwrap();
        let v = Point::from_vec(v);
        let b = bregman(&p, &Point::from_vec(w), &v).unwrap();
        prop_assert!(b.value >= -1e-12 * (1.0 + p.smooth(&v).abs()));
    }

    #[test]
    fn local_descent_holds(v in vec_strategy(8), seed in 0u64..1000) {
        let q = Arc::new(QuadraticProblem::laplacian_1d(8, Point::from_element(8, 1.0)).unwrap());
        let dec = Arc::new(Decomposition::overlap_1d(8, 2, 1).unwrap());
        let lin = build_linear_surrogates(q.clone(), dec.clone(), LocalOperator::Damped(1.5)).unwrap();
        let lasso = Arc::new(LassoProblem::synthetic(10, 8, 0.2, 0.0, seed).unwrap());
        let blocks = Arc::new(Decomposition::from_blocks(8, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]).unwrap());
        let bcd = build_bcd_surrogates(lasso.clone(), blocks).unwrap();
        let v = Point::from_vec(v);
        prop_assert!(check_descent(&lin, q.as_ref(), std::slice::from_ref(&v), 1e-9).unwrap().passed());
        prop_assert!(check_descent(&bcd, lasso.as_ref(), &[v], 1e-9).unwrap().passed());
    }

    #[test]
    fn j_multiple_curve_dominates_in_sublinear_regime(
        omega in 0.2..1.8f64, q in 1.1..3.0f64, c in 0.1..10.0f64, r0 in 0.1..3.0f64, frac in 0.01..1.0f64, j in 1usize..8, m in 0usize..50,
    ) {
        let zeta0 = frac * c * r0.powf(q);
        let b = RateBundle::new(omega, 2.0, q, c, r0, zeta0, j).unwrap();
        let hat = bound_j_multiple(&b, m).unwrap();
        let gen = bound_general(&b, m * j).unwrap();
        prop_assert!(hat >= gen - 1e-12 * (1.0 + gen), "{hat} < {gen}");
    }

    #[test]
    fn bounds_decrease_in_n(omega in 0.2..1.8f64, q in 1.1..3.0f64, c in 0.1..10.0f64, r0 in 0.1..3.0f64, zeta0 in 0.0..50.0f64, j in 1usize..8) {
        let b = RateBundle::new(omega, 2.0, q, c, r0, zeta0, j).unwrap();
        let vals: Vec<f64> = (0..100).map(|n| bound_general(&b, n).unwrap()).collect();
        prop_assert!((vals[0] - zeta0).abs() <= 1e-12 * (1.0 + zeta0));
        prop_assert!(vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn strong_factor_never_exceeds_sharp(omega in 0.2..1.8f64, c in 0.01..10.0f64, mu in 0.01..10.0f64, muf in 0.0..1.0f64, j in 1usize..10) {
        let mut b = RateBundle::new(omega, 2.0, 2.0, c, 1.0, 1.0, j).unwrap();
        b.p = Some(2.0);
        b.mu_k0 = Some(mu);
        b.mu_f_k0 = Some(muf * mu);
        prop_assert!(strong_factor(&b).unwrap() <= sharp_eq_factor(&b).unwrap() + 1e-15);
    }
}

/// Brute-force minimum of the Schwarz functional over a grid of splittings, N = 3, J = 2.
#[test]
fn psi_is_the_minimum_over_splittings() {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
    let q = Arc::new(
        QuadraticProblem::new("tri", a, Point::from_column_slice(&[1.0, 0.0, 1.0])).unwrap(),
    );
    let dec = Arc::new(Decomposition::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).unwrap());
    let s = ExactSurrogate::new(q.clone(), dec.clone(), 2.0).unwrap();
    let v = Point::from_column_slice(&[0.3, -0.2, 0.5]);
    let computed = psi(&s, q.as_ref(), &v).unwrap().psi;
    let grid: Vec<f64> = (0..=20).map(|k| -1.0 + 0.1 * k as f64).collect();
    let mut best = f64::INFINITY;
    for &a0 in &grid {
        for &a1 in &grid {
            for &b0 in &grid {
                for &b1 in &grid {
                    let parts = [
                        Point::from_column_slice(&[a0, a1]),
                        Point::from_column_slice(&[b0, b1]),
                    ];
                    let val = schwarz_functional(&s, q.as_ref(), &v, &parts).unwrap();
                    assert!(val >= computed - 1e-7, "grid value {val} beats {computed}");
                    best = best.min(val);
                }
            }
        }
    }
    assert!(best - computed < 0.05);
}

/// The sample mean of one randomized step agrees with the enumerated expectation.
#[test]
fn monte_carlo_matches_enumerated_expectation() {
    let p = Arc::new(SLaplacian::interval(10, 3.0, 1.0).unwrap());
    let dec = Arc::new(Decomposition::overlap_1d(10, 3, 1).unwrap());
    let s = ExactSurrogate::new(p.clone(), dec, 1.5).unwrap();
    let u0 = p.sample_point(&mut ChaCha8Rng::seed_from_u64(1));
    let exact = expected_next_energy(p.as_ref(), &s, &u0).unwrap();
    let m = 3000;
    let vals: Vec<f64> = (0..m)
        .map(|k| {
            run_rsc(
                p.as_ref(),
                &s,
                &u0,
                RunOptions::new(1),
                &mut RngStream::new(k),
            )
            .unwrap()
            .energies[1]
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / m as f64;
    let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    assert!(
        (mean - exact).abs() <= 5.0 * sd / (m as f64).sqrt() + 1e-12,
        "{mean} vs {exact}"
    );
    assert!(exact <= energy(p.as_ref(), &u0).unwrap());
}

#[test]
fn surrogate_families_report_their_constants() {
    let q = Arc::new(QuadraticProblem::laplacian_1d(6, Point::from_element(6, 1.0)).unwrap());
    let dec = Arc::new(Decomposition::overlap_1d(6, 2, 1).unwrap());
    let s = build_linear_surrogates(q, dec, LocalOperator::Exact).unwrap();
    assert_eq!(s.rho(), 2.0);
    assert!((s.omega() - 1.0).abs() < 1e-12);
}
