//! Randomized and parallel subspace correction for convex composite problems
//! `E = F + G`.
//!
//! The crate is organised bottom-up:
//!
//! * [`vecspace`]: points, norms, and space decompositions `V = sum_j V_j`;
//! * [`problem`]: the composite objective, local surrogate families and their solvers;
//! * [`checks`]: numerical verifiers for the surrogate assumptions, `Psi` and `C_K`;
//! * [`algorithms`]: parallel (PSC), randomized (RSC) and randomized Peaceman-Rachford (RPR) drivers;
//! * [`rates`]: theoretical constants, bound curves and empirical rate fits;
//! * [`problems`]: the benchmark instances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod checks;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod problem;
pub mod problems;
pub mod rates;
pub mod vecspace;

pub use algorithms::{
    check_duality, expected_next_energy, run_psc, run_rpr, run_rsc, DualityReport, RngStream,
    RprTrajectory, RunOptions, SplitProblem, Trajectory,
};
pub use checks::{
    check_consistency, check_descent, check_stability, estimate_ck, estimate_rho, psi, CheckReport,
    Violation,
};
pub use error::{Error, Result};
pub use problem::{
    bregman, energy, local_bregman, local_solve, BregmanValue, CompositeProblem, ExactSurrogate,
    LinearSurrogate, LocalSolution, ProxSurrogate, Reference, SolverOptions, SurrogateFamily,
    SurrogateKind,
};
pub use rates::{BoundCurve, BoundKind, RateBundle};
pub use vecspace::{Decomposition, NormSpec, Point, Subspace};

/// Library version recorded in run records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
