//! Benchmark instances: quadratic (linear) problems, block-separable lasso,
//! the discrete s-Laplacian, the discrete obstacle problem, and multinomial
//! logistic regression with its dual.

pub mod lasso;
pub mod logistic;
pub mod obstacle;
pub mod quadratic;
pub mod slaplacian;

pub use lasso::{build_bcd_surrogates, LassoProblem};
pub use logistic::{build_logistic_pair, Dataset, LogisticDual, LogisticPair, LseTerm};
pub use obstacle::ObstacleProblem;
pub use quadratic::{build_linear_surrogates, LocalOperator, QuadraticProblem};
pub use slaplacian::{slaplacian_rho, SLaplacian};
