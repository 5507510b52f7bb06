//! Experiment configuration, read from a single TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Psc,
    Rsc,
    Rpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Consistency,
    Stability,
    Descent,
    OneStep,
    Bounds,
    Duality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Both,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            other => Err(format!(
                "unknown format `{other}` (expected csv, json or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `E(v) = 1/2 v^T diag(d) v - f^T v`.
    Diagonal { diag: Vec<f64>, load: Vec<f64> },
    /// Tridiagonal `(-1, 2, -1)` with constant load.
    Laplacian1d { n: usize, load: f64 },
    /// `1/2 ||M x - b||^2 + mu_f/2 ||x||^2 + lambda ||x||_1` with a synthetic Gaussian design.
    Lasso {
        rows: usize,
        cols: usize,
        lambda: f64,
        mu_f: f64,
        seed: u64,
    },
    /// `sum_e |e| |grad v|^s / s - f^T v` on `n` (1D) or `n x n` (2D) interior nodes.
    SLaplacian {
        dim: usize,
        n: usize,
        s: f64,
        load: f64,
    },
    /// Dirichlet energy with load `f` under `v <= g0 + gx x + gy y` on `n x n` nodes.
    Obstacle {
        n: usize,
        load: f64,
        g0: f64,
        gx: f64,
        gy: f64,
    },
    /// Multinomial logistic regression on Gaussian blobs; RSC runs on the dual, RPR on the primal.
    Logistic {
        n_points: usize,
        dim: usize,
        classes: usize,
        alpha: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecompositionSpec {
    Blocks {
        blocks: Vec<Vec<usize>>,
    },
    Overlap1d {
        subdomains: usize,
        overlap: usize,
    },
    Overlap2d {
        px: usize,
        py: usize,
        overlap: usize,
    },
    /// Contiguous blocks of the given size.
    Contiguous {
        size: usize,
    },
    /// One block per data point (logistic dual).
    SampleBlocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalOperatorSpec {
    Exact,
    Damped,
    Richardson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurrogateSpec {
    /// Exact local minimization. `rho` defaults to the instance value.
    Exact {
        #[serde(default)]
        rho: Option<f64>,
    },
    /// Quadratic surrogates `1/2 <R_j^{-1} w, w>` (quadratic problems only).
    Linear {
        operator: LocalOperatorSpec,
        #[serde(default)]
        scale: Option<f64>,
    },
    /// Block proximal gradient with `tau_j = 1 / L_j` (lasso only).
    Bcd,
    /// Proximal linearization with step `tau` and declared `omega`.
    Prox { tau: f64, omega: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    Zero,
    Point {
        values: Vec<f64>,
    },
    /// `sample_point` of the instance with the given seed.
    Sample {
        seed: u64,
    },
    /// Uniform distribution in every dual block (logistic).
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKindSpec {
    None,
    General,
    Sharp,
    Strong,
    LinearSpectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Euclidean,
    /// `||v||_A` with the constant Hessian of the smooth part.
    Energy,
    /// `sqrt(sum_j L_j ||v_j||^2)` over disjoint blocks (lasso).
    BlockL,
    /// Discrete `|v|_{W^{1,s}}` (s-Laplacian).
    W1s,
}

/// Constants entering the theoretical curve; omitted values are derived or estimated.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub kind: BoundKindSpec,
    #[serde(default = "default_norm")]
    pub norm: NormKind,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub c_k0: Option<f64>,
    #[serde(default)]
    pub mu_k0: Option<f64>,
    #[serde(default)]
    pub mu_f_k0: Option<f64>,
    #[serde(default)]
    pub r0: Option<f64>,
    /// Pairs sampled when estimating `C_K0`.
    #[serde(default = "default_estimation_samples")]
    pub estimation_samples: usize,
}

fn default_norm() -> NormKind {
    NormKind::Euclidean
}

fn default_estimation_samples() -> usize {
    200
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            kind: BoundKindSpec::None,
            norm: NormKind::Euclidean,
            q: None,
            p: None,
            c_k0: None,
            mu_k0: None,
            mu_f_k0: None,
            r0: None,
            estimation_samples: default_estimation_samples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_out_dir() -> String {
    "out".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub algorithm: Algorithm,
    pub n_iter: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// PSC step size, default `1/J`.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    /// Random points per family for the assumption and one-step checks.
    #[serde(default = "default_check_points")]
    pub check_points: usize,
    pub problem: ProblemSpec,
    pub decomposition: DecompositionSpec,
    pub surrogate: SurrogateSpec,
    #[serde(default = "default_start")]
    pub start: StartSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_replications() -> usize {
    1
}

fn default_check_points() -> usize {
    20
}

fn default_start() -> StartSpec {
    StartSpec::Zero
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?;
        cfg.validate()
            .map_err(|m| HarnessError::Config(format!("{origin}: {m}")))?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.replications == 0 {
            return Err("replications must be at least 1".into());
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(format!("tau = {tau} must lie in (0, 1]"));
            }
            if self.algorithm != Algorithm::Psc {
                return Err("tau only applies to algorithm = \"psc\"".into());
            }
        }
        let logistic = matches!(self.problem, ProblemSpec::Logistic { .. });
        if self.algorithm == Algorithm::Rpr && !logistic {
            return Err("algorithm = \"rpr\" needs a split problem (kind = \"logistic\")".into());
        }
        if self.checks.contains(&CheckKind::Duality) && !logistic {
            return Err("the duality check needs kind = \"logistic\"".into());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err("name must be a nonempty file stem".into());
        }
        Ok(())
    }
}
