//! Turns an [`ExperimentConfig`] into problem, decomposition, surrogate and start point.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subcorr::problem::{CompositeProblem, ExactSurrogate, ProxSurrogate, SurrogateFamily};
use subcorr::problems::{
    build_bcd_surrogates, build_linear_surrogates, build_logistic_pair, slaplacian_rho, Dataset,
    LassoProblem, LocalOperator, LogisticPair, ObstacleProblem, QuadraticProblem, SLaplacian,
};
use subcorr::{Decomposition, NormSpec, Point};

use crate::config::{
    DecompositionSpec, ExperimentConfig, LocalOperatorSpec, NormKind, ProblemSpec, StartSpec,
    SurrogateSpec,
};
use crate::HarnessError;

/// Concrete instance behind the trait objects, kept for derived constants and norms.
#[derive(Clone)]
pub enum Family {
    Quadratic {
        problem: Arc<QuadraticProblem>,
        operators: Vec<DMatrix<f64>>,
    },
    Lasso(Arc<LassoProblem>),
    SLaplacian(Arc<SLaplacian>),
    Obstacle(Arc<ObstacleProblem>),
    Logistic(Arc<LogisticPair>),
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Quadratic { .. } => "quadratic",
            Family::Lasso(_) => "lasso",
            Family::SLaplacian(_) => "s-laplacian",
            Family::Obstacle(_) => "obstacle",
            Family::Logistic(_) => "logistic",
        }
    }
}

#[derive(Clone)]
pub struct Instance {
    pub problem: Arc<dyn CompositeProblem>,
    pub decomposition: Arc<Decomposition>,
    pub surrogate: Arc<dyn SurrogateFamily>,
    pub family: Family,
    /// Start point of the (dual, for logistic) problem.
    pub start: Point,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn problem_dims(spec: &ProblemSpec) -> (usize, usize) {
    match spec {
        ProblemSpec::SLaplacian { dim: 2, n, .. } | ProblemSpec::Obstacle { n, .. } => (*n, *n),
        ProblemSpec::SLaplacian { n, .. } => (*n, 1),
        ProblemSpec::Diagonal { diag, .. } => (diag.len(), 1),
        ProblemSpec::Laplacian1d { n, .. } => (*n, 1),
        ProblemSpec::Lasso { cols, .. } => (*cols, 1),
        ProblemSpec::Logistic {
            n_points, classes, ..
        } => (n_points * classes, 1),
    }
}

fn decomposition(cfg: &ExperimentConfig) -> Result<Decomposition, HarnessError> {
    let (nx, ny) = problem_dims(&cfg.problem);
    let n = nx * ny;
    let dec = match &cfg.decomposition {
        DecompositionSpec::Blocks { blocks } => Decomposition::from_blocks(n, blocks.clone())?,
        DecompositionSpec::Overlap1d {
            subdomains,
            overlap,
        } => {
            if ny != 1 {
                return Err(bad("overlap_1d needs a one-dimensional problem"));
            }
            Decomposition::overlap_1d(n, *subdomains, *overlap)?
        }
        DecompositionSpec::Overlap2d { px, py, overlap } => {
            if ny == 1 {
                return Err(bad("overlap_2d needs a two-dimensional grid"));
            }
            Decomposition::overlap_2d(nx, ny, *px, *py, *overlap)?
        }
        DecompositionSpec::Contiguous { size } => {
            if *size == 0 {
                return Err(bad("block size must be positive"));
            }
            let blocks = (0..n)
                .step_by(*size)
                .map(|s| (s..(s + size).min(n)).collect())
                .collect();
            Decomposition::from_blocks(n, blocks)?
        }
        DecompositionSpec::SampleBlocks => {
            let ProblemSpec::Logistic {
                n_points, classes, ..
            } = cfg.problem
            else {
                return Err(bad("sample_blocks needs kind = \"logistic\""));
            };
            Decomposition::from_blocks(
                n,
                (0..n_points)
                    .map(|j| (j * classes..(j + 1) * classes).collect())
                    .collect(),
            )?
        }
    };
    Ok(dec)
}

fn exact(
    problem: Arc<dyn CompositeProblem>,
    dec: Arc<Decomposition>,
    rho: Option<f64>,
    default_rho: f64,
) -> Result<Arc<dyn SurrogateFamily>, HarnessError> {
    Ok(Arc::new(ExactSurrogate::new(
        problem,
        dec,
        rho.unwrap_or(default_rho),
    )?))
}

/// Builds the instance described by `cfg`.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance, HarnessError> {
    let dec = Arc::new(decomposition(cfg)?);
    let (problem, surrogate, family): (
        Arc<dyn CompositeProblem>,
        Arc<dyn SurrogateFamily>,
        Family,
    ) = match &cfg.problem {
        ProblemSpec::Diagonal { .. } | ProblemSpec::Laplacian1d { .. } => {
            let q = Arc::new(match &cfg.problem {
                ProblemSpec::Diagonal { diag, load } => QuadraticProblem::diagonal(diag, load)?,
                ProblemSpec::Laplacian1d { n, load } => {
                    QuadraticProblem::laplacian_1d(*n, Point::from_element(*n, *load))?
                }
                _ => unreachable!(),
            });
            let (s, ops): (Arc<dyn SurrogateFamily>, Vec<DMatrix<f64>>) = match &cfg.surrogate {
                SurrogateSpec::Exact { rho } => {
                    let ops = dec
                        .subspaces()
                        .iter()
                        .map(|sub| {
                            q.local_matrix(sub)
                                .try_inverse()
                                .ok_or_else(|| bad("singular local block"))
                        })
                        .collect::<Result<_, _>>()?;
                    (exact(q.clone(), dec.clone(), *rho, 2.0)?, ops)
                }
                SurrogateSpec::Linear { operator, scale } => {
                    let op = match operator {
                        LocalOperatorSpec::Exact => LocalOperator::Exact,
                        LocalOperatorSpec::Damped => LocalOperator::Damped(
                            scale.ok_or_else(|| bad("damped operator needs scale"))?,
                        ),
                        LocalOperatorSpec::Richardson => LocalOperator::Richardson(
                            scale.ok_or_else(|| bad("richardson operator needs scale"))?,
                        ),
                    };
                    let s = build_linear_surrogates(q.clone(), dec.clone(), op)?;
                    let ops = s.operators().to_vec();
                    (Arc::new(s), ops)
                }
                SurrogateSpec::Prox { tau, omega } => (
                    Arc::new(ProxSurrogate::uniform(
                        q.clone(),
                        dec.clone(),
                        *tau,
                        *omega,
                    )?),
                    Vec::new(),
                ),
                SurrogateSpec::Bcd => return Err(bad("surrogate bcd needs kind = \"lasso\"")),
            };
            (
                q.clone(),
                s,
                Family::Quadratic {
                    problem: q,
                    operators: ops,
                },
            )
        }
        ProblemSpec::Lasso {
            rows,
            cols,
            lambda,
            mu_f,
            seed,
        } => {
            let p = Arc::new(LassoProblem::synthetic(
                *rows, *cols, *lambda, *mu_f, *seed,
            )?);
            let s: Arc<dyn SurrogateFamily> = match &cfg.surrogate {
                SurrogateSpec::Bcd => Arc::new(build_bcd_surrogates(p.clone(), dec.clone())?),
                SurrogateSpec::Exact { rho } => exact(p.clone(), dec.clone(), *rho, 2.0)?,
                SurrogateSpec::Prox { tau, omega } => Arc::new(ProxSurrogate::uniform(
                    p.clone(),
                    dec.clone(),
                    *tau,
                    *omega,
                )?),
                SurrogateSpec::Linear { .. } => {
                    return Err(bad("linear surrogates need a quadratic problem"))
                }
            };
            (p.clone(), s, Family::Lasso(p))
        }
        ProblemSpec::SLaplacian { dim, n, s, load } => {
            let p = Arc::new(match dim {
                1 => SLaplacian::interval(*n, *s, *load)?,
                2 => SLaplacian::square(*n, *s, *load)?,
                d => return Err(bad(format!("s_laplacian dim must be 1 or 2, got {d}"))),
            });
            let sur = match &cfg.surrogate {
                SurrogateSpec::Exact { rho } => {
                    exact(p.clone(), dec.clone(), *rho, slaplacian_rho(*s))?
                }
                _ => {
                    return Err(bad(
                        "the s-Laplacian supports surrogate kind = \"exact\" only",
                    ))
                }
            };
            (p.clone(), sur, Family::SLaplacian(p))
        }
        ProblemSpec::Obstacle {
            n,
            load,
            g0,
            gx,
            gy,
        } => {
            let (g0, gx, gy) = (*g0, *gx, *gy);
            let p = Arc::new(ObstacleProblem::square(*n, *load, move |x| {
                g0 + gx * x[0] + gy * x[1]
            })?);
            let sur = match &cfg.surrogate {
                SurrogateSpec::Exact { rho } => exact(p.clone(), dec.clone(), *rho, 2.0)?,
                _ => {
                    return Err(bad(
                        "the obstacle problem supports surrogate kind = \"exact\" only",
                    ))
                }
            };
            (p.clone(), sur, Family::Obstacle(p))
        }
        ProblemSpec::Logistic {
            n_points,
            dim,
            classes,
            alpha,
            seed,
        } => {
            if *dim > 10 || *classes > 4 || *n_points > 200 {
                return Err(bad(
                    "logistic datasets are limited to dim <= 10, classes <= 4, n_points <= 200",
                ));
            }
            let pair = Arc::new(build_logistic_pair(
                Dataset::blobs(*n_points, *dim, *classes, *seed)?,
                *alpha,
            )?);
            if !matches!(cfg.decomposition, DecompositionSpec::SampleBlocks) {
                return Err(bad(
                    "logistic runs need decomposition kind = \"sample_blocks\"",
                ));
            }
            let sur = match &cfg.surrogate {
                SurrogateSpec::Exact { rho } => {
                    exact(pair.dual.clone(), pair.dual_dec.clone(), *rho, 2.0)?
                }
                _ => {
                    return Err(bad(
                        "the logistic dual supports surrogate kind = \"exact\" only",
                    ))
                }
            };
            (pair.dual.clone(), sur, Family::Logistic(pair))
        }
    };
    let start = start_point(cfg, problem.as_ref(), &family)?;
    Ok(Instance {
        problem,
        decomposition: Arc::new(surrogate.decomposition().clone()),
        surrogate,
        family,
        start,
    })
}

fn start_point(
    cfg: &ExperimentConfig,
    problem: &dyn CompositeProblem,
    family: &Family,
) -> Result<Point, HarnessError> {
    let n = problem.dim();
    let u0 = match &cfg.start {
        StartSpec::Zero => Point::zeros(n),
        StartSpec::Point { values } => {
            if values.len() != n {
                return Err(bad(format!(
                    "start point has {} entries, the problem has dimension {n}",
                    values.len()
                )));
            }
            Point::from_column_slice(values)
        }
        StartSpec::Sample { seed } => problem.sample_point(&mut ChaCha8Rng::seed_from_u64(*seed)),
        StartSpec::Uniform => match family {
            Family::Logistic(pair) => pair.dual.uniform_point(),
            _ => return Err(bad("start kind = \"uniform\" needs kind = \"logistic\"")),
        },
    };
    if !problem.energy_unchecked(&u0).is_finite() {
        return Err(bad("start point is outside the domain of G"));
    }
    Ok(u0)
}

/// Norm used for `C_K0`, `R0` and sharpness constants.
pub fn build_norm(kind: NormKind, inst: &Instance) -> Result<NormSpec, HarnessError> {
    Ok(match kind {
        NormKind::Euclidean => NormSpec::Euclidean,
        NormKind::Energy => {
            let h = inst
                .problem
                .constant_hessian()
                .ok_or_else(|| bad("energy norm needs a quadratic smooth part"))?;
            NormSpec::energy(h)?
        }
        NormKind::BlockL => match &inst.family {
            Family::Lasso(p) => {
                NormSpec::block_l(&inst.decomposition, &p.block_lipschitz(&inst.decomposition))?
            }
            _ => return Err(bad("norm block_l needs kind = \"lasso\"")),
        },
        NormKind::W1s => match &inst.family {
            Family::SLaplacian(p) => NormSpec::w1s(p.operator().clone(), p.exponent())?,
            Family::Obstacle(p) => NormSpec::w1s(p.operator().clone(), 2.0)?,
            _ => return Err(bad("norm w1s needs a grid problem")),
        },
    })
}
