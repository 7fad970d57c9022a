//! Benchmark problems: PINN formulations of the Poisson and heat equations
//! and a deep Ritz formulation of a nonlinear elliptic problem.
//!
//! Every problem exposes its discrete loss, the exact Euclidean gradient, the
//! energy Gram matrix `D²E(u_θ)(∂ᵢu_θ, ∂ⱼu_θ)` and a Hilbert (Sobolev) Gram
//! matrix, all discretised with the training collocation points, together
//! with relative `L²`/`H¹` errors on a separate evaluation grid.

mod heat;
mod least_squares;
mod norms;
mod poisson;
mod ritz;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{gram_ata, LinalgError, SymMatrix};
use crate::network::{Architecture, NetworkError, ParamVector};
use crate::quadrature::{PointSet, QuadratureError};

pub use least_squares::{InnerTerm, ResidualTerm};
pub use norms::{ErrorNorm, EvalGrid};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("collocation set `{0}` is empty")]
    EmptyCollocation(&'static str),
    #[error("problem {kind} needs input dimension {expected}, architecture has {found}")]
    WrongDim {
        kind: ProblemKind,
        expected: usize,
        found: usize,
    },
    #[error("exact solution fails its residual self-test (max residual {0:e})")]
    ExactSolution(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Poisson2D,
    Heat1D,
    Ritz1D,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [
        ProblemKind::Poisson2D,
        ProblemKind::Heat1D,
        ProblemKind::Ritz1D,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Poisson2D => "poisson2d",
            ProblemKind::Heat1D => "heat1d",
            ProblemKind::Ritz1D => "ritz1d",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ProblemKind::Ritz1D => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "poisson2d" | "poisson" => Ok(ProblemKind::Poisson2D),
            "heat1d" | "heat" => Ok(ProblemKind::Heat1D),
            "ritz1d" | "ritz" | "ritznonlinear1d" => Ok(ProblemKind::Ritz1D),
            other => Err(format!(
                "unknown problem `{other}` (expected poisson2d, heat1d or ritz1d)"
            )),
        }
    }
}

/// Discretisation choices for a problem. Defaults reproduce the benchmark
/// setups; every count can be overridden from the runner config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Hidden width (64 for the PINN problems, 32 for Ritz when unset).
    pub width: Option<usize>,
    /// Interior collocation points per side of the tensor grid.
    pub interior_per_side: usize,
    /// Poisson boundary points per edge.
    pub boundary_per_edge: usize,
    /// Heat initial-condition points.
    pub initial_points: usize,
    /// Heat spatial-boundary points per side.
    pub boundary_per_side: usize,
    /// Ritz trapezoidal quadrature points.
    pub ritz_points: usize,
    /// Error-evaluation points per side (2-D problems).
    pub eval_per_side: usize,
    /// Error-evaluation points (Ritz).
    pub ritz_eval_points: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            width: None,
            interior_per_side: 30,
            boundary_per_edge: 30,
            initial_points: 30,
            boundary_per_side: 30,
            ritz_points: 20_000,
            eval_per_side: 100,
            ritz_eval_points: 10_000,
        }
    }
}

impl ProblemConfig {
    pub fn width_for(&self, kind: ProblemKind) -> usize {
        self.width.unwrap_or(match kind {
            ProblemKind::Ritz1D => 32,
            _ => 64,
        })
    }
}

/// Collocation points with per-point quadrature weights. `initial` is empty
/// unless the problem is time dependent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollocationSet {
    pub interior: PointSet,
    pub interior_weights: Vec<f64>,
    pub boundary: PointSet,
    pub boundary_weights: Vec<f64>,
    pub initial: PointSet,
    pub initial_weights: Vec<f64>,
}

/// Which Gram matrices [`ProblemInstance::assemble`] should build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GramNeeds {
    pub energy: bool,
    pub hilbert: bool,
}

impl GramNeeds {
    pub const NONE: GramNeeds = GramNeeds {
        energy: false,
        hilbert: false,
    };
    pub const ENERGY: GramNeeds = GramNeeds {
        energy: true,
        hilbert: false,
    };
    pub const HILBERT: GramNeeds = GramNeeds {
        energy: false,
        hilbert: true,
    };
    pub const BOTH: GramNeeds = GramNeeds {
        energy: true,
        hilbert: true,
    };
}

/// Per-term residuals and their parameter Jacobian (one row per point).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub name: &'static str,
    pub weights: Vec<f64>,
    pub residuals: Vec<f64>,
    pub jacobian: DMatrix<f64>,
}

impl ResidualBlock {
    /// Builds a block from a column-major `n × p` Jacobian buffer.
    pub fn from_columns(
        name: &'static str,
        weights: Vec<f64>,
        residuals: Vec<f64>,
        jacobian: Vec<f64>,
        p: usize,
    ) -> Self {
        let n = residuals.len();
        Self {
            name,
            weights,
            residuals,
            jacobian: DMatrix::from_vec(n, p, jacobian),
        }
    }

    pub fn rows(&self) -> usize {
        self.residuals.len()
    }

    pub fn cols(&self) -> usize {
        self.jacobian.ncols()
    }

    /// Parameter column `j` of the Jacobian.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.rows();
        &self.jacobian.as_slice()[j * n..(j + 1) * n]
    }

    /// `Jᵀ diag(scale · weights) J`.
    pub fn weighted_gram(&self, scale: f64) -> DMatrix<f64> {
        let mut js = self.jacobian.clone();
        let s: Vec<f64> = self.weights.iter().map(|w| (scale * w).sqrt()).collect();
        for mut col in js.column_iter_mut() {
            for (v, si) in col.iter_mut().zip(&s) {
                *v *= si;
            }
        }
        gram_ata(&js)
    }
}

/// Snapshot of everything an optimizer step needs at one parameter vector.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub residual_jacobians: Vec<ResidualBlock>,
    pub gram_energy: Option<SymMatrix>,
    pub gram_hilbert: Option<SymMatrix>,
}

/// Loss interface consumed by the optimizers.
pub trait Objective {
    fn param_count(&self) -> usize;

    /// Discrete loss; non-finite when the network has diverged.
    fn loss(&self, params: &ParamVector) -> f64;

    fn loss_and_grad(&self, params: &ParamVector) -> Result<(f64, Vec<f64>), ProblemError>;

    fn assemble(&self, params: &ParamVector, needs: GramNeeds) -> Result<Assembled, ProblemError>;

    /// Factor mapping `G⁺∇L` onto the Newton step of the loss. Residual
    /// losses are `L = Σ wᵢ rᵢ²` whose Hessian is twice the Gram matrix, so
    /// they report ½; energies whose Gram is their exact Hessian report 1.
    fn newton_scale(&self) -> f64 {
        1.0
    }
}

/// Closed-form exact solution sample: value and spatial gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExactSample {
    pub value: f64,
    pub grad: [f64; 2],
}

#[derive(Debug, Clone)]
enum Formulation {
    LeastSquares {
        terms: Vec<ResidualTerm>,
        hilbert: Vec<InnerTerm>,
    },
    Ritz(ritz::RitzData),
}

/// A fully discretised benchmark.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    pub arch: Architecture,
    pub collocation: CollocationSet,
    /// Boundary penalty; fixed to 1 with each term averaged over its points.
    pub tau: f64,
    pub eval: EvalGrid,
    formulation: Formulation,
}

impl ProblemInstance {
    pub fn new(kind: ProblemKind, config: &ProblemConfig) -> Result<Self, ProblemError> {
        let arch = Architecture::new(kind.input_dim(), config.width_for(kind))?;
        Self::with_arch(kind, config, arch)
    }

    pub fn with_arch(
        kind: ProblemKind,
        config: &ProblemConfig,
        arch: Architecture,
    ) -> Result<Self, ProblemError> {
        if arch.input_dim() != kind.input_dim() {
            return Err(ProblemError::WrongDim {
                kind,
                expected: kind.input_dim(),
                found: arch.input_dim(),
            });
        }
        let (collocation, formulation, eval) = match kind {
            ProblemKind::Poisson2D => {
                let colloc = poisson::collocation(config)?;
                let f = Formulation::LeastSquares {
                    terms: poisson::residual_terms(&colloc),
                    hilbert: poisson::hilbert_terms(&colloc),
                };
                (colloc, f, EvalGrid::unit_square(config.eval_per_side)?)
            }
            ProblemKind::Heat1D => {
                let colloc = heat::collocation(config)?;
                let f = Formulation::LeastSquares {
                    terms: heat::residual_terms(&colloc),
                    hilbert: heat::hilbert_terms(&colloc),
                };
                (colloc, f, EvalGrid::unit_square(config.eval_per_side)?)
            }
            ProblemKind::Ritz1D => {
                let (colloc, data) = ritz::setup(config)?;
                (
                    colloc,
                    Formulation::Ritz(data),
                    EvalGrid::interval(-1.0, 1.0, config.ritz_eval_points)?,
                )
            }
        };
        let exact = match kind {
            ProblemKind::Poisson2D => poisson::exact,
            ProblemKind::Heat1D => heat::exact,
            ProblemKind::Ritz1D => ritz::exact,
        };
        let eval = eval.with_exact(exact);
        let instance = Self {
            kind,
            arch,
            collocation,
            tau: 1.0,
            eval,
            formulation,
        };
        let worst = instance.exact_residual_check(100, 0xC0FFEE);
        if worst > 1e-8 {
            return Err(ProblemError::ExactSolution(worst));
        }
        Ok(instance)
    }

    /// Exact solution and its gradient at `point`.
    pub fn exact(&self, point: &[f64]) -> ExactSample {
        match self.kind {
            ProblemKind::Poisson2D => poisson::exact(point),
            ProblemKind::Heat1D => heat::exact(point),
            ProblemKind::Ritz1D => ritz::exact(point),
        }
    }

    /// Strong-form PDE residual of the exact solution at an interior point.
    pub fn exact_residual(&self, point: &[f64]) -> f64 {
        match self.kind {
            ProblemKind::Poisson2D => poisson::exact_residual(point),
            ProblemKind::Heat1D => heat::exact_residual(point),
            ProblemKind::Ritz1D => ritz::exact_residual(point),
        }
    }

    /// Largest `|residual|` of the exact solution over `n` random interior
    /// points.
    pub fn exact_residual_check(&self, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let p: Vec<f64> = match self.kind {
                ProblemKind::Ritz1D => vec![rng.random_range(-1.0..1.0)],
                _ => vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
            };
            worst = worst.max(self.exact_residual(&p).abs());
        }
        worst
    }

    pub fn residual_terms(&self) -> &[ResidualTerm] {
        match &self.formulation {
            Formulation::LeastSquares { terms, .. } => terms,
            Formulation::Ritz(_) => &[],
        }
    }

    pub fn hilbert_terms(&self) -> &[InnerTerm] {
        match &self.formulation {
            Formulation::LeastSquares { hilbert, .. } => hilbert,
            Formulation::Ritz(_) => &[],
        }
    }

    fn check_arch(&self, params: &ParamVector) -> Result<(), ProblemError> {
        if params.arch().input_dim() != self.kind.input_dim() {
            return Err(ProblemError::WrongDim {
                kind: self.kind,
                expected: self.kind.input_dim(),
                found: params.arch().input_dim(),
            });
        }
        Ok(())
    }

    /// Relative error `‖u_θ − u*‖ / ‖u*‖` on the evaluation grid.
    pub fn relative_error(
        &self,
        params: &ParamVector,
        norm: ErrorNorm,
    ) -> Result<f64, ProblemError> {
        self.check_arch(params)?;
        let (l2, h1) = self.relative_errors(params)?;
        Ok(match norm {
            ErrorNorm::L2 => l2,
            ErrorNorm::H1 => h1,
        })
    }

    /// Both relative errors from a single pass over the evaluation grid.
    pub fn relative_errors(&self, params: &ParamVector) -> Result<(f64, f64), ProblemError> {
        self.check_arch(params)?;
        Ok(self.eval.network_errors(params))
    }

    /// Relative errors of an arbitrary field sampler (used to check the norm
    /// definitions against synthetic candidates).
    pub fn relative_errors_of<F>(&self, candidate: F) -> (f64, f64)
    where
        F: FnMut(&[f64]) -> ExactSample,
    {
        self.eval.relative_errors(candidate, |x| self.exact(x))
    }
}

impl Objective for ProblemInstance {
    fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    fn loss(&self, params: &ParamVector) -> f64 {
        if self.check_arch(params).is_err() {
            return f64::NAN;
        }
        match &self.formulation {
            Formulation::LeastSquares { terms, .. } => least_squares::loss(terms, params),
            Formulation::Ritz(data) => ritz::loss(data, params),
        }
    }

    fn loss_and_grad(&self, params: &ParamVector) -> Result<(f64, Vec<f64>), ProblemError> {
        self.check_arch(params)?;
        match &self.formulation {
            Formulation::LeastSquares { terms, .. } => least_squares::loss_and_grad(terms, params),
            Formulation::Ritz(data) => ritz::loss_and_grad(data, params),
        }
    }

    fn assemble(&self, params: &ParamVector, needs: GramNeeds) -> Result<Assembled, ProblemError> {
        self.check_arch(params)?;
        match &self.formulation {
            Formulation::LeastSquares { terms, hilbert } => {
                least_squares::assemble(terms, hilbert, params, needs)
            }
            Formulation::Ritz(data) => ritz::assemble(data, params, needs),
        }
    }

    fn newton_scale(&self) -> f64 {
        match self.formulation {
            Formulation::LeastSquares { .. } => 0.5,
            Formulation::Ritz(_) => 1.0,
        }
    }
}

/// Sums a set of `p×p` contributions and mirrors them into a [`SymMatrix`].
pub(crate) fn symmetric_sum(
    p: usize,
    parts: impl IntoIterator<Item = DMatrix<f64>>,
) -> Result<SymMatrix, ProblemError> {
    let mut total = DMatrix::zeros(p, p);
    for part in parts {
        total += part;
    }
    Ok(SymMatrix::from_upper(total)?)
}
