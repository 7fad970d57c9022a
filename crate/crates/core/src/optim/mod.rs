//! Energy and Hilbert natural gradient descent with a grid line search,
//! gradient descent with a line search, Adam, and the training loop.

mod adam;
mod line_search;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{pinv_solve_detailed, sym_eig, truncated_solve, LinalgError};
use crate::network::ParamVector;
use crate::problems::{GramNeeds, Objective, ProblemError, ProblemKind};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use line_search::{
    line_search, search, GridScale, GridSpec, LineSearchGrid, LineSearchOutcome,
};
pub use train::{train, train_chain, train_from, TrainOptions, TrainRecord, TrainRow};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("every line-search candidate produced a non-finite loss")]
    LineSearchDiverged,
    #[error("search direction contains non-finite entries")]
    NonFiniteDirection,
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Engd,
    Hngd,
    Gd,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::Engd,
        OptimizerKind::Hngd,
        OptimizerKind::Gd,
        OptimizerKind::Adam,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Engd => "engd",
            OptimizerKind::Hngd => "hngd",
            OptimizerKind::Gd => "gd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn is_natural(&self) -> bool {
        matches!(self, OptimizerKind::Engd | OptimizerKind::Hngd)
    }

    pub fn default_iters(&self, problem: ProblemKind) -> usize {
        match (self, problem) {
            (OptimizerKind::Engd | OptimizerKind::Hngd, ProblemKind::Heat1D) => 2_000,
            (OptimizerKind::Engd | OptimizerKind::Hngd, _) => 500,
            _ => 200_000,
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown optimizer `{s}` (expected engd, hngd, gd or adam)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Iteration budget; the per-problem default when unset.
    pub max_iters: Option<usize>,
    /// Relative eigenvalue cutoff of the pseudo-inverse.
    pub rcond: f64,
    /// Line-search grid; the natural-gradient or gradient-descent default when unset.
    pub grid: Option<GridSpec>,
    pub adam: AdamConfig,
    /// Trace cadence; every iteration for natural gradients, every 100 otherwise, when unset.
    pub log_every: Option<usize>,
    /// Gradient descent searches grid indices within this radius of the
    /// previous step size (widening while the minimum sits on the edge);
    /// `None` searches the whole grid every step.
    pub gd_window: Option<usize>,
    /// Truncation levels tried in order when a natural-gradient line search
    /// makes no real progress at `rcond`.
    pub rcond_fallbacks: Vec<f64>,
}

/// First truncation level of natural-gradient steps, `256·ε`: the cutoff
/// of a default SVD least-squares solve at this problem size.
pub const NGD_RCOND: f64 = 256.0 * f64::EPSILON;

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Engd,
            max_iters: None,
            rcond: NGD_RCOND,
            grid: None,
            adam: AdamConfig::default(),
            log_every: None,
            gd_window: Some(3),
            rcond_fallbacks: vec![1e-12, 1e-10, 1e-8],
        }
    }
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_iters = Some(iters);
        self
    }

    pub fn iters(&self, problem: ProblemKind) -> usize {
        self.max_iters
            .unwrap_or_else(|| self.kind.default_iters(problem))
    }

    pub fn log_every(&self) -> usize {
        self.log_every
            .unwrap_or(if self.kind.is_natural() { 1 } else { 100 })
            .max(1)
    }

    /// `rcond` followed by the fallbacks.
    pub fn rcond_schedule(&self) -> Vec<f64> {
        std::iter::once(self.rcond)
            .chain(self.rcond_fallbacks.iter().copied())
            .collect()
    }

    pub fn line_search_grid(&self) -> Result<LineSearchGrid, OptimError> {
        match (self.grid, self.kind) {
            (Some(spec), _) => LineSearchGrid::from_spec(spec),
            (None, OptimizerKind::Gd) => Ok(LineSearchGrid::extended()),
            (None, _) => Ok(LineSearchGrid::unit_interval()),
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        for &r in std::iter::once(&self.rcond).chain(&self.rcond_fallbacks) {
            if !(r > 0.0 && r < 1.0) {
                return Err(OptimError::InvalidConfig(format!(
                    "rcond must lie in (0, 1), got {r}"
                )));
            }
        }
        let a = &self.adam;
        if !(a.lr0 > 0.0 && a.lr_min > 0.0 && a.decay_factor > 0.0 && a.decay_factor <= 1.0) {
            return Err(OptimError::InvalidConfig(
                "adam learning rates must be positive".into(),
            ));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(OptimError::InvalidConfig(
                "adam betas must lie in [0, 1) and eps be positive".into(),
            ));
        }
        self.line_search_grid().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgdVariant {
    Energy,
    Hilbert,
}

/// Natural-gradient direction `ψ = s · G⁺∇L` where `s` is the objective's
/// Newton scale, so that `η = 1` is the Gauss–Newton step.
#[derive(Debug, Clone)]
pub struct NgdDirection {
    pub psi: Vec<f64>,
    pub grad: Vec<f64>,
    pub loss: f64,
    pub rank: usize,
}

/// Computes the natural-gradient direction. With `mask`, only the listed
/// parameters move: the Gram matrix and gradient are restricted to them and
/// the remaining entries of `ψ` are zero.
pub fn ngd_direction<O: Objective + ?Sized>(
    problem: &O,
    params: &ParamVector,
    variant: NgdVariant,
    rcond: f64,
    mask: Option<&[usize]>,
) -> Result<NgdDirection, OptimError> {
    let needs = match variant {
        NgdVariant::Energy => GramNeeds::ENERGY,
        NgdVariant::Hilbert => GramNeeds::HILBERT,
    };
    let assembled = problem.assemble(params, needs)?;
    let gram = match variant {
        NgdVariant::Energy => assembled.gram_energy,
        NgdVariant::Hilbert => assembled.gram_hilbert,
    }
    .expect("requested Gram matrix is assembled");
    let scale = problem.newton_scale();
    let (psi, rank) = match mask {
        None => {
            let sol = pinv_solve_detailed(&gram, &assembled.grad, rcond)?;
            (sol.solution.iter().map(|v| scale * v).collect(), sol.rank)
        }
        Some(idx) => {
            let sub = gram.submatrix(idx);
            let g: Vec<f64> = idx.iter().map(|&i| assembled.grad[i]).collect();
            let sol = pinv_solve_detailed(&sub, &g, rcond)?;
            let mut psi = vec![0.0; params.len()];
            for (&i, v) in idx.iter().zip(&sol.solution) {
                psi[i] = scale * v;
            }
            (psi, sol.rank)
        }
    };
    Ok(NgdDirection {
        psi,
        grad: assembled.grad,
        loss: assembled.loss,
        rank,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub eta: f64,
    pub loss_before: f64,
    pub loss: f64,
    /// The line search failed and the parameters were kept.
    pub stalled: bool,
    pub grid_index: usize,
    /// Truncation level of the accepted natural-gradient direction.
    pub rcond: f64,
}

fn finish_step(
    params: &ParamVector,
    direction: &[f64],
    loss_before: f64,
    outcome: Result<LineSearchOutcome, OptimError>,
) -> Result<(ParamVector, StepInfo), OptimError> {
    match outcome {
        Ok(o) => {
            let next = params
                .stepped(direction, o.eta)
                .expect("accepted candidate is finite");
            Ok((
                next,
                StepInfo {
                    eta: o.eta,
                    loss_before,
                    loss: o.loss,
                    stalled: false,
                    grid_index: o.index,
                    rcond: 0.0,
                },
            ))
        }
        Err(OptimError::LineSearchDiverged | OptimError::NonFiniteDirection) => Ok((
            params.clone(),
            StepInfo {
                eta: 0.0,
                loss_before,
                loss: loss_before,
                stalled: true,
                grid_index: 0,
                rcond: 0.0,
            },
        )),
        Err(e) => Err(e),
    }
}

/// Relative decrease below which a natural-gradient step counts as stuck.
pub const MIN_RELATIVE_DECREASE: f64 = 1e-8;

/// One natural-gradient step `θ′ = θ − η*ψ` with `η*` from a full search
/// over `grid`. Candidates and the `η = 0` reference both use
/// [`Objective::loss`], so the accepted loss never exceeds the current one.
///
/// `rconds` lists truncation levels: when the best grid point lowers the
/// loss by less than a relative [`MIN_RELATIVE_DECREASE`], the direction is
/// recomputed from the same eigendecomposition with the next level. The
/// lowest loss over the levels tried is accepted.
pub fn ngd_step<O: Objective + ?Sized>(
    problem: &O,
    params: &ParamVector,
    variant: NgdVariant,
    rconds: &[f64],
    grid: &LineSearchGrid,
) -> Result<(ParamVector, StepInfo), OptimError> {
    let needs = match variant {
        NgdVariant::Energy => GramNeeds::ENERGY,
        NgdVariant::Hilbert => GramNeeds::HILBERT,
    };
    let assembled = problem.assemble(params, needs)?;
    let gram = match variant {
        NgdVariant::Energy => assembled.gram_energy,
        NgdVariant::Hilbert => assembled.gram_hilbert,
    }
    .expect("requested Gram matrix is assembled");
    let base = problem.loss(params);
    let stall = StepInfo {
        eta: 0.0,
        loss_before: base,
        loss: base,
        stalled: true,
        grid_index: 0,
        rcond: rconds[0],
    };
    let eig = match sym_eig(&gram) {
        Err(LinalgError::NonFinite { .. }) => return Ok((params.clone(), stall)),
        other => other?,
    };
    let scale = problem.newton_scale();
    let mut best: Option<(Vec<f64>, Result<LineSearchOutcome, OptimError>, f64)> = None;
    for &rcond in rconds {
        let sol = truncated_solve(&eig, &assembled.grad, rcond);
        let psi: Vec<f64> = sol.solution.iter().map(|v| scale * v).collect();
        let outcome = search(|t| problem.loss(t), params, &psi, grid, Some(base), None);
        let reached = match &outcome {
            Ok(o) if o.eta > 0.0 => Some(o.loss),
            _ => None,
        };
        let better = match (&reached, &best) {
            (None, Some(_)) => false,
            (Some(l), Some((_, Ok(b), _))) if b.eta > 0.0 => *l < b.loss,
            _ => true,
        };
        if better {
            best = Some((psi, outcome, rcond));
        }
        if reached.is_some_and(|l| l < base * (1.0 - MIN_RELATIVE_DECREASE)) {
            break;
        }
    }
    let (psi, outcome, rcond) = best.expect("at least one truncation level");
    finish_step(params, &psi, base, outcome).map(|(p, info)| (p, StepInfo { rcond, ..info }))
}

/// One gradient step `θ′ = θ − η*∇L`. `window` restricts the search to
/// `(center index, radius)`, see [`search`].
pub fn gd_step<O: Objective + ?Sized>(
    problem: &O,
    params: &ParamVector,
    grid: &LineSearchGrid,
    window: Option<(usize, usize)>,
) -> Result<(ParamVector, StepInfo), OptimError> {
    let (_, grad) = problem.loss_and_grad(params)?;
    let base = problem.loss(params);
    let outcome = search(|t| problem.loss(t), params, &grad, grid, Some(base), window);
    finish_step(params, &grad, base, outcome)
}
