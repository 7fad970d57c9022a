//! `−Δu = 2π² sin(πx) sin(πy)` on the unit square with zero Dirichlet data.

use std::f64::consts::PI;

use super::{CollocationSet, ExactSample, InnerTerm, ProblemConfig, ProblemError, ResidualTerm};
use crate::network::LinearOp;
use crate::quadrature::{boundary_grid, tensor_grid, Rect};

pub(super) fn source(x: &[f64]) -> f64 {
    2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()
}

pub(super) fn exact(x: &[f64]) -> ExactSample {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    ExactSample {
        value: sx * sy,
        grad: [PI * cx * sy, PI * sx * cy],
    }
}

/// `Δu* + f` with the closed-form Laplacian `Δu* = −2π² u*`.
pub(super) fn exact_residual(x: &[f64]) -> f64 {
    -2.0 * PI * PI * exact(x).value + source(x)
}

pub(super) fn collocation(config: &ProblemConfig) -> Result<CollocationSet, ProblemError> {
    let n = config.interior_per_side;
    let (interior, _) = tensor_grid(n, n, Rect::UNIT)?;
    let boundary = boundary_grid(config.boundary_per_edge, Rect::UNIT)?;
    if interior.is_empty() {
        return Err(ProblemError::EmptyCollocation("interior"));
    }
    if boundary.is_empty() {
        return Err(ProblemError::EmptyCollocation("boundary"));
    }
    let interior_weights = vec![1.0 / interior.len() as f64; interior.len()];
    let boundary_weights = vec![1.0 / boundary.len() as f64; boundary.len()];
    Ok(CollocationSet {
        interior,
        interior_weights,
        boundary,
        boundary_weights,
        ..Default::default()
    })
}

/// Interior `(Δu + f)²` and boundary `u²`, each averaged over its points.
pub(super) fn residual_terms(c: &CollocationSet) -> Vec<ResidualTerm> {
    vec![
        ResidualTerm::new(
            "interior",
            c.interior.clone(),
            c.interior_weights.clone(),
            LinearOp::laplacian(2),
            c.interior.iter().map(|x| -source(x)).collect(),
        ),
        ResidualTerm::new(
            "boundary",
            c.boundary.clone(),
            c.boundary_weights.clone(),
            LinearOp::VALUE,
            vec![0.0; c.boundary.len()],
        ),
    ]
}

/// Discrete `H²` product on the interior points: value, both first and both
/// pure second derivatives.
pub(super) fn hilbert_terms(c: &CollocationSet) -> Vec<InnerTerm> {
    vec![InnerTerm::new(
        "interior",
        c.interior.clone(),
        c.interior_weights.clone(),
        vec![
            LinearOp::VALUE,
            LinearOp::partial(0),
            LinearOp::partial(1),
            LinearOp::second_partial(0),
            LinearOp::second_partial(1),
        ],
    )]
}
