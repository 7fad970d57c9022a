//! `∂ₜu = ¼ ∂ₓ²u` on `(t, x) ∈ [0,1]²`, `u(0, x) = sin(πx)`, zero spatial
//! boundary values. Points are stored as `(t, x)`.

use std::f64::consts::PI;

use super::{CollocationSet, ExactSample, InnerTerm, ProblemConfig, ProblemError, ResidualTerm};
use crate::network::LinearOp;
use crate::quadrature::{tensor_grid, Grid1D, PointSet, Rect};

const DIFFUSIVITY: f64 = 0.25;

pub(super) fn exact(p: &[f64]) -> ExactSample {
    let (t, x) = (p[0], p[1]);
    let decay = (-PI * PI * t / 4.0).exp();
    let (s, c) = (PI * x).sin_cos();
    ExactSample {
        value: decay * s,
        grad: [-PI * PI / 4.0 * decay * s, PI * decay * c],
    }
}

/// `∂ₜu* − ¼∂ₓ²u*` from the closed-form derivatives.
pub(super) fn exact_residual(p: &[f64]) -> f64 {
    let e = exact(p);
    let uxx = -PI * PI * e.value;
    e.grad[0] - DIFFUSIVITY * uxx
}

/// The heat operator `∂ₜ − ¼∂ₓ²` as a functional of the jet.
pub(super) fn heat_operator() -> LinearOp {
    LinearOp {
        value: 0.0,
        grad: [1.0, 0.0],
        hess: [0.0, -DIFFUSIVITY],
    }
}

/// Interior space-time tensor grid, initial points `(0, xᵢ)` and spatial
/// boundary points `(tᵢ, 0)`, `(tᵢ, 1)`, the latter two equi-spaced with
/// endpoints included.
pub(super) fn collocation(config: &ProblemConfig) -> Result<CollocationSet, ProblemError> {
    let n = config.interior_per_side;
    let (interior, _) = tensor_grid(n, n, Rect::UNIT)?;
    if config.initial_points == 0 {
        return Err(ProblemError::EmptyCollocation("initial"));
    }
    if config.boundary_per_side == 0 {
        return Err(ProblemError::EmptyCollocation("boundary"));
    }
    let xs = line(config.initial_points)?;
    let mut initial = PointSet::new(2);
    for x in &xs {
        initial.push(&[0.0, *x]);
    }
    let ts = line(config.boundary_per_side)?;
    let mut boundary = PointSet::new(2);
    for t in &ts {
        boundary.push(&[*t, 0.0]);
    }
    for t in &ts {
        boundary.push(&[*t, 1.0]);
    }
    let mean = |n: usize| vec![1.0 / n as f64; n];
    Ok(CollocationSet {
        interior_weights: mean(interior.len()),
        interior,
        boundary_weights: mean(boundary.len()),
        boundary,
        initial_weights: mean(initial.len()),
        initial,
    })
}

fn line(n: usize) -> Result<Vec<f64>, ProblemError> {
    if n == 1 {
        return Ok(vec![0.5]);
    }
    Ok(Grid1D::new(0.0, 1.0, n)?.points)
}

pub(super) fn residual_terms(c: &CollocationSet) -> Vec<ResidualTerm> {
    vec![
        ResidualTerm::new(
            "interior",
            c.interior.clone(),
            c.interior_weights.clone(),
            heat_operator(),
            vec![0.0; c.interior.len()],
        ),
        ResidualTerm::new(
            "initial",
            c.initial.clone(),
            c.initial_weights.clone(),
            LinearOp::VALUE,
            c.initial.iter().map(|p| (PI * p[1]).sin()).collect(),
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

/// Same term structure as the energy product with the interior operator
/// replaced by value, `∂ₜ`, `∂ₓ` and `∂ₓ²`.
pub(super) fn hilbert_terms(c: &CollocationSet) -> Vec<InnerTerm> {
    vec![
        InnerTerm::new(
            "interior",
            c.interior.clone(),
            c.interior_weights.clone(),
            vec![
                LinearOp::VALUE,
                LinearOp::partial(0),
                LinearOp::partial(1),
                LinearOp::second_partial(1),
            ],
        ),
        InnerTerm::new(
            "initial",
            c.initial.clone(),
            c.initial_weights.clone(),
            vec![LinearOp::VALUE],
        ),
        InnerTerm::new(
            "boundary",
            c.boundary.clone(),
            c.boundary_weights.clone(),
            vec![LinearOp::VALUE],
        ),
    ]
}
