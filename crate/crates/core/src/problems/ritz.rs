//! Deep Ritz energy `E(u) = ½∫|u′|² + ¼∫u⁴ − ∫fu` on `[−1, 1]` with
//! `f = π² cos(πx) + cos³(πx)`; the minimiser is `u* = cos(πx)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{
    symmetric_sum, Assembled, CollocationSet, ExactSample, GramNeeds, ProblemConfig, ProblemError,
};
use crate::linalg::gram_ata;
use crate::network::{op_jacobian, op_values, op_vjp, LinearOp, ParamVector, PointColumns};
use crate::quadrature::{grid_points, Grid1D};

#[derive(Debug, Clone)]
pub(super) struct RitzData {
    cols: PointColumns,
    weights: Vec<f64>,
    source: Vec<f64>,
}

pub(super) fn source(x: f64) -> f64 {
    let c = (PI * x).cos();
    PI * PI * c + c * c * c
}

pub(super) fn exact(x: &[f64]) -> ExactSample {
    let (s, c) = (PI * x[0]).sin_cos();
    ExactSample {
        value: c,
        grad: [-PI * s, 0.0],
    }
}

/// Euler–Lagrange residual `−u*″ + u*³ − f`.
pub(super) fn exact_residual(x: &[f64]) -> f64 {
    let c = (PI * x[0]).cos();
    PI * PI * c + c * c * c - source(x[0])
}

pub(super) fn setup(config: &ProblemConfig) -> Result<(CollocationSet, RitzData), ProblemError> {
    let grid = Grid1D::new(-1.0, 1.0, config.ritz_points)?;
    let points = grid_points(&grid);
    let source = grid.points.iter().map(|&x| source(x)).collect();
    let cols = PointColumns::new(&points);
    let colloc = CollocationSet {
        interior: points,
        interior_weights: grid.weights.clone(),
        ..Default::default()
    };
    Ok((
        colloc,
        RitzData {
            cols,
            weights: grid.weights,
            source,
        },
    ))
}

const OPS: [LinearOp; 2] = [
    LinearOp::VALUE,
    LinearOp {
        value: 0.0,
        grad: [1.0, 0.0],
        hess: [0.0, 0.0],
    },
];

fn energy_density(w: f64, f: f64, u: f64, du: f64) -> f64 {
    let u2 = u * u;
    w * (0.5 * du * du + 0.25 * u2 * u2 - f * u)
}

pub(super) fn loss(data: &RitzData, params: &ParamVector) -> f64 {
    let mut out = vec![Vec::new(), Vec::new()];
    op_values(params, &data.cols, &OPS, &mut out);
    let mut e = 0.0;
    for (((w, f), u), du) in data
        .weights
        .iter()
        .zip(&data.source)
        .zip(&out[0])
        .zip(&out[1])
    {
        e += energy_density(*w, *f, *u, *du);
    }
    e
}

/// Discrete energy of any `x ↦ (u, u′)`.
#[cfg(test)]
pub(super) fn energy_of(data: &RitzData, mut u: impl FnMut(f64) -> (f64, f64)) -> f64 {
    let mut e = 0.0;
    for ((x, w), f) in data
        .cols
        .coord(0)
        .iter()
        .zip(&data.weights)
        .zip(&data.source)
    {
        let (u, du) = u(*x);
        e += energy_density(*w, *f, u, du);
    }
    e
}

/// Value and derivative Jacobians (column-major `n × p`) with `u`, `u′`.
fn jacobians(data: &RitzData, params: &ParamVector) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = data.cols.len();
    let p = params.len();
    let mut u = Vec::new();
    let mut du = Vec::new();
    let mut jv = vec![0.0; n * p];
    let mut jd = vec![0.0; n * p];
    op_jacobian(params, &data.cols, &OPS[0], &mut jv, &mut u);
    op_jacobian(params, &data.cols, &OPS[1], &mut jd, &mut du);
    (jv, jd, u, du)
}

/// `∇E = Σ w [(u³ − f) ∂_θu + u′ ∂_θu′]` seeds and the energy.
fn seeds(data: &RitzData, u: &[f64], du: &[f64]) -> (f64, [Vec<f64>; 2]) {
    let n = u.len();
    let mut e = 0.0;
    let mut sv = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let (w, f) = (data.weights[i], data.source[i]);
        e += energy_density(w, f, u[i], du[i]);
        sv.push(w * (u[i] * u[i] * u[i] - f));
        sd.push(w * du[i]);
    }
    (e, [sv, sd])
}

pub(super) fn loss_and_grad(
    data: &RitzData,
    params: &ParamVector,
) -> Result<(f64, Vec<f64>), ProblemError> {
    let mut out = vec![Vec::new(), Vec::new()];
    op_values(params, &data.cols, &OPS, &mut out);
    let (e, seeds) = seeds(data, &out[0], &out[1]);
    let mut grad = vec![0.0; params.len()];
    op_vjp(params, &data.cols, &OPS, &seeds, &mut grad);
    Ok((e, grad))
}

fn scale_rows(jacobian: &mut [f64], n: usize, factors: &[f64]) {
    for col in jacobian.chunks_exact_mut(n) {
        for (v, f) in col.iter_mut().zip(factors) {
            *v *= f;
        }
    }
}

/// The energy is not a sum of squared residuals, so no residual blocks are
/// reported.
pub(super) fn assemble(
    data: &RitzData,
    params: &ParamVector,
    needs: GramNeeds,
) -> Result<Assembled, ProblemError> {
    let p = params.len();
    let n = data.cols.len();
    let (mut jv, mut jd, u, du) = jacobians(data, params);
    let (loss, seeds) = seeds(data, &u, &du);
    let grad: Vec<f64> = (0..p)
        .map(|c| {
            let a: f64 = jv[c * n..(c + 1) * n]
                .iter()
                .zip(&seeds[0])
                .map(|(x, s)| x * s)
                .sum();
            let b: f64 = jd[c * n..(c + 1) * n]
                .iter()
                .zip(&seeds[1])
                .map(|(x, s)| x * s)
                .sum();
            a + b
        })
        .collect();
    let mut gram_energy = None;
    let mut gram_hilbert = None;
    if needs.energy || needs.hilbert {
        let sqrt_w: Vec<f64> = data.weights.iter().map(|w| w.sqrt()).collect();
        scale_rows(&mut jd, n, &sqrt_w);
        let stiffness = gram_ata(&DMatrix::from_vec(n, p, jd));
        scale_rows(&mut jv, n, &sqrt_w);
        // H¹ product ∫ v′w′ + v w
        if needs.hilbert {
            let mass = gram_ata(&DMatrix::from_column_slice(n, p, &jv));
            gram_hilbert = Some(symmetric_sum(p, [stiffness.clone(), mass])?);
        }
        // D²E(u)(v, w) = ∫ v′w′ + 3∫ u² v w
        if needs.energy {
            let f: Vec<f64> = u.iter().map(|u| 3f64.sqrt() * u.abs()).collect();
            scale_rows(&mut jv, n, &f);
            let mass = gram_ata(&DMatrix::from_vec(n, p, jv));
            gram_energy = Some(symmetric_sum(p, [stiffness, mass])?);
        }
    }
    Ok(Assembled {
        loss,
        grad,
        residual_jacobians: Vec::new(),
        gram_energy,
        gram_hilbert,
    })
}
