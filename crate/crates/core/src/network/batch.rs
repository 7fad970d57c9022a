//! Vectorisable evaluation of linear functionals of `u_θ` over whole point
//! sets. Points are stored as coordinate columns and each neuron is swept
//! over a block of points, so the inner loops are plain slice arithmetic.

use super::{activation, LinearOp, ParamVector, MAX_DIM};
use crate::quadrature::PointSet;

const BLOCK: usize = 512;

/// Defines a public kernel that runs an AVX-512 or AVX2 compiled copy of
/// `$imp` when the CPU supports it. All copies perform the same IEEE
/// operations, so results do not depend on the path taken.
macro_rules! dispatch {
    ($(#[$m:meta])* $name:ident => $imp:ident ($($arg:ident : $ty:ty),*)) => {
        $(#[$m])*
        pub fn $name($($arg: $ty),*) {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx512f")]
                unsafe fn wide($($arg: $ty),*) {
                    $imp($($arg),*)
                }
                #[target_feature(enable = "avx2")]
                unsafe fn narrow($($arg: $ty),*) {
                    $imp($($arg),*)
                }
                if std::is_x86_feature_detected!("avx512f") {
                    return unsafe { wide($($arg),*) };
                }
                if std::is_x86_feature_detected!("avx2") {
                    return unsafe { narrow($($arg),*) };
                }
            }
            $imp($($arg),*)
        }
    };
}

dispatch!(
    /// `opⱼ(u_θ)` at every point for each functional; `out[j]` is overwritten.
    op_values => op_values_impl(params: &ParamVector, cols: &PointColumns, ops: &[LinearOp], out: &mut [Vec<f64>])
);

dispatch!(
    /// `op(u_θ)` at every point and its parameter Jacobian, column-major
    /// (`jacobian[col · n + i]`, `n` points by `p` parameters).
    op_jacobian => op_jacobian_impl(params: &ParamVector, cols: &PointColumns, op: &LinearOp, jacobian: &mut [f64], values: &mut Vec<f64>)
);

dispatch!(
    /// Adds `Σⱼ Σᵢ seedsⱼ[i] ∂_θ(opⱼ u_θ)(xᵢ)` to `grad` without forming the
    /// Jacobian.
    op_vjp => op_vjp_impl(params: &ParamVector, cols: &PointColumns, ops: &[LinearOp], seeds: &[Vec<f64>], grad: &mut [f64])
);

/// Coordinate columns of a point set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointColumns {
    dim: usize,
    cols: [Vec<f64>; MAX_DIM],
}

impl PointColumns {
    pub fn new(points: &PointSet) -> Self {
        let dim = points.dim();
        let mut cols: [Vec<f64>; MAX_DIM] = Default::default();
        for m in 0..dim.min(MAX_DIM) {
            cols[m] = points.iter().map(|p| p[m]).collect();
        }
        Self { dim, cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cols[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, m: usize) -> &[f64] {
        &self.cols[m]
    }
}

/// Per-neuron constants of `op` applied to `c_k tanh(w_k·x + b_k)`:
/// the response is `α t + β s₁ + γ s₂` with `β = Σ opₘ' wₘ`, `γ = Σ opₘ'' wₘ²`.
#[derive(Clone, Copy)]
struct OpCoef {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl OpCoef {
    #[inline(always)]
    fn new(op: &LinearOp, wk: &[f64]) -> Self {
        let mut beta = 0.0;
        let mut gamma = 0.0;
        for (m, w) in wk.iter().enumerate() {
            beta += op.grad[m] * w;
            gamma += op.hess[m] * w * w;
        }
        Self {
            alpha: op.value,
            beta,
            gamma,
        }
    }
}

#[inline(always)]
fn activations(
    params: &ParamVector,
    cols: &PointColumns,
    k: usize,
    range: std::ops::Range<usize>,
    t: &mut [f64],
) {
    let dim = params.arch.input_dim;
    let wk = &params.hidden_weights()[k * dim..(k + 1) * dim];
    let bk = params.hidden_biases()[k];
    let x = &cols.cols[0][range.clone()];
    if dim == 1 {
        for (ti, xi) in t.iter_mut().zip(x) {
            *ti = activation::tanh(wk[0] * xi + bk);
        }
    } else {
        let y = &cols.cols[1][range];
        for ((ti, xi), yi) in t.iter_mut().zip(x).zip(y) {
            *ti = activation::tanh(wk[0] * xi + wk[1] * yi + bk);
        }
    }
}

#[inline(always)]
fn op_values_impl(
    params: &ParamVector,
    cols: &PointColumns,
    ops: &[LinearOp],
    out: &mut [Vec<f64>],
) {
    let n = cols.len();
    let arch = params.arch;
    let dim = arch.input_dim;
    let c = params.output_weights();
    let d = params.output_bias();
    for (o, op) in out.iter_mut().zip(ops) {
        o.clear();
        o.resize(n, op.value * d);
    }
    let mut t = [0.0; BLOCK];
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        let t = &mut t[..end - start];
        for k in 0..arch.width {
            activations(params, cols, k, start..end, t);
            let wk = &params.hidden_weights()[k * dim..(k + 1) * dim];
            for (o, op) in out.iter_mut().zip(ops) {
                let OpCoef { alpha, beta, gamma } = OpCoef::new(op, wk);
                let (a, b, g) = (c[k] * alpha, c[k] * beta, c[k] * gamma);
                for (oi, &ti) in o[start..end].iter_mut().zip(t.iter()) {
                    let s1 = 1.0 - ti * ti;
                    let s2 = -2.0 * ti * s1;
                    *oi += a * ti + b * s1 + g * s2;
                }
            }
        }
    }
}

#[inline(always)]
fn op_jacobian_impl(
    params: &ParamVector,
    cols: &PointColumns,
    op: &LinearOp,
    jacobian: &mut [f64],
    values: &mut Vec<f64>,
) {
    let n = cols.len();
    let arch = params.arch;
    let dim = arch.input_dim;
    let p = arch.param_count();
    assert_eq!(jacobian.len(), n * p);
    let c = params.output_weights();
    let (bo, co) = (arch.bias_offset(), arch.output_weight_offset());
    values.clear();
    values.resize(n, op.value * params.output_bias());
    jacobian[arch.output_bias_index() * n..(arch.output_bias_index() + 1) * n].fill(op.value);
    let mut t = [0.0; BLOCK];
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        let t = &mut t[..end - start];
        for k in 0..arch.width {
            activations(params, cols, k, start..end, t);
            let wk = &params.hidden_weights()[k * dim..(k + 1) * dim];
            let OpCoef { alpha, beta, gamma } = OpCoef::new(op, wk);
            let ck = c[k];
            let col_c = &mut jacobian[(co + k) * n + start..(co + k) * n + end];
            for ((ci, vi), &ti) in col_c.iter_mut().zip(&mut values[start..end]).zip(t.iter()) {
                let s1 = 1.0 - ti * ti;
                let s2 = -2.0 * ti * s1;
                let g = alpha * ti + beta * s1 + gamma * s2;
                *ci = g;
                *vi += ck * g;
            }
            // ∂/∂b_k = c_k (α s₁ + β s₂ + γ s₃)
            let col_b = &mut jacobian[(bo + k) * n + start..(bo + k) * n + end];
            for (bi, &ti) in col_b.iter_mut().zip(t.iter()) {
                let s1 = 1.0 - ti * ti;
                let s2 = -2.0 * ti * s1;
                let s3 = -2.0 * s1 * (1.0 - 3.0 * ti * ti);
                *bi = ck * (alpha * s1 + beta * s2 + gamma * s3);
            }
            // ∂/∂w_kj = ∂/∂b_k · x_j + c_k (opⱼ' s₁ + 2 opⱼ'' w_kj s₂)
            for j in 0..dim {
                let (e1, e2) = (ck * op.grad[j], 2.0 * ck * op.hess[j] * wk[j]);
                let (lo, hi) = jacobian.split_at_mut((bo + k) * n);
                let col_b = &hi[start..end];
                let col_w = &mut lo[(k * dim + j) * n + start..(k * dim + j) * n + end];
                let x = &cols.cols[j][start..end];
                for (((wi, &bi), &xi), &ti) in col_w.iter_mut().zip(col_b).zip(x).zip(t.iter()) {
                    let s1 = 1.0 - ti * ti;
                    let s2 = -2.0 * ti * s1;
                    *wi = bi * xi + e1 * s1 + e2 * s2;
                }
            }
        }
    }
}

/// Sum with eight independent accumulators (vectorises without reassociation
/// permission).
#[inline(always)]
fn lane_sum(v: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let chunks = v.chunks_exact(8);
    let tail: f64 = chunks.remainder().iter().sum();
    for c in chunks {
        for l in 0..8 {
            acc[l] += c[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[inline(always)]
fn op_vjp_impl(
    params: &ParamVector,
    cols: &PointColumns,
    ops: &[LinearOp],
    seeds: &[Vec<f64>],
    grad: &mut [f64],
) {
    let n = cols.len();
    let arch = params.arch;
    let dim = arch.input_dim;
    assert_eq!(grad.len(), arch.param_count());
    let c = params.output_weights();
    let (bo, co) = (arch.bias_offset(), arch.output_weight_offset());
    for (op, s) in ops.iter().zip(seeds) {
        grad[arch.output_bias_index()] += op.value * lane_sum(s);
    }
    let mut t = [0.0; BLOCK];
    let mut gc = [0.0; BLOCK];
    let mut gb = [0.0; BLOCK];
    let mut gw = [[0.0; BLOCK]; MAX_DIM];
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        let len = end - start;
        let t = &mut t[..len];
        for k in 0..arch.width {
            activations(params, cols, k, start..end, t);
            let wk = &params.hidden_weights()[k * dim..(k + 1) * dim];
            gc[..len].fill(0.0);
            gb[..len].fill(0.0);
            for g in gw.iter_mut().take(dim) {
                g[..len].fill(0.0);
            }
            for (op, seed) in ops.iter().zip(seeds) {
                let OpCoef { alpha, beta, gamma } = OpCoef::new(op, wk);
                let seed = &seed[start..end];
                for (((ci, bi), &ti), &si) in gc[..len]
                    .iter_mut()
                    .zip(gb[..len].iter_mut())
                    .zip(t.iter())
                    .zip(seed)
                {
                    let s1 = 1.0 - ti * ti;
                    let s2 = -2.0 * ti * s1;
                    let s3 = -2.0 * s1 * (1.0 - 3.0 * ti * ti);
                    *ci += si * (alpha * ti + beta * s1 + gamma * s2);
                    *bi += si * (alpha * s1 + beta * s2 + gamma * s3);
                }
                for j in 0..dim {
                    let (e1, e2) = (op.grad[j], 2.0 * op.hess[j] * wk[j]);
                    if e1 == 0.0 && e2 == 0.0 {
                        continue;
                    }
                    for ((wi, &ti), &si) in gw[j][..len].iter_mut().zip(t.iter()).zip(seed) {
                        let s1 = 1.0 - ti * ti;
                        let s2 = -2.0 * ti * s1;
                        *wi += si * (e1 * s1 + e2 * s2);
                    }
                }
            }
            grad[co + k] += lane_sum(&gc[..len]);
            grad[bo + k] += c[k] * lane_sum(&gb[..len]);
            for j in 0..dim {
                let x = &cols.cols[j][start..end];
                for ((wi, &bi), &xi) in gw[j][..len].iter_mut().zip(&gb[..len]).zip(x) {
                    *wi += bi * xi;
                }
                grad[k * dim + j] += c[k] * lane_sum(&gw[j][..len]);
            }
        }
    }
}
