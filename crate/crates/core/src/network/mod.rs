//! Shallow `tanh` networks `u_θ(x) = Σ_k c_k tanh(w_k·x + b_k) + d` with
//! closed-form spatial derivatives and parameter Jacobians.
//!
//! Parameter layout (fixed): hidden weights row-major (`w[k·dim + j]`), then
//! hidden biases `b`, then output weights `c`, then the output bias `d`.

pub mod activation;
mod batch;

pub use batch::{op_jacobian, op_values, op_vjp, PointColumns};

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::quadrature::PointSet;

/// Standard deviation of the Gaussian initialisation.
pub const INIT_STD: f64 = 0.1;

/// Highest supported input dimension.
pub const MAX_DIM: usize = 2;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("input dimension must be 1 or 2, got {0}")]
    UnsupportedDim(usize),
    #[error("width must be positive")]
    ZeroWidth,
    #[error("expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("malformed parameter file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shape of a shallow network. The activation is always `tanh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Architecture {
    input_dim: usize,
    width: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, width: usize) -> Result<Self, NetworkError> {
        if !(1..=MAX_DIM).contains(&input_dim) {
            return Err(NetworkError::UnsupportedDim(input_dim));
        }
        if width == 0 {
            return Err(NetworkError::ZeroWidth);
        }
        Ok(Self { input_dim, width })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(input_dim + 1)·width + width + 1`.
    pub fn param_count(&self) -> usize {
        (self.input_dim + 1) * self.width + self.width + 1
    }

    pub fn bias_offset(&self) -> usize {
        self.input_dim * self.width
    }

    pub fn output_weight_offset(&self) -> usize {
        (self.input_dim + 1) * self.width
    }

    pub fn output_bias_index(&self) -> usize {
        (self.input_dim + 2) * self.width
    }

    /// Indices of the output layer (`c` and `d`), i.e. the parameters a model
    /// with a frozen hidden layer is linear in.
    pub fn output_layer_indices(&self) -> Vec<usize> {
        (self.output_weight_offset()..self.param_count()).collect()
    }
}

/// Flat parameter vector `θ ∈ ℝᵖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    arch: Architecture,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(arch: Architecture, values: Vec<f64>) -> Result<Self, NetworkError> {
        if values.len() != arch.param_count() {
            return Err(NetworkError::DimensionMismatch {
                expected: arch.param_count(),
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(NetworkError::NonFinite { index, value });
        }
        Ok(Self { arch, values })
    }

    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            values: vec![0.0; arch.param_count()],
        }
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.values[..self.arch.bias_offset()]
    }

    pub fn hidden_biases(&self) -> &[f64] {
        &self.values[self.arch.bias_offset()..self.arch.output_weight_offset()]
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.values[self.arch.output_weight_offset()..self.arch.output_bias_index()]
    }

    pub fn output_bias(&self) -> f64 {
        self.values[self.arch.output_bias_index()]
    }

    /// `θ − η·direction`; `None` if the result is not finite.
    pub fn stepped(&self, direction: &[f64], eta: f64) -> Option<ParamVector> {
        debug_assert_eq!(direction.len(), self.values.len());
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(direction)
            .map(|(t, d)| t - eta * d)
            .collect();
        if values.iter().all(|v| v.is_finite()) {
            Some(ParamVector {
                arch: self.arch,
                values,
            })
        } else {
            None
        }
    }

    /// Text checkpoint: a header with the architecture followed by one value
    /// per line in shortest round-trip notation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# engd parameter vector\n");
        let _ = writeln!(out, "input_dim {}", self.arch.input_dim);
        let _ = writeln!(out, "width {}", self.arch.width);
        for v in &self.values {
            let _ = writeln!(out, "{v:e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NetworkError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<usize, NetworkError> {
            let line = lines
                .next()
                .ok_or_else(|| NetworkError::Parse(format!("missing `{key}`")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(NetworkError::Parse(format!(
                    "expected `{key}`, got `{line}`"
                )));
            }
            parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| NetworkError::Parse(format!("bad value in `{line}`")))
        };
        let input_dim = header("input_dim")?;
        let width = header("width")?;
        let arch = Architecture::new(input_dim, width)?;
        let values = lines
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| NetworkError::Parse(format!("`{l}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ParamVector::new(arch, values)
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Gaussian initialisation `N(0, 0.1²)` of every weight and bias from a
/// seeded ChaCha generator.
pub fn init_params(arch: Architecture, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let values = (0..arch.param_count())
        .map(|_| normal.sample(&mut rng))
        .collect();
    ParamVector { arch, values }
}

/// Value, first and pure second spatial derivatives of `u_θ` at a point,
/// plus the parameter Jacobian of each.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub point: Vec<f64>,
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub hess_diag: Vec<f64>,
    /// `∂u/∂θᵢ`, length `p`.
    pub dvalue_dtheta: Vec<f64>,
    /// `∂(∂ₘu)/∂θᵢ` stored at `i·dim + m`.
    pub dgrad_dtheta: Vec<f64>,
    /// `∂(∂ₘ²u)/∂θᵢ` stored at `i·dim + m`.
    pub dhess_dtheta: Vec<f64>,
}

impl Jet {
    pub fn dgrad(&self, i: usize, m: usize) -> f64 {
        self.dgrad_dtheta[i * self.point.len() + m]
    }

    pub fn dhess(&self, i: usize, m: usize) -> f64 {
        self.dhess_dtheta[i * self.point.len() + m]
    }
}

/// Full jet at `point`.
pub fn evaluate_jet(params: &ParamVector, point: &[f64]) -> Result<Jet, NetworkError> {
    let arch = params.arch;
    let dim = arch.input_dim;
    if point.len() != dim {
        return Err(NetworkError::DimensionMismatch {
            expected: dim,
            found: point.len(),
        });
    }
    if let Some((index, &value)) = params
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite())
    {
        return Err(NetworkError::NonFinite { index, value });
    }
    let p = arch.param_count();
    let width = arch.width;
    let w = params.hidden_weights();
    let b = params.hidden_biases();
    let c = params.output_weights();
    let mut jet = Jet {
        point: point.to_vec(),
        value: params.output_bias(),
        grad_x: vec![0.0; dim],
        hess_diag: vec![0.0; dim],
        dvalue_dtheta: vec![0.0; p],
        dgrad_dtheta: vec![0.0; p * dim],
        dhess_dtheta: vec![0.0; p * dim],
    };
    let (bo, co, bias_idx) = (
        arch.bias_offset(),
        arch.output_weight_offset(),
        arch.output_bias_index(),
    );
    for k in 0..width {
        let wk = &w[k * dim..(k + 1) * dim];
        let a: f64 = b[k] + wk.iter().zip(point).map(|(wi, xi)| wi * xi).sum::<f64>();
        let n = NeuronDerivs::new(activation::tanh(a));
        let ck = c[k];
        jet.value += ck * n.t;
        for m in 0..dim {
            jet.grad_x[m] += ck * n.s1 * wk[m];
            jet.hess_diag[m] += ck * n.s2 * wk[m] * wk[m];
        }
        // value
        jet.dvalue_dtheta[co + k] = n.t;
        jet.dvalue_dtheta[bo + k] = ck * n.s1;
        for j in 0..dim {
            jet.dvalue_dtheta[k * dim + j] = ck * n.s1 * point[j];
        }
        for m in 0..dim {
            let wm = wk[m];
            jet.dgrad_dtheta[(co + k) * dim + m] = n.s1 * wm;
            jet.dgrad_dtheta[(bo + k) * dim + m] = ck * n.s2 * wm;
            jet.dhess_dtheta[(co + k) * dim + m] = n.s2 * wm * wm;
            jet.dhess_dtheta[(bo + k) * dim + m] = ck * n.s3 * wm * wm;
            for j in 0..dim {
                let delta = if j == m { 1.0 } else { 0.0 };
                jet.dgrad_dtheta[(k * dim + j) * dim + m] =
                    ck * (n.s2 * point[j] * wm + n.s1 * delta);
                jet.dhess_dtheta[(k * dim + j) * dim + m] =
                    ck * (n.s3 * point[j] * wm * wm + 2.0 * n.s2 * wm * delta);
            }
        }
    }
    jet.dvalue_dtheta[bias_idx] = 1.0;
    Ok(jet)
}

/// `tanh` and its first three derivatives expressed through `t = tanh(a)`.
#[derive(Debug, Clone, Copy)]
struct NeuronDerivs {
    t: f64,
    s1: f64,
    s2: f64,
    s3: f64,
}

impl NeuronDerivs {
    #[inline(always)]
    fn new(t: f64) -> Self {
        let s1 = 1.0 - t * t;
        let s2 = -2.0 * t * s1;
        let s3 = -2.0 * s1 * (1.0 - 3.0 * t * t);
        Self { t, s1, s2, s3 }
    }
}

/// A linear differential functional `α u + Σₘ βₘ ∂ₘu + Σₘ γₘ ∂ₘ²u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearOp {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [f64; MAX_DIM],
}

impl LinearOp {
    pub const VALUE: LinearOp = LinearOp {
        value: 1.0,
        grad: [0.0; MAX_DIM],
        hess: [0.0; MAX_DIM],
    };

    pub fn laplacian(dim: usize) -> Self {
        let mut hess = [0.0; MAX_DIM];
        hess[..dim].fill(1.0);
        LinearOp {
            value: 0.0,
            grad: [0.0; MAX_DIM],
            hess,
        }
    }

    pub fn partial(m: usize) -> Self {
        let mut grad = [0.0; MAX_DIM];
        grad[m] = 1.0;
        LinearOp {
            value: 0.0,
            grad,
            hess: [0.0; MAX_DIM],
        }
    }

    pub fn second_partial(m: usize) -> Self {
        let mut hess = [0.0; MAX_DIM];
        hess[m] = 1.0;
        LinearOp {
            value: 0.0,
            grad: [0.0; MAX_DIM],
            hess,
        }
    }

    /// Applies the functional to already computed fields.
    pub fn apply(&self, f: &Fields) -> f64 {
        let mut v = self.value * f.value;
        for m in 0..MAX_DIM {
            v += self.grad[m] * f.grad[m] + self.hess[m] * f.hess[m];
        }
        v
    }

    pub fn needs_second(&self) -> bool {
        self.hess.iter().any(|&h| h != 0.0)
    }
}

/// Value and spatial derivatives without parameter Jacobians. Unused
/// trailing entries are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Fields {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [f64; MAX_DIM],
}

/// Batched evaluator that reuses a neuron buffer across points.
///
/// Construction validates the parameters once; the per-point methods then
/// trust their inputs.
#[derive(Debug, Clone)]
pub struct NetEval<'a> {
    params: &'a ParamVector,
    buf: Vec<f64>,
}

impl<'a> NetEval<'a> {
    pub fn new(params: &'a ParamVector) -> Result<Self, NetworkError> {
        if let Some((index, &value)) = params
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(NetworkError::NonFinite { index, value });
        }
        Ok(Self {
            params,
            buf: vec![0.0; params.arch.width],
        })
    }

    pub fn params(&self) -> &ParamVector {
        self.params
    }

    #[inline]
    fn activations(&mut self, point: &[f64]) {
        let arch = self.params.arch;
        let dim = arch.input_dim;
        let w = self.params.hidden_weights();
        let b = self.params.hidden_biases();
        if dim == 1 {
            let x = point[0];
            for ((a, wk), bk) in self.buf.iter_mut().zip(w).zip(b) {
                *a = wk * x + bk;
            }
        } else {
            let (x, y) = (point[0], point[1]);
            for ((a, wk), bk) in self.buf.iter_mut().zip(w.chunks_exact(2)).zip(b) {
                *a = wk[0] * x + wk[1] * y + bk;
            }
        }
        activation::tanh_in_place(&mut self.buf);
    }

    /// `u_θ(x)` only.
    pub fn value(&mut self, point: &[f64]) -> f64 {
        self.activations(point);
        let c = self.params.output_weights();
        self.params.output_bias() + self.buf.iter().zip(c).map(|(t, ck)| t * ck).sum::<f64>()
    }

    /// Value, gradient and (when `second` is set) pure second derivatives.
    pub fn fields(&mut self, point: &[f64], second: bool) -> Fields {
        self.activations(point);
        let dim = self.params.arch.input_dim;
        let w = self.params.hidden_weights();
        let c = self.params.output_weights();
        let mut f = Fields {
            value: self.params.output_bias(),
            ..Fields::default()
        };
        for (k, (&t, &ck)) in self.buf.iter().zip(c).enumerate() {
            let s1 = 1.0 - t * t;
            f.value += ck * t;
            let wk = &w[k * dim..(k + 1) * dim];
            for m in 0..dim {
                f.grad[m] += ck * s1 * wk[m];
            }
            if second {
                let s2 = -2.0 * t * s1;
                for m in 0..dim {
                    f.hess[m] += ck * s2 * wk[m] * wk[m];
                }
            }
        }
        f
    }

    /// `op(u_θ)(x)` and its parameter gradient written into `row`.
    pub fn op_row(&mut self, point: &[f64], op: &LinearOp, row: &mut [f64]) -> f64 {
        debug_assert_eq!(row.len(), self.params.arch.param_count());
        self.activations(point);
        self.row_from_activations(point, op, row)
    }

    /// Several functionals at one point sharing a single activation pass.
    /// `rows` holds `ops.len()` consecutive rows of length `p`.
    pub fn op_rows(
        &mut self,
        point: &[f64],
        ops: &[LinearOp],
        rows: &mut [f64],
        values: &mut [f64],
    ) {
        let p = self.params.arch.param_count();
        debug_assert_eq!(rows.len(), ops.len() * p);
        self.activations(point);
        for ((op, row), v) in ops
            .iter()
            .zip(rows.chunks_exact_mut(p))
            .zip(values.iter_mut())
        {
            *v = self.row_from_activations(point, op, row);
        }
    }

    fn row_from_activations(&self, point: &[f64], op: &LinearOp, row: &mut [f64]) -> f64 {
        let arch = self.params.arch;
        let dim = arch.input_dim;
        let w = self.params.hidden_weights();
        let c = self.params.output_weights();
        let (bo, co) = (arch.bias_offset(), arch.output_weight_offset());
        let second = op.needs_second();
        let mut value = op.value * self.params.output_bias();
        for k in 0..arch.width {
            let n = NeuronDerivs::new(self.buf[k]);
            let ck = c[k];
            let wk = &w[k * dim..(k + 1) * dim];
            // Neuron response to op without c_k, and its derivative in a_k.
            let mut g = op.value * n.t;
            let mut dg = op.value * n.s1;
            for m in 0..dim {
                g += op.grad[m] * n.s1 * wk[m];
                dg += op.grad[m] * n.s2 * wk[m];
                if second {
                    let w2 = wk[m] * wk[m];
                    g += op.hess[m] * n.s2 * w2;
                    dg += op.hess[m] * n.s3 * w2;
                }
            }
            value += ck * g;
            row[co + k] = g;
            row[bo + k] = ck * dg;
            for j in 0..dim {
                let mut extra = op.grad[j] * n.s1;
                if second {
                    extra += 2.0 * op.hess[j] * n.s2 * wk[j];
                }
                row[k * dim + j] = ck * (dg * point[j] + extra);
            }
        }
        row[arch.output_bias_index()] = op.value;
        value
    }

    /// `Σᵢ directionᵢ ∂_{θᵢ} u_θ(x)`.
    pub fn directional_value(&mut self, point: &[f64], direction: &[f64]) -> f64 {
        let arch = self.params.arch;
        self.activations(point);
        let dim = arch.input_dim;
        let c = self.params.output_weights();
        let (bo, co) = (arch.bias_offset(), arch.output_weight_offset());
        let mut out = direction[arch.output_bias_index()];
        for k in 0..arch.width {
            let t = self.buf[k];
            let s1 = 1.0 - t * t;
            let mut da = direction[bo + k];
            for j in 0..dim {
                da += direction[k * dim + j] * point[j];
            }
            out += direction[co + k] * t + c[k] * s1 * da;
        }
        out
    }
}

/// The function `x ↦ Σᵢ directionᵢ ∂_{θᵢ}u_θ(x)` sampled on `grid`.
pub fn pushforward(
    params: &ParamVector,
    direction: &[f64],
    grid: &PointSet,
) -> Result<Vec<f64>, NetworkError> {
    let p = params.arch.param_count();
    if direction.len() != p {
        return Err(NetworkError::DimensionMismatch {
            expected: p,
            found: direction.len(),
        });
    }
    if grid.dim() != params.arch.input_dim && !grid.is_empty() {
        return Err(NetworkError::DimensionMismatch {
            expected: params.arch.input_dim,
            found: grid.dim(),
        });
    }
    let mut eval = NetEval::new(params)?;
    Ok(grid
        .iter()
        .map(|x| eval.directional_value(x, direction))
        .collect())
}

/// `op` applied to the pushforward of `direction`, sampled on `grid`.
pub fn pushforward_op(
    params: &ParamVector,
    direction: &[f64],
    grid: &PointSet,
    op: &LinearOp,
) -> Result<Vec<f64>, NetworkError> {
    let p = params.arch.param_count();
    if direction.len() != p {
        return Err(NetworkError::DimensionMismatch {
            expected: p,
            found: direction.len(),
        });
    }
    let mut eval = NetEval::new(params)?;
    let mut row = vec![0.0; p];
    Ok(grid
        .iter()
        .map(|x| {
            eval.op_row(x, op, &mut row);
            row.iter().zip(direction).map(|(r, d)| r * d).sum()
        })
        .collect())
}
