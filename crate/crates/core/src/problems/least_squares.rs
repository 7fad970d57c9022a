//! Shared machinery for residual (PINN) losses `L = Σ_terms Σᵢ wᵢ (op u(xᵢ) − gᵢ)²`.

use nalgebra::DMatrix;

use super::{symmetric_sum, Assembled, GramNeeds, ProblemError, ResidualBlock};
use crate::linalg::gram_ata;
use crate::network::{op_jacobian, op_values, op_vjp, LinearOp, ParamVector, PointColumns};
use crate::quadrature::PointSet;

/// One squared-residual term: `Σᵢ wᵢ (op u(xᵢ) − targetᵢ)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTerm {
    pub name: &'static str,
    pub points: PointSet,
    pub weights: Vec<f64>,
    pub op: LinearOp,
    pub target: Vec<f64>,
    pub(crate) cols: PointColumns,
}

impl ResidualTerm {
    pub fn new(
        name: &'static str,
        points: PointSet,
        weights: Vec<f64>,
        op: LinearOp,
        target: Vec<f64>,
    ) -> Self {
        assert_eq!(points.len(), weights.len());
        assert_eq!(points.len(), target.len());
        let cols = PointColumns::new(&points);
        Self {
            name,
            points,
            weights,
            op,
            target,
            cols,
        }
    }
}

/// One term of a discrete inner product `Σᵢ wᵢ Σ_ops op u(xᵢ) · op v(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerTerm {
    pub name: &'static str,
    pub points: PointSet,
    pub weights: Vec<f64>,
    pub ops: Vec<LinearOp>,
    cols: PointColumns,
}

impl InnerTerm {
    pub fn new(
        name: &'static str,
        points: PointSet,
        weights: Vec<f64>,
        ops: Vec<LinearOp>,
    ) -> Self {
        assert_eq!(points.len(), weights.len());
        let cols = PointColumns::new(&points);
        Self {
            name,
            points,
            weights,
            ops,
            cols,
        }
    }

    /// Gram contribution `Σᵢ wᵢ Σ_ops ∂_θ(op u)(xᵢ) ∂_θ(op u)(xᵢ)ᵀ`.
    pub fn gram(&self, params: &ParamVector) -> DMatrix<f64> {
        let n = self.points.len();
        let p = params.len();
        let rows = n * self.ops.len();
        let sqrt_w: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        // All functionals stacked into one (n · ops) × p matrix.
        let mut stacked = DMatrix::zeros(rows, p);
        let mut jac = vec![0.0; n * p];
        let mut values = Vec::new();
        for (o, op) in self.ops.iter().enumerate() {
            op_jacobian(params, &self.cols, op, &mut jac, &mut values);
            for c in 0..p {
                let dst = &mut stacked.column_mut(c);
                for i in 0..n {
                    dst[o * n + i] = jac[c * n + i] * sqrt_w[i];
                }
            }
        }
        gram_ata(&stacked)
    }
}

pub(crate) fn loss(terms: &[ResidualTerm], params: &ParamVector) -> f64 {
    let mut buf = vec![Vec::new()];
    let mut total = 0.0;
    for term in terms {
        op_values(params, &term.cols, std::slice::from_ref(&term.op), &mut buf);
        let mut sum = 0.0;
        for ((v, w), g) in buf[0].iter().zip(&term.weights).zip(&term.target) {
            let r = v - g;
            sum += w * r * r;
        }
        total += sum;
    }
    total
}

fn blocks(
    terms: &[ResidualTerm],
    params: &ParamVector,
) -> Result<Vec<ResidualBlock>, ProblemError> {
    let p = params.len();
    let mut out = Vec::with_capacity(terms.len());
    let mut values = Vec::new();
    for term in terms {
        if term.points.is_empty() {
            return Err(ProblemError::EmptyCollocation(term.name));
        }
        let n = term.points.len();
        let mut jac = vec![0.0; n * p];
        op_jacobian(params, &term.cols, &term.op, &mut jac, &mut values);
        let residuals = values
            .iter()
            .zip(&term.target)
            .map(|(v, g)| v - g)
            .collect();
        out.push(ResidualBlock::from_columns(
            term.name,
            term.weights.clone(),
            residuals,
            jac,
            p,
        ));
    }
    Ok(out)
}

/// `L` and `∇L = 2 Σ Jᵀ diag(w) r` from the residual blocks.
fn loss_and_grad_of(blocks: &[ResidualBlock], p: usize) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; p];
    for b in blocks {
        let wr: Vec<f64> = b
            .weights
            .iter()
            .zip(&b.residuals)
            .map(|(w, r)| 2.0 * w * r)
            .collect();
        let mut sum = 0.0;
        for (w, r) in b.weights.iter().zip(&b.residuals) {
            sum += w * r * r;
        }
        loss += sum;
        for (j, g) in grad.iter_mut().enumerate() {
            *g += b.column(j).iter().zip(&wr).map(|(a, s)| a * s).sum::<f64>();
        }
    }
    (loss, grad)
}

pub(crate) fn loss_and_grad(
    terms: &[ResidualTerm],
    params: &ParamVector,
) -> Result<(f64, Vec<f64>), ProblemError> {
    let mut grad = vec![0.0; params.len()];
    let mut buf = vec![Vec::new()];
    let mut total = 0.0;
    for term in terms {
        if term.points.is_empty() {
            return Err(ProblemError::EmptyCollocation(term.name));
        }
        op_values(params, &term.cols, std::slice::from_ref(&term.op), &mut buf);
        let mut sum = 0.0;
        let mut seed = Vec::with_capacity(term.points.len());
        for ((v, w), g) in buf[0].iter().zip(&term.weights).zip(&term.target) {
            let r = v - g;
            sum += w * r * r;
            seed.push(2.0 * w * r);
        }
        total += sum;
        op_vjp(
            params,
            &term.cols,
            std::slice::from_ref(&term.op),
            std::slice::from_ref(&seed),
            &mut grad,
        );
    }
    Ok((total, grad))
}

pub(crate) fn assemble(
    terms: &[ResidualTerm],
    hilbert: &[InnerTerm],
    params: &ParamVector,
    needs: GramNeeds,
) -> Result<Assembled, ProblemError> {
    let p = params.len();
    let blocks = blocks(terms, params)?;
    let (loss, grad) = loss_and_grad_of(&blocks, p);
    let gram_energy = if needs.energy {
        Some(symmetric_sum(
            p,
            blocks.iter().map(|b| b.weighted_gram(1.0)),
        )?)
    } else {
        None
    };
    let gram_hilbert = if needs.hilbert {
        Some(symmetric_sum(p, hilbert.iter().map(|t| t.gram(params)))?)
    } else {
        None
    };
    Ok(Assembled {
        loss,
        grad,
        residual_jacobians: blocks,
        gram_energy,
        gram_hilbert,
    })
}
