//! Dense symmetric linear algebra used by the natural gradient steps.
//!
//! Gram matrices are symmetric positive semi-definite by construction, so the
//! least-squares solve `G ψ = g` is realised through a symmetric
//! eigendecomposition with spectral truncation instead of a general SVD.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par, Side};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Default relative truncation threshold for [`pinv_solve`].
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Absolute symmetry tolerance (scaled by `max(1, ‖A‖_max)`).
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("matrix is not symmetric: |A[{row},{col}] - A[{col},{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("rcond must be nonnegative and finite, got {0}")]
    InvalidRcond(f64),
    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

/// A dense symmetric matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates symmetry and finiteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        check_finite(&entries)?;
        let scale = entries.amax().max(1.0);
        for j in 0..cols {
            for i in (j + 1)..rows {
                let diff = (entries[(i, j)] - entries[(j, i)]).abs();
                if diff > SYMMETRY_TOL * scale {
                    return Err(LinalgError::NotSymmetric {
                        row: i,
                        col: j,
                        diff,
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    /// Builds a symmetric matrix from its upper triangle, mirroring it into
    /// the lower one so the result is exactly symmetric.
    pub fn from_upper(mut entries: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        for j in 0..cols {
            for i in (j + 1)..rows {
                entries[(i, j)] = entries[(j, i)];
            }
        }
        check_finite(&entries)?;
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self, LinalgError> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (j, &xj) in x.iter().enumerate().take(n) {
            if xj == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.entries[(i, j)] * xj;
            }
        }
        out
    }

    /// Restriction to the rows and columns listed in `indices`.
    pub fn submatrix(&self, indices: &[usize]) -> SymMatrix {
        let k = indices.len();
        let entries = DMatrix::from_fn(k, k, |a, b| self.entries[(indices[a], indices[b])]);
        SymMatrix { entries }
    }

    /// Entrywise scaling.
    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            entries: &self.entries * factor,
        }
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let value = m[(i, j)];
            if !value.is_finite() {
                return Err(LinalgError::NonFinite {
                    row: i,
                    col: j,
                    value,
                });
            }
        }
    }
    Ok(())
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomposition {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        v * lambda * v.transpose()
    }
}

/// Symmetric eigendecomposition (LAPACK divide and conquer), deterministic
/// for a fixed input.
pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomposition, LinalgError> {
    check_finite(&a.entries)?;
    let n = a.dim();
    if n == 0 {
        return Ok(EigDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let m = MatRef::from_column_major_slice(a.entries.as_slice(), n, n);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::NoConvergence)?;
    let (s, u) = (evd.S().column_vector(), evd.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let eigenvalues = order.iter().map(|&i| s[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `AᵀA` for a column-major `A`.
pub fn gram_ata(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, n) = a.shape();
    let mut c = DMatrix::zeros(n, n);
    if n == 0 || k == 0 {
        return c;
    }
    let a = MatRef::from_column_major_slice(a.as_slice(), k, n);
    let dst = MatMut::from_column_major_slice_mut(c.as_mut_slice(), n, n);
    matmul(dst, Accum::Replace, a.transpose(), a, 1.0, Par::Seq);
    // Exact symmetry regardless of the kernel's summation order.
    for j in 0..n {
        for i in j + 1..n {
            c[(i, j)] = c[(j, i)];
        }
    }
    c
}

/// Outcome of a truncated pseudo-inverse solve.
#[derive(Debug, Clone)]
pub struct PinvSolution {
    pub solution: Vec<f64>,
    /// Number of eigenvalues above the truncation threshold.
    pub rank: usize,
    pub lambda_max: f64,
    /// Most negative eigenvalue below `-rcond * λ_max`, if any.
    pub negative_eigenvalue: Option<f64>,
}

/// Minimum-norm least-squares solution of `A ψ = b` with eigenvalues at or
/// below `rcond · λ_max` discarded.
pub fn pinv_solve(a: &SymMatrix, b: &[f64], rcond: f64) -> Result<Vec<f64>, LinalgError> {
    pinv_solve_detailed(a, b, rcond).map(|s| s.solution)
}

/// [`pinv_solve`] together with rank and spectrum diagnostics.
pub fn pinv_solve_detailed(
    a: &SymMatrix,
    b: &[f64],
    rcond: f64,
) -> Result<PinvSolution, LinalgError> {
    let n = a.dim();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !(rcond >= 0.0 && rcond.is_finite()) {
        return Err(LinalgError::InvalidRcond(rcond));
    }
    let eig = sym_eig(a)?;
    Ok(truncated_solve(&eig, b, rcond))
}

/// Applies the truncated pseudo-inverse of an existing decomposition to `b`.
pub fn truncated_solve(eig: &EigDecomposition, b: &[f64], rcond: f64) -> PinvSolution {
    let n = eig.eigenvalues.len();
    let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let threshold = rcond * lambda_max;
    let mut solution = vec![0.0; n];
    let mut rank = 0;
    let mut negative: Option<f64> = None;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -threshold && lambda_max > 0.0 {
            negative = Some(negative.map_or(lambda, |m: f64| m.min(lambda)));
        }
        if lambda_max <= 0.0 || lambda <= threshold {
            continue;
        }
        rank += 1;
        let v = eig.eigenvectors.column(k);
        let coeff = v.iter().zip(b).map(|(vi, bi)| vi * bi).sum::<f64>() / lambda;
        for (s, vi) in solution.iter_mut().zip(v.iter()) {
            *s += coeff * vi;
        }
    }
    if let Some(lambda) = negative {
        log::warn!(
            "Gram matrix has negative eigenvalue {lambda:e} (λ_max = {lambda_max:e}); truncated"
        );
    }
    PinvSolution {
        solution,
        rank,
        lambda_max,
        negative_eigenvalue: negative,
    }
}

/// Diagonal quadrature inner product `⟨u, v⟩ = Σ wᵢ uᵢ vᵢ` on grid functions.
#[derive(Debug, Clone)]
pub struct WeightedInner {
    pub weights: Vec<f64>,
}

impl WeightedInner {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0; n],
        }
    }

    pub fn apply(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u)
            .zip(v)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }
}

/// Projection of `x` onto `span(columns)` with respect to `inner`, computed
/// from the normal equations `G α = A* x` with `G = ⟨cᵢ, cⱼ⟩`.
pub fn project_range<F>(columns: &[Vec<f64>], inner: F, x: &[f64]) -> Result<Vec<f64>, LinalgError>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let len = x.len();
    for c in columns {
        if c.len() != len {
            return Err(LinalgError::DimensionMismatch {
                expected: len,
                found: c.len(),
            });
        }
    }
    let p = columns.len();
    let mut gram = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            gram[(i, j)] = inner(&columns[i], &columns[j]);
        }
    }
    let gram = SymMatrix::from_upper(gram)?;
    let rhs: Vec<f64> = columns.iter().map(|c| inner(c, x)).collect();
    let alpha = pinv_solve(&gram, &rhs, DEFAULT_RCOND)?;
    let mut out = vec![0.0; len];
    for (a, c) in alpha.iter().zip(columns) {
        for (o, ci) in out.iter_mut().zip(c) {
            *o += a * ci;
        }
    }
    Ok(out)
}
