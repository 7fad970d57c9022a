use serde::{Deserialize, Serialize};

use super::{ExactSample, ProblemError};
use crate::network::{op_values, LinearOp, ParamVector, PointColumns};
use crate::quadrature::{grid_points, tensor_trapezoid, Grid1D, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorNorm {
    L2,
    H1,
}

/// Trapezoidal evaluation grid, independent of the training points, with the
/// exact solution cached at its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    pub points: PointSet,
    pub weights: Vec<f64>,
    cols: PointColumns,
    exact: Vec<ExactSample>,
}

impl EvalGrid {
    pub fn unit_square(per_side: usize) -> Result<Self, ProblemError> {
        let g = Grid1D::new(0.0, 1.0, per_side)?;
        let (points, weights) = tensor_trapezoid(&g, &g);
        Ok(Self::from_parts(points, weights))
    }

    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self, ProblemError> {
        let g = Grid1D::new(a, b, n)?;
        Ok(Self::from_parts(grid_points(&g), g.weights))
    }

    fn from_parts(points: PointSet, weights: Vec<f64>) -> Self {
        let cols = PointColumns::new(&points);
        Self {
            points,
            weights,
            cols,
            exact: Vec::new(),
        }
    }

    pub(super) fn with_exact(mut self, exact: impl Fn(&[f64]) -> ExactSample) -> Self {
        self.exact = self.points.iter().map(exact).collect();
        self
    }

    /// `(‖e‖_{L²}/‖u*‖_{L²}, ‖e‖_{H¹}/‖u*‖_{H¹})` with `e = candidate − exact`;
    /// the `H¹` norm includes every coordinate derivative.
    pub fn relative_errors<C, E>(&self, mut candidate: C, mut exact: E) -> (f64, f64)
    where
        C: FnMut(&[f64]) -> ExactSample,
        E: FnMut(&[f64]) -> ExactSample,
    {
        let samples: Vec<(ExactSample, ExactSample)> = self
            .points
            .iter()
            .map(|x| (candidate(x), exact(x)))
            .collect();
        self.accumulate(samples.into_iter())
    }

    /// Relative errors of the network against the cached exact solution.
    pub fn network_errors(&self, params: &ParamVector) -> (f64, f64) {
        assert_eq!(
            self.exact.len(),
            self.points.len(),
            "exact solution not cached"
        );
        let dim = self.points.dim();
        let mut ops = vec![LinearOp::VALUE];
        ops.extend((0..dim).map(LinearOp::partial));
        let mut out = vec![Vec::new(); ops.len()];
        op_values(params, &self.cols, &ops, &mut out);
        let samples = (0..self.points.len()).map(|i| {
            let mut grad = [0.0; 2];
            for m in 0..dim {
                grad[m] = out[1 + m][i];
            }
            (
                ExactSample {
                    value: out[0][i],
                    grad,
                },
                self.exact[i],
            )
        });
        self.accumulate(samples)
    }

    fn accumulate(&self, samples: impl Iterator<Item = (ExactSample, ExactSample)>) -> (f64, f64) {
        let dim = self.points.dim();
        let (mut e0, mut e1, mut u0, mut u1) = (0.0, 0.0, 0.0, 0.0);
        for ((c, u), w) in samples.zip(&self.weights) {
            let d = c.value - u.value;
            e0 += w * d * d;
            u0 += w * u.value * u.value;
            for m in 0..dim {
                let dg = c.grad[m] - u.grad[m];
                e1 += w * dg * dg;
                u1 += w * u.grad[m] * u.grad[m];
            }
        }
        assert!(u0 > 0.0, "exact solution has zero norm");
        ((e0 / u0).sqrt(), ((e0 + e1) / (u0 + u1)).sqrt())
    }
}
