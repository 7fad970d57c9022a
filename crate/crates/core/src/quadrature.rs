//! Deterministic point sets and quadrature weights.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("degenerate domain [{0}, {1}]")]
    DegenerateInterval(f64, f64),
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
}

/// A flat list of points of a fixed dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_coords(dim: usize, coords: Vec<f64>) -> Self {
        assert!(
            dim > 0 && coords.len().is_multiple_of(dim),
            "coordinate buffer does not match dimension"
        );
        Self { dim, coords }
    }

    pub fn push(&mut self, point: &[f64]) {
        assert_eq!(point.len(), self.dim);
        self.coords.extend_from_slice(point);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.x1 > self.x0) || !self.x0.is_finite() || !self.x1.is_finite() {
            return Err(QuadratureError::DegenerateInterval(self.x0, self.x1));
        }
        if !(self.y1 > self.y0) || !self.y0.is_finite() || !self.y1.is_finite() {
            return Err(QuadratureError::DegenerateInterval(self.y0, self.y1));
        }
        Ok(())
    }
}

/// Equi-spaced points on `[a, b]` including both endpoints, with
/// trapezoidal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self, QuadratureError> {
        if n < 2 {
            return Err(QuadratureError::TooFewPoints { min: 2, got: n });
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(QuadratureError::DegenerateInterval(a, b));
        }
        let h = (b - a) / (n - 1) as f64;
        let points = (0..n)
            .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
            .collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Self {
            a,
            b,
            points,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / (self.n() - 1) as f64
    }
}

/// `Σ wᵢ vᵢ` with the grid's trapezoidal weights.
pub fn trapezoid_integrate(grid: &Grid1D, values: &[f64]) -> Result<f64, QuadratureError> {
    if values.len() != grid.n() {
        return Err(QuadratureError::LengthMismatch {
            expected: grid.n(),
            found: values.len(),
        });
    }
    Ok(grid.weights.iter().zip(values).map(|(w, v)| w * v).sum())
}

/// `nx · ny` strictly interior points `x₀ + i·(x₁−x₀)/(nx+1)`, `i = 1..=nx`
/// (same in `y`), each carrying weight `area / (nx·ny)`.
pub fn tensor_grid(
    nx: usize,
    ny: usize,
    domain: Rect,
) -> Result<(PointSet, Vec<f64>), QuadratureError> {
    domain.validate()?;
    if nx < 2 {
        return Err(QuadratureError::TooFewPoints { min: 2, got: nx });
    }
    if ny < 2 {
        return Err(QuadratureError::TooFewPoints { min: 2, got: ny });
    }
    let hx = (domain.x1 - domain.x0) / (nx + 1) as f64;
    let hy = (domain.y1 - domain.y0) / (ny + 1) as f64;
    let mut points = PointSet::new(2);
    for i in 1..=nx {
        for j in 1..=ny {
            points.push(&[domain.x0 + i as f64 * hx, domain.y0 + j as f64 * hy]);
        }
    }
    let w = domain.area() / (nx * ny) as f64;
    Ok((points, vec![w; nx * ny]))
}

/// `4 · n_per_edge` equi-spaced points on the rectangle boundary, walking
/// counter-clockwise from `(x0, y0)`. Every edge contributes the corner it
/// starts at, so each corner appears exactly once.
pub fn boundary_grid(n_per_edge: usize, domain: Rect) -> Result<PointSet, QuadratureError> {
    domain.validate()?;
    if n_per_edge < 1 {
        return Err(QuadratureError::TooFewPoints {
            min: 1,
            got: n_per_edge,
        });
    }
    let n = n_per_edge as f64;
    let (lx, ly) = (domain.x1 - domain.x0, domain.y1 - domain.y0);
    let mut points = PointSet::new(2);
    for i in 0..n_per_edge {
        points.push(&[domain.x0 + i as f64 * lx / n, domain.y0]);
    }
    for i in 0..n_per_edge {
        points.push(&[domain.x1, domain.y0 + i as f64 * ly / n]);
    }
    for i in 0..n_per_edge {
        points.push(&[domain.x1 - i as f64 * lx / n, domain.y1]);
    }
    for i in 0..n_per_edge {
        points.push(&[domain.x0, domain.y1 - i as f64 * ly / n]);
    }
    Ok(points)
}

/// Tensor-product trapezoidal rule; points ordered with the first coordinate
/// varying slowest.
pub fn tensor_trapezoid(first: &Grid1D, second: &Grid1D) -> (PointSet, Vec<f64>) {
    let mut points = PointSet::new(2);
    let mut weights = Vec::with_capacity(first.n() * second.n());
    for (x, wx) in first.points.iter().zip(&first.weights) {
        for (y, wy) in second.points.iter().zip(&second.weights) {
            points.push(&[*x, *y]);
            weights.push(wx * wy);
        }
    }
    (points, weights)
}

/// 1-D grid as a point set of dimension one.
pub fn grid_points(grid: &Grid1D) -> PointSet {
    PointSet::from_coords(1, grid.points.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn poisson_interior_grid() {
        let (pts, w) = tensor_grid(30, 30, Rect::UNIT).unwrap();
        assert_eq!(pts.len(), 900);
        assert!(w.iter().all(|&wi| (wi - 1.0 / 900.0).abs() < 1e-17));
        assert!(pts
            .iter()
            .all(|p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0));
    }

    #[test]
    fn smallest_interior_grid() {
        let (pts, _) = tensor_grid(2, 2, Rect::UNIT).unwrap();
        let mut got: Vec<(f64, f64)> = pts.iter().map(|p| (p[0], p[1])).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let t = [1.0 / 3.0, 2.0 / 3.0];
        let want = vec![(t[0], t[0]), (t[0], t[1]), (t[1], t[0]), (t[1], t[1])];
        for (g, w) in got.iter().zip(&want) {
            assert!((g.0 - w.0).abs() < 1e-15 && (g.1 - w.1).abs() < 1e-15);
        }
    }

    #[test]
    fn tensor_weights_sum_to_area() {
        let rect = Rect {
            x0: -1.0,
            x1: 2.0,
            y0: 0.5,
            y1: 1.25,
        };
        let (_, w) = tensor_grid(7, 5, rect).unwrap();
        assert!((w.iter().sum::<f64>() - rect.area()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        let rect = Rect {
            x0: 0.0,
            x1: 0.0,
            y0: 0.0,
            y1: 1.0,
        };
        assert!(matches!(
            tensor_grid(3, 3, rect),
            Err(QuadratureError::DegenerateInterval(..))
        ));
        assert!(matches!(
            tensor_grid(1, 3, Rect::UNIT),
            Err(QuadratureError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn boundary_counts_and_membership() {
        let b = boundary_grid(30, Rect::UNIT).unwrap();
        assert_eq!(b.len(), 120);
        assert!(b
            .iter()
            .all(|p| p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0));
        let mut seen: Vec<(u64, u64)> =
            b.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 120, "boundary points must be distinct");
        let corners = boundary_grid(1, Rect::UNIT).unwrap();
        assert_eq!(corners.len(), 4);
        assert_eq!(corners.coords(), &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn trapezoid_basics() {
        let g = Grid1D::new(-1.0, 1.0, 101).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(g.points.windows(2).all(|w| w[1] > w[0]));
        let ones = vec![1.0; 101];
        assert!((trapezoid_integrate(&g, &ones).unwrap() - 2.0).abs() < 1e-14);
        let xs = g.points.clone();
        assert!(trapezoid_integrate(&g, &xs).unwrap().abs() < 1e-15);
        let affine: Vec<f64> = xs.iter().map(|x| 3.0 * x + 0.5).collect();
        assert!((trapezoid_integrate(&g, &affine).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(
            trapezoid_integrate(&g, &[1.0]),
            Err(QuadratureError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn affine_exact_on_uneven_interval() {
        let g = Grid1D::new(0.3, 2.9, 17).unwrap();
        let v: Vec<f64> = g.points.iter().map(|x| -2.0 * x + 7.0).collect();
        // ∫ (−2x + 7) dx over [0.3, 2.9] = [−x² + 7x]
        let exact = (-2.9f64 * 2.9 + 7.0 * 2.9) - (-0.3f64 * 0.3 + 7.0 * 0.3);
        assert!((trapezoid_integrate(&g, &v).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn cos_squared_fine_grid() {
        // ∫_{-1}^{1} cos²(πx) dx = [x/2 + sin(2πx)/(4π)] = 1
        let g = Grid1D::new(-1.0, 1.0, 20_000).unwrap();
        let v: Vec<f64> = g.points.iter().map(|x| (PI * x).cos().powi(2)).collect();
        assert!((trapezoid_integrate(&g, &v).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn second_order_convergence() {
        // Over a non-periodic window the trapezoid error is O(h²).
        let f = |x: f64| (PI * x).cos().powi(2);
        let exact = 0.75 / 2.0 + (2.0 * PI * 0.75).sin() / (4.0 * PI);
        let err = |n: usize| {
            let g = Grid1D::new(0.0, 0.75, n).unwrap();
            let v: Vec<f64> = g.points.iter().map(|&x| f(x)).collect();
            (trapezoid_integrate(&g, &v).unwrap() - exact).abs()
        };
        let ratio = err(41) / err(81);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn tensor_trapezoid_integrates_constants() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let (pts, w) = tensor_trapezoid(&g, &g);
        assert_eq!(pts.len(), 121);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
