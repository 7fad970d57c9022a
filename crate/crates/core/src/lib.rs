//! Energy natural gradient descent for physics-informed neural networks and
//! the deep Ritz method.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: symmetric eigendecomposition, truncated pseudo-inverse solves
//!   and range projections.
//! * [`quadrature`]: uniform grids, boundary traces and trapezoidal weights.
//! * [`network`]: shallow `tanh` networks with closed-form spatial derivatives
//!   and parameter Jacobians.
//! * [`problems`]: the Poisson, heat and nonlinear Ritz benchmarks (losses,
//!   gradients, energy and Hilbert Gram matrices, error norms).
//! * [`optim`]: energy/Hilbert natural gradient, gradient descent with line
//!   search, Adam, and the training loop.
//! * [`runner`]: multi-seed experiments, summaries and CSV artifacts.

pub mod linalg;
pub mod network;
pub mod optim;
pub mod problems;
pub mod quadrature;
pub mod runner;

pub use linalg::{pinv_solve, project_range, sym_eig, EigDecomposition, SymMatrix};
pub use network::{init_params, Architecture, Jet, ParamVector};
