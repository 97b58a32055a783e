//! Lagrange-Newton solver for sparsity-constrained nonlinear programs
//!
//! ```text
//! min f(x)  subject to  h(x) = 0,  ||x||_0 <= s
//! ```
//!
//! Each iteration picks a working support from the s largest entries of
//! x - beta * grad_x L(x, y), checks a stationarity residual on that
//! support, and takes one Newton step on the reduced KKT system. Under
//! standard regularity the iteration is locally quadratic.
//!
//! Two problem families are built in: sparse recovery from compressed
//! linear measurements (`cs`) and mean-variance-skewness-kurtosis
//! portfolio selection (`portfolio`). The `sweep` module runs seeded
//! trial grids over either family, in parallel when the `parallel`
//! feature (on by default) is enabled.

pub mod cs;
pub mod io;
pub mod lagrangian;
pub mod linalg;
pub mod portfolio;
pub mod problem;
pub mod sparse;
pub mod solver;
pub mod sweep;

pub use lagrangian::{
    classify_stationarity, convex_case_grade, eta, eval_residual, MinimizerGrade,
    StationarityVerdict, SupportCase,
};
pub use linalg::{DenseMatrix, DenseVector};
pub use problem::{validate_derivatives, Iterate, ProblemSpec};
pub use solver::{
    convergence_ratio_trace, solve, SolverConfig, SolverReport, SolverStatus,
};
pub use sparse::IndexSet;
