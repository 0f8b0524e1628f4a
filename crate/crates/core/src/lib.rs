//! Sparse Kaczmarz solvers with surrogate hyperplanes for the regularized
//! basis pursuit problem
//!
//! ```text
//! min_x  lambda * ||x||_1 + 0.5 * ||x||_2^2   subject to   A x = b
//! ```
//!
//! Each step projects the dual iterate onto the surrogate hyperplane
//! `eta^T A x = eta^T b` built from a weight vector `eta` and recovers the
//! primal iterate by soft shrinkage. Weight rules range from full residual
//! weights and adaptive partial residuals to classical single-row selection.
//! The [`analysis`] module computes the contraction factors that bound the
//! Bregman distance to the solution and checks them against recorded runs.
//!
//! ```
//! use shsk::problems::gen_gaussian;
//! use shsk::solvers::{run, StopCriteria, StopReason, WeightStrategy};
//!
//! let problem = gen_gaussian(200, 100, 1, 7).unwrap();
//! let out = run(&problem, WeightStrategy::residual(), &StopCriteria::default()).unwrap();
//! assert_eq!(out.stop_reason, StopReason::RseTol);
//! ```

pub mod analysis;
pub mod bregman;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod solvers;

pub use bregman::RegParam;
pub use error::{Error, Result};
pub use linalg::{RowMatrix, SpectralSummary};
pub use problems::{Problem, ProblemMeta};
pub use solvers::{ConvergenceHistory, RunOutcome, SolverState, StopCriteria, StopReason, WeightStrategy};
