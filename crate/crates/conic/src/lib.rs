//! Self-contained conic interior-point solver.
//!
//! Solves programs of the form
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b
//!             x ∈ K = R^f × R₊ × SOC × RSOC × …
//! ```
//!
//! where variables are partitioned into free components and a sequence of
//! disjoint cone spans (nonnegative orthants, second-order cones, rotated
//! second-order cones). The algorithm is a Mehrotra predictor-corrector
//! interior-point method on the homogeneous self-dual embedding with
//! Nesterov–Todd scaling, so it reports proved infeasibility certificates
//! as first-class outcomes rather than failing to converge.
//!
//! The linear algebra is tuned for the block-tridiagonal-plus-border
//! structure of discretized trajectory programs: a reverse Cuthill–McKee
//! ordered skyline LDLᵀ with static regularization and iterative
//! refinement. There are no external dependencies in the solve path.
//!
//! Entry points: build a [`ConicProgram`] (usually via [`ProgramBuilder`]),
//! then call [`solve`].

pub mod cones;
pub mod linalg;
pub mod presolve;
pub mod program;
pub mod solver;

pub use program::{cone_slack, Cone, ConeSpan, ConicProgram, ProgramBuilder, SparseRow};
pub use solver::{solve, Settings, Solution, Status};

use thiserror::Error;

/// Structural errors: the program itself is malformed. Numerical outcomes
/// (infeasible, unbounded, stalled) are reported in [`Solution::status`]
/// instead.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid program: {0}")]
    BadProgram(String),
    #[error("parse error: {0}")]
    Parse(String),
}
