//! Solvers for nonnegative KL regression `min_x KL(Ax, b)` where `x` ranges
//! over the positive orthant, the open unit box or the open probability
//! simplex.
//!
//! The crate contains sparse nonnegative operators ([`linops`]), the
//! e-geometry of the three feasible sets ([`geometry`]), the objective
//! ([`objective`]), first-order solvers ([`solvers`]), test problem
//! generators ([`problems`]) and an experiment harness ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linops;
pub mod objective;
pub mod problems;
pub mod solvers;

pub use error::{GeometryError, HarnessError, LinopError, ObjectiveError, ProblemError, SolverError};
pub use geometry::{ManifoldKind, Point, Tangent};
pub use linops::{NonnegativeSparseMatrix, OpCounter};
pub use objective::KlProblem;
pub use solvers::{solve, Algorithm, BetaRule, IterationTrace, SolveResult, SolverConfig, Termination};
