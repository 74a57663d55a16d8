//! Inexact ADMM for composite convex problems
//!
//! `min f(x) + g(z)  s.t.  M x - z = c`
//!
//! with x-updates solved by conjugate gradient under a randomized Nyström
//! preconditioner. The crate is `no_std` and only needs `alloc`.
//!
//! The three entry points are [`solve`] on a [`GenericProblem`],
//! [`QpProblem::solve`] and [`MlProblem::solve`].
#![no_std]

extern crate alloc;

pub mod admm;
pub mod krylov;
pub mod linalg;
pub mod operators;
pub mod problems;
pub mod prox;
pub mod sketch;

pub use admm::{solve, solve_with, Clock, NoClock, SolveError, SolveResult, SolveStatus, SolverOptions};
pub use operators::{HessianOperator, LinearOperator, SharedOperator};
pub use problems::{BuiltinLoss, GenericProblem, Loss, MlProblem, QpProblem};
