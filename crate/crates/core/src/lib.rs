//! Parameterized Douglas–Rachford splitting for nonconvex composite problems
//! `min f(u) + g(u)`, with the proximal operators, problem adapters and seeded instance
//! generators for sparsity-constrained least squares, sparse feasibility and low-rank
//! matrix completion.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod problems;
pub mod prox;
pub mod splitting;

pub use error::{PdrError, Result};
pub use splitting::{
    gamma_threshold, run_solver, IterateTriple, PdrConfig, Safeguard, SolveTrace,
    SplittingScheme, Termination,
};
