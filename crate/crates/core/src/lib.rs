//! Discrete λ-symmetries of ordinary difference equations.
//!
//! The crate builds the λ-prolongation of vector fields on a uniform lattice,
//! forms and checks determining equations, searches for λ-symmetries under a
//! polynomial ansatz, reduces second-order schemes to first-order maps through
//! the resulting invariants, and checks the continuum limit against the
//! λ-prolongation of ordinary differential equations.

pub mod ansatz_solver;
pub mod commands;
pub mod continuum;
pub mod determining;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod lambda_prolong;
mod par;
pub mod reduction;
pub mod report;
pub mod scheme;
pub mod scheme_file;

pub use error::{Error, ExprError, Result};
pub use expr::{Expr, Symbol};
