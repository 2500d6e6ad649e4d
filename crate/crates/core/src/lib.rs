//! Numerical laboratory for the semilinear parabolic gradient flow
//! `u_t = u_xx + P(u)` on a truncated line.
//!
//! The crate computes the action and energy functionals of the flow,
//! integrates it with an implicit-explicit scheme, finds and classifies
//! equilibria, detects blow-up, and checks numerically that the
//! finite-energy runs are exactly the ones that connect equilibria.

pub mod cli;
pub mod config;
pub mod connections;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod functionals;
pub mod expr;
pub mod grid;
pub mod nonlinearity;
pub mod problem;
pub mod sampling;
pub mod tridiag;
pub mod verify;

pub use error::{NumericsError, Result};
pub use expr::Expr;
pub use grid::{Boundary, Field, SpatialGrid};
pub use nonlinearity::Nonlinearity;
pub use problem::ProblemSpec;
