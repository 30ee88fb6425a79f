//! Model, solve and verify finite-dimensional mixed variational-hemivariational
//! inequalities with Lagrange multipliers.

pub mod cli;
pub mod error;
pub mod gallery;
pub mod hypotheses;
pub mod linalg;
pub mod nonsmooth;
pub mod problem;
pub mod random;
pub mod solver;
pub mod suite;
pub mod verify;

pub use error::{Error, Result};
