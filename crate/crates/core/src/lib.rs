//! Discrete Dirichlet Schrödinger operators `-Δ + V` on masked lattices, their
//! Littlewood–Paley spectral decomposition, Besov/Sobolev/Lorentz norms, and a
//! harness that measures the constants in the associated inequalities.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod calculus;
pub mod dyadic;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod norms;
pub mod operator;
pub mod potential;
mod quad;
pub mod run;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{DomainSpec, Grid, GridFunction, Shape};
pub use operator::SpectralOperator;
pub use potential::{KatoReport, Potential};
