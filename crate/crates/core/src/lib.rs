//! Discrete Choquard problems on Cayley graphs of polynomial growth.
//!
//! The crate builds word-metric balls in `Z^N` and the Heisenberg group,
//! the Green's kernel `R_alpha` of the fractional Dirichlet Laplacian on them,
//! empirical checks of the Sobolev, Hardy-Littlewood-Sobolev and Brezis-Lieb
//! statements, and ground states of the equation
//! `Delta u + (R_alpha * |u|^p) |u|^{p-2} u = 0` and its variants.

extern crate openblas_src;

pub mod calculus;
pub mod cayley;
pub mod error;
pub mod inequalities;
pub mod kernel;
pub mod linalg;
pub mod solver;

pub use error::{Error, Result};
