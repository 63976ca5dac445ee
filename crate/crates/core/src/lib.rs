//! Thin clamped plate on a Winkler foundation.
//!
//! The direct problem `[D·B + diag(k)] w = f·δ̃(P0)` is discretized with the
//! 13-point biharmonic stencil on a uniform grid of the unit square (ghost
//! nodes closed by reflection for the clamped edge). The inverse problem,
//! recovering the subgrade coefficient `k` from noisy deflections, is solved
//! with iterative ensemble Kalman inversion stopped by the discrepancy
//! principle.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the parallel
//! evaluator and the command-line front end live in the `winkler` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod eki;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod plate;
pub mod prior;
pub mod rng;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use grid::Grid;
