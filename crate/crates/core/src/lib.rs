//! Solvers for linearly constrained separable convex optimization built
//! around a symmetric accelerated stochastic ADMM: the two-block method with
//! twice-updated multipliers, its augmented-Lagrangian variant, Gauss-Seidel
//! and partially-Jacobi multi-block extensions, and the matrix machinery that
//! certifies the dual-stepsize region the methods run in.
//!
//! The crate is `no_std`-compatible (it only needs `alloc`); file formats,
//! CSV reporting and the command line live in the companion `sasadmm-cli`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod error;
mod float;
pub mod inner;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod problem;
pub mod region;
pub mod rng;
pub mod solver;
pub mod vector;

pub use error::Error;
pub use matrix::{CsrMatrix, DenseMatrix, Matrix};
pub use region::{RegionId, StepsizePair};
pub use rng::SeededRng;
pub use vector::Vector;
