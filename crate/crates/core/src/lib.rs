//! Moreau–Yosida regularized density-functional theory on small lattices.
//!
//! The crate is organised bottom-up:
//!
//! * [`convex`]: Moreau envelopes, proximal maps, Yosida gradients and skew
//!   conjugates of black-box convex functions.
//! * [`lattice`]: spin-½ fermions on an open chain, solved by exact
//!   diagonalization; supplies the ground-state energy `E^λ[v]`.
//! * [`lieb`]: the Lieb functional `F^λ` and its regularization `ᵋF^λ`,
//!   obtained by maximizing over potentials.
//! * [`scf`]: regularized Kohn–Sham iterations, plain and optimally damped.
//! * [`oracles`]: closed-form and brute-force references used to check the
//!   rest of the crate.
//!
//! Densities and potentials are plain `nalgebra::DVector<f64>` values; the
//! inner product is the Euclidean dot product over lattice sites.

// negated comparisons reject NaN parameters
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex;
pub mod error;
pub mod lattice;
pub mod lieb;
pub mod oracles;
pub mod scf;

pub use error::{Error, Result};

/// A density (or quasidensity) on the lattice sites.
pub type Density = nalgebra::DVector<f64>;
/// An on-site potential.
pub type Potential = nalgebra::DVector<f64>;
