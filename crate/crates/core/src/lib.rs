//! Numerical laboratory for conservation laws of conformally invariant
//! elliptic systems on the unit disk.
//!
//! The crate discretizes D² on a masked Cartesian grid and builds, from an
//! antisymmetric connection Ω, the objects that turn `-Δu = Ω·∇u` into a
//! divergence-form equation: Coulomb gauges, the (A, B) pair with
//! `div(A∇u + B∇⊥u) = 0`, Wente-type solutions and Coulomb moving frames.

pub mod conslaw;
pub mod convergence;
pub mod elliptic;
mod error;
pub mod field_core;
pub mod frames;
pub mod gauge;
pub mod targets;
pub mod wente;

pub use error::{Error, Result};
