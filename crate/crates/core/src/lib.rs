//! Desk-scale numerics for the KMS states of Toeplitz noncommutative solenoids.
//!
//! The crate is organised bottom-up:
//!
//! - [`circle`]: points and arcs of ℝ/ℤ, rotations, the covering maps
//!   `t ↦ Nt`, and trigonometric polynomials.
//! - [`measures`]: piecewise-exponential probability measures on the circle,
//!   the rate-`r` extreme measures `m_r`, subinvariance checks and the
//!   decomposition into rotated extreme measures.
//! - [`cycle`]: subinvariant vectors on the cycle graph with `2^n` vertices and
//!   the resolvent that exposes their extreme points.
//! - [`toeplitz`]: normal forms `s^m i(f) s*^n`, their products, adjoints, the
//!   dynamics, the connecting embeddings and the solenoid action.
//! - [`kms`]: angle sequences, measure towers and the KMS functional together
//!   with its verifiers.
//! - [`campaign`]: seeded verification campaigns shared by the CLI and the
//!   acceptance suite.

pub mod campaign;
pub mod circle;
pub mod cycle;
pub mod kms;
pub mod measures;
pub mod toeplitz;

pub use num_complex::Complex64;
