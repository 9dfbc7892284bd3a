//! Relative entropy and entropy production between thermal equilibrium states
//! of a massive scalar field, to second order in the interaction, together
//! with an exact finite-dimensional model that cross-checks every formula.
//!
//! The field-side machinery works with interactions whose momentum kernels
//! factorize over lines through a shared radial profile; second-order
//! quantities then reduce to one-dimensional integrals against convolution
//! powers of a single-line spectral density. The `adiabatic` module computes
//! the corresponding per-unit-volume densities, and `findim` realizes the
//! same state constructions with finite matrices, where every identity can be
//! checked against exact linear algebra.

pub mod adiabatic;
pub mod engine;
pub mod error;
pub mod findim;
pub mod functionals;
pub mod quad;
pub mod spectral;
pub mod thermal;

pub use error::{Error, Result};
