//! Semiclassical spectral predictions for magnetic Schrödinger operators
//! `H = Σ_j (ħ/i ∂_j − A_j)² + ħV` and their numerical verification on a
//! gauge-covariant lattice.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`]: magnetic field / potential families and the pointwise
//!   skew-eigenvalues `a_j(x₀)` of `B(x₀)`.
//! * [`landau`]: Landau levels `Λ_k(x₀)`, the sampled spectral set `Σ`,
//!   spectral gaps, the localization set `K_[a,b]` and the leading local
//!   density-of-states coefficient `f₀`.
//! * [`gauge`]: the transverse (Fock-Schwinger) gauge around a base point.
//! * [`lattice`]: Peierls-phase finite-difference discretization on a box
//!   with Dirichlet boundary.
//! * [`sparse`]: nested-dissection multifrontal `LDLᴴ` used for
//!   shift-invert solves and inertia counts.
//! * [`spectral`]: certified window eigensolver and kernel evaluations.
//! * [`verify`]: scaling experiments (inclusion, discreteness, localization,
//!   LDOS leading order, off-diagonal decay).
//! * [`config`], [`report`], [`runner`]: scenario files, report emission and
//!   subcommand dispatch for the `magspec` binary.

// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod field;
pub mod fit;
pub mod gauge;
pub mod landau;
pub mod lattice;
pub mod par;
pub mod quad;
pub mod report;
pub mod runner;
pub mod sparse;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use field::{FieldSpec, ModelSpectrum};
pub use landau::{KSetMask, LevelIndex, SigmaApprox};
pub use lattice::{GridSpec, LatticeOperator};
pub use spectral::{EigenWindowResult, TestFunction};

pub use num_complex::Complex64;
