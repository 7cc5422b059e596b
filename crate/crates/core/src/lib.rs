//! Semiclassical simulator for DC-voltage-biased Josephson parametric
//! amplifiers (inelastic Cooper-pair tunneling amplifiers).
//!
//! The crate is organised bottom-up:
//!
//! - [`circuit`]: linear embedding networks, ABCD/scattering evaluation and
//!   the impedance seen by the junction.
//! - [`frankenstein`]: conversion of a scattering matrix with mixed port
//!   boundary conditions into the generalized response matrix `F`.
//! - [`solver`]: fixed-point harmonic-balance iteration of the junction
//!   nonlinearity against the linear response.
//! - [`sweeps`]: gain maps, profiles, compression curves, Rapp fits and pump
//!   emission.
//! - [`design`]: canonical component values and first-order diagnostics.
//! - [`cli`]: configuration files and reproducible output writers.

pub mod circuit;
pub mod cli;
pub mod design;
mod error;
pub mod frankenstein;
mod linalg;
pub mod solver;
pub mod sweeps;
pub mod units;

pub use error::{Error, Result};
pub use linalg::CMatrix;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
