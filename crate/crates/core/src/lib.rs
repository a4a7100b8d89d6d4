//! Pseudo-spectral simulation and verification suite for the 3D primitive
//! equations with magnetic field (PEM) and the scaled anisotropic
//! incompressible MHD system they descend from, on a horizontally and
//! vertically periodic box.
//!
//! The crate has three layers:
//!
//! * numerics: [`spectral`] (transforms, derivatives, dealiasing, elliptic
//!   inversions), [`fields`] (symmetry classes, vertical recovery, Elsasser
//!   variables) and the two integrators [`pem`] and [`smhd`];
//! * measurement: [`diagnostics`] (norm records, energy-identity residual,
//!   decay fits, a-priori-bound monitors) and [`inequality`] (randomized
//!   stress tests of the anisotropic Ladyzhenskaya inequalities);
//! * orchestration: [`harness`] (configs, presets, CSV/snapshot I/O,
//!   experiment drivers) and [`acceptance`] (the verification gate run by
//!   `pemsim verify` and the `acceptance` integration test).

pub mod error;
pub mod fields;
pub mod grid;
pub mod pem;
pub mod spectral;
pub mod timestep;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{PemError, Result};
pub use grid::{Axis, GridSpec};
