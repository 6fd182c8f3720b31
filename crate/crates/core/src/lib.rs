//! Convex demixing toolkit.
//!
//! Separates structured components entangled in a mixed observation by
//! solving gauge-regularized convex programs of the form
//!
//! ```text
//! minimize  sum_i  w_i * gauge_i(x_i)    subject to  Phi(sum_i x_i) = z0
//! ```
//!
//! The crate is organized around five pieces:
//!
//! - [`atoms`]: atomic gauge functions (l1, l-inf, Schatten norms, row-group
//!   norms, PSD trace, diagonal indicator) and their proximal operators.
//! - [`operators`]: linear measurement/dictionary operators with a shared
//!   apply/adjoint contract (dense maps, orthonormal DCT, Haar rotations,
//!   row subsampling, and the convolution lifting used for blind
//!   deconvolution).
//! - [`solvers`]: an alternating-direction solver for two-component
//!   demixing, a decomposition splitting for compressive and
//!   many-component programs, a first-order optimality certificate, and an
//!   exhaustive l0 oracle for tiny instances.
//! - [`geometry`]: statistical-dimension estimators for descent cones and
//!   the phase-transition classifier built on them.
//! - [`experiments`]: reproducible studies (phase diagram, spikes+sines,
//!   texture inpainting, direction-of-arrival, blind deconvolution).
//!
//! Everything is deterministic per seed: random draws go through
//! counter-based ChaCha streams so results reproduce bit-for-bit across
//! runs and thread counts.

pub mod atoms;
pub mod contour;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod operators;
pub mod rng;
pub mod shape;
pub mod solvers;

pub use error::{DemixError, Result};
