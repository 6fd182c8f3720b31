//! Reproducible studies built on the solvers and the cone geometry:
//! the sparse/sparse phase diagram under random rotations, spikes+sines
//! separation, texture inpainting, covariance demixing for bearing
//! estimation, and blind deconvolution by lifting.
//!
//! Every study is a pure function of its spec and seed. Parallel execution
//! (grid cells, study seeds) derives per-work-item seeds with
//! [`crate::rng::mix_seed`], so results are identical at any thread count.

pub mod blind;
pub mod doa;
pub mod phase;
pub mod spikes;
pub mod texture;
