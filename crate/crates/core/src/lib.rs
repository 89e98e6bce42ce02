//! Conjugate-exponential-family variational inference with tuneable
//! stochastic annealing.
//!
//! The crate provides:
//!
//! - [`expfam`]: natural parameters, expected sufficient statistics,
//!   entropy and KL divergence for the Dirichlet, multivariate Gaussian
//!   and Normal-Wishart families;
//! - [`engine`]: the update kernel shared by batch VI, SVI and SVI+ —
//!   batch sampling, step-size and effective-batch-size schedules, and
//!   the per-datum noise-weight construction that matches a larger
//!   batch's gradient to the variance of a smaller effective batch;
//! - [`models`]: Gaussian mixture (with a truncated-DP variant),
//!   probabilistic matrix factorization and LDA plugins behind one
//!   model contract;
//! - [`data`]: dataset parsers (MovieLens ratings, UCI bag-of-words,
//!   numeric CSV) and seeded synthetic generators;
//! - [`diagnostics`]: gradient-noise collection, Gaussianity metrics
//!   (per-coordinate KS, energy distance) and cluster-occupancy
//!   summaries;
//! - [`harness`]: run configuration, the experiment loop, multi-seed
//!   comparisons, CSV traces and state snapshots.

pub mod data;
pub mod diagnostics;
pub mod engine;
mod error;
pub mod expfam;
pub mod harness;
pub mod models;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
