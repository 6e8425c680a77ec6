//! Bayesian spatial and spatio-temporal modelling of circular data.
//!
//! Two Gaussian-process models for angles observed at spatial (or
//! spatio-temporal) locations:
//!
//! * **wrapped** — the angle is a latent Gaussian field taken mod 2π; the
//!   sampler augments each observation with its integer winding number;
//! * **projected** — the angle is the direction of a latent bivariate
//!   Gaussian field; the sampler augments each observation with its
//!   latent radius.
//!
//! Both are fit by adaptive MCMC (global block adaptation for the
//! covariance parameters, per-site batch adaptation for the latent
//! radii), and support kriging at new sites, convergence diagnostics,
//! and proper scoring of predictive distributions. The `circgp` binary
//! drives the same functionality from the command line.

pub mod adapt;
pub mod bessel;
pub mod circ;
pub mod config;
pub mod dataset;
pub mod diag;
pub mod draws;
pub mod error;
pub mod gauss;
pub mod kernel;
pub mod krige;
pub mod mcmc;
pub mod priors;
pub mod projected;
pub mod runner;
pub mod score;
pub mod sim;
pub mod wrapped;

pub use circ::{
    angular_separation, atan_star, circular_distance, circular_summary, wrap_to_circle, Angle,
    CircularSummary,
};
pub use error::{Error, Result};
