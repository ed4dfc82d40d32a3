//! Computable convergence-rate bounds for strongly ergodic Markov processes.
//!
//! The crate turns concrete model descriptions (birth-death chains,
//! single-death chains, trees, one-dimensional diffusions, stable-driven SDEs
//! and time-changed stable processes) into lower bounds on the uniform
//! total-variation rate `kappa` and the spectral gap `lambda1`, and checks
//! those bounds against independent numerical oracles: eigensolvers on
//! truncated generators, hitting-time linear solves, uniformized
//! total-variation decay and Monte Carlo hitting times.
//!
//! Module map:
//!
//! * [`model`]: expression grammar for rates, model families, JSON loading.
//! * [`numerics`]: series with tail control, adaptive quadrature, Gamma, fits.
//! * [`chain_bounds`]: series-based bounds for discrete chains.
//! * [`continuum_bounds`]: integral-based bounds for diffusions and stable models.
//! * [`oracle`]: truncated generators and exact finite-state computations.
//! * [`montecarlo`]: trajectory simulation and hitting-time estimators.

pub mod chain_bounds;
pub mod continuum_bounds;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod oracle;

pub use error::{Error, Result};
