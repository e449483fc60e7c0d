//! Generalized fractional counting process.
//!
//! The process counts events that arrive in batches of size 1 to k with rates
//! λ₁..λ_k, time-changed by an inverse α-stable subordinator. For α = 1 it is a
//! compound Poisson process with a finite jump law.
//!
//! [`specfun`] holds the Mittag-Leffler function and friends, [`gcp`] and
//! [`gfcp`] the distributions, moments and samplers, [`dependence`] the
//! increment correlations, [`ctrw`] the random walk limit and [`risk`] the
//! surplus model. Monte Carlo helpers in [`mc`] are seeded per chunk, so
//! results do not depend on the thread count.

pub mod checks;
pub mod ctrw;
pub mod dependence;
pub mod error;
pub mod gcp;
pub mod gfcp;
pub mod mc;
pub mod params;
pub mod quad;
pub mod risk;
pub mod specfun;
pub mod subordinator;

pub use error::{Error, Result};
