//! Tools for studying the Minimum-over-N (variety) loss.
//!
//! A model trained by minimizing the distance between a target and the best of
//! `N` of its own samples does not learn the target density `P` but roughly
//! `sqrt(P)`. This crate measures that effect and undoes it:
//!
//! - [`densities`]: Gaussian mixtures, the power family `P^k / C_k`, binned
//!   densities, power transforms of histograms and Jensen-Shannon divergence.
//! - [`mon`]: Monte Carlo estimators for the MoN draw, its expectation and the
//!   dataset-level loss, plus exponent searches over the power family.
//! - [`sqrt_sampling`]: two samplers that draw from `P^2` using only a sampler
//!   for `P`.
//! - [`compensation`]: per-timestep KDE reconstruction, the grid compensation
//!   transform and the search for the best compensation exponent.
//! - [`learner`]: a particle model trained with stochastic subgradient steps on
//!   the empirical MoN loss.
//! - [`trajio`]: trajectory scene files, synthetic scene generation and the MoN
//!   metric on whole trajectories.
//!
//! All randomness flows from explicit `u64` seeds through [`rng`]; parallel
//! code writes into pre-allocated slots and reduces in a fixed order, so results
//! do not depend on the number of worker threads.

pub mod compensation;
pub mod densities;
pub mod error;
pub mod learner;
pub mod mon;
pub mod rng;
pub mod sqrt_sampling;
pub mod stats;
pub mod trajio;

pub use error::{Error, Result};
