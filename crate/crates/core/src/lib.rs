//! Data-efficient Bayesian optimization of a scale or precision hyperparameter
//! `β` of a stochastic system.
//!
//! The statistic `s` produced by the system is modelled by a conjugate Bayesian
//! GLM in log-log space, `ln s = a ln β + ln b + ε z`. Under that surrogate the
//! mean-squared error objective `E|s - s0|²` has a closed form, and so does its
//! global minimizer, which makes Thompson sampling essentially free.
//!
//! Module map:
//!
//! - [`glm`]: log dataset, classical fit, posterior sampling, predictive `t`.
//! - [`acquisition`]: analytic surrogate objective, closed-form argmin, Thompson batches.
//! - [`driver`]: the batch Bayesian optimization loop and its trace.
//! - [`problems`]: synthetic simulators, the static structural fixture, and a
//!   stochastic reduced-order stand-in built on it.
//! - [`baselines`]: Monte Carlo objective with golden-section and parabolic
//!   line searches, plus a LOESS reference estimator.
//! - [`diagnostics`]: residual moment series, rolling smoothing, family fits.
//! - [`cli`]: configuration files, artifact writers and the command implementations.

pub mod acquisition;
pub mod baselines;
pub mod cli;
pub mod diagnostics;
pub mod domain;
pub mod driver;
pub mod glm;
pub mod io;
pub mod problems;
pub mod rng;

pub use acquisition::{SurrogateObjective, ThompsonBatch};
pub use domain::BetaDomain;
pub use driver::{BoConfig, BoTrace};
pub use glm::{GlmFit, GlmPosteriorSample, LogDataset};
pub use problems::ObjectiveProblem;
