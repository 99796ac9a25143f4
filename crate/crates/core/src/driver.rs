//! Synchronous batch Bayesian optimization with Thompson sampling.
//!
//! 1. log-equispaced initial design of `n0` points, one statistic draw each;
//! 2. fit the GLM;
//! 3. draw `B` posterior samples, minimize each sampled objective in closed form;
//! 4. evaluate the batch (in parallel), augment the data, refit;
//! 5. repeat until the budget `T` is spent or the point estimate settles.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{point_mass_batch, thompson_batch, AcquisitionError, SurrogateObjective};
use crate::domain::BetaDomain;
use crate::glm::{self, GlmError, GlmFit, LogDataset, PosteriorSampler};
use crate::problems::{ObjectiveProblem, ProblemError};
use crate::rng::{stream, tag};

pub const TRACE_SCHEMA: &str = "bo-trace/1";

/// Posterior draws used for the per-iteration `β*` quantile summary.
pub const SUMMARY_DRAWS: usize = 1000;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("simulator failed at iteration {iteration}, proposal {index} (beta={beta}): {source}")]
    Simulator {
        iteration: usize,
        index: usize,
        beta: f64,
        #[source]
        source: ProblemError,
    },
    #[error("GLM fit failed at iteration {iteration}: {source}")]
    Fit {
        iteration: usize,
        #[source]
        source: GlmError,
    },
    #[error("acquisition failed at iteration {iteration}: {source}")]
    Acquisition {
        iteration: usize,
        #[source]
        source: AcquisitionError,
    },
}

fn default_n0() -> usize {
    40
}
fn default_batch() -> usize {
    10
}
fn default_iterations() -> usize {
    25
}
fn default_rel_tol() -> f64 {
    0.01
}
fn default_window() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    /// Overrides the problem's target statistic when set.
    #[serde(default)]
    pub s0: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub stop_rel_tol: f64,
    #[serde(default = "default_window")]
    pub stop_window: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub integer_beta: bool,
}

impl BoConfig {
    pub fn new(beta_min: f64, beta_max: f64, seed: u64) -> Self {
        Self {
            beta_min,
            beta_max,
            n0: default_n0(),
            batch_size: default_batch(),
            max_iterations: default_iterations(),
            s0: None,
            stop_rel_tol: default_rel_tol(),
            stop_window: default_window(),
            seed,
            integer_beta: false,
        }
    }

    pub fn domain(&self) -> Result<BetaDomain, DriverError> {
        BetaDomain::new(self.beta_min, self.beta_max).map_err(|e| DriverError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        self.domain()?;
        if self.n0 < 4 {
            return Err(DriverError::Config(format!("n0 = {} (need >= 4)", self.n0)));
        }
        if self.batch_size < 1 {
            return Err(DriverError::Config("batch_size must be >= 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(DriverError::Config("max_iterations must be >= 1".into()));
        }
        if !(self.stop_rel_tol >= 0.0) {
            return Err(DriverError::Config(format!("stop_rel_tol = {}", self.stop_rel_tol)));
        }
        if self.stop_window < 1 {
            return Err(DriverError::Config("stop_window must be >= 1".into()));
        }
        if let Some(s0) = self.s0 {
            if !(s0.is_finite() && s0 > 0.0) {
                return Err(DriverError::Config(format!("s0 = {s0}")));
            }
        }
        Ok(())
    }
}

/// `n0` points equally spaced in `[ln β_min, ln β_max]`, endpoints included.
/// Only the grid needs `n0 >= 2`; [`run`] requires `n0 >= 4`.
pub fn initial_design(config: &BoConfig) -> Result<Vec<f64>, DriverError> {
    let d = config.domain()?;
    if config.n0 < 2 {
        return Err(DriverError::Config(format!("n0 = {} (need >= 2 for a grid)", config.n0)));
    }
    let (lo, hi) = (d.ln_min(), d.ln_max());
    let n = config.n0;
    let pts = (0..n)
        .map(|i| {
            let beta = if i == 0 {
                d.min
            } else if i == n - 1 {
                d.max
            } else {
                (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()
            };
            if config.integer_beta {
                d.round_into(beta)
            } else {
                beta
            }
        })
        .collect();
    Ok(pts)
}

/// Deterministic estimate from the classical fit, with `ε² := s²`.
pub fn point_estimate(fit: &GlmFit, s0: f64) -> Result<f64, AcquisitionError> {
    SurrogateObjective::from_fit(fit, s0)?.argmin_closed_form().map(|(beta, _)| beta)
}

fn clamped_point_estimate(fit: &GlmFit, s0: f64, d: &BetaDomain) -> Result<f64, AcquisitionError> {
    let ln = SurrogateObjective::from_fit(fit, s0)?.ln_argmin()?;
    Ok(d.clamp_ln(ln).0)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (i, frac) = (h.floor() as usize, h - h.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// 2.5 / 50 / 97.5 % quantiles of `β* | D`, clamped into the domain.
fn posterior_summary(fit: &GlmFit, s0: f64, d: &BetaDomain, seed: u64, iteration: usize, point: f64) -> [f64; 3] {
    let sampler = match PosteriorSampler::new(fit) {
        Ok(s) => s,
        Err(_) => return [point; 3],
    };
    let mut rng = stream(seed, &[tag::POSTERIOR_SUMMARY, iteration as u64]);
    let mut draws: Vec<f64> = (0..SUMMARY_DRAWS)
        .filter_map(|_| {
            let s = sampler.draw(&mut rng);
            let obj = SurrogateObjective::from_sample(&s, s0).ok()?;
            Some(d.clamp_ln(obj.ln_argmin().ok()?).0)
        })
        .collect();
    if draws.is_empty() {
        return [point; 3];
    }
    draws.sort_by(f64::total_cmp);
    [quantile_sorted(&draws, 0.025), quantile_sorted(&draws, 0.5), quantile_sorted(&draws, 0.975)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Init,
    Thompson,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Init => "init",
            Source::Thompson => "thompson",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Budget,
    Converged,
    DegeneratePosterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 0 for the initial design.
    pub iteration: usize,
    pub source: Source,
    pub proposals: Vec<f64>,
    pub observations: Vec<f64>,
    pub clamped: usize,
    pub rejected: usize,
    pub fit: GlmFit,
    pub point_estimate: f64,
    /// 2.5 / 50 / 97.5 % quantiles of `β* | D`.
    pub posterior_quantiles: [f64; 3],
    pub evaluations: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub schema: String,
    pub config: BoConfig,
    pub s0: f64,
    pub iterations: Vec<IterationRecord>,
    /// Final `β̂*`, rounded when `integer_beta` is set.
    pub final_estimate: f64,
    pub final_estimate_continuous: f64,
    pub evaluations: usize,
    pub rejected: usize,
    pub stop_reason: StopReason,
    pub wall_clock_seconds: f64,
}

impl BoTrace {
    /// Thompson iterations actually completed.
    pub fn completed_iterations(&self) -> usize {
        self.iterations.iter().filter(|r| r.source == Source::Thompson).count()
    }

    pub fn final_fit(&self) -> &GlmFit {
        &self.iterations.last().expect("trace has the initial record").fit
    }

    /// All evaluated `(iteration, β, s, source)` rows in evaluation order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64, Source)> + '_ {
        self.iterations.iter().flat_map(|r| {
            r.proposals.iter().zip(&r.observations).map(move |(&b, &s)| (r.iteration, b, s, r.source))
        })
    }

    /// Dataset rebuilt from the trace.
    pub fn dataset(&self) -> LogDataset {
        glm::ingest(self.rows().map(|(_, b, s, _)| (b, s))).0
    }
}

fn evaluate_all<P: ObjectiveProblem + ?Sized>(
    problem: &P,
    betas: &[f64],
    seed: u64,
    phase: u64,
    iteration: usize,
) -> Result<Vec<f64>, DriverError> {
    betas
        .par_iter()
        .enumerate()
        .map(|(j, &beta)| {
            let mut rng = stream(seed, &[phase, iteration as u64, j as u64]);
            problem
                .evaluate_statistic(beta, &mut rng)
                .map_err(|source| DriverError::Simulator { iteration, index: j, beta, source })
        })
        .collect()
}

/// Run the optimization loop to completion.
pub fn run<P: ObjectiveProblem + ?Sized>(config: &BoConfig, problem: &P) -> Result<BoTrace, DriverError> {
    let clock = Instant::now();
    config.validate()?;
    let d = config.domain()?;
    let s0 = config.s0.unwrap_or_else(|| problem.target());
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(DriverError::Config(format!("target statistic s0 = {s0}")));
    }
    let seed = config.seed;

    let design = initial_design(config)?;
    let obs = evaluate_all(problem, &design, seed, tag::INIT_EVAL, 0)?;
    let mut data = LogDataset::new();
    let mut rejected = data.extend(design.iter().copied().zip(obs.iter().copied()));
    let mut evaluations = design.len();
    let mut fit = glm::fit(&data).map_err(|source| DriverError::Fit { iteration: 0, source })?;
    let acq_err = |iteration| move |source| DriverError::Acquisition { iteration, source };
    let mut point = clamped_point_estimate(&fit, s0, &d).map_err(acq_err(0))?;

    let mut iterations = vec![IterationRecord {
        iteration: 0,
        source: Source::Init,
        proposals: design,
        observations: obs,
        clamped: 0,
        rejected,
        fit,
        point_estimate: point,
        posterior_quantiles: posterior_summary(&fit, s0, &d, seed, 0, point),
        evaluations,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    }];

    let mut stop_reason = StopReason::Budget;
    let mut stable = 0;
    for t in 1..=config.max_iterations {
        let collapsed = fit.s2 == 0.0;
        let batch = if collapsed {
            point_mass_batch(&fit, s0, config.batch_size, &d)
        } else {
            let mut rng = stream(seed, &[tag::THOMPSON, t as u64]);
            thompson_batch(&fit, s0, config.batch_size, &d, &mut rng)
        }
        .map_err(acq_err(t))?;

        let proposals = batch.betas();
        let obs = evaluate_all(problem, &proposals, seed, tag::BATCH_EVAL, t)?;
        let rej = data.extend(proposals.iter().copied().zip(obs.iter().copied()));
        rejected += rej;
        evaluations += proposals.len();
        fit = glm::fit(&data).map_err(|source| DriverError::Fit { iteration: t, source })?;

        let prev = point;
        point = clamped_point_estimate(&fit, s0, &d).map_err(acq_err(t))?;
        iterations.push(IterationRecord {
            iteration: t,
            source: Source::Thompson,
            proposals,
            observations: obs,
            clamped: batch.clamped_count,
            rejected: rej,
            fit,
            point_estimate: point,
            posterior_quantiles: posterior_summary(&fit, s0, &d, seed, t, point),
            evaluations,
            wall_clock_seconds: clock.elapsed().as_secs_f64(),
        });

        if collapsed {
            stop_reason = StopReason::DegeneratePosterior;
            break;
        }
        if (point - prev).abs() < config.stop_rel_tol * prev {
            stable += 1;
        } else {
            stable = 0;
        }
        if stable >= config.stop_window {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let final_estimate = if config.integer_beta { d.round_into(point) } else { point };
    Ok(BoTrace {
        schema: TRACE_SCHEMA.to_string(),
        config: config.clone(),
        s0,
        iterations,
        final_estimate,
        final_estimate_continuous: point,
        evaluations,
        rejected,
        stop_reason,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    })
}
