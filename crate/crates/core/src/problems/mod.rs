//! Objective problems: a seeded statistic simulator `s(β)` and a target `s0`.

mod fixture;
mod standin;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::SurrogateObjective;
use crate::rng::Stream;

pub use fixture::{build_static_fixture, StaticFixture, MIN_DOF as MIN_FIXTURE_DOF, N_DOF as FIXTURE_DOF};
pub use standin::{srom_standin, srom_standin_with_decay, SromStandin, STANDIN_DECAY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem kind `{0}`")]
    UnknownKind(String),
    #[error("invalid problem parameter: {0}")]
    InvalidParameter(String),
    #[error("beta={0} is outside the simulator's domain")]
    OutOfDomain(f64),
    #[error("simulator failure: {0}")]
    Simulator(String),
}

/// Known ground truth of a power-law problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub a: f64,
    pub ln_b: f64,
    pub eps2: f64,
    pub beta_opt: f64,
}

/// A stochastic system reduced to a nonnegative statistic per draw.
///
/// `evaluate_statistic` must be re-entrant: concurrent calls with independent
/// streams are allowed.
pub trait ObjectiveProblem: Send + Sync {
    fn evaluate_statistic(&self, beta: f64, rng: &mut Stream) -> Result<f64, ProblemError>;

    /// Target statistic `s0`.
    fn target(&self) -> f64;

    fn truth(&self) -> Option<Truth> {
        None
    }

    /// Exact `E|s(β) - s0|²` when known in closed form.
    fn true_objective(&self, beta: f64) -> Option<f64> {
        let t = self.truth()?;
        SurrogateObjective::new(t.a, t.ln_b.exp(), t.eps2, self.target()).ok()?.evaluate(beta).ok()
    }
}

/// `s = exp(a ln β + ln b + √ε² z)`: the surrogate's own model used as a
/// simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawProblem {
    pub a: f64,
    pub ln_b: f64,
    pub eps2: f64,
    pub s0: f64,
}

pub fn synthetic_powerlaw(a: f64, ln_b: f64, eps2: f64, s0: f64) -> Result<PowerLawProblem, ProblemError> {
    if !(eps2.is_finite() && eps2 >= 0.0) {
        return Err(ProblemError::InvalidParameter(format!("eps2 = {eps2}")));
    }
    if !(a.is_finite() && ln_b.is_finite()) {
        return Err(ProblemError::InvalidParameter(format!("a = {a}, ln_b = {ln_b}")));
    }
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(ProblemError::InvalidParameter(format!("s0 = {s0}")));
    }
    Ok(PowerLawProblem { a, ln_b, eps2, s0 })
}

/// Target statistic for which the optimum of the true objective is `beta_opt`:
/// `s0 = b e^{1.5 ε²} β_opt^a`.
pub fn target_for_optimum(a: f64, ln_b: f64, eps2: f64, beta_opt: f64) -> f64 {
    (ln_b + 1.5 * eps2 + a * beta_opt.ln()).exp()
}

impl PowerLawProblem {
    /// Problem whose true optimum sits at `beta_opt`.
    pub fn with_optimum(a: f64, ln_b: f64, eps2: f64, beta_opt: f64) -> Result<Self, ProblemError> {
        synthetic_powerlaw(a, ln_b, eps2, target_for_optimum(a, ln_b, eps2, beta_opt))
    }

    pub fn objective(&self) -> SurrogateObjective {
        SurrogateObjective::new(self.a, self.ln_b.exp(), self.eps2, self.s0).expect("validated parameters")
    }
}

impl ObjectiveProblem for PowerLawProblem {
    fn evaluate_statistic(&self, beta: f64, rng: &mut Stream) -> Result<f64, ProblemError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ProblemError::OutOfDomain(beta));
        }
        let z: f64 = rng.sample(StandardNormal);
        Ok((self.a * beta.ln() + self.ln_b + self.eps2.sqrt() * z).exp())
    }

    fn target(&self) -> f64 {
        self.s0
    }

    fn truth(&self) -> Option<Truth> {
        let beta_opt = self.objective().argmin_closed_form().ok()?.0;
        Some(Truth { a: self.a, ln_b: self.ln_b, eps2: self.eps2, beta_opt })
    }
}

/// Residual laws that break the Gaussian log-noise assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "noise", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Misspecification {
    /// `ln s = a ln β + ln b + ε(β) z - ε(β)²/2`, `ε(β) = eps0 + eps1 / ln β`, for `β > 1`.
    Heteroscedastic { eps0: f64, eps1: f64 },
    /// `s = b β^a ζ`, `ζ ~ Gamma(shape, 1/shape)`.
    GammaNoise { shape: f64 },
    /// `s = b β^a (shift + e^{ε z})`.
    ShiftedLognormal { shift: f64, eps2: f64 },
}

impl Misspecification {
    pub fn parse(kind: &str, params: &[f64]) -> Result<Self, ProblemError> {
        let need = |k: usize| -> Result<(), ProblemError> {
            if params.len() == k {
                Ok(())
            } else {
                Err(ProblemError::InvalidParameter(format!("`{kind}` takes {k} parameters, got {}", params.len())))
            }
        };
        match kind {
            "heteroscedastic" => {
                need(2)?;
                Ok(Self::Heteroscedastic { eps0: params[0], eps1: params[1] })
            }
            "gamma-noise" => {
                need(1)?;
                Ok(Self::GammaNoise { shape: params[0] })
            }
            "shifted-lognormal" => {
                need(2)?;
                Ok(Self::ShiftedLognormal { shift: params[0], eps2: params[1] })
            }
            other => Err(ProblemError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MisspecifiedProblem {
    pub a: f64,
    pub ln_b: f64,
    pub s0: f64,
    pub noise: Misspecification,
    gamma: Option<Gamma<f64>>,
}

pub fn synthetic_misspecified(
    noise: Misspecification,
    a: f64,
    ln_b: f64,
    s0: f64,
) -> Result<MisspecifiedProblem, ProblemError> {
    if !(a.is_finite() && ln_b.is_finite() && s0.is_finite() && s0 > 0.0) {
        return Err(ProblemError::InvalidParameter(format!("a = {a}, ln_b = {ln_b}, s0 = {s0}")));
    }
    let mut gamma = None;
    match noise {
        Misspecification::Heteroscedastic { eps0, eps1 } => {
            if !(eps0.is_finite() && eps1.is_finite() && eps0 >= 0.0 && eps1 >= 0.0) {
                return Err(ProblemError::InvalidParameter(format!("eps0 = {eps0}, eps1 = {eps1}")));
            }
        }
        Misspecification::GammaNoise { shape } => {
            let g = Gamma::new(shape, 1.0 / shape)
                .map_err(|_| ProblemError::InvalidParameter(format!("shape = {shape}")))?;
            if !(shape.is_finite() && shape > 0.0) {
                return Err(ProblemError::InvalidParameter(format!("shape = {shape}")));
            }
            gamma = Some(g);
        }
        Misspecification::ShiftedLognormal { shift, eps2 } => {
            if !(shift.is_finite() && shift >= 0.0 && eps2.is_finite() && eps2 >= 0.0) {
                return Err(ProblemError::InvalidParameter(format!("shift = {shift}, eps2 = {eps2}")));
            }
        }
    }
    Ok(MisspecifiedProblem { a, ln_b, s0, noise, gamma })
}

impl MisspecifiedProblem {
    /// Noise scale `ε(β)` of the heteroscedastic law.
    pub fn noise_scale(&self, beta: f64) -> Option<f64> {
        match self.noise {
            Misspecification::Heteroscedastic { eps0, eps1 } => Some(eps0 + eps1 / beta.ln()),
            _ => None,
        }
    }
}

impl ObjectiveProblem for MisspecifiedProblem {
    fn evaluate_statistic(&self, beta: f64, rng: &mut Stream) -> Result<f64, ProblemError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ProblemError::OutOfDomain(beta));
        }
        let trend = self.a * beta.ln() + self.ln_b;
        let s = match self.noise {
            Misspecification::Heteroscedastic { eps0, eps1 } => {
                if beta <= 1.0 {
                    return Err(ProblemError::OutOfDomain(beta));
                }
                let eps = eps0 + eps1 / beta.ln();
                let z: f64 = rng.sample(StandardNormal);
                (trend + eps * z - 0.5 * eps * eps).exp()
            }
            Misspecification::GammaNoise { .. } => {
                let g = self.gamma.as_ref().expect("gamma law built at construction");
                trend.exp() * g.sample(rng)
            }
            Misspecification::ShiftedLognormal { shift, eps2 } => {
                let z: f64 = rng.sample(StandardNormal);
                trend.exp() * (shift + (eps2.sqrt() * z).exp())
            }
        };
        Ok(s)
    }

    fn target(&self) -> f64 {
        self.s0
    }
}
