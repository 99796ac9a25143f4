use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("invalid bounds [{min}, {max}]: need 0 < min < max < inf")]
    InvalidBounds { min: f64, max: f64 },
}

/// Feasible interval `[min, max]` for `β`, with `0 < min < max < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaDomain {
    pub min: f64,
    pub max: f64,
}

impl BetaDomain {
    pub fn new(min: f64, max: f64) -> Result<Self, DomainError> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && min < max) {
            return Err(DomainError::InvalidBounds { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, beta: f64) -> bool {
        beta >= self.min && beta <= self.max
    }

    pub fn ln_min(&self) -> f64 {
        self.min.ln()
    }

    pub fn ln_max(&self) -> f64 {
        self.max.ln()
    }

    /// Map a log-domain point into the interval. Returns the value and
    /// whether it had to be projected. Bound values are returned exactly.
    pub fn clamp_ln(&self, ln_beta: f64) -> (f64, bool) {
        if ln_beta <= self.ln_min() {
            (self.min, ln_beta < self.ln_min())
        } else if ln_beta >= self.ln_max() {
            (self.max, ln_beta > self.ln_max())
        } else {
            (ln_beta.exp().clamp(self.min, self.max), false)
        }
    }

    pub fn clamp(&self, beta: f64) -> f64 {
        beta.clamp(self.min, self.max)
    }

    /// Nearest integer inside the interval. Falls back to the plain clamp
    /// when the interval holds no integer.
    pub fn round_into(&self, beta: f64) -> f64 {
        let lo = self.min.ceil();
        let hi = self.max.floor();
        if lo > hi {
            return self.clamp(beta);
        }
        beta.round().clamp(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_bounds() {
        assert!(BetaDomain::new(0.0, 1.0).is_err());
        assert!(BetaDomain::new(2.0, 1.0).is_err());
        assert!(BetaDomain::new(1.0, f64::INFINITY).is_err());
        assert!(BetaDomain::new(1.0, 1.0).is_err());
    }

    #[test]
    fn clamp_ln_hits_bounds_exactly() {
        let d = BetaDomain::new(50.0, 60.0).unwrap();
        assert_eq!(d.clamp_ln(101f64.ln()), (60.0, true));
        assert_eq!(d.clamp_ln(1f64.ln()), (50.0, true));
        let (b, c) = d.clamp_ln(55f64.ln());
        assert!(!c);
        assert!((b - 55.0).abs() < 1e-12);
    }

    #[test]
    fn round_into_stays_inside() {
        let d = BetaDomain::new(2.4, 300.6).unwrap();
        assert_eq!(d.round_into(2.0), 3.0);
        assert_eq!(d.round_into(300.9), 300.0);
        assert_eq!(d.round_into(101.4), 101.0);
    }
}
