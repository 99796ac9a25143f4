//! Surrogate objective induced by the GLM and its Thompson-sampling acquisition.
//!
//! For fixed `(a, b, ε²)` the conditional model `s | β = b β^a ζ` with
//! `ζ ~ lnN(0, ε²)` gives
//!
//! ```text
//! f(β) = E|b β^a ζ - s0|² = C1 β^{2a} + (C2 β^a - s0)²
//! C1 = b² (e^{2ε²} - e^{ε²}),   C2 = b e^{ε²/2}
//! ```
//!
//! whose unique critical point `β*^a = s0 C2 / (C1 + C2²)` is the global
//! minimum on `(0, ∞)` for either sign of `a`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::BetaDomain;
use crate::glm::{GlmError, GlmFit, GlmPosteriorSample, PosteriorSampler};

/// `|a|` below this is treated as a flat objective.
pub const DEGENERATE_EXPONENT: f64 = 1e-12;

/// Degenerate posterior draws tolerated per proposal before giving up.
pub const MAX_RESAMPLE: usize = 100;

/// Largest exponent argument that does not overflow `f64`.
const LN_MAX: f64 = 709.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcquisitionError {
    #[error("invalid surrogate parameters: {0}")]
    InvalidParameters(String),
    #[error("objective overflows at beta={beta} (a ln beta = {a_ln_beta})")]
    Overflow { beta: f64, a_ln_beta: f64 },
    #[error("exponent |a| = {0:e} is degenerate: objective is flat in beta")]
    DegenerateExponent(f64),
    #[error("{attempts} consecutive posterior draws had a degenerate exponent")]
    ExhaustedResampling { attempts: usize },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error(transparent)]
    Glm(#[from] GlmError),
}

/// `f(β)` for one parameter triple and target `s0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateObjective {
    pub a: f64,
    pub b: f64,
    pub eps2: f64,
    pub s0: f64,
    c1: f64,
    c2: f64,
}

impl SurrogateObjective {
    pub fn new(a: f64, b: f64, eps2: f64, s0: f64) -> Result<Self, AcquisitionError> {
        if !a.is_finite() {
            return Err(AcquisitionError::InvalidParameters(format!("a = {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(AcquisitionError::InvalidParameters(format!("b = {b}")));
        }
        if !(eps2.is_finite() && eps2 >= 0.0) {
            return Err(AcquisitionError::InvalidParameters(format!("eps2 = {eps2}")));
        }
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(AcquisitionError::InvalidParameters(format!("s0 = {s0}")));
        }
        // e^{2ε²} - e^{ε²} = e^{ε²} (e^{ε²} - 1), exact zero at ε² = 0
        let c1 = b * b * eps2.exp() * eps2.exp_m1();
        let c2 = b * (0.5 * eps2).exp();
        if !(c1.is_finite() && c2.is_finite()) {
            return Err(AcquisitionError::InvalidParameters(format!("b = {b}, eps2 = {eps2} overflow")));
        }
        Ok(Self { a, b, eps2, s0, c1, c2 })
    }

    pub fn from_sample(sample: &GlmPosteriorSample, s0: f64) -> Result<Self, AcquisitionError> {
        Self::new(sample.a, sample.ln_b.exp(), sample.eps2, s0)
    }

    /// Plug-in surrogate from the classical estimate, with `ε² := s²`.
    pub fn from_fit(fit: &GlmFit, s0: f64) -> Result<Self, AcquisitionError> {
        Self::new(fit.exponent(), fit.ln_scale().exp(), fit.s2, s0)
    }

    /// Variance coefficient `b² (e^{2ε²} - e^{ε²})`.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Mean coefficient `b e^{ε²/2}`.
    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// `f` as a function of `u = β^a`.
    fn at_power(&self, u: f64) -> f64 {
        let m = self.c2 * u - self.s0;
        self.c1 * u * u + m * m
    }

    pub fn evaluate(&self, beta: f64) -> Result<f64, AcquisitionError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(AcquisitionError::InvalidParameters(format!("beta = {beta}")));
        }
        let a_ln_beta = self.a * beta.ln();
        // largest term is max(C1, C2²) β^{2a}
        let lead = self.c1.max(self.c2 * self.c2).ln() + 2.0 * a_ln_beta;
        if lead > LN_MAX {
            return Err(AcquisitionError::Overflow { beta, a_ln_beta });
        }
        let f = self.at_power(a_ln_beta.exp());
        if !f.is_finite() {
            return Err(AcquisitionError::Overflow { beta, a_ln_beta });
        }
        Ok(f)
    }

    /// `ln β*`, defined for any non-degenerate exponent even when `β*`
    /// itself is outside the representable range.
    pub fn ln_argmin(&self) -> Result<f64, AcquisitionError> {
        if self.a.abs() < DEGENERATE_EXPONENT {
            return Err(AcquisitionError::DegenerateExponent(self.a.abs()));
        }
        Ok((self.s0.ln() - self.b.ln() - 1.5 * self.eps2) / self.a)
    }

    /// Value at the minimizer, `s0² C1 / (C1 + C2²)`.
    pub fn min_value(&self) -> f64 {
        self.at_power(self.s0 * self.c2 / (self.c1 + self.c2 * self.c2))
    }

    /// Closed-form global minimizer `β* = (s0 / (b e^{1.5 ε²}))^{1/a}` and `f(β*)`.
    pub fn argmin_closed_form(&self) -> Result<(f64, f64), AcquisitionError> {
        let ln_beta = self.ln_argmin()?;
        if ln_beta.abs() > LN_MAX {
            return Err(AcquisitionError::Overflow { beta: ln_beta.exp(), a_ln_beta: self.a * ln_beta });
        }
        Ok((ln_beta.exp(), self.min_value()))
    }

    /// Interval of `β` where `f(β) ≤ (1 + rel) f(β*)`. Ends are `0` or `∞`
    /// when the set is unbounded on that side.
    pub fn near_optimal_region(&self, rel: f64) -> Result<(f64, f64), AcquisitionError> {
        let ln_star = self.ln_argmin()?;
        let q = self.c1 + self.c2 * self.c2;
        let u_star = self.s0 * self.c2 / q;
        // f(u) - f* = q (u - u*)²
        let half = (rel * self.min_value() / q).sqrt();
        let lo_u = u_star - half;
        let hi_u = u_star + half;
        let to_beta = |u: f64| -> f64 {
            if u <= 0.0 {
                if self.a > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (u.ln() / self.a).exp()
            }
        };
        let (p, q) = (to_beta(lo_u), to_beta(hi_u));
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        debug_assert!(lo <= ln_star.exp() * (1.0 + 1e-9) && ln_star.exp() <= hi * (1.0 + 1e-9));
        Ok((lo, hi))
    }
}

/// One Thompson proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub beta_star: f64,
    pub f_star: f64,
    pub source_sample: GlmPosteriorSample,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThompsonBatch {
    pub proposals: Vec<Proposal>,
    pub clamped_count: usize,
}

impl ThompsonBatch {
    pub fn betas(&self) -> Vec<f64> {
        self.proposals.iter().map(|p| p.beta_star).collect()
    }
}

/// Map one posterior draw to a feasible proposal, or `None` for a degenerate
/// exponent.
fn propose(
    sample: GlmPosteriorSample,
    s0: f64,
    bounds: &BetaDomain,
) -> Result<Option<Proposal>, AcquisitionError> {
    let obj = SurrogateObjective::from_sample(&sample, s0)?;
    let ln_star = match obj.ln_argmin() {
        Ok(v) => v,
        Err(AcquisitionError::DegenerateExponent(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (beta_star, clamped) = bounds.clamp_ln(ln_star);
    let f_star = if clamped { obj.evaluate(beta_star)? } else { obj.min_value() };
    Ok(Some(Proposal { beta_star, f_star, source_sample: sample, clamped }))
}

/// Draw `batch_size` posterior samples and minimize each sampled objective
/// in closed form, clamping the minimizers into `bounds`.
pub fn thompson_batch<R: Rng + ?Sized>(
    fit: &GlmFit,
    s0: f64,
    batch_size: usize,
    bounds: &BetaDomain,
    rng: &mut R,
) -> Result<ThompsonBatch, AcquisitionError> {
    if batch_size == 0 {
        return Err(AcquisitionError::EmptyBatch);
    }
    let sampler = PosteriorSampler::new(fit)?;
    let mut proposals = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let mut attempts = 0;
        let p = loop {
            if attempts == MAX_RESAMPLE {
                return Err(AcquisitionError::ExhaustedResampling { attempts });
            }
            attempts += 1;
            if let Some(p) = propose(sampler.draw(rng), s0, bounds)? {
                break p;
            }
        };
        proposals.push(p);
    }
    let clamped_count = proposals.iter().filter(|p| p.clamped).count();
    Ok(ThompsonBatch { proposals, clamped_count })
}

/// Batch for a collapsed posterior (`s² = 0`): every draw equals the
/// classical estimate, so all proposals coincide with the point estimate.
pub fn point_mass_batch(
    fit: &GlmFit,
    s0: f64,
    batch_size: usize,
    bounds: &BetaDomain,
) -> Result<ThompsonBatch, AcquisitionError> {
    if batch_size == 0 {
        return Err(AcquisitionError::EmptyBatch);
    }
    let sample = GlmPosteriorSample { a: fit.exponent(), ln_b: fit.ln_scale(), eps2: fit.s2 };
    let p = propose(sample, s0, bounds)?
        .ok_or(AcquisitionError::DegenerateExponent(fit.exponent().abs()))?;
    let proposals = vec![p; batch_size];
    let clamped_count = if p.clamped { batch_size } else { 0 };
    Ok(ThompsonBatch { proposals, clamped_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::StandardNormal;

    /// Golden-section minimization over `ln β`, independent of the closed form.
    pub(crate) fn golden_oracle(obj: &SurrogateObjective, lo: f64, hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let f = |x: f64| obj.evaluate(x.exp()).unwrap();
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 1e-12 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        (0.5 * (a + b)).exp()
    }

    #[test]
    fn deterministic_surrogate_hits_target() {
        let obj = SurrogateObjective::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(obj.c1(), 0.0);
        assert_eq!(obj.evaluate(1.0).unwrap(), 0.0);
        assert_eq!(obj.argmin_closed_form().unwrap(), (1.0, 0.0));
    }

    #[test]
    fn evaluate_matches_monte_carlo() {
        // 10⁷ draws of |2·4^{-1/2}·ζ - 0.5|², ζ ~ lnN(0, 0.1)
        let obj = SurrogateObjective::new(-0.5, 2.0, 0.1, 0.5).unwrap();
        let mut rng = stream(5, &[0]);
        let eps = 0.1f64.sqrt();
        let n = 10_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let s = 2.0 * 0.5 * (eps * z).exp();
            sum += (s - 0.5) * (s - 0.5);
        }
        let mc = sum / n as f64;
        let f = obj.evaluate(4.0).unwrap();
        assert!((f / mc - 1.0).abs() < 5e-3, "analytic {f} vs mc {mc}");
    }

    #[test]
    fn evaluate_bounded_below_by_bias_term() {
        let obj = SurrogateObjective::new(0.7, 3.0, 0.4, 2.0).unwrap();
        for &b in &[1e-3, 0.5, 1.0, 7.0, 1e4] {
            let f = obj.evaluate(b).unwrap();
            let bias = obj.c2() * b.powf(0.7) - 2.0;
            assert!(f >= 0.0 && f >= bias * bias);
        }
    }

    #[test]
    fn evaluate_reports_overflow() {
        let obj = SurrogateObjective::new(-300.0, 1.0, 0.1, 1.0).unwrap();
        assert!(matches!(obj.evaluate(1e-3), Err(AcquisitionError::Overflow { .. })));
        assert!(obj.evaluate(1e3).is_ok());
    }

    #[test]
    fn argmin_negative_exponent_against_golden_search() {
        let obj = SurrogateObjective::new(-0.5, 2.0, 0.1, 0.5).unwrap();
        let (beta, f) = obj.argmin_closed_form().unwrap();
        assert!((beta / (16.0 * 0.3f64.exp()) - 1.0).abs() < 1e-12);
        assert!((beta - 21.59774).abs() < 1e-4);
        let oracle = golden_oracle(&obj, 1e-3, 1e6);
        assert!((beta / oracle - 1.0).abs() < 1e-6, "{beta} vs {oracle}");
        assert!((f - obj.evaluate(beta).unwrap()).abs() < 1e-12 * f.max(1.0));
    }

    #[test]
    fn argmin_equivalent_power_form() {
        let obj = SurrogateObjective::new(1.3, 0.7, 0.35, 2.2).unwrap();
        let (beta, _) = obj.argmin_closed_form().unwrap();
        let lhs = beta.powf(1.3);
        let rhs = 2.2 * obj.c2() / (obj.c1() + obj.c2() * obj.c2());
        assert!((lhs / rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argmin_degenerate_exponent() {
        let obj = SurrogateObjective::new(0.0, 1.0, 0.1, 1.0).unwrap();
        assert!(matches!(obj.argmin_closed_form(), Err(AcquisitionError::DegenerateExponent(_))));
        let obj = SurrogateObjective::new(5e-13, 1.0, 0.1, 1.0).unwrap();
        assert!(matches!(obj.argmin_closed_form(), Err(AcquisitionError::DegenerateExponent(_))));
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(SurrogateObjective::new(1.0, 0.0, 0.1, 1.0).is_err());
        assert!(SurrogateObjective::new(1.0, 1.0, -0.1, 1.0).is_err());
        assert!(SurrogateObjective::new(1.0, 1.0, 0.1, 0.0).is_err());
        assert!(SurrogateObjective::new(f64::NAN, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn rescaling_b_and_s0_keeps_argmin() {
        let obj = SurrogateObjective::new(-0.8, 1.7, 0.3, 0.9).unwrap();
        let scaled = SurrogateObjective::new(-0.8, 1.7 * 4.0, 0.3, 0.9 * 4.0).unwrap();
        let (b1, _) = obj.argmin_closed_form().unwrap();
        let (b2, _) = scaled.argmin_closed_form().unwrap();
        assert!((b1 / b2 - 1.0).abs() < 1e-14);
        let other = SurrogateObjective::new(-0.8, 1.7 * 4.0, 0.5, 0.9 * 4.0).unwrap();
        assert!((other.argmin_closed_form().unwrap().0 / b1 - 1.0).abs() > 1e-3);
    }

    #[test]
    fn near_optimal_region_matches_grid() {
        let obj = SurrogateObjective::new(-0.58, 1.0, 0.25, 1.0).unwrap();
        let (lo, hi) = obj.near_optimal_region(0.1).unwrap();
        let fstar = obj.min_value();
        let (mut glo, mut ghi) = (f64::INFINITY, 0.0f64);
        for i in 0..200_001 {
            let b = (-10.0 + 20.0 * i as f64 / 200_000.0).exp();
            if obj.evaluate(b).unwrap() <= 1.1 * fstar {
                glo = glo.min(b);
                ghi = ghi.max(b);
            }
        }
        assert!((lo / glo - 1.0).abs() < 2e-4 && (hi / ghi - 1.0).abs() < 2e-4, "{lo},{hi} vs {glo},{ghi}");
    }

    fn tight_fit() -> GlmFit {
        GlmFit { coef_hat: [-0.58, 0.0], s2: 0.25, v_theta: [[1e-7, 0.0], [0.0, 1e-7]], dof: 9998 }
    }

    #[test]
    fn batch_cardinality_and_bounds() {
        let bounds = BetaDomain::new(10.0, 1000.0).unwrap();
        let fit = GlmFit { coef_hat: [-0.5, 0.2], s2: 0.3, v_theta: [[0.01, -0.02], [-0.02, 0.08]], dof: 38 };
        let batch = thompson_batch(&fit, 0.3, 10, &bounds, &mut stream(1, &[2])).unwrap();
        assert_eq!(batch.proposals.len(), 10);
        assert!(batch.proposals.iter().all(|p| bounds.contains(p.beta_star)));
        assert_eq!(batch.clamped_count, batch.proposals.iter().filter(|p| p.clamped).count());
    }

    #[test]
    fn batch_concentrates_under_tight_posterior() {
        let fit = tight_fit();
        let s0 = (1.5f64 * 0.25).exp() * 101f64.powf(-0.58);
        let point = SurrogateObjective::from_fit(&fit, s0).unwrap().argmin_closed_form().unwrap().0;
        let bounds = BetaDomain::new(1.0, 1e4).unwrap();
        let batch = thompson_batch(&fit, s0, 50, &bounds, &mut stream(9, &[])).unwrap();
        for p in &batch.proposals {
            assert!((p.beta_star / point - 1.0).abs() < 0.05, "{} vs {point}", p.beta_star);
        }
    }

    #[test]
    fn batch_saturates_at_upper_bound() {
        let fit = tight_fit();
        let s0 = (1.5f64 * 0.25).exp() * 101f64.powf(-0.58);
        let bounds = BetaDomain::new(50.0, 60.0).unwrap();
        let batch = thompson_batch(&fit, s0, 10, &bounds, &mut stream(4, &[])).unwrap();
        assert_eq!(batch.clamped_count, 10);
        assert!(batch.proposals.iter().all(|p| p.beta_star == 60.0));
    }

    #[test]
    fn batch_propagates_degenerate_variance() {
        let mut fit = tight_fit();
        fit.s2 = 0.0;
        let bounds = BetaDomain::new(1.0, 10.0).unwrap();
        let err = thompson_batch(&fit, 1.0, 3, &bounds, &mut stream(0, &[])).unwrap_err();
        assert_eq!(err, AcquisitionError::Glm(GlmError::DegenerateVariance));
        let pm = point_mass_batch(&fit, 1.0, 3, &bounds).unwrap();
        assert_eq!(pm.proposals.len(), 3);
    }

    #[test]
    fn batch_exhausts_on_flat_posterior() {
        // exponent pinned at zero
        let fit = GlmFit { coef_hat: [0.0, 0.0], s2: 0.1, v_theta: [[0.0, 0.0], [0.0, 1.0]], dof: 10 };
        let bounds = BetaDomain::new(1.0, 10.0).unwrap();
        let err = thompson_batch(&fit, 1.0, 2, &bounds, &mut stream(0, &[])).unwrap_err();
        assert_eq!(err, AcquisitionError::ExhaustedResampling { attempts: MAX_RESAMPLE });
    }
}
