//! Bayesian log-log GLM surrogate `ln s = a ln β + ln b + ε z`.
//!
//! Uses the standard noninformative prior `p(θ, ε²) ∝ ε⁻²` with
//! `θ = (a, ln b)`, which gives the conjugate posterior
//!
//! ```text
//! ε² | D ~ Inv-χ²(n - k, s²)
//! θ | ε², D ~ N(θ̂, ε² V_θ),   V_θ = (XᵀX)⁻¹
//! ```
//!
//! and a multivariate `t` predictive distribution.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

/// Number of regression coefficients `(a, ln b)`.
pub const K: usize = 2;

/// Relative threshold on the diagonal of `R` below which the design is
/// declared rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Residual scale (relative to the rms of `y`) below which the fit is treated
/// as exact and `s²` is reported as zero.
const EXACT_FIT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("insufficient data: {n} rows, need at least {needed}")]
    InsufficientData { n: usize, needed: usize },
    #[error("design matrix is rank deficient (all beta values equal)")]
    RankDeficient,
    #[error("residual variance is zero; the posterior over eps^2 collapses")]
    DegenerateVariance,
    #[error("invalid prediction input beta={0}")]
    InvalidInput(f64),
    #[error("dataset csv: {0}")]
    Csv(String),
}

/// One accepted observation with its log transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub beta: f64,
    pub s: f64,
    pub ln_beta: f64,
    pub ln_s: f64,
}

/// Paired observations `(ln β, ln s)`; row `i` of the design is `(ln β_i, 1)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogDataset {
    rows: Vec<Observation>,
}

impl LogDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accept `(β, s)` if both are finite and strictly positive.
    pub fn push(&mut self, beta: f64, s: f64) -> bool {
        let ok = beta.is_finite() && beta > 0.0 && s.is_finite() && s > 0.0;
        if ok {
            self.rows.push(Observation {
                beta,
                s,
                ln_beta: beta.ln(),
                ln_s: s.ln(),
            });
        }
        ok
    }

    /// Append points, returning how many were rejected.
    pub fn extend<I: IntoIterator<Item = (f64, f64)>>(&mut self, points: I) -> usize {
        points
            .into_iter()
            .filter(|&(beta, s)| !self.push(beta, s))
            .count()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    /// Design row `(ln β, 1)` and response `ln s` for row `i`.
    pub fn row(&self, i: usize) -> ([f64; K], f64) {
        let o = &self.rows[i];
        ([o.ln_beta, 1.0], o.ln_s)
    }

    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), K, |i, j| if j == 0 { self.rows[i].ln_beta } else { 1.0 })
    }

    pub fn response(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.rows.iter().map(|o| o.ln_s))
    }

    /// Write as CSV with header `beta,s`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), GlmError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["beta", "s"]).map_err(|e| GlmError::Csv(e.to_string()))?;
        for o in &self.rows {
            out.write_record([o.beta.to_string(), o.s.to_string()])
                .map_err(|e| GlmError::Csv(e.to_string()))?;
        }
        out.flush().map_err(|e| GlmError::Csv(e.to_string()))
    }

    /// Read a `beta,s` CSV. Rows that fail the positivity rule are counted,
    /// malformed rows are an error.
    pub fn read_csv<R: Read>(r: R) -> Result<(Self, usize), GlmError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let headers = rdr.headers().map_err(|e| GlmError::Csv(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "beta" || &headers[1] != "s" {
            return Err(GlmError::Csv(format!("expected header `beta,s`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut points = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| GlmError::Csv(e.to_string()))?;
            let parse = |k: usize| -> Result<f64, GlmError> {
                rec[k].trim().parse::<f64>().map_err(|e| GlmError::Csv(format!("row {}: {e}", line + 2)))
            };
            points.push((parse(0)?, parse(1)?));
        }
        Ok(ingest(points))
    }
}

/// Log-transform raw `(β, s)` pairs. Rows with `s ≤ 0` or non-finite values
/// are dropped and counted.
pub fn ingest<I: IntoIterator<Item = (f64, f64)>>(points: I) -> (LogDataset, usize) {
    let mut data = LogDataset::new();
    let rejected = data.extend(points);
    (data, rejected)
}

/// Classical estimate of the GLM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    /// `θ̂ = (â, ln b̂)`.
    pub coef_hat: [f64; K],
    /// Residual variance `s² = rᵀr / (n - k)`.
    pub s2: f64,
    /// `V_θ = (XᵀX)⁻¹`, row-major.
    pub v_theta: [[f64; K]; K],
    /// `ν = n - k`.
    pub dof: usize,
}

impl GlmFit {
    pub fn exponent(&self) -> f64 {
        self.coef_hat[0]
    }

    pub fn ln_scale(&self) -> f64 {
        self.coef_hat[1]
    }

    pub fn n(&self) -> usize {
        self.dof + K
    }

    pub fn v_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.v_theta[0][0], self.v_theta[0][1], self.v_theta[1][0], self.v_theta[1][1])
    }

    /// Lower Cholesky factor of `V_θ`.
    fn v_cholesky(&self) -> [[f64; K]; K] {
        let v = &self.v_theta;
        let l11 = v[0][0].max(0.0).sqrt();
        let l21 = if l11 > 0.0 { v[1][0] / l11 } else { 0.0 };
        let l22 = (v[1][1] - l21 * l21).max(0.0).sqrt();
        [[l11, 0.0], [l21, l22]]
    }
}

/// Least-squares fit by Householder QR.
pub fn fit(data: &LogDataset) -> Result<GlmFit, GlmError> {
    let n = data.len();
    if n < K + 1 {
        return Err(GlmError::InsufficientData { n, needed: K + 1 });
    }
    let x = data.design();
    let y = data.response();

    let qr = x.clone().qr();
    let r = qr.r();
    let r11 = r[(0, 0)].abs();
    let r22 = r[(1, 1)].abs();
    if !(r11 > 0.0) || r22 <= RANK_TOL * r11.max(r22) {
        return Err(GlmError::RankDeficient);
    }
    let qty = qr.q().transpose() * &y;
    let r2 = Matrix2::new(r[(0, 0)], r[(0, 1)], 0.0, r[(1, 1)]);
    let r_inv = r2.try_inverse().ok_or(GlmError::RankDeficient)?;
    let theta = r_inv * Vector2::new(qty[0], qty[1]);
    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let v = r_inv * r_inv.transpose();
    let v_sym = 0.5 * (v + v.transpose());

    let resid = &y - &x * DVector::from_column_slice(theta.as_slice());
    let dof = n - K;
    let mut s2 = resid.norm_squared() / dof as f64;
    let y_rms = (y.norm_squared() / n as f64).sqrt().max(1.0);
    if s2.sqrt() <= EXACT_FIT_TOL * y_rms {
        s2 = 0.0;
    }

    Ok(GlmFit {
        coef_hat: [theta[0], theta[1]],
        s2,
        v_theta: [[v_sym[(0, 0)], v_sym[(0, 1)]], [v_sym[(1, 0)], v_sym[(1, 1)]]],
        dof,
    })
}

/// One draw `(a, ln b, ε²)` from the joint posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmPosteriorSample {
    pub a: f64,
    pub ln_b: f64,
    pub eps2: f64,
}

/// Exact sampler for the conjugate posterior of a fit.
#[derive(Debug, Clone)]
pub struct PosteriorSampler {
    coef_hat: [f64; K],
    chol: [[f64; K]; K],
    nu_s2: f64,
    chi2: Gamma<f64>,
}

impl PosteriorSampler {
    pub fn new(fit: &GlmFit) -> Result<Self, GlmError> {
        if fit.dof < 1 {
            return Err(GlmError::InsufficientData { n: fit.n(), needed: K + 1 });
        }
        if !(fit.s2 > 0.0) {
            return Err(GlmError::DegenerateVariance);
        }
        let nu = fit.dof as f64;
        // χ²(ν) = Gamma(shape ν/2, scale 2)
        let chi2 = Gamma::new(nu / 2.0, 2.0).expect("positive shape and scale");
        Ok(Self {
            coef_hat: fit.coef_hat,
            chol: fit.v_cholesky(),
            nu_s2: nu * fit.s2,
            chi2,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> GlmPosteriorSample {
        let x: f64 = self.chi2.sample(rng);
        let eps2 = self.nu_s2 / x;
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let sd = eps2.sqrt();
        let l = &self.chol;
        GlmPosteriorSample {
            a: self.coef_hat[0] + sd * l[0][0] * z0,
            ln_b: self.coef_hat[1] + sd * (l[1][0] * z0 + l[1][1] * z1),
            eps2,
        }
    }
}

/// `count` i.i.d. posterior draws.
pub fn sample_posterior<R: Rng + ?Sized>(
    fit: &GlmFit,
    count: usize,
    rng: &mut R,
) -> Result<Vec<GlmPosteriorSample>, GlmError> {
    let sampler = PosteriorSampler::new(fit)?;
    Ok((0..count).map(|_| sampler.draw(rng)).collect())
}

/// Joint predictive `t_m(X̃θ̂, s²(I + X̃ V_θ X̃ᵀ), ν)` of `ln s` at new `β` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: DVector<f64>,
    pub scale: DMatrix<f64>,
    pub dof: usize,
}

impl PredictiveDistribution {
    /// Marginal central interval of each coordinate at `level` (e.g. 0.95).
    pub fn marginal_intervals(&self, level: f64) -> Vec<(f64, f64)> {
        let t = StudentsT::new(0.0, 1.0, self.dof as f64).expect("dof >= 1");
        let q = t.inverse_cdf(0.5 + level / 2.0);
        (0..self.mean.len())
            .map(|i| {
                let half = q * self.scale[(i, i)].sqrt();
                (self.mean[i] - half, self.mean[i] + half)
            })
            .collect()
    }
}

pub fn predict(fit: &GlmFit, new_betas: &[f64]) -> Result<PredictiveDistribution, GlmError> {
    if let Some(&b) = new_betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(GlmError::InvalidInput(b));
    }
    let m = new_betas.len();
    let xt = DMatrix::from_fn(m, K, |i, j| if j == 0 { new_betas[i].ln() } else { 1.0 });
    let theta = DVector::from_column_slice(&fit.coef_hat);
    let v = DMatrix::from_fn(K, K, |i, j| fit.v_theta[i][j]);
    let mean = &xt * theta;
    let mut scale = (DMatrix::identity(m, m) + &xt * v * xt.transpose()) * fit.s2;
    scale = 0.5 * (&scale + scale.transpose());
    Ok(PredictiveDistribution { mean, scale, dof: fit.dof })
}
