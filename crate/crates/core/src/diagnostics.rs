//! Residual-model validation: per-β moments of GLM residuals, rolling
//! smoothing over the β index, parametric family fits and histograms.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::glm::{GlmFit, LogDataset};

/// Minimum sample size for the family fits.
pub const MIN_FIT_SAMPLES: usize = 100;

/// Shift-grid resolution for the shifted log-normal profile likelihood.
pub const SHIFT_GRID: usize = 50;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("no β group has at least {min_per_beta} rows (largest has {largest})")]
    NoEligibleGroups { min_per_beta: usize, largest: usize },
    #[error("sample has zero variance")]
    DegenerateSample,
    #[error("need at least {needed} samples, got {n}")]
    InsufficientData { n: usize, needed: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Unbiased sample moments of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaGroupStats {
    pub beta: f64,
    #[serde(flatten)]
    pub moments: Moments,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Sample moments from a single pass of central-moment updates. Skewness is
/// the adjusted Fisher–Pearson `G1`, kurtosis the bias-corrected `G2`; both
/// need at least four points.
pub fn moments(xs: &[f64]) -> Result<Moments, DiagnosticsError> {
    if xs.len() < 4 {
        return Err(DiagnosticsError::InsufficientData { n: xs.len(), needed: 4 });
    }
    let (mut n, mut mean, mut m2, mut m3, mut m4) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    for &x in xs {
        let n1 = n;
        n += 1.0;
        let delta = x - mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t = delta * dn * n1;
        mean += dn;
        m4 += t * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
        m3 += t * dn * (n - 2.0) - 3.0 * dn * m2;
        m2 += t;
    }
    let var = m2 / (n - 1.0);
    let g1 = (n.sqrt() * m3) / m2.powf(1.5);
    let g2 = n * m4 / (m2 * m2) - 3.0;
    let skewness = (n * (n - 1.0)).sqrt() / (n - 2.0) * g1;
    let excess_kurtosis = (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0);
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Moments { count: xs.len(), mean, median: median(&sorted), std: var.sqrt(), skewness, excess_kurtosis })
}

/// GLM residuals `r = y - Xθ̂` grouped by exact β, in increasing β.
pub fn group_residuals(fit: &GlmFit, data: &LogDataset) -> Vec<(f64, Vec<f64>)> {
    let [a, c] = fit.coef_hat;
    let mut rows: Vec<(f64, f64)> = data.rows().iter().map(|o| (o.beta, o.ln_s - a * o.ln_beta - c)).collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for (beta, r) in rows {
        match groups.last_mut() {
            Some((b, g)) if *b == beta => g.push(r),
            _ => groups.push((beta, vec![r])),
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub per_beta: Vec<BetaGroupStats>,
    /// `(β, count)` of groups below the threshold.
    pub dropped: Vec<(f64, usize)>,
}

/// Per-β residual moments over groups with at least `min_per_beta` rows
/// (and never fewer than four).
pub fn residual_stats(fit: &GlmFit, data: &LogDataset, min_per_beta: usize) -> Result<ResidualStats, DiagnosticsError> {
    let threshold = min_per_beta.max(4);
    let groups = group_residuals(fit, data);
    let largest = groups.iter().map(|g| g.1.len()).max().unwrap_or(0);
    let mut per_beta = Vec::new();
    let mut dropped = Vec::new();
    for (beta, r) in &groups {
        if r.len() >= threshold {
            per_beta.push(BetaGroupStats { beta: *beta, moments: moments(r)? });
        } else {
            dropped.push((*beta, r.len()));
        }
    }
    if per_beta.is_empty() {
        return Err(DiagnosticsError::NoEligibleGroups { min_per_beta, largest });
    }
    Ok(ResidualStats { per_beta, dropped })
}

/// Centered moving average. Odd widths average `window` points; even widths
/// use the `2×window` centered average (`window + 1` points, half weight at
/// both ends). Near the edges the window shrinks symmetrically to a plain
/// mean over `2r + 1` points.
pub fn rolling_smooth(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let n = series.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let r = half.min(i).min(n - 1 - i);
            let span = &series[i - r..=i + r];
            if window % 2 == 0 && r == half {
                let inner: f64 = span[1..span.len() - 1].iter().sum();
                (inner + 0.5 * (span[0] + span[span.len() - 1])) / window as f64
            } else {
                span.iter().sum::<f64>() / span.len() as f64
            }
        })
        .collect()
}

/// Rolling smooth of each moment series.
pub fn smooth_stats(per_beta: &[BetaGroupStats], window: usize) -> Vec<BetaGroupStats> {
    let col = |f: fn(&Moments) -> f64| rolling_smooth(&per_beta.iter().map(|g| f(&g.moments)).collect::<Vec<_>>(), window);
    let mean = col(|m| m.mean);
    let med = col(|m| m.median);
    let std = col(|m| m.std);
    let skew = col(|m| m.skewness);
    let kurt = col(|m| m.excess_kurtosis);
    per_beta
        .iter()
        .enumerate()
        .map(|(i, g)| BetaGroupStats {
            beta: g.beta,
            moments: Moments {
                count: g.moments.count,
                mean: mean[i],
                median: med[i],
                std: std[i],
                skewness: skew[i],
                excess_kurtosis: kurt[i],
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    ShiftedLognormal,
    Gamma,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub shape: f64,
    pub scale: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedLognormalFit {
    pub shift: f64,
    pub mu: f64,
    pub sigma: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFits {
    pub gaussian: GaussianFit,
    pub gamma: GammaFit,
    pub shifted_lognormal: ShiftedLognormalFit,
    /// Best first, by log-likelihood.
    pub ranking: Vec<Family>,
}

impl FamilyFits {
    pub fn log_likelihood(&self, f: Family) -> f64 {
        match f {
            Family::Gaussian => self.gaussian.log_likelihood,
            Family::Gamma => self.gamma.log_likelihood,
            Family::ShiftedLognormal => self.shifted_lognormal.log_likelihood,
        }
    }
}

/// `ψ'(x)` by upward recurrence and the asymptotic series.
fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0 + (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0))) / (x * x * x)
}

fn fit_gaussian(xs: &[f64]) -> GaussianFit {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    let log_likelihood = -0.5 * n * ((2.0 * PI * var).ln() + 1.0);
    GaussianFit { mu, sigma: var.sqrt(), log_likelihood }
}

fn fit_gamma(xs: &[f64]) -> GammaFit {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mean_ln = xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_ln;
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let step = (k.ln() - digamma(k) - s) / (1.0 / k - trigamma(k));
        let next = (k - step).max(0.5 * k);
        let done = (next - k).abs() <= 1e-12 * k;
        k = next;
        if done {
            break;
        }
    }
    let scale = mean / k;
    let log_likelihood = n * ((k - 1.0) * mean_ln - mean / scale - ln_gamma(k) - k * scale.ln());
    GammaFit { shape: k, scale, log_likelihood }
}

fn lognormal_profile(xs: &[f64], shift: f64) -> ShiftedLognormalFit {
    let n = xs.len() as f64;
    let ys: Vec<f64> = xs.iter().map(|x| (x - shift).ln()).collect();
    let mu = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / n;
    let log_likelihood = -ys.iter().sum::<f64>() - 0.5 * n * ((2.0 * PI * var).ln() + 1.0);
    ShiftedLognormalFit { shift, mu, sigma: var.sqrt(), log_likelihood }
}

fn fit_shifted_lognormal(xs: &[f64], std: f64) -> ShiftedLognormalFit {
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let lo = min - 2.0 * std;
    let step = 2.0 * std / SHIFT_GRID as f64;
    (0..SHIFT_GRID)
        .map(|i| lognormal_profile(xs, lo + step * i as f64))
        .filter(|f| f.log_likelihood.is_finite())
        .fold(None::<ShiftedLognormalFit>, |best, f| match best {
            Some(b) if b.log_likelihood >= f.log_likelihood => Some(b),
            _ => Some(f),
        })
        .unwrap_or_else(|| lognormal_profile(xs, lo))
}

/// Maximum-likelihood fits of three families to positive samples.
pub fn fit_families(samples: &[f64]) -> Result<FamilyFits, DiagnosticsError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::InsufficientData { n: samples.len(), needed: MIN_FIT_SAMPLES });
    }
    if samples.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(DiagnosticsError::InvalidInput("family fits need positive finite samples".into()));
    }
    let gaussian = fit_gaussian(samples);
    if !(gaussian.sigma > 0.0) {
        return Err(DiagnosticsError::DegenerateSample);
    }
    let gamma = fit_gamma(samples);
    let shifted_lognormal = fit_shifted_lognormal(samples, gaussian.sigma);
    let mut fits = FamilyFits { gaussian, gamma, shifted_lognormal, ranking: Vec::new() };
    let mut ranking = vec![Family::ShiftedLognormal, Family::Gamma, Family::Gaussian];
    ranking.sort_by(|a, b| fits.log_likelihood(*b).total_cmp(&fits.log_likelihood(*a)));
    fits.ranking = ranking;
    Ok(fits)
}

/// Family fits to exponentiated residuals `e^r`.
pub fn fit_residual_families(residuals: &[f64]) -> Result<FamilyFits, DiagnosticsError> {
    let xs: Vec<f64> = residuals.iter().map(|r| r.exp()).collect();
    fit_families(&xs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

/// Histogram with Freedman–Diaconis bin width (Sturges when the IQR is zero).
pub fn histogram(samples: &[f64]) -> Result<Vec<Bin>, DiagnosticsError> {
    if samples.len() < 2 {
        return Err(DiagnosticsError::InsufficientData { n: samples.len(), needed: 2 });
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let (lo, hi) = (s[0], s[s.len() - 1]);
    if !(hi > lo) {
        return Err(DiagnosticsError::DegenerateSample);
    }
    let q = |p: f64| {
        let h = (s.len() - 1) as f64 * p;
        let i = h.floor() as usize;
        s[i] + (h - i as f64) * (s[(i + 1).min(s.len() - 1)] - s[i])
    };
    let iqr = q(0.75) - q(0.25);
    let n = s.len() as f64;
    let bins = if iqr > 0.0 {
        ((hi - lo) / (2.0 * iqr * n.powf(-1.0 / 3.0))).ceil() as usize
    } else {
        (n.log2() + 1.0).ceil() as usize
    }
    .clamp(1, 10_000);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &s {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| Bin {
            bin_left: lo + width * k as f64,
            bin_right: if k + 1 == bins { hi } else { lo + width * (k + 1) as f64 },
            count,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub per_beta: Vec<BetaGroupStats>,
    pub smoothed: Vec<BetaGroupStats>,
    pub dropped: Vec<(f64, usize)>,
    pub window: usize,
    pub slice_beta: f64,
    pub fits: FamilyFits,
    pub histogram: Vec<Bin>,
}

/// Full report. The family fits and histogram use the residuals at
/// `slice_beta`, or at the largest eligible group when `None` (smallest β on
/// ties).
pub fn residual_report(
    fit: &GlmFit,
    data: &LogDataset,
    min_per_beta: usize,
    window: usize,
    slice_beta: Option<f64>,
) -> Result<ResidualReport, DiagnosticsError> {
    let stats = residual_stats(fit, data, min_per_beta)?;
    let groups = group_residuals(fit, data);
    let slice = match slice_beta {
        Some(b) => groups
            .iter()
            .find(|g| g.0 == b)
            .ok_or_else(|| DiagnosticsError::InvalidInput(format!("no rows at beta = {b}")))?,
        None => groups
            .iter()
            .filter(|g| g.1.len() >= min_per_beta.max(4))
            .fold(None::<&(f64, Vec<f64>)>, |best, g| match best {
                Some(b) if b.1.len() >= g.1.len() => Some(b),
                _ => Some(g),
            })
            .expect("residual_stats found an eligible group"),
    };
    let fits = fit_residual_families(&slice.1)?;
    let hist_samples: Vec<f64> = slice.1.iter().map(|r| r.exp()).collect();
    Ok(ResidualReport {
        smoothed: smooth_stats(&stats.per_beta, window),
        per_beta: stats.per_beta,
        dropped: stats.dropped,
        window,
        slice_beta: slice.0,
        fits,
        histogram: histogram(&hist_samples)?,
    })
}

const GROUP_HEADER: [&str; 12] = [
    "beta",
    "count",
    "mean",
    "median",
    "std",
    "skewness",
    "excess_kurtosis",
    "smoothed_mean",
    "smoothed_median",
    "smoothed_std",
    "smoothed_skewness",
    "smoothed_excess_kurtosis",
];

fn csv_err(e: impl std::fmt::Display) -> DiagnosticsError {
    DiagnosticsError::Csv(e.to_string())
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Per-group CSV with raw and smoothed moments side by side.
pub fn write_groups_csv<W: Write>(report: &ResidualReport, w: W) -> Result<(), DiagnosticsError> {
    let mut out = writer(w);
    out.write_record(GROUP_HEADER).map_err(csv_err)?;
    for (g, s) in report.per_beta.iter().zip(&report.smoothed) {
        let (m, sm) = (&g.moments, &s.moments);
        let row = [
            g.beta,
            m.count as f64,
            m.mean,
            m.median,
            m.std,
            m.skewness,
            m.excess_kurtosis,
            sm.mean,
            sm.median,
            sm.std,
            sm.skewness,
            sm.excess_kurtosis,
        ];
        out.write_record(row.iter().map(|x| x.to_string())).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

/// Inverse of [`write_groups_csv`]: `(raw, smoothed)`.
pub fn read_groups_csv<R: Read>(r: R) -> Result<(Vec<BetaGroupStats>, Vec<BetaGroupStats>), DiagnosticsError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(GROUP_HEADER) {
        return Err(DiagnosticsError::Csv("unexpected group CSV header".into()));
    }
    let (mut raw, mut smooth) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let v: Vec<f64> = rec.iter().map(|x| x.parse::<f64>().map_err(csv_err)).collect::<Result<_, _>>()?;
        let count = v[1] as usize;
        let m = |o: usize| Moments {
            count,
            mean: v[o],
            median: v[o + 1],
            std: v[o + 2],
            skewness: v[o + 3],
            excess_kurtosis: v[o + 4],
        };
        raw.push(BetaGroupStats { beta: v[0], moments: m(2) });
        smooth.push(BetaGroupStats { beta: v[0], moments: m(7) });
    }
    Ok((raw, smooth))
}

pub fn write_histogram_csv<W: Write>(bins: &[Bin], w: W) -> Result<(), DiagnosticsError> {
    let mut out = writer(w);
    out.write_record(["bin_left", "bin_right", "count"]).map_err(csv_err)?;
    for b in bins {
        out.write_record([b.bin_left.to_string(), b.bin_right.to_string(), b.count.to_string()])
            .map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn read_histogram_csv<R: Read>(r: R) -> Result<Vec<Bin>, DiagnosticsError> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|b| b.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm;
    use crate::problems::{synthetic_misspecified, Misspecification, ObjectiveProblem};
    use crate::rng::stream;
    use proptest::prelude::{prop, prop_assert, proptest};
    use rand::Rng;
    use rand_distr::{Distribution, Gamma, LogNormal, StandardNormal};

    fn two_pass(xs: &[f64]) -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let c = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
        let (m2, m3, m4) = (c(2), c(3), c(4));
        let g1 = m3 / m2.powf(1.5);
        let g2 = m4 / (m2 * m2) - 3.0;
        let skew = (n * (n - 1.0)).sqrt() / (n - 2.0) * g1;
        let kurt = (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0);
        (mean, (m2 * n / (n - 1.0)).sqrt(), skew, kurt)
    }

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = stream(seed, &[]);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn gaussian_moments() {
        let m = moments(&normals(1, 10_000)).unwrap();
        assert!(m.mean.abs() < 0.05);
        assert!(m.excess_kurtosis.abs() < 0.15);
        assert!((m.std - 1.0).abs() < 0.05);
    }

    #[test]
    fn log_abs_normal_is_left_skewed() {
        let xs: Vec<f64> = normals(2, 20_000).iter().map(|z: &f64| z.abs().ln() + 0.3).collect();
        assert!(moments(&xs).unwrap().skewness < 0.0);
    }

    #[test]
    fn one_pass_matches_two_pass() {
        let mut rng = stream(3, &[]);
        for _ in 0..20 {
            let n = rng.random_range(4..500);
            let shift: f64 = rng.random_range(-50.0..50.0);
            let xs: Vec<f64> = (0..n).map(|_| shift + rng.random::<f64>().powi(3) * 7.0).collect();
            let m = moments(&xs).unwrap();
            let (mean, std, skew, kurt) = two_pass(&xs);
            assert!((m.mean - mean).abs() <= 1e-10 * mean.abs().max(1.0));
            assert!((m.std - std).abs() <= 1e-10 * std);
            assert!((m.skewness - skew).abs() <= 1e-10 * skew.abs().max(1.0));
            assert!((m.excess_kurtosis - kurt).abs() <= 1e-10 * kurt.abs().max(1.0));
        }
    }

    #[test]
    fn groups_below_threshold_are_dropped() {
        let mut data = LogDataset::new();
        let mut rng = stream(4, &[]);
        for _ in 0..999 {
            data.push(10.0, (0.3 * rng.sample::<f64, _>(StandardNormal)).exp());
        }
        for _ in 0..5 {
            data.push(20.0, 1.0 + rng.random::<f64>());
        }
        let fit = glm::fit(&data).unwrap();
        let e = residual_stats(&fit, &data, 1000).unwrap_err();
        assert!(matches!(e, DiagnosticsError::NoEligibleGroups { min_per_beta: 1000, largest: 999 }));
        let ok = residual_stats(&fit, &data, 10).unwrap();
        assert_eq!(ok.per_beta.len(), 1);
        assert_eq!(ok.dropped, vec![(20.0, 5)]);
    }

    #[test]
    fn smoothing_basics() {
        let c = vec![2.5; 17];
        assert_eq!(rolling_smooth(&c, 6), c);
        let s: Vec<f64> = (0..17).map(|i| (i as f64).sin()).collect();
        assert_eq!(rolling_smooth(&s, 1), s);
        let ramp: Vec<f64> = (0..20).map(|i| 3.0 * i as f64 - 4.0).collect();
        for w in 1..8 {
            let r = rolling_smooth(&ramp, w);
            assert_eq!(r.len(), ramp.len());
            for (a, b) in r.iter().zip(&ramp) {
                assert!((a - b).abs() < 1e-12, "window {w}");
            }
        }
    }

    proptest! {
        #[test]
        fn smoothing_is_linear(
            u in prop::collection::vec(-1e3f64..1e3, 1..40),
            alpha in -10.0f64..10.0,
            w in 1usize..9,
        ) {
            let v: Vec<f64> = u.iter().map(|x| x.cos() * 50.0).collect();
            let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + b).collect();
            let lhs = rolling_smooth(&mix, w);
            let (su, sv) = (rolling_smooth(&u, w), rolling_smooth(&v, w));
            for i in 0..u.len() {
                let rhs = alpha * su[i] + sv[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * (1.0 + rhs.abs() + alpha.abs() * 1e3));
            }
        }
    }

    #[test]
    fn trigamma_values() {
        assert!((trigamma(1.0) - PI * PI / 6.0).abs() < 1e-12);
        assert!((trigamma(0.5) - PI * PI / 2.0).abs() < 1e-11);
        assert!((trigamma(10.0) - 0.105_166_335_681_685_4).abs() < 1e-12);
    }

    #[test]
    fn gamma_samples_rank_gamma_first() {
        let mut rng = stream(5, &[]);
        let g = Gamma::new(4.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..5000).map(|_| g.sample(&mut rng)).collect();
        let f = fit_families(&xs).unwrap();
        assert_eq!(f.ranking[0], Family::Gamma, "{f:?}");
        assert!((f.gamma.shape / 4.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn lognormal_samples_favor_shifted_lognormal() {
        let mut rng = stream(6, &[]);
        let d = LogNormal::new(0.0, 0.5).unwrap();
        let xs: Vec<f64> = (0..5000).map(|_| d.sample(&mut rng)).collect();
        let f = fit_families(&xs).unwrap();
        let (sl, ga) = (f.shifted_lognormal.log_likelihood, f.gamma.log_likelihood);
        assert!(sl >= ga || (ga - sl).abs() <= 0.01 * ga.abs(), "{sl} vs {ga}");
    }

    #[test]
    fn constant_samples_are_degenerate() {
        assert!(matches!(fit_families(&[2.0; 200]), Err(DiagnosticsError::DegenerateSample)));
        assert!(matches!(fit_families(&[2.0; 50]), Err(DiagnosticsError::InsufficientData { .. })));
    }

    #[test]
    fn histogram_counts_everything() {
        let xs = normals(7, 3000);
        let h = histogram(&xs).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 3000);
        for w in h.windows(2) {
            assert_eq!(w[0].bin_right, w[1].bin_left);
        }
        let mut buf = Vec::new();
        write_histogram_csv(&h, &mut buf).unwrap();
        assert_eq!(read_histogram_csv(buf.as_slice()).unwrap(), h);
    }

    #[test]
    fn report_on_gamma_noise() {
        let p = synthetic_misspecified(Misspecification::GammaNoise { shape: 3.0 }, -0.6, 0.0, 0.1).unwrap();
        let mut rng = stream(8, &[]);
        let mut data = LogDataset::new();
        for &beta in &[10.0, 30.0, 100.0, 300.0] {
            for _ in 0..1000 {
                data.push(beta, p.evaluate_statistic(beta, &mut rng).unwrap());
            }
        }
        let fit = glm::fit(&data).unwrap();
        let rep = residual_report(&fit, &data, 1000, 6, None).unwrap();
        assert_eq!(rep.per_beta.len(), 4);
        assert_eq!(rep.smoothed.len(), 4);
        assert_eq!(rep.slice_beta, 10.0);
        assert!(rep.fits.gamma.log_likelihood > rep.fits.gaussian.log_likelihood);

        let mut buf = Vec::new();
        write_groups_csv(&rep, &mut buf).unwrap();
        let (raw, smooth) = read_groups_csv(buf.as_slice()).unwrap();
        assert_eq!(raw, rep.per_beta);
        assert_eq!(smooth, rep.smoothed);
    }
}
