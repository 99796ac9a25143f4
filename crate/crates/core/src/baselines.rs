//! Comparison methods: one-dimensional minimization of a Monte-Carlo averaged
//! objective `E|s(β) - s0|²`, and a local-regression reference estimator.
//!
//! Both optimizers work in `ln β`. Every distinct probe costs `mc_samples`
//! statistic evaluations; repeated probes hit the cache.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::BetaDomain;
use crate::problems::{ObjectiveProblem, ProblemError};
use crate::rng::{stream, tag};

/// `(√5 - 1) / 2`.
const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("iteration budget of {max_iter} exhausted after {evaluations} evaluations")]
    BudgetExceeded { max_iter: usize, evaluations: usize },
    #[error("invalid baseline configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} points, got {n}")]
    InsufficientData { n: usize, needed: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub beta: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Raw statistic draws in draw order.
    pub draws: Vec<f64>,
}

/// Cached Monte-Carlo estimate of `E|s(β) - s0|²`.
pub struct McObjective<'a, P: ObjectiveProblem + ?Sized> {
    problem: &'a P,
    s0: f64,
    mc_samples: usize,
    seed: u64,
    cache: HashMap<u64, usize>,
    probes: Vec<Probe>,
    evaluations: usize,
}

impl<'a, P: ObjectiveProblem + ?Sized> McObjective<'a, P> {
    pub fn new(problem: &'a P, mc_samples: usize, seed: u64) -> Result<Self, BaselineError> {
        if mc_samples < 2 {
            return Err(BaselineError::InvalidConfig(format!("mc_samples = {mc_samples} (need >= 2)")));
        }
        Ok(Self {
            problem,
            s0: problem.target(),
            mc_samples,
            seed,
            cache: HashMap::new(),
            probes: Vec::new(),
            evaluations: 0,
        })
    }

    pub fn with_target(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }

    pub fn target(&self) -> f64 {
        self.s0
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples
    }

    /// Statistic evaluations consumed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Distinct probes in first-evaluation order.
    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn into_probes(self) -> Vec<Probe> {
        self.probes
    }

    /// Mean and standard error at `β`, drawing only on a cache miss.
    pub fn estimate(&mut self, beta: f64) -> Result<(f64, f64), BaselineError> {
        if let Some(&i) = self.cache.get(&beta.to_bits()) {
            let p = &self.probes[i];
            return Ok((p.mean, p.std_error));
        }
        let (problem, seed) = (self.problem, self.seed);
        // streams keyed by β so the draws do not depend on probe order
        let draws = (0..self.mc_samples)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream(seed, &[tag::MC_DRAW, beta.to_bits(), j as u64]);
                problem.evaluate_statistic(beta, &mut rng)
            })
            .collect::<Result<Vec<f64>, ProblemError>>()?;
        let n = draws.len() as f64;
        let sq: Vec<f64> = draws.iter().map(|s| (s - self.s0) * (s - self.s0)).collect();
        let mean = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let std_error = (var / n).sqrt();
        self.evaluations += draws.len();
        self.cache.insert(beta.to_bits(), self.probes.len());
        self.probes.push(Probe { beta, mean, std_error, draws });
        Ok((mean, std_error))
    }
}

/// Monte-Carlo mean of `|s - s0|²` at `β`.
pub fn mc_estimate<P: ObjectiveProblem + ?Sized>(obj: &mut McObjective<'_, P>, beta: f64) -> Result<f64, BaselineError> {
    obj.estimate(beta).map(|(m, _)| m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Golden,
    Parabolic,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Golden => "golden",
            Method::Parabolic => "parabolic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Bracket narrower than `tol` in `ln β`.
    BracketWidth,
    /// Monte-Carlo standard error at the active points exceeds their spread.
    NoiseFloor,
    /// Parabolic step shorter than `tol / 2` from a bracketing minimum.
    ParabolicStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Golden,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Bracket width in `ln β`.
    pub tol: f64,
    pub max_iter: usize,
    pub noise_floor: bool,
    pub integer_beta: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { tol: 0.04, max_iter: 200, noise_floor: true, integer_beta: false }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<(), BaselineError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(BaselineError::InvalidConfig(format!("tol = {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(BaselineError::InvalidConfig("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub method: Method,
    pub beta_hat: f64,
    pub beta_hat_continuous: f64,
    pub evaluations: usize,
    pub termination: Termination,
    /// `β` bracket before each step.
    pub brackets: Vec<(f64, f64)>,
    /// Where each step probed, and how the point was chosen.
    pub steps: Vec<(StepKind, f64)>,
}

fn noise_floor_hit(points: &[(f64, f64, f64)]) -> bool {
    if points.len() < 3 {
        return false;
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
    let se = points.iter().fold(0.0f64, |m, p| m.max(p.2));
    se > hi - lo
}

fn finish(ln_best: f64, d: &BetaDomain, opts: &SearchOptions) -> (f64, f64) {
    let beta = ln_best.exp().clamp(d.min, d.max);
    (if opts.integer_beta { d.round_into(beta) } else { beta }, beta)
}

/// Golden-section search on `ln β`. Equal cached means keep the left
/// sub-interval.
pub fn golden_section<P: ObjectiveProblem + ?Sized>(
    obj: &mut McObjective<'_, P>,
    bounds: &BetaDomain,
    opts: &SearchOptions,
) -> Result<SearchResult, BaselineError> {
    opts.validate()?;
    let start = obj.evaluations();
    let (mut a, mut b) = (bounds.ln_min(), bounds.ln_max());
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let eval = |obj: &mut McObjective<'_, P>, x: f64| obj.estimate(x.exp()).map(|(m, se)| (x, m, se));
    let mut pc = eval(obj, c)?;
    let mut pd = eval(obj, d)?;
    let mut dropped: Option<(f64, f64, f64)> = None;
    let mut brackets = Vec::new();
    let mut steps = vec![(StepKind::Golden, c.exp()), (StepKind::Golden, d.exp())];

    let mut iter = 0;
    let termination = loop {
        if b - a < opts.tol {
            break Termination::BracketWidth;
        }
        if opts.noise_floor {
            let active: Vec<_> = [Some(pc), Some(pd), dropped].into_iter().flatten().collect();
            if noise_floor_hit(&active) {
                break Termination::NoiseFloor;
            }
        }
        if iter == opts.max_iter {
            return Err(BaselineError::BudgetExceeded { max_iter: opts.max_iter, evaluations: obj.evaluations() - start });
        }
        iter += 1;
        brackets.push((a.exp(), b.exp()));
        if pc.1 <= pd.1 {
            b = d;
            dropped = Some(pd);
            d = c;
            pd = pc;
            c = b - GOLDEN * (b - a);
            pc = eval(obj, c)?;
            steps.push((StepKind::Golden, c.exp()));
        } else {
            a = c;
            dropped = Some(pc);
            c = d;
            pc = pd;
            d = a + GOLDEN * (b - a);
            pd = eval(obj, d)?;
            steps.push((StepKind::Golden, d.exp()));
        }
    };
    let best = if pc.1 <= pd.1 { pc.0 } else { pd.0 };
    let evaluations = obj.evaluations() - start;
    let (beta_hat, beta_hat_continuous) = finish(best, bounds, opts);
    Ok(SearchResult { method: Method::Golden, beta_hat, beta_hat_continuous, evaluations, termination, brackets, steps })
}

/// Vertex of the parabola through three points, if it opens upwards.
fn parabola_vertex(p: &[(f64, f64, f64); 3]) -> Option<f64> {
    let [(x1, f1, _), (x2, f2, _), (x3, f3, _)] = *p;
    let num = (x2 - x1).powi(2) * (f2 - f3) - (x2 - x3).powi(2) * (f2 - f1);
    let den = (x2 - x1) * (f2 - f3) - (x2 - x3) * (f2 - f1);
    if den.abs() <= f64::EPSILON * num.abs() || den == 0.0 {
        return None;
    }
    let u = x2 - 0.5 * num / den;
    u.is_finite().then_some(u)
}

/// Successive parabolic interpolation on `ln β` over an evaluated triple
/// `l < m < r`, with golden-section steps whenever the triple does not
/// bracket a minimum or the parabolic vertex leaves the bracket or stalls.
pub fn parabolic_interpolation<P: ObjectiveProblem + ?Sized>(
    obj: &mut McObjective<'_, P>,
    bounds: &BetaDomain,
    opts: &SearchOptions,
) -> Result<SearchResult, BaselineError> {
    opts.validate()?;
    let start = obj.evaluations();
    let eval = |obj: &mut McObjective<'_, P>, x: f64| obj.estimate(x.exp()).map(|(m, se)| (x, m, se));
    let (lo, hi) = (bounds.ln_min(), bounds.ln_max());
    let mut t = [eval(obj, lo)?, eval(obj, 0.5 * (lo + hi))?, eval(obj, hi)?];
    let mut brackets = Vec::new();
    let mut steps = vec![
        (StepKind::Golden, lo.exp()),
        (StepKind::Golden, (0.5 * (lo + hi)).exp()),
        (StepKind::Golden, hi.exp()),
    ];

    let mut iter = 0;
    let termination = loop {
        let [l, m, r] = t;
        if r.0 - l.0 < opts.tol {
            break Termination::BracketWidth;
        }
        if opts.noise_floor && noise_floor_hit(&t) {
            break Termination::NoiseFloor;
        }
        let best = (0..3).fold(0, |k, i| if t[i].1 < t[k].1 { i } else { k });
        let golden_into_larger = || {
            if m.0 - l.0 > r.0 - m.0 {
                m.0 - (1.0 - GOLDEN) * (m.0 - l.0)
            } else {
                m.0 + (1.0 - GOLDEN) * (r.0 - m.0)
            }
        };
        let (kind, u) = match best {
            0 => (StepKind::Golden, l.0 + (1.0 - GOLDEN) * (m.0 - l.0)),
            2 => (StepKind::Golden, r.0 - (1.0 - GOLDEN) * (r.0 - m.0)),
            _ => match parabola_vertex(&t) {
                Some(u) if (u - m.0).abs() < 0.5 * opts.tol => break Termination::ParabolicStep,
                Some(u) if u > l.0 && u < r.0 => (StepKind::Parabolic, u),
                _ => (StepKind::Golden, golden_into_larger()),
            },
        };
        if iter == opts.max_iter {
            return Err(BaselineError::BudgetExceeded { max_iter: opts.max_iter, evaluations: obj.evaluations() - start });
        }
        iter += 1;
        brackets.push((l.0.exp(), r.0.exp()));
        steps.push((kind, u.exp()));
        let pu = eval(obj, u)?;

        let mut pts = [l, m, r, pu];
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let k = (0..4).fold(0, |k, i| if pts[i].1 < pts[k].1 { i } else { k });
        let first = k.saturating_sub(1).min(1);
        t = [pts[first], pts[first + 1], pts[first + 2]];
    };
    let best = t.iter().fold(t[1], |b, p| if p.1 < b.1 { *p } else { b });
    let evaluations = obj.evaluations() - start;
    let (beta_hat, beta_hat_continuous) = finish(best.0, bounds, opts);
    Ok(SearchResult { method: Method::Parabolic, beta_hat, beta_hat_continuous, evaluations, termination, brackets, steps })
}

/// Local-regression smoothed curve over a dense log grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRegressionEstimate {
    pub grid: Vec<f64>,
    pub curve: Vec<f64>,
    pub beta_hat: f64,
    pub min_value: f64,
    /// Contiguous grid interval around `beta_hat` where the curve stays within
    /// 10% of its minimum.
    pub region: (f64, f64),
}

pub const LOESS_GRID: usize = 2000;
pub const LOESS_MIN_POINTS: usize = 10;

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let v = 1.0 - u * u * u;
        v * v * v
    }
}

/// Degree-1 tricube-weighted local regression of `mse` on `ln β` at `x`
/// with window radius `h`.
fn loess_at(xs: &[f64], ys: &[f64], h: f64, x: f64) -> f64 {
    // widen locally where the window would hold fewer than two points
    let mut near = [f64::INFINITY; 2];
    for xi in xs {
        let d = (xi - x).abs();
        if d < near[1] {
            near = if d < near[0] { [d, near[0]] } else { [near[0], d] };
        }
    }
    let h = h.max(near[1] * (1.0 + 1e-6) + f64::MIN_POSITIVE);
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in xs.iter().zip(ys) {
        let w = tricube((xi - x).abs() / h);
        if w == 0.0 {
            continue;
        }
        let dx = xi - x;
        sw += w;
        sx += w * dx;
        sy += w * yi;
        sxx += w * dx * dx;
        sxy += w * dx * yi;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() <= 1e-12 * sw * sxx.max(f64::MIN_POSITIVE) {
        return sy / sw;
    }
    // intercept of the local line centred at x
    (sxx * sy - sx * sxy) / det
}

/// Locally weighted linear regression in `ln β` with tricube weights; the
/// bandwidth is the fraction of points in each local window.
pub fn local_regression_estimate(data: &[(f64, f64)], bandwidth: f64) -> Result<LocalRegressionEstimate, BaselineError> {
    if data.len() < LOESS_MIN_POINTS {
        return Err(BaselineError::InsufficientData { n: data.len(), needed: LOESS_MIN_POINTS });
    }
    if !(bandwidth > 0.0 && bandwidth <= 1.0) {
        return Err(BaselineError::InvalidConfig(format!("bandwidth = {bandwidth}")));
    }
    if data.iter().any(|&(b, y)| !(b.is_finite() && b > 0.0 && y.is_finite())) {
        return Err(BaselineError::InvalidConfig("non-finite or non-positive data".into()));
    }
    let xs: Vec<f64> = data.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = data.iter().map(|p| p.1).collect();
    let k = ((bandwidth * xs.len() as f64).ceil() as usize).clamp(3, xs.len());
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));

    let ln_grid: Vec<f64> = (0..LOESS_GRID).map(|i| lo + (hi - lo) * i as f64 / (LOESS_GRID - 1) as f64).collect();
    // one radius for the whole curve: the median k-nearest-neighbour distance
    // over the data points
    let mut knn: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let mut dist: Vec<f64> = xs.iter().map(|xi| (xi - x).abs()).collect();
            dist.select_nth_unstable_by(k - 1, f64::total_cmp);
            dist[k - 1]
        })
        .collect();
    knn.sort_by(f64::total_cmp);
    let h = knn[knn.len() / 2] * (1.0 + 1e-6) + f64::MIN_POSITIVE;
    let curve: Vec<f64> = ln_grid.par_iter().map(|&x| loess_at(&xs, &ys, h, x)).collect();
    let i_min = (0..curve.len()).fold(0, |k, i| if curve[i] < curve[k] { i } else { k });
    let min_value = curve[i_min];
    let scale = curve.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let level = min_value + 0.1 * min_value.abs() + 1e-12 * scale;
    let mut left = i_min;
    while left > 0 && curve[left - 1] <= level {
        left -= 1;
    }
    let mut right = i_min;
    while right + 1 < curve.len() && curve[right + 1] <= level {
        right += 1;
    }
    Ok(LocalRegressionEstimate {
        grid: ln_grid.iter().map(|x| x.exp()).collect(),
        curve,
        beta_hat: ln_grid[i_min].exp(),
        min_value,
        region: (ln_grid[left].exp(), ln_grid[right].exp()),
    })
}

/// Settings shared by the baseline runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_noise_floor")]
    pub noise_floor: bool,
}

fn default_method() -> Method {
    Method::Golden
}
fn default_mc() -> usize {
    1000
}
fn default_tol() -> f64 {
    SearchOptions::default().tol
}
fn default_max_iter() -> usize {
    SearchOptions::default().max_iter
}
fn default_noise_floor() -> bool {
    true
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            mc_samples: default_mc(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            noise_floor: default_noise_floor(),
        }
    }
}

/// Full baseline run with its probes, for trace export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub result: SearchResult,
    pub mc_samples: usize,
    pub s0: f64,
    pub probes: Vec<Probe>,
    pub wall_clock_seconds: f64,
}

impl BaselineRun {
    /// `(probe index, β, s)` for every raw draw, in evaluation order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.probes.iter().enumerate().flat_map(|(i, p)| p.draws.iter().map(move |&s| (i + 1, p.beta, s)))
    }
}

pub fn run_baseline<P: ObjectiveProblem + ?Sized>(
    problem: &P,
    bounds: &BetaDomain,
    config: &BaselineConfig,
    integer_beta: bool,
    seed: u64,
) -> Result<BaselineRun, BaselineError> {
    let clock = Instant::now();
    let mut obj = McObjective::new(problem, config.mc_samples, seed)?;
    let opts =
        SearchOptions { tol: config.tol, max_iter: config.max_iter, noise_floor: config.noise_floor, integer_beta };
    let result = match config.method {
        Method::Golden => golden_section(&mut obj, bounds, &opts)?,
        Method::Parabolic => parabolic_interpolation(&mut obj, bounds, &opts)?,
    };
    let s0 = obj.target();
    Ok(BaselineRun {
        result,
        mc_samples: config.mc_samples,
        s0,
        probes: obj.into_probes(),
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{synthetic_powerlaw, PowerLawProblem};
    use crate::rng::Stream;

    /// `s = s0 + (ln β - c)`: the objective is exactly `(ln β - c)²`.
    struct LogQuadratic {
        c: f64,
    }

    impl ObjectiveProblem for LogQuadratic {
        fn evaluate_statistic(&self, beta: f64, _: &mut Stream) -> Result<f64, ProblemError> {
            Ok(100.0 + beta.ln() - self.c)
        }
        fn target(&self) -> f64 {
            100.0
        }
    }

    fn noiseless() -> PowerLawProblem {
        PowerLawProblem::with_optimum(-0.58, 0.0, 0.0, 101.0).unwrap()
    }

    fn domain() -> BetaDomain {
        BetaDomain::new(10.0, 1000.0).unwrap()
    }

    #[test]
    fn deterministic_problem_is_exact() {
        let p = noiseless();
        let mut obj = McObjective::new(&p, 7, 0).unwrap();
        let m = mc_estimate(&mut obj, 40.0).unwrap();
        let exact = (40f64.powf(-0.58) - p.s0).powi(2);
        assert!((m - exact).abs() <= 1e-15 * exact.max(1.0));
    }

    #[test]
    fn analytic_objective_within_three_standard_errors() {
        let p = PowerLawProblem::with_optimum(-0.58, 0.0, 0.25, 101.0).unwrap();
        let mut obj = McObjective::new(&p, 1_000_000, 11).unwrap();
        let (m, se) = obj.estimate(101.0).unwrap();
        let exact = p.true_objective(101.0).unwrap();
        assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact} (se {se})");
    }

    #[test]
    fn cache_hits_do_not_count() {
        let p = PowerLawProblem::with_optimum(-0.58, 0.0, 0.25, 101.0).unwrap();
        let mut obj = McObjective::new(&p, 100, 0).unwrap();
        let a = mc_estimate(&mut obj, 50.0).unwrap();
        assert_eq!(obj.evaluations(), 100);
        let b = mc_estimate(&mut obj, 50.0).unwrap();
        assert_eq!(obj.evaluations(), 100);
        assert_eq!(a, b);
        assert_eq!(obj.probes().len(), 1);
    }

    #[test]
    fn draws_do_not_depend_on_probe_order() {
        let p = PowerLawProblem::with_optimum(-0.58, 0.0, 0.25, 101.0).unwrap();
        let mut x = McObjective::new(&p, 50, 3).unwrap();
        let mut y = McObjective::new(&p, 50, 3).unwrap();
        x.estimate(20.0).unwrap();
        let ax = x.estimate(30.0).unwrap();
        let ay = y.estimate(30.0).unwrap();
        assert_eq!(ax, ay);
    }

    #[test]
    fn golden_noiseless_finds_optimum() {
        let p = noiseless();
        let mut obj = McObjective::new(&p, 2, 0).unwrap();
        let opts = SearchOptions { tol: 0.01, ..Default::default() };
        let r = golden_section(&mut obj, &domain(), &opts).unwrap();
        assert!((r.beta_hat.ln() - 101f64.ln()).abs() < 0.01, "{}", r.beta_hat);
        assert_eq!(r.termination, Termination::BracketWidth);
        assert_eq!(r.evaluations, 2 * obj.probes().len());
        assert_eq!(r.steps.len(), obj.probes().len());
    }

    #[test]
    fn golden_bracket_shrinks_by_ratio() {
        let p = noiseless();
        let mut obj = McObjective::new(&p, 2, 0).unwrap();
        let opts = SearchOptions { tol: 1e-3, noise_floor: false, ..Default::default() };
        let r = golden_section(&mut obj, &domain(), &opts).unwrap();
        let widths: Vec<f64> = r.brackets.iter().map(|(a, b)| b.ln() - a.ln()).collect();
        for w in widths.windows(2) {
            assert!((w[1] / w[0] - GOLDEN).abs() < 1e-9);
        }
    }

    #[test]
    fn golden_budget_exceeded() {
        let p = noiseless();
        let mut obj = McObjective::new(&p, 2, 0).unwrap();
        let opts = SearchOptions { tol: 1e-9, max_iter: 5, noise_floor: false, ..Default::default() };
        let e = golden_section(&mut obj, &domain(), &opts).unwrap_err();
        assert!(matches!(e, BaselineError::BudgetExceeded { max_iter: 5, .. }));
    }

    #[test]
    fn golden_probe_count_near_twelve_on_calibrated_problem() {
        let p = PowerLawProblem::with_optimum(-0.58, 0.0, 0.25, 101.0).unwrap();
        let mut obj = McObjective::new(&p, 1000, 4).unwrap();
        let opts = SearchOptions { noise_floor: false, ..Default::default() };
        let r = golden_section(&mut obj, &domain(), &opts).unwrap();
        assert!((6000..=18000).contains(&r.evaluations), "{}", r.evaluations);
        assert_eq!(r.evaluations, 1000 * obj.probes().len());
    }

    #[test]
    fn golden_integer_rounding() {
        let p = noiseless();
        let mut obj = McObjective::new(&p, 2, 0).unwrap();
        let opts = SearchOptions { integer_beta: true, ..Default::default() };
        let r = golden_section(&mut obj, &domain(), &opts).unwrap();
        assert_eq!(r.beta_hat.fract(), 0.0);
        assert!((r.beta_hat - r.beta_hat_continuous).abs() <= 0.5);
    }

    #[test]
    fn parabolic_exact_quadratic_few_steps() {
        let p = LogQuadratic { c: 50f64.ln() };
        let mut obj = McObjective::new(&p, 2, 0).unwrap();
        let opts = SearchOptions { tol: 1e-3, ..Default::default() };
        let r = parabolic_interpolation(&mut obj, &domain(), &opts).unwrap();
        let parabolic = r.steps.iter().filter(|s| s.0 == StepKind::Parabolic).count();
        assert!(parabolic <= 3, "{parabolic}");
        assert!((r.beta_hat / 50.0 - 1.0).abs() < 1e-6, "{}", r.beta_hat);
    }

    #[test]
    fn parabolic_agrees_with_golden_noiseless() {
        let p = noiseless();
        let opts = SearchOptions { tol: 0.01, ..Default::default() };
        let mut o1 = McObjective::new(&p, 2, 0).unwrap();
        let g = golden_section(&mut o1, &domain(), &opts).unwrap();
        let mut o2 = McObjective::new(&p, 2, 0).unwrap();
        let q = parabolic_interpolation(&mut o2, &domain(), &opts).unwrap();
        assert!((g.beta_hat.ln() - q.beta_hat.ln()).abs() < 0.01, "{} vs {}", g.beta_hat, q.beta_hat);
    }

    #[test]
    fn parabolic_stays_inside_bracket_on_noise() {
        let p = PowerLawProblem::with_optimum(-0.58, 0.0, 0.25, 101.0).unwrap();
        for seed in 0..5 {
            let mut obj = McObjective::new(&p, 50, seed).unwrap();
            let opts = SearchOptions { tol: 0.01, noise_floor: false, ..Default::default() };
            let r = parabolic_interpolation(&mut obj, &domain(), &opts).unwrap();
            for ((lo, hi), (_, u)) in r.brackets.iter().zip(&r.steps[3..]) {
                assert!(u > lo && u < hi, "{u} outside ({lo}, {hi})");
            }
        }
    }

    #[test]
    fn parabolic_boundary_optimum() {
        let p = PowerLawProblem::with_optimum(-0.58, 0.0, 0.0, 5.0).unwrap();
        let mut obj = McObjective::new(&p, 2, 0).unwrap();
        let r = parabolic_interpolation(&mut obj, &domain(), &SearchOptions::default()).unwrap();
        assert!(r.beta_hat < 10.5, "{}", r.beta_hat);
    }

    #[test]
    fn loess_quadratic_vertex() {
        let c = 80f64.ln();
        let data: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let x = 10f64.ln() + (1000f64.ln() - 10f64.ln()) * i as f64 / 59.0;
                (x.exp(), 2.0 + (x - c).powi(2))
            })
            .collect();
        for &bw in &[0.2, 0.3, 0.6] {
            let e = local_regression_estimate(&data, bw).unwrap();
            assert!((e.beta_hat / 80.0 - 1.0).abs() < 0.01, "bw {bw}: {}", e.beta_hat);
            assert!(e.region.0 < 80.0 && e.region.1 > 80.0);
        }
    }

    #[test]
    fn loess_constant_data_whole_domain() {
        let data: Vec<(f64, f64)> = (0..20).map(|i| (1.0 + i as f64, 3.0)).collect();
        let e = local_regression_estimate(&data, 0.3).unwrap();
        assert!((e.region.0 - 1.0).abs() < 1e-9 && (e.region.1 - 20.0).abs() < 1e-9);
    }

    #[test]
    fn loess_needs_ten_points() {
        let data: Vec<(f64, f64)> = (0..9).map(|i| (1.0 + i as f64, 3.0)).collect();
        assert!(matches!(
            local_regression_estimate(&data, 0.3),
            Err(BaselineError::InsufficientData { n: 9, needed: 10 })
        ));
    }

    #[test]
    fn loess_on_dense_calibrated_data_lands_in_region() {
        let p = PowerLawProblem::with_optimum(-0.58, 0.0, 0.25, 101.0).unwrap();
        let (lo, hi) = p.objective().near_optimal_region(0.1).unwrap();
        let mut obj = McObjective::new(&p, 1000, 8).unwrap();
        let data: Vec<(f64, f64)> = (0..80)
            .map(|i| {
                let b = (10f64.ln() + (1000f64.ln() - 10f64.ln()) * i as f64 / 79.0).exp();
                (b, mc_estimate(&mut obj, b).unwrap())
            })
            .collect();
        let e = local_regression_estimate(&data, 0.3).unwrap();
        assert!(e.beta_hat >= lo && e.beta_hat <= hi, "{} not in [{lo}, {hi}]", e.beta_hat);
    }

    #[test]
    fn run_baseline_rows_match_evaluations() {
        let p = synthetic_powerlaw(-0.58, 0.0, 0.25, 1.0).unwrap();
        let cfg = BaselineConfig { mc_samples: 20, ..Default::default() };
        let run = run_baseline(&p, &domain(), &cfg, false, 1).unwrap();
        assert_eq!(run.rows().count(), run.result.evaluations);
    }
}
