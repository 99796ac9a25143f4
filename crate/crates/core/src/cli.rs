//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 runtime error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{run_baseline, BaselineConfig};
use crate::diagnostics::{residual_report, write_groups_csv, write_histogram_csv};
use crate::domain::BetaDomain;
use crate::driver::{self, BoConfig, BoTrace};
use crate::glm::{self, GlmFit, LogDataset};
use crate::io::{self, create, open, read_json_file, write_json_file};
use crate::problems::{
    build_static_fixture, srom_standin_with_decay, synthetic_misspecified, synthetic_powerlaw, target_for_optimum,
    Misspecification, ObjectiveProblem, StaticFixture, FIXTURE_DOF, MIN_FIXTURE_DOF, STANDIN_DECAY,
};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "scale-bo", version, about = "Bayesian optimization of a scale/precision parameter")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Bayesian optimization.
    Optimize(RunArgs),
    /// Run the Monte-Carlo one-dimensional baseline.
    Baseline(RunArgs),
    /// Compare a BO run directory with a baseline run directory.
    Compare {
        bo_dir: PathBuf,
        baseline_dir: PathBuf,
        /// Also write `compare.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual diagnostics for a `beta,s` dataset.
    Diagnose {
        #[arg(long)]
        data: PathBuf,
        /// `dataset` to fit the GLM on the data, or a JSON file holding a fit
        /// or a BO trace.
        #[arg(long, default_value = "dataset")]
        fit: String,
        #[arg(long, default_value_t = 1000)]
        min_per_beta: usize,
        #[arg(long, default_value_t = 6)]
        window: usize,
        /// β of the slice used for the family fits (default: largest group).
        #[arg(long)]
        slice: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Static fixture utilities.
    Fixture {
        #[command(subcommand)]
        action: FixtureAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum FixtureAction {
    /// Write K, V, f_E and f_H as Matrix Market arrays.
    Export {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FIXTURE_DOF)]
        n_dof: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Either `s0` or `beta_opt` sets the target.
    PowerLaw {
        a: f64,
        #[serde(default)]
        ln_b: f64,
        eps2: f64,
        #[serde(default)]
        s0: Option<f64>,
        #[serde(default)]
        beta_opt: Option<f64>,
    },
    Misspecified {
        a: f64,
        #[serde(default)]
        ln_b: f64,
        s0: f64,
        noise: Misspecification,
    },
    Srom {
        #[serde(default = "default_n_dof")]
        n_dof: usize,
        #[serde(default = "default_decay")]
        decay: f64,
    },
}

fn default_n_dof() -> usize {
    FIXTURE_DOF
}

fn default_decay() -> f64 {
    STANDIN_DECAY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub beta_min: f64,
    pub beta_max: f64,
    #[serde(default)]
    pub integer_beta: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoSection {
    pub n0: usize,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub s0: Option<f64>,
    pub stop_rel_tol: f64,
    pub stop_window: usize,
}

impl Default for BoSection {
    fn default() -> Self {
        let c = BoConfig::new(1.0, 2.0, 0);
        Self {
            n0: c.n0,
            batch_size: c.batch_size,
            max_iterations: c.max_iterations,
            s0: None,
            stop_rel_tol: c.stop_rel_tol,
            stop_window: c.stop_window,
        }
    }
}

/// File-backed run configuration (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub problem: ProblemSpec,
    pub domain: DomainSpec,
    #[serde(default)]
    pub bo: BoSection,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn domain(&self) -> Result<BetaDomain, CliError> {
        BetaDomain::new(self.domain.beta_min, self.domain.beta_max).map_err(config_err)
    }

    pub fn bo_config(&self) -> BoConfig {
        BoConfig {
            beta_min: self.domain.beta_min,
            beta_max: self.domain.beta_max,
            n0: self.bo.n0,
            batch_size: self.bo.batch_size,
            max_iterations: self.bo.max_iterations,
            s0: self.bo.s0,
            stop_rel_tol: self.bo.stop_rel_tol,
            stop_window: self.bo.stop_window,
            seed: self.seed,
            integer_beta: self.domain.integer_beta,
        }
    }

    /// SHA-256 of the canonical JSON of the problem and domain.
    pub fn problem_hash(&self) -> String {
        let canon = serde_json::to_vec(&(&self.problem, &self.domain)).expect("config serializes");
        Sha256::digest(&canon).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn build_problem(&self) -> Result<Box<dyn ObjectiveProblem>, CliError> {
        Ok(match &self.problem {
            ProblemSpec::PowerLaw { a, ln_b, eps2, s0, beta_opt } => {
                let s0 = match (s0, beta_opt) {
                    (Some(s0), None) => *s0,
                    (None, Some(b)) => target_for_optimum(*a, *ln_b, *eps2, *b),
                    _ => return Err(CliError::Config("power-law problem needs exactly one of s0, beta_opt".into())),
                };
                Box::new(synthetic_powerlaw(*a, *ln_b, *eps2, s0).map_err(config_err)?)
            }
            ProblemSpec::Misspecified { a, ln_b, s0, noise } => {
                Box::new(synthetic_misspecified(*noise, *a, *ln_b, *s0).map_err(config_err)?)
            }
            ProblemSpec::Srom { n_dof, decay } => {
                if *n_dof < MIN_FIXTURE_DOF {
                    return Err(CliError::Config(format!(
                        "srom n_dof = {n_dof} (need >= {})",
                        MIN_FIXTURE_DOF
                    )));
                }
                if !decay.is_finite() {
                    return Err(CliError::Config(format!("srom decay = {decay}")));
                }
                Box::new(srom_standin_with_decay(&StaticFixture::with_dofs(*n_dof), *decay))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub beta_hat: f64,
    pub evaluations: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub command: String,
    pub method: String,
    pub problem_hash: String,
    pub seed: u64,
    pub mc_samples: Option<usize>,
    /// How the run stopped (BO stop reason or 1-D termination rule).
    pub termination: String,
    /// Stopping rules in force, so the 1-D concretization is visible.
    pub stopping_rules: String,
    pub config: RunConfig,
}

struct Prepared {
    config: RunConfig,
    out: PathBuf,
    problem: Box<dyn ObjectiveProblem>,
    domain: BetaDomain,
}

fn prepare(args: &RunArgs) -> Result<Prepared, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| CliError::Config("no output directory (use --out or `out` in the config)".into()))?;
    let domain = config.domain()?;
    let problem = config.build_problem()?;
    fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    Ok(Prepared { config, out, problem, domain })
}

fn cmd_optimize(args: &RunArgs) -> Result<(), CliError> {
    let p = prepare(args)?;
    let bo = p.config.bo_config();
    bo.validate().map_err(config_err)?;
    let trace = driver::run(&bo, p.problem.as_ref()).map_err(runtime_err)?;
    write_json_file(&trace, &p.out.join("trace.json")).map_err(runtime_err)?;
    io::write_bo_trace_csv(&trace, create(&p.out.join("trace.csv")).map_err(runtime_err)?).map_err(runtime_err)?;
    let est = Estimate {
        beta_hat: trace.final_estimate,
        evaluations: trace.evaluations,
        wall_clock_seconds: trace.wall_clock_seconds,
    };
    write_json_file(&est, &p.out.join("estimate.json")).map_err(runtime_err)?;
    let meta = RunMeta {
        command: "optimize".into(),
        method: "bo".into(),
        problem_hash: p.config.problem_hash(),
        seed: p.config.seed,
        mc_samples: None,
        termination: serde_json::to_value(trace.stop_reason).map_err(runtime_err)?.as_str().unwrap_or("").into(),
        stopping_rules: format!(
            "budget {} iterations; relative change < {} for {} iterations; degenerate posterior",
            bo.max_iterations, bo.stop_rel_tol, bo.stop_window
        ),
        config: p.config,
    };
    write_json_file(&meta, &p.out.join("run.json")).map_err(runtime_err)?;
    println!("beta_hat = {} ({} evaluations)", est.beta_hat, est.evaluations);
    Ok(())
}

fn cmd_baseline(args: &RunArgs) -> Result<(), CliError> {
    let p = prepare(args)?;
    let cfg = &p.config.baseline;
    let run = run_baseline(p.problem.as_ref(), &p.domain, cfg, p.config.domain.integer_beta, p.config.seed)
        .map_err(|e| match e {
            crate::baselines::BaselineError::InvalidConfig(m) => CliError::Config(m),
            e => runtime_err(e),
        })?;
    write_json_file(&run, &p.out.join("trace.json")).map_err(runtime_err)?;
    io::write_baseline_trace_csv(&run, create(&p.out.join("trace.csv")).map_err(runtime_err)?).map_err(runtime_err)?;
    let est = Estimate {
        beta_hat: run.result.beta_hat,
        evaluations: run.result.evaluations,
        wall_clock_seconds: run.wall_clock_seconds,
    };
    write_json_file(&est, &p.out.join("estimate.json")).map_err(runtime_err)?;
    let mut rules = format!("bracket width < {} in ln beta", cfg.tol);
    if cfg.noise_floor {
        rules += "; noise floor (max MC standard error at the active points > their spread)";
    }
    let meta = RunMeta {
        command: "baseline".into(),
        method: cfg.method.as_str().into(),
        problem_hash: p.config.problem_hash(),
        seed: p.config.seed,
        mc_samples: Some(cfg.mc_samples),
        termination: serde_json::to_value(run.result.termination).map_err(runtime_err)?.as_str().unwrap_or("").into(),
        stopping_rules: rules,
        config: p.config.clone(),
    };
    write_json_file(&meta, &p.out.join("run.json")).map_err(runtime_err)?;
    println!("beta_hat = {} ({} evaluations)", est.beta_hat, est.evaluations);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub data_points: usize,
    pub wall_clock_seconds: f64,
    /// Data-point ratio against the BO run.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub time_ratio: f64,
}

/// Ratios are baseline / BO.
pub fn compare_runs(
    bo: (&RunMeta, &Estimate),
    baseline: (&RunMeta, &Estimate),
) -> Result<Comparison, CliError> {
    if bo.0.problem_hash != baseline.0.problem_hash {
        return Err(CliError::Runtime(format!(
            "MismatchedProblem: {} vs {}",
            bo.0.problem_hash, baseline.0.problem_hash
        )));
    }
    let ratio = baseline.1.evaluations as f64 / bo.1.evaluations as f64;
    let time_ratio = baseline.1.wall_clock_seconds / bo.1.wall_clock_seconds;
    let row = |m: &RunMeta, e: &Estimate, ratio| ComparisonRow {
        method: m.method.clone(),
        data_points: e.evaluations,
        wall_clock_seconds: e.wall_clock_seconds,
        ratio,
    };
    Ok(Comparison { rows: vec![row(bo.0, bo.1, 1.0), row(baseline.0, baseline.1, ratio)], time_ratio })
}

pub fn format_comparison(c: &Comparison) -> String {
    let mut s = format!("{:<12}{:>14}{:>16}{:>10}\n", "method", "data_points", "wall_clock_s", "ratio");
    for r in &c.rows {
        let _ = writeln!(s, "{:<12}{:>14}{:>16.3}{:>10.1}", r.method, r.data_points, r.wall_clock_seconds, r.ratio);
    }
    let _ = writeln!(s, "wall-clock ratio: {:.1}", c.time_ratio);
    let _ = writeln!(
        s,
        "note: ratios are baseline/BO rounded to one decimal, not truncated"
    );
    s
}

fn read_run(dir: &Path) -> Result<(RunMeta, Estimate), CliError> {
    let meta = read_json_file(&dir.join("run.json")).map_err(config_err)?;
    let est = read_json_file(&dir.join("estimate.json")).map_err(config_err)?;
    Ok((meta, est))
}

fn cmd_compare(bo_dir: &Path, base_dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let bo = read_run(bo_dir)?;
    let base = read_run(base_dir)?;
    let c = compare_runs((&bo.0, &bo.1), (&base.0, &base.1))?;
    print!("{}", format_comparison(&c));
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(runtime_err)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(create(&out.join("compare.csv")).map_err(runtime_err)?);
        w.write_record(["method", "data_points", "wall_clock_seconds", "ratio"]).map_err(runtime_err)?;
        for r in &c.rows {
            w.write_record([
                r.method.clone(),
                r.data_points.to_string(),
                r.wall_clock_seconds.to_string(),
                format!("{:.1}", r.ratio),
            ])
            .map_err(runtime_err)?;
        }
        w.flush().map_err(runtime_err)?;
    }
    Ok(())
}

fn load_fit(source: &str, data: &LogDataset) -> Result<GlmFit, CliError> {
    if source == "dataset" {
        return glm::fit(data).map_err(config_err);
    }
    let text = fs::read_to_string(source).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    if let Ok(fit) = serde_json::from_str::<GlmFit>(&text) {
        return Ok(fit);
    }
    serde_json::from_str::<BoTrace>(&text)
        .map(|t| *t.final_fit())
        .map_err(|e| CliError::Config(format!("{source}: neither a GLM fit nor a BO trace ({e})")))
}

fn cmd_diagnose(
    data: &Path,
    fit: &str,
    min_per_beta: usize,
    window: usize,
    slice: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    if window == 0 {
        return Err(CliError::Config("window must be >= 1".into()));
    }
    let (dataset, rejected) = LogDataset::read_csv(open(data).map_err(config_err)?).map_err(config_err)?;
    let fit = load_fit(fit, &dataset)?;
    let report = residual_report(&fit, &dataset, min_per_beta, window, slice).map_err(runtime_err)?;
    fs::create_dir_all(out).map_err(runtime_err)?;
    write_json_file(&report, &out.join("report.json")).map_err(runtime_err)?;
    write_groups_csv(&report, create(&out.join("groups.csv")).map_err(runtime_err)?).map_err(runtime_err)?;
    write_histogram_csv(&report.histogram, create(&out.join("histogram.csv")).map_err(runtime_err)?)
        .map_err(runtime_err)?;
    println!(
        "{} groups ({} dropped, {} rows rejected); best family at beta={}: {:?}",
        report.per_beta.len(),
        report.dropped.len(),
        rejected,
        report.slice_beta,
        report.fits.ranking[0]
    );
    Ok(())
}

fn cmd_fixture_export(out: &Path, n_dof: usize) -> Result<(), CliError> {
    if n_dof < MIN_FIXTURE_DOF {
        return Err(CliError::Config(format!("n_dof = {n_dof} (need >= {})", MIN_FIXTURE_DOF)));
    }
    let fx = if n_dof == FIXTURE_DOF { build_static_fixture() } else { StaticFixture::with_dofs(n_dof) };
    fs::create_dir_all(out).map_err(runtime_err)?;
    let col = |v: &nalgebra::DVector<f64>| nalgebra::DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    for (name, m) in [("K", fx.k.clone()), ("V", fx.v.clone()), ("f_E", col(&fx.f_e)), ("f_H", col(&fx.f_h))] {
        io::write_matrix_market(&m, create(&out.join(format!("{name}.mtx"))).map_err(runtime_err)?)
            .map_err(runtime_err)?;
    }
    println!("wrote K, V, f_E, f_H ({n_dof} DoFs); target distance {}", fx.target_distance());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Optimize(a) => cmd_optimize(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Compare { bo_dir, baseline_dir, out } => cmd_compare(bo_dir, baseline_dir, out.as_deref()),
        Command::Diagnose { data, fit, min_per_beta, window, slice, out } => {
            cmd_diagnose(data, fit, *min_per_beta, *window, *slice, out)
        }
        Command::Fixture { action: FixtureAction::Export { out, n_dof } } => cmd_fixture_export(out, *n_dof),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(runtime_err(e)),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
