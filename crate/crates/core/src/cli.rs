//! Batch front end: a JSON problem description in, JSON reports, plot-ready
//! CSV files and a run manifest out.
//!
//! Exit codes: 0 pass, 1 a condition or definition failed, 2 bad config,
//! 3 runtime error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certify::{
    check_practical_stability, check_uniform_attractivity, gain_search, verify_conditions, CertificateSpec,
    GainSearchResult, SpasVerdict, VerificationReport,
};
use crate::constructions::{
    construct_backward, construct_inner, construct_outer, verify_containment_chain, BackwardConstruction, ChainReport,
    InnerConstruction, OuterConstruction,
};
use crate::error::SpasError;
use crate::examples::{
    consensus_build, ex1_build, ex1_certificate, ex1_gain_bounds, ex1_lipschitz, ex1_sstar, BiasedGradientSystem,
    ConsensusSystem, QuadraticObjective,
};
use crate::geometry::{sample_seeds, ConstraintSet, Point, SamplingPlan, TargetSet};
use crate::lyapunov::{levelset_boundary, LyapunovFn};
use crate::system::{GainVector, ParamSystem};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "spas", version, about = "Sampled certification of semiglobal practical asymptotic stability")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the Lyapunov decrease conditions at a fixed gain.
    Verify(RunArgs),
    /// Compute the nested radii and levels and check their containment chain.
    Construct(RunArgs),
    /// Find the largest scalar gain at which the conditions hold.
    GainSearch(RunArgs),
    /// Roll out trajectories and check stability and attractivity.
    Simulate(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Construct(_) => "construct",
            Command::GainSearch(_) => "gain-search",
            Command::Simulate(_) => "simulate",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Verify(a) | Command::Construct(a) | Command::GainSearch(a) | Command::Simulate(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Problem description (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sampling seed; overrides `sampling.rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub lyapunov: Option<LyapunovConfig>,
    #[serde(default)]
    pub certificate: Option<CertificateConfig>,
    #[serde(default)]
    pub sampling: SamplingPlan,
    #[serde(default)]
    pub gain: Option<GainInput>,
    #[serde(default)]
    pub gain_search: Option<GainSearchConfig>,
    #[serde(default)]
    pub construct: Option<ConstructConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    /// `y⁺ = P_Ξ[y − α s(y)]` with `s = factor·identity` around a target.
    Example1 {
        target: TargetSet,
        tau: f64,
        #[serde(default = "one")]
        direction_scale: f64,
        #[serde(default)]
        constraint: Option<ConstraintSet>,
        /// `L_s`; estimated from samples when absent.
        #[serde(default)]
        lipschitz: Option<f64>,
    },
    /// `x⁺ = A x − α s(x)` with quadratic local objectives.
    Consensus {
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
        /// CSV file with `N` rows of `N` values, relative to the config file.
        #[serde(default)]
        matrix_csv: Option<PathBuf>,
        objectives: Vec<QuadraticObjective>,
    },
    /// `ξ⁺ = ξ − α (ξ − P_𝒜(ξ))`.
    Contraction {
        target: TargetSet,
        #[serde(default)]
        constraint: Option<ConstraintSet>,
    },
    /// `ξ⁺ = ξ + α v`, which never settles.
    Drift { target: TargetSet, velocity: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LyapunovConfig {
    /// `c·dist(ξ, 𝒜)²`.
    ScaledDistSquared { c: f64 },
    /// `Σ w_i (ξ_i − c_i)²`.
    WeightedQuadratic { weights: Vec<f64>, center: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    pub sigma_o: f64,
    #[serde(default)]
    pub eps_o: f64,
    pub rho_o: f64,
    pub b_o: f64,
    #[serde(default)]
    pub margin: Option<MarginConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginConfig {
    /// Closed-form margin of the biased projected iteration.
    Example1,
    /// `coef·dist² − offset`, independent of the gain.
    DistSquared { coef: f64, offset: f64 },
    /// `α·(coef·dist² − offset)`.
    GainDistSquared { coef: f64, offset: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainInput {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl GainInput {
    pub fn to_gain(&self) -> GainVector {
        match self {
            GainInput::Scalar(a) => GainVector::scalar(*a),
            GainInput::Vector(v) => GainVector(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSearchConfig {
    pub alpha_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructConfig {
    #[serde(default)]
    pub sigma_tilde: Option<f64>,
    #[serde(default)]
    pub eps_o: f64,
    #[serde(default)]
    pub rho_s: Option<f64>,
    #[serde(default = "default_chain_tolerance")]
    pub chain_tolerance: f64,
}

fn default_chain_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub horizon: usize,
    pub seeds: usize,
    pub sigma: f64,
    pub rho_a: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub rho_s: f64,
    /// Number of attractivity seeds whose trajectories are written to CSV.
    #[serde(default = "default_trajectory_csvs")]
    pub trajectory_csvs: usize,
}

fn default_trajectory_csvs() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOutput {
    pub system: String,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructOutput {
    pub system: String,
    pub outer: Option<OuterConstruction>,
    pub inner: InnerConstruction,
    pub backward: Option<BackwardConstruction>,
    pub chain: Option<ChainReport>,
    pub failure: Option<String>,
    pub boundary_csv: Option<String>,
}

/// Closed-form gain limits of the biased projected iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormGain {
    pub tau: f64,
    pub l_s: f64,
    pub s_star: f64,
    pub alpha_bo: f64,
    pub alpha_rho_o: f64,
    /// Absent when `L_s = 0` (no limit).
    pub alpha_w: Option<f64>,
    pub alpha_hat: f64,
    /// `|α̂_search − α̂_closed| / α̂_closed`.
    pub relative_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSearchOutput {
    pub system: String,
    pub alpha_max: f64,
    pub result: Option<GainSearchResult>,
    pub failure: Option<String>,
    pub closed_form: Option<ClosedFormGain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOutput {
    pub system: String,
    pub verdict: SpasVerdict,
    pub empirical_t: Option<usize>,
    pub max_excursion: f64,
    pub trajectory_csvs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub exit_code: i32,
    /// Written files, relative to the output directory.
    pub results: Vec<String>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl From<SpasError> for CliError {
    fn from(e: SpasError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let start = Instant::now();
    let args = cli.command.args().clone();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| execute(&cli.command, &args, start)) {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            EXIT_CONFIG
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

/// Files produced by one subcommand, written together at the end.
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new() -> Self {
        Outputs { files: Vec::new() }
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    fn raw(&mut self, name: String, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }
}

fn execute(command: &Command, args: &RunArgs, start: Instant) -> Result<i32, CliError> {
    let raw = fs::read(&args.config).map_err(|e| config_err(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = parse_config(&raw)?;
    if let Some(seed) = args.seed {
        config.sampling.rng_seed = seed;
    }
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let problem = Problem::build(&config, &base)?;
    config.validate_for(command.name(), problem.target.dim())?;

    let mut out = Outputs::new();
    let code = match command {
        Command::Verify(_) => cmd_verify(&config, &problem, &mut out)?,
        Command::Construct(_) => cmd_construct(&config, &problem, &mut out)?,
        Command::GainSearch(_) => cmd_gain_search(&config, &problem, &mut out)?,
        Command::Simulate(_) => cmd_simulate(&config, &problem, &mut out)?,
    };

    let dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("spas-out"));
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: command.name().to_string(),
        config_sha256: sha256_hex(&raw),
        seed: config.sampling.rng_seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        exit_code: code,
        results: out.files.iter().map(|(n, _)| n.clone()).collect(),
    };
    out.json(MANIFEST_FILE, &manifest)?;
    for (name, bytes) in &out.files {
        write_atomic(&dir.join(name), bytes)?;
    }
    log::info!("{} finished with exit code {code}; outputs in {}", command.name(), dir.display());
    Ok(code)
}

/// Parses a config, turning the reserved `custom` system kind into a
/// pointed message.
pub fn parse_config(raw: &[u8]) -> Result<ProblemConfig, String> {
    let value: serde_json::Value = serde_json::from_slice(raw).map_err(|e| format!("malformed JSON: {e}"))?;
    if value.pointer("/system/kind").and_then(|k| k.as_str()) == Some("custom") {
        return Err("custom systems are not described in config files; build them with ParamSystem::new in the library".into());
    }
    serde_json::from_value(value).map_err(|e| format!("schema violation: {e}"))
}

impl From<String> for CliError {
    fn from(msg: String) -> Self {
        CliError::Config(msg)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

impl ProblemConfig {
    fn validate_for(&self, subcommand: &str, dim: usize) -> Result<(), CliError> {
        self.sampling.validate(dim).map_err(config_err)?;
        if let Some(c) = &self.certificate {
            positive("certificate.rho_o", c.rho_o)?;
            positive("certificate.b_o", c.b_o)?;
            if !(c.eps_o >= 0.0) {
                return Err(config_err(format!("certificate.eps_o must be nonnegative, got {}", c.eps_o)));
            }
            if !(c.sigma_o > c.eps_o + c.rho_o) {
                return Err(config_err(format!(
                    "certificate.sigma_o = {} must exceed eps_o + rho_o = {}",
                    c.sigma_o,
                    c.eps_o + c.rho_o
                )));
            }
        }
        if let Some(g) = &self.gain {
            if !g.to_gain().is_finite() {
                return Err(config_err("gain must be finite"));
            }
        }
        let need = |present: bool, what: &str| -> Result<(), CliError> {
            if present {
                Ok(())
            } else {
                Err(config_err(format!("{subcommand} needs `{what}` in the config")))
            }
        };
        match subcommand {
            "verify" => {
                need(self.gain.is_some(), "gain")?;
                need(self.certificate.is_some(), "certificate")?;
            }
            "gain-search" => {
                need(self.certificate.is_some(), "certificate")?;
                need(self.gain_search.is_some(), "gain_search")?;
                positive("gain_search.alpha_max", self.gain_search.as_ref().unwrap().alpha_max)?;
            }
            "construct" => {
                need(self.construct.is_some(), "construct")?;
                let c = self.construct.as_ref().unwrap();
                if let Some(s) = c.sigma_tilde {
                    positive("construct.sigma_tilde", s)?;
                }
                if let Some(r) = c.rho_s {
                    positive("construct.rho_s", r)?;
                }
                if !(c.eps_o >= 0.0) {
                    return Err(config_err("construct.eps_o must be nonnegative"));
                }
                positive("construct.chain_tolerance", c.chain_tolerance)?;
            }
            "simulate" => {
                need(self.gain.is_some(), "gain")?;
                need(self.simulate.is_some(), "simulate")?;
                let s = self.simulate.as_ref().unwrap();
                if s.horizon == 0 {
                    return Err(config_err("simulate.horizon must be at least 1"));
                }
                if s.seeds == 0 {
                    return Err(config_err("simulate.seeds must be at least 1"));
                }
                positive("simulate.epsilon", s.epsilon)?;
                positive("simulate.delta", s.delta)?;
                if !(s.rho_a >= 0.0 && s.sigma > s.rho_a) {
                    return Err(config_err("simulate needs sigma > rho_a >= 0"));
                }
                if !(s.delta <= s.rho_s) {
                    return Err(config_err("simulate needs delta <= rho_s"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A config turned into library objects.
struct Problem {
    name: &'static str,
    sys: ParamSystem,
    v: LyapunovFn,
    target: TargetSet,
    example1: Option<(BiasedGradientSystem, Option<f64>)>,
}

impl Problem {
    fn build(config: &ProblemConfig, base: &Path) -> Result<Self, CliError> {
        let plan = &config.sampling;
        let (name, sys, default_v, target, example1) = match &config.system {
            SystemConfig::Example1 { target, tau, direction_scale, constraint, lipschitz } => {
                let k = *direction_scale;
                let xi = constraint.clone().unwrap_or_else(|| ConstraintSet::all_space(target.dim()));
                let ex = BiasedGradientSystem::new(target.clone(), move |y| y * k, *tau, xi).map_err(config_err)?;
                if let Some(l) = lipschitz {
                    if !(*l >= 0.0) {
                        return Err(config_err(format!("lipschitz must be nonnegative, got {l}")));
                    }
                }
                let (sys, v) = ex1_build(&ex, plan).map_err(config_err)?;
                ("example1", sys, v, target.clone(), Some((ex, *lipschitz)))
            }
            SystemConfig::Consensus { matrix, matrix_csv, objectives } => {
                let a = match (matrix, matrix_csv) {
                    (Some(rows), None) => matrix_from_rows(rows)?,
                    (None, Some(path)) => matrix_from_csv(&base.join(path))?,
                    _ => return Err(config_err("consensus needs exactly one of `matrix` and `matrix_csv`")),
                };
                let c = ConsensusSystem::new(a, objectives.clone()).map_err(config_err)?;
                let (sys, v, _) = consensus_build(&c, ConstraintSet::all_space(c.n())).map_err(config_err)?;
                ("consensus", sys, v, c.target(), None)
            }
            SystemConfig::Contraction { target, constraint } => {
                target.validate().map_err(config_err)?;
                let xi = constraint.clone().unwrap_or_else(|| ConstraintSet::all_space(target.dim()));
                let t = target.clone();
                let sys = ParamSystem::new(target.dim(), 1, xi, move |x, g| {
                    let p = t.project(x).expect("dimension checked");
                    x - (x - p) * g.alpha()
                })
                .map_err(config_err)?;
                ("contraction", sys, LyapunovFn::scaled_dist_squared(target.clone(), 1.0), target.clone(), None)
            }
            SystemConfig::Drift { target, velocity } => {
                target.validate().map_err(config_err)?;
                if velocity.len() != target.dim() {
                    return Err(config_err("drift velocity must match the target dimension"));
                }
                let vel = Point::from_column_slice(velocity);
                let sys = ParamSystem::new(target.dim(), 1, ConstraintSet::all_space(target.dim()), move |x, g| {
                    x + &vel * g.alpha()
                })
                .map_err(config_err)?;
                ("drift", sys, LyapunovFn::scaled_dist_squared(target.clone(), 1.0), target.clone(), None)
            }
        };
        let v = match &config.lyapunov {
            None => default_v,
            Some(LyapunovConfig::ScaledDistSquared { c }) => {
                positive("lyapunov.c", *c)?;
                LyapunovFn::scaled_dist_squared(target.clone(), *c)
            }
            Some(LyapunovConfig::WeightedQuadratic { weights, center }) => {
                if weights.len() != target.dim() || center.len() != target.dim() {
                    return Err(config_err("lyapunov weights and center must match the state dimension"));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(config_err("lyapunov weights must be positive"));
                }
                LyapunovFn::weighted_quadratic(weights.clone(), center.clone())
            }
        };
        Ok(Problem { name, sys, v, target, example1 })
    }

    fn certificate(&self, c: &CertificateConfig, plan: &SamplingPlan) -> Result<CertificateSpec, CliError> {
        let target = self.target.clone();
        let spec = match (&c.margin, &self.example1) {
            (None | Some(MarginConfig::Example1), Some(_)) => {
                let (tau, l_s, s_star) = self.example1_constants(c.sigma_o, plan)?;
                ex1_certificate(&target, tau, l_s, s_star, c.sigma_o, c.rho_o, c.b_o)
            }
            (Some(MarginConfig::Example1), None) => {
                return Err(config_err("margin kind `example1` needs the example1 system"))
            }
            (None, None) => return Err(config_err("certificate.margin is required for this system")),
            (Some(MarginConfig::DistSquared { coef, offset }), _) => {
                let (k, o) = (*coef, *offset);
                CertificateSpec::new(c.sigma_o, c.eps_o, c.rho_o, c.b_o, move |x, _| k * target.dist_unchecked(x).powi(2) - o)
            }
            (Some(MarginConfig::GainDistSquared { coef, offset }), _) => {
                let (k, o) = (*coef, *offset);
                CertificateSpec::new(c.sigma_o, c.eps_o, c.rho_o, c.b_o, move |x, g| {
                    g.alpha() * (k * target.dist_unchecked(x).powi(2) - o)
                })
            }
        };
        spec.map_err(config_err)
    }

    /// `(τ, L_s, s*)` for the biased projected iteration.
    fn example1_constants(&self, sigma_o: f64, plan: &SamplingPlan) -> Result<(f64, f64, f64), CliError> {
        let (ex, lipschitz) = self.example1.as_ref().expect("example1 system");
        let l_s = match lipschitz {
            Some(l) => *l,
            None => ex1_lipschitz(ex, sigma_o, plan)?,
        };
        Ok((ex.tau, l_s, ex1_sstar(ex, plan)?))
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(config_err("consensus matrix must be square and nonempty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_from_csv(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| config_err(format!("{}: bad entry {f:?}: {e}", path.display()))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    matrix_from_rows(&rows)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_verify(config: &ProblemConfig, p: &Problem, out: &mut Outputs) -> Result<i32, CliError> {
    let cert = config.certificate.as_ref().expect("validated");
    let spec = p.certificate(cert, &config.sampling)?;
    let gain = config.gain.as_ref().expect("validated").to_gain();
    if gain.len() != p.sys.gain_dim() {
        return Err(config_err(format!("gain has {} entries, system takes {}", gain.len(), p.sys.gain_dim())));
    }
    let report = verify_conditions(&p.sys, &p.v, &p.target, &spec, &gain, &config.sampling)?;
    let code = if report.pass { EXIT_PASS } else { EXIT_FAIL };
    for c in report.conditions.iter().filter(|c| !c.pass) {
        log::warn!("{} failed: worst margin {:?} at {:?}", c.condition, c.worst_margin, c.witness);
    }
    out.json("verification.json", &VerifyOutput { system: p.name.into(), report })?;
    Ok(code)
}

fn cmd_construct(config: &ProblemConfig, p: &Problem, out: &mut Outputs) -> Result<i32, CliError> {
    let c = config.construct.as_ref().expect("validated");
    let plan = &config.sampling;
    let outer = c.sigma_tilde.map(|s| construct_outer(&p.v, &p.target, s, plan)).transpose()?;
    let inner = construct_inner(&p.v, &p.target, c.eps_o, plan)?;
    let mut failure = None;
    let mut backward = None;
    if let Some(rho_s) = c.rho_s {
        match construct_backward(&p.v, &p.target, rho_s, c.eps_o, plan) {
            Ok(b) => backward = Some(b),
            Err(SpasError::Construction(msg)) => failure = Some(msg),
            Err(e) => return Err(e.into()),
        }
    }
    let chain = backward
        .as_ref()
        .map(|b| verify_containment_chain(b, &p.v, &p.target, plan, c.chain_tolerance))
        .transpose()?;

    let mut levels: Vec<(&str, f64)> = Vec::new();
    if let Some(o) = &outer {
        levels.push(("l_hat", o.l_hat));
    }
    levels.push(("l_o", inner.l_o));
    levels.push(("l_check", inner.l_check));
    if let Some(b) = &backward {
        levels.push(("l_rho_s", b.l_rho_s));
        levels.push(("l_delta", b.l_delta));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let dim = p.target.dim();
    let mut header = vec!["set".to_string(), "level".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.push("dist".into());
    w.write_record(&header).map_err(|e| CliError::Runtime(e.to_string()))?;
    for (name, level) in levels.into_iter().filter(|(_, l)| *l > 0.0) {
        for q in levelset_boundary(&p.v, &p.target, level, plan)? {
            let mut row = vec![name.to_string(), fmt_f64(level)];
            row.extend(q.iter().map(|x| fmt_f64(*x)));
            row.push(fmt_f64(p.target.dist_unchecked(&q)));
            w.write_record(&row).map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    let csv_bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    out.raw("levelsets.csv".into(), csv_bytes);

    let pass = failure.is_none() && chain.as_ref().is_none_or(|ch| ch.pass);
    if let Some(msg) = &failure {
        log::warn!("{msg}");
    }
    out.json(
        "construction.json",
        &ConstructOutput {
            system: p.name.into(),
            outer,
            inner,
            backward,
            chain,
            failure,
            boundary_csv: Some("levelsets.csv".into()),
        },
    )?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn cmd_gain_search(config: &ProblemConfig, p: &Problem, out: &mut Outputs) -> Result<i32, CliError> {
    let cert = config.certificate.as_ref().expect("validated");
    let alpha_max = config.gain_search.as_ref().expect("validated").alpha_max;
    let plan = &config.sampling;
    let spec = p.certificate(cert, plan)?;
    let (result, failure) = match gain_search(&p.sys, &p.v, &p.target, |_| Ok(spec.clone()), plan, alpha_max) {
        Ok(r) => (Some(r), None),
        Err(e @ (SpasError::NoAdmissibleGain { .. } | SpasError::NotDownClosed { .. })) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let closed_form = match (&p.example1, &cert.margin) {
        (Some(_), None | Some(MarginConfig::Example1)) => {
            let (tau, l_s, s_star) = p.example1_constants(cert.sigma_o, plan)?;
            let b = ex1_gain_bounds(tau, l_s, s_star, cert.rho_o, cert.b_o)?;
            Some(ClosedFormGain {
                tau,
                l_s,
                s_star,
                alpha_bo: b.alpha_bo,
                alpha_rho_o: b.alpha_rho_o,
                alpha_w: b.alpha_w.is_finite().then_some(b.alpha_w),
                alpha_hat: b.alpha_hat,
                relative_gap: result.as_ref().map(|r| (r.alpha_hat - b.alpha_hat).abs() / b.alpha_hat),
            })
        }
        _ => None,
    };
    let code = if result.is_some() { EXIT_PASS } else { EXIT_FAIL };
    out.json("gain_search.json", &GainSearchOutput { system: p.name.into(), alpha_max, result, failure, closed_form })?;
    Ok(code)
}

fn cmd_simulate(config: &ProblemConfig, p: &Problem, out: &mut Outputs) -> Result<i32, CliError> {
    let s = config.simulate.as_ref().expect("validated");
    let plan = &config.sampling;
    let gain = config.gain.as_ref().expect("validated").to_gain();
    if gain.len() != p.sys.gain_dim() {
        return Err(config_err(format!("gain has {} entries, system takes {}", gain.len(), p.sys.gain_dim())));
    }
    let stability = check_practical_stability(&p.sys, &p.target, s.delta, s.rho_s, &gain, plan, s.horizon, s.seeds)?;
    let attractivity =
        check_uniform_attractivity(&p.sys, &p.target, s.sigma, s.rho_a, s.epsilon, &gain, plan, s.horizon, s.seeds)?;

    // the checks draw their seeds deterministically, so they can be redrawn here
    let mut wanted: Vec<(String, Point)> = Vec::new();
    let attr_seeds = sample_seeds(&p.target, 0.0, s.sigma, p.sys.constraint(), plan, s.seeds)?;
    for (i, x0) in attr_seeds.iter().enumerate().take(s.trajectory_csvs) {
        wanted.push((format!("trajectories/attractivity_seed_{i:04}.csv"), x0.clone()));
    }
    if let Some(ev) = &attractivity.first_failure {
        wanted.push((format!("trajectories/attractivity_witness_seed_{:04}.csv", ev.seed), attr_seeds[ev.seed].clone()));
    }
    if let Some(ev) = stability.worst.as_ref().filter(|_| !stability.pass) {
        let stab_seeds = sample_seeds(&p.target, 0.0, s.delta, p.sys.constraint(), plan, s.seeds)?;
        wanted.push((format!("trajectories/stability_witness_seed_{:04}.csv", ev.seed), stab_seeds[ev.seed].clone()));
    }
    let mut names = Vec::new();
    for (name, x0) in wanted {
        let traj = p.sys.rollout(&x0, &gain, s.horizon)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend((0..p.target.dim()).map(|i| format!("x{i}")));
        header.extend(["dist".to_string(), "V".to_string()]);
        w.write_record(&header).map_err(|e| CliError::Runtime(e.to_string()))?;
        for (t, x) in traj.states.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(p.target.dist_unchecked(x)));
            row.push(fmt_f64(p.v.value(x)));
            w.write_record(&row).map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        out.raw(name.clone(), w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?);
        names.push(name);
    }

    let verdict = SpasVerdict::new(&gain, None, stability, attractivity);
    let code = if verdict.pass { EXIT_PASS } else { EXIT_FAIL };
    out.json(
        "simulation.json",
        &SimulateOutput {
            system: p.name.into(),
            empirical_t: verdict.attractivity.hitting_time,
            max_excursion: verdict.stability.max_excursion,
            verdict,
            trajectory_csvs: names,
        },
    )?;
    Ok(code)
}
