//! Configuration-driven front end: dataset generation, sampling runs,
//! schedule tooling, experiment commands, and the verification suites.
//!
//! Science parameters live in a TOML config; flags only select the config
//! file and apply `--override key.path=value` edits, so every run manifest is
//! itself a valid config reproducing the run. Exit codes: 0 success,
//! 1 assertion failure, 2 config error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, ConcentrationParams, TailBoundParams,
};
use crate::denoisers::{Denoiser, ErrorDirection, ErrorModel};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldSpec, PointCloud, TargetSet};
use crate::io;
use crate::rng::{self, Prng};
use crate::samplers::{self, InitRule, SamplerKind, SamplerSpec};
use crate::schedules::{beta_star, limit_ratios, NoiseSchedule};
use crate::vecmath as vm;

/// Env var read by the sampler verify suite: multiplies every step size of
/// the suite's schedule while the checks still use the clean one. Lets tests
/// confirm the suite actually detects a corrupted schedule.
pub const CORRUPT_BETA_ENV: &str = "DISTDIFF_CORRUPT_BETA";

#[derive(Parser, Debug)]
#[command(name = "distdiff", version, about = "diffusion sampling as distance-function descent")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
    /// Config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory or file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for batch runs (default: rayon's choice).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Config override `key.path=value`, repeatable.
    #[arg(long = "override", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the configured dataset to CSV.
    Generate,
    /// Run the configured sampler batch and export trajectories + summary.
    Sample,
    /// Schedule tooling.
    Schedule {
        #[command(subcommand)]
        sub: ScheduleCmd,
    },
    /// Run a verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Oracle-denoising concentration Monte Carlo.
    Concentration,
    /// Terminal-quality table over a gamma and step-count grid.
    GammaSweep,
    /// Softmax tail-bound check on the configured cloud.
    TailBound,
}

#[derive(Subcommand, Debug)]
pub enum ScheduleCmd {
    /// Print (or write) the schedule table t,sigma,beta.
    Build,
    /// Admissibility report against the configured error model.
    Check,
    /// Largest admissible constant step size for the error model.
    BetaStar,
    /// Large-N limits of the constant-step schedule.
    Limits,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Denoiser,
    Sampler,
    Schedule,
    Concentration,
    TailBound,
    Coordinates,
    All,
}

// ---------------------------------------------------------------------------
// Config schema

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
    pub dataset: DatasetConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub denoiser: DenoiserConfig,
    #[serde(default)]
    pub error_model: ErrorModelConfig,
    #[serde(default)]
    pub concentration: Option<ConcentrationConfig>,
    #[serde(default)]
    pub gamma_sweep: Option<GammaSweepConfig>,
    #[serde(default)]
    pub tail_bound: Option<TailBoundConfig>,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// grid | gaussian-blobs | circle-samples | sphere-samples |
    /// two-clusters | csv | sphere-manifold | circle-manifold
    pub kind: String,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub header: bool,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// grid: points per axis.
    #[serde(default = "default_side")]
    pub side: usize,
    /// grid spacing.
    #[serde(default = "default_one")]
    pub spacing: f64,
    /// gaussian-blobs: number of blobs.
    #[serde(default = "default_blobs")]
    pub blobs: usize,
    /// gaussian-blobs / two-clusters: per-cluster standard deviation.
    #[serde(default = "default_std")]
    pub std: f64,
    /// gaussian-blobs: scale of blob centers; two-clusters: center separation.
    #[serde(default = "default_one")]
    pub spread: f64,
    /// circle/sphere radius.
    #[serde(default = "default_one")]
    pub radius: f64,
}

fn default_dim() -> usize {
    2
}
fn default_count() -> usize {
    16
}
fn default_side() -> usize {
    2
}
fn default_one() -> f64 {
    1.0
}
fn default_blobs() -> usize {
    3
}
fn default_std() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// loglinear | edm | ddim-linear | constant-beta | explicit
    pub kind: String,
    #[serde(default = "default_sigma_top")]
    pub sigma_top: f64,
    #[serde(default = "default_sigma_bottom")]
    pub sigma_bottom: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta_t")]
    pub beta_t: f64,
    #[serde(default = "default_t_train")]
    pub t_train: usize,
    #[serde(default)]
    pub offset_sigma_top: Option<f64>,
    #[serde(default)]
    pub sigmas: Option<Vec<f64>>,
}

fn default_sigma_top() -> f64 {
    40.0
}
fn default_sigma_bottom() -> f64 {
    0.01
}
fn default_steps() -> usize {
    10
}
fn default_rho() -> f64 {
    7.0
}
fn default_beta1() -> f64 {
    1e-4
}
fn default_beta_t() -> f64 {
    0.02
}
fn default_t_train() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// ddim | ddpm | gradient-estimation
    pub kind: String,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub terminal_full_step: bool,
    /// gaussian | exact-distance
    #[serde(default = "default_init")]
    pub init: String,
    /// Export per-step state columns in trajectory CSVs.
    #[serde(default)]
    pub export_state: bool,
}

fn default_gamma() -> f64 {
    2.0
}
fn default_init() -> String {
    "gaussian".into()
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: "ddim".into(),
            gamma: default_gamma(),
            terminal_full_step: false,
            init: default_init(),
            export_state: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DenoiserConfig {
    /// ideal | exact-projection | convex-mean
    pub kind: String,
    /// Optional injected error level; 0 disables injection.
    #[serde(default)]
    pub inject_eta: f64,
    /// random-orthogonal | adversarial
    #[serde(default = "default_direction")]
    pub inject_direction: String,
}

fn default_direction() -> String {
    "random-orthogonal".into()
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self { kind: "ideal".into(), inject_eta: 0.0, inject_direction: default_direction() }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ErrorModelConfig {
    pub eta: f64,
    pub nu: f64,
}

impl Default for ErrorModelConfig {
    fn default() -> Self {
        Self { eta: 0.1, nu: 2.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    /// circle | sphere
    pub kind: String,
    pub dim: usize,
    #[serde(default = "default_one")]
    pub radius: f64,
    pub sigma: f64,
    pub t: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GammaSweepConfig {
    pub gammas: Vec<f64>,
    pub steps: Vec<usize>,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TailBoundConfig {
    pub sigma: f64,
    pub eta: f64,
    /// Margin added to the alpha threshold.
    #[serde(default = "default_one")]
    pub alpha_margin: f64,
    pub queries: usize,
    /// Query points at this multiple of sigma * sqrt(n) from a cloud point.
    #[serde(default = "default_one")]
    pub query_scale: f64,
}

// ---------------------------------------------------------------------------
// Config loading

pub fn load_config(path: &Path, overrides: &[String], seed_flag: Option<u64>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut value: toml::Value =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    let mut cfg: RunConfig = value
        .try_into()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed_flag {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// `key.path=value`; the value is parsed as a TOML literal, falling back to a
/// string.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override must be key=value: {spec:?}")))?;
    let parsed: toml::Value = toml::from_str(&format!("v = {raw}"))
        .map(|t: toml::Value| t["v"].clone())
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path {path:?} crosses a non-table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    unreachable!()
}

// ---------------------------------------------------------------------------
// Resolution of config into domain objects

pub fn build_target(cfg: &DatasetConfig) -> Result<TargetSet> {
    match cfg.kind.as_str() {
        "sphere-manifold" => Ok(TargetSet::Manifold(ManifoldSpec::sphere(
            vec![0.0; cfg.dim],
            cfg.radius,
        )?)),
        "circle-manifold" => Ok(TargetSet::Manifold(ManifoldSpec::circle(
            vec![0.0; cfg.dim],
            cfg.radius,
        )?)),
        "csv" => {
            let path = cfg
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("dataset.kind = csv requires dataset.path".into()))?;
            Ok(TargetSet::Cloud(io::load_point_cloud(Path::new(path), cfg.header)?))
        }
        _ => Ok(TargetSet::Cloud(generate_dataset(cfg)?)),
    }
}

pub fn generate_dataset(cfg: &DatasetConfig) -> Result<PointCloud> {
    if cfg.dim == 0 {
        return Err(Error::Config("dataset.dim must be >= 1".into()));
    }
    let mut rng = rng::seeded(cfg.seed);
    let n = cfg.dim;
    let points: Vec<Vec<f64>> = match cfg.kind.as_str() {
        "grid" => {
            let total = (cfg.side as f64).powi(n as i32);
            if total > 1e6 {
                return Err(Error::Config("grid too large (side^dim > 1e6)".into()));
            }
            let mut pts = Vec::with_capacity(total as usize);
            let mut idx = vec![0usize; n];
            loop {
                pts.push(idx.iter().map(|&i| i as f64 * cfg.spacing).collect());
                let mut k = 0;
                loop {
                    if k == n {
                        return PointCloud::new(pts);
                    }
                    idx[k] += 1;
                    if idx[k] < cfg.side {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        "gaussian-blobs" => {
            if cfg.blobs == 0 {
                return Err(Error::Config("dataset.blobs must be >= 1".into()));
            }
            let centers: Vec<Vec<f64>> = (0..cfg.blobs)
                .map(|_| vm::scale(&rng::normal_vec(&mut rng, n), cfg.spread))
                .collect();
            (0..cfg.count)
                .map(|i| {
                    vm::axpy(&centers[i % cfg.blobs], cfg.std, &rng::normal_vec(&mut rng, n))
                })
                .collect()
        }
        "circle-samples" => {
            if n < 2 {
                return Err(Error::Config("circle-samples needs dim >= 2".into()));
            }
            (0..cfg.count)
                .map(|_| {
                    use rand::Rng;
                    let theta: f64 =
                        rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
                    let mut p = vec![0.0; n];
                    p[0] = cfg.radius * theta.cos();
                    p[1] = cfg.radius * theta.sin();
                    p
                })
                .collect()
        }
        "sphere-samples" => (0..cfg.count)
            .map(|_| vm::scale(&rng::unit_vec(&mut rng, n), cfg.radius))
            .collect(),
        "two-clusters" => {
            let mut c0 = vec![0.0; n];
            let mut c1 = vec![0.0; n];
            c0[0] = -cfg.spread / 2.0;
            c1[0] = cfg.spread / 2.0;
            (0..cfg.count)
                .map(|i| {
                    let c = if i % 2 == 0 { &c0 } else { &c1 };
                    vm::axpy(c, cfg.std, &rng::normal_vec(&mut rng, n))
                })
                .collect()
        }
        other => {
            return Err(Error::Config(format!(
                "unknown dataset kind {other:?} (not a generator)"
            )))
        }
    };
    PointCloud::new(points)
}

pub fn build_schedule(cfg: &ScheduleConfig) -> Result<NoiseSchedule> {
    match cfg.kind.as_str() {
        "loglinear" => NoiseSchedule::loglinear(cfg.sigma_top, cfg.sigma_bottom, cfg.steps),
        "edm" => NoiseSchedule::edm(cfg.sigma_top, cfg.sigma_bottom, cfg.rho, cfg.steps),
        "constant-beta" => {
            let beta = cfg
                .beta
                .ok_or_else(|| Error::Config("constant-beta requires schedule.beta".into()))?;
            NoiseSchedule::constant_beta(cfg.sigma_top, beta, cfg.steps)
        }
        "ddim-linear" => NoiseSchedule::ddim_linear(
            cfg.beta1,
            cfg.beta_t,
            cfg.t_train,
            cfg.steps,
            cfg.offset_sigma_top,
        ),
        "explicit" => {
            let sigmas = cfg
                .sigmas
                .clone()
                .ok_or_else(|| Error::Config("explicit requires schedule.sigmas".into()))?;
            NoiseSchedule::from_sigmas_desc(sigmas)
        }
        other => Err(Error::Config(format!("unknown schedule kind {other:?}"))),
    }
}

pub fn build_sampler(cfg: &SamplerConfig) -> Result<SamplerSpec> {
    let kind = match cfg.kind.as_str() {
        "ddim" => SamplerKind::Ddim,
        "ddpm" => SamplerKind::Ddpm,
        "gradient-estimation" => SamplerKind::GradientEstimation,
        other => return Err(Error::Config(format!("unknown sampler kind {other:?}"))),
    };
    Ok(SamplerSpec { kind, gamma: cfg.gamma, terminal_full_step: cfg.terminal_full_step })
}

pub fn build_init(cfg: &SamplerConfig) -> Result<InitRule> {
    match cfg.init.as_str() {
        "gaussian" => Ok(InitRule::Gaussian),
        "exact-distance" => Ok(InitRule::ExactDistance { direction: None }),
        other => Err(Error::Config(format!("unknown init {other:?}"))),
    }
}

pub fn build_denoiser(cfg: &DenoiserConfig, target: &TargetSet) -> Result<Denoiser> {
    let inner = match cfg.kind.as_str() {
        "ideal" => {
            let cloud = target.as_cloud().ok_or_else(|| {
                Error::Config("ideal denoiser needs a point-cloud dataset".into())
            })?;
            Denoiser::Ideal(cloud.clone())
        }
        "exact-projection" => Denoiser::ExactProjection(target.clone()),
        "convex-mean" => {
            let cloud = target.as_cloud().ok_or_else(|| {
                Error::Config("convex-mean denoiser needs a point-cloud dataset".into())
            })?;
            Denoiser::ConvexMean(cloud.clone())
        }
        other => return Err(Error::Config(format!("unknown denoiser kind {other:?}"))),
    };
    if cfg.inject_eta == 0.0 {
        return Ok(inner);
    }
    let direction = match cfg.inject_direction.as_str() {
        "random-orthogonal" => ErrorDirection::RandomOrthogonal,
        "adversarial" => ErrorDirection::Adversarial,
        other => return Err(Error::Config(format!("unknown inject direction {other:?}"))),
    };
    Denoiser::error_injected(inner, cfg.inject_eta, direction, target.clone())
}

// ---------------------------------------------------------------------------
// Command implementations

pub struct CmdOutput {
    pub exit_code: i32,
    pub stdout: String,
}

fn ok(stdout: String) -> CmdOutput {
    CmdOutput { exit_code: 0, stdout }
}

pub fn run_cli(cli: &Cli) -> CmdOutput {
    let result = dispatch(cli);
    match result {
        Ok(out) => out,
        Err(e) => {
            let code = match e {
                Error::Config(_) | Error::Parse(_) | Error::Io(_) => 2,
                _ => 2,
            };
            CmdOutput { exit_code: code, stdout: format!("error: {e}\n") }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<CmdOutput> {
    if let Some(threads) = cli.threads {
        // Per-trajectory streams make output independent of the pool size;
        // build the requested pool and run everything inside it.
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        return pool.install(|| dispatch_inner(cli));
    }
    dispatch_inner(cli)
}

fn require_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    load_config(path, &cli.overrides, cli.seed)
}

fn dispatch_inner(cli: &Cli) -> Result<CmdOutput> {
    match &cli.cmd {
        Command::Generate => {
            let cfg = require_config(cli)?;
            let cloud = generate_dataset(&cfg.dataset)?;
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.out_dir.as_ref().map(|d| Path::new(d).join("dataset.csv")))
                .ok_or_else(|| Error::Config("generate needs --out or out_dir".into()))?;
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent)?;
            }
            io::save_point_cloud(&out, &cloud)?;
            Ok(ok(format!(
                "wrote {} points (dim {}, diameter {}) to {}\n",
                cloud.len(),
                cloud.dim(),
                io::fmt_f64(cloud.diameter()),
                out.display()
            )))
        }
        Command::Sample => cmd_sample(cli),
        Command::Schedule { sub } => cmd_schedule(cli, sub),
        Command::Verify { suite } => cmd_verify(cli, *suite),
        Command::Concentration => {
            let cfg = require_config(cli)?;
            let c = cfg.concentration.as_ref().ok_or_else(|| {
                Error::Config("missing [concentration] section".into())
            })?;
            let manifold = match c.kind.as_str() {
                "circle" => ManifoldSpec::circle(vec![0.0; c.dim], c.radius)?,
                "sphere" => ManifoldSpec::sphere(vec![0.0; c.dim], c.radius)?,
                other => return Err(Error::Config(format!("unknown manifold {other:?}"))),
            };
            let p = ConcentrationParams {
                manifold,
                sigma: c.sigma,
                t: c.t,
                trials: c.trials,
                seed: cfg.seed,
            };
            let r = analysis::concentration_experiment(&p)?;
            let mut s = String::new();
            s.push_str(&format!("hypothesis_met {}\n", r.hypothesis_met));
            if let Some(reason) = &r.skip_reason {
                s.push_str(&format!("skip_reason {reason}\n"));
            }
            s.push_str(&format!(
                "trials {}\nfreq_distance {}\nfreq_proj_error {}\ndistance_lower {}\ndistance_upper {}\nproj_error_coeff {}\nkappa {}\nmean_proj_error_ratio {}\nmean_proj_error {}\n",
                r.trials,
                io::fmt_f64(r.freq_distance),
                io::fmt_f64(r.freq_proj_error),
                io::fmt_f64(r.distance_lower),
                io::fmt_f64(r.distance_upper),
                io::fmt_f64(r.proj_error_coeff),
                io::fmt_f64(r.kappa),
                io::fmt_f64(r.mean_proj_error_ratio),
                io::fmt_f64(r.mean_proj_error),
            ));
            maybe_write(cli, &cfg, "concentration.txt", &s)?;
            Ok(ok(s))
        }
        Command::GammaSweep => {
            let cfg = require_config(cli)?;
            let g = cfg
                .gamma_sweep
                .as_ref()
                .ok_or_else(|| Error::Config("missing [gamma_sweep] section".into()))?;
            let target = build_target(&cfg.dataset)?;
            let denoiser = build_denoiser(&cfg.denoiser, &target)?;
            let rows = analysis::gamma_sweep(
                &target,
                &denoiser,
                cfg.schedule.sigma_top,
                cfg.schedule.sigma_bottom,
                &g.gammas,
                &g.steps,
                g.trials,
                cfg.seed,
            )?;
            let mut csv =
                String::from("n,gamma,trials,mean_terminal_distance,mean_terminal_rel_error\n");
            for row in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.n,
                    io::fmt_f64(row.gamma),
                    row.trials,
                    io::fmt_f64(row.mean_terminal_distance),
                    io::fmt_f64(row.mean_terminal_rel_error)
                ));
            }
            maybe_write(cli, &cfg, "gamma_sweep.csv", &csv)?;
            Ok(ok(csv))
        }
        Command::TailBound => {
            let cfg = require_config(cli)?;
            let t = cfg
                .tail_bound
                .as_ref()
                .ok_or_else(|| Error::Config("missing [tail_bound] section".into()))?;
            let cloud = match build_target(&cfg.dataset)? {
                TargetSet::Cloud(c) => c,
                TargetSet::Manifold(_) => {
                    return Err(Error::Config("tail-bound needs a point-cloud dataset".into()))
                }
            };
            let n = cloud.dim();
            let mut csv = String::from(
                "query,dist,alpha,alpha_threshold,tail_size,tail_norm,budget,holds,skipped\n",
            );
            let mut violations = 0usize;
            for q in 0..t.queries {
                let mut rng = rng::child(cfg.seed, q as u64);
                let base = (q % cloud.len().max(1)) % cloud.len();
                let dir = rng::unit_vec(&mut rng, n);
                let x = vm::axpy(
                    &cloud.points()[base],
                    t.query_scale * t.sigma * (n as f64).sqrt(),
                    &dir,
                );
                // Probe with the threshold alpha plus the configured margin.
                let dist = cloud.distance(&x)?;
                let alpha = if dist > 0.0 {
                    1.0 + (2.0 * t.sigma * t.sigma / (dist * dist))
                        * (1.0 / std::f64::consts::E + (cloud.len() as f64 / t.eta).ln())
                        + t.alpha_margin
                } else {
                    1.0 + t.alpha_margin
                };
                let p = TailBoundParams {
                    cloud: cloud.clone(),
                    x,
                    sigma: t.sigma,
                    alpha,
                    eta: t.eta,
                };
                let r = analysis::tail_bound_check(&p)?;
                if !r.skipped && !r.holds {
                    violations += 1;
                }
                csv.push_str(&format!(
                    "{q},{},{},{},{},{},{},{},{}\n",
                    io::fmt_f64(r.dist),
                    io::fmt_f64(alpha),
                    io::fmt_f64(r.alpha_threshold),
                    r.tail_size,
                    io::fmt_f64(r.tail_norm),
                    io::fmt_f64(r.budget),
                    r.holds,
                    r.skipped
                ));
            }
            maybe_write(cli, &cfg, "tail_bound.csv", &csv)?;
            let code = if violations == 0 { 0 } else { 1 };
            Ok(CmdOutput { exit_code: code, stdout: csv })
        }
    }
}

fn maybe_write(cli: &Cli, cfg: &RunConfig, name: &str, contents: &str) -> Result<()> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from));
    if let Some(dir) = dir {
        io::write_file(&dir.join(name), contents)?;
        write_manifest(&dir, cfg)?;
    }
    Ok(())
}

fn write_manifest(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let text = toml::to_string_pretty(cfg)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    let header = format!("# distdiff {} run manifest\n", env!("CARGO_PKG_VERSION"));
    io::write_file(&dir.join("manifest.toml"), &format!("{header}{text}"))
}

fn cmd_sample(cli: &Cli) -> Result<CmdOutput> {
    let cfg = require_config(cli)?;
    let target = build_target(&cfg.dataset)?;
    let schedule = build_schedule(&cfg.schedule)?;
    let spec = build_sampler(&cfg.sampler)?;
    let init = build_init(&cfg.sampler)?;
    let denoiser = build_denoiser(&cfg.denoiser, &target)?;
    let n = target.dim();
    let sigma_top = schedule.sigma(schedule.num_steps());

    let trajs: Vec<Result<crate::samplers::Trajectory>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::child(cfg.seed, trial as u64);
            let x_top = samplers::init_x_top(sigma_top, n, &init, &target, &mut rng)?;
            samplers::run(&spec, &schedule, &denoiser, &target, x_top, &mut rng)
        })
        .collect();
    let trajs: Result<Vec<_>> = trajs.into_iter().collect();
    let trajs = trajs?;

    let fit = analysis::error_model_fit(&trajs)?;
    let mut dist_sum = 0.0;
    let mut dist_max = 0.0f64;
    let mut invariant_dev = 0.0f64;
    for traj in &trajs {
        let d = target.distance(&traj.final_x0)?;
        dist_sum += d;
        dist_max = dist_max.max(d);
        for rec in &traj.records {
            if rec.ratio.is_finite() {
                invariant_dev = invariant_dev.max((1.0 / rec.ratio - 1.0).abs());
            }
        }
    }
    let summary = format!(
        "trials,mean_terminal_distance,max_terminal_distance,eta_hat,nu_hat,max_ratio_deviation\n{},{},{},{},{},{}\n",
        cfg.trials,
        io::fmt_f64(dist_sum / cfg.trials as f64),
        io::fmt_f64(dist_max),
        io::fmt_f64(fit.eta_hat),
        io::fmt_f64(fit.nu_hat),
        io::fmt_f64(invariant_dev),
    );

    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from));
    if let Some(dir) = dir {
        for (i, traj) in trajs.iter().enumerate() {
            io::write_file(
                &dir.join(format!("traj_{i:04}.csv")),
                &io::trajectory_csv(traj, cfg.sampler.export_state),
            )?;
        }
        io::write_file(&dir.join("summary.csv"), &summary)?;
        write_manifest(&dir, &cfg)?;
    }
    Ok(ok(summary))
}

fn cmd_schedule(cli: &Cli, sub: &ScheduleCmd) -> Result<CmdOutput> {
    let cfg = require_config(cli)?;
    match sub {
        ScheduleCmd::Build => {
            let schedule = build_schedule(&cfg.schedule)?;
            let csv = io::schedule_csv(&schedule);
            maybe_write(cli, &cfg, "schedule.csv", &csv)?;
            Ok(ok(csv))
        }
        ScheduleCmd::Check => {
            let schedule = build_schedule(&cfg.schedule)?;
            let model = ErrorModel::new(cfg.error_model.eta, cfg.error_model.nu)?;
            let report = schedule.is_admissible(&model, None);
            let mut s = format!(
                "{}\n",
                if report.admissible { "admissible" } else { "inadmissible" }
            );
            if let Some(reason) = &report.reason {
                s.push_str(&format!("reason {reason}\n"));
            }
            let min_margin = report
                .margins
                .iter()
                .map(|m| m.lower_margin.min(m.upper_margin))
                .fold(f64::INFINITY, f64::min);
            s.push_str(&format!("min_log_margin {}\n", io::fmt_f64(min_margin)));
            Ok(CmdOutput { exit_code: if report.admissible { 0 } else { 1 }, stdout: s })
        }
        ScheduleCmd::BetaStar => {
            let b = beta_star(cfg.error_model.eta, cfg.error_model.nu, cfg.schedule.steps)?;
            Ok(ok(format!(
                "beta_star {:.6}\none_minus_beta_star {:.6}\nexact {}\n",
                b,
                1.0 - b,
                io::fmt_f64(b)
            )))
        }
        ScheduleCmd::Limits => {
            let (sigma_ratio, dist_ratio) =
                limit_ratios(cfg.error_model.eta, cfg.error_model.nu)?;
            Ok(ok(format!(
                "sigma_ratio_limit {}\ndist_ratio_limit {}\n",
                io::fmt_f64(sigma_ratio),
                io::fmt_f64(dist_ratio)
            )))
        }
    }
}

// ---------------------------------------------------------------------------
// Verify suites

struct SuiteRun {
    lines: Vec<String>,
    failures: usize,
}

impl SuiteRun {
    fn new() -> Self {
        Self { lines: Vec::new(), failures: 0 }
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            self.lines.push(format!("PASS {name} {detail}"));
        } else {
            self.failures += 1;
            self.lines.push(format!("FAIL {name} {detail}"));
        }
    }
}

fn cmd_verify(cli: &Cli, suite: Suite) -> Result<CmdOutput> {
    let seed = cli.seed.unwrap_or(0);
    let mut run = SuiteRun::new();
    let suites: Vec<Suite> = if suite == Suite::All {
        vec![
            Suite::Geometry,
            Suite::Denoiser,
            Suite::Sampler,
            Suite::Schedule,
            Suite::Concentration,
            Suite::TailBound,
            Suite::Coordinates,
        ]
    } else {
        vec![suite]
    };
    for s in suites {
        match s {
            Suite::Geometry => verify_geometry(seed, &mut run)?,
            Suite::Denoiser => verify_denoiser(seed, &mut run)?,
            Suite::Sampler => verify_sampler(seed, &mut run)?,
            Suite::Schedule => verify_schedule(seed, &mut run)?,
            Suite::Concentration => verify_concentration(seed, &mut run)?,
            Suite::TailBound => verify_tail_bound(seed, &mut run)?,
            Suite::Coordinates => verify_coordinates(seed, &mut run)?,
            Suite::All => unreachable!(),
        }
    }
    let mut stdout = run.lines.join("\n");
    stdout.push('\n');
    stdout.push_str(&format!(
        "{} checks, {} failures\n",
        run.lines.len(),
        run.failures
    ));
    if let Some(out) = &cli.out {
        io::write_file(out, &stdout)?;
    }
    Ok(CmdOutput { exit_code: if run.failures == 0 { 0 } else { 1 }, stdout })
}

fn random_cloud(rng: &mut Prng, m: usize, n: usize, scale: f64) -> PointCloud {
    PointCloud::new(
        (0..m).map(|_| vm::scale(&rng::normal_vec(rng, n), scale)).collect(),
    )
    .expect("random cloud")
}

fn verify_geometry(seed: u64, run: &mut SuiteRun) -> Result<()> {
    let mut rng = rng::child(seed, 101);
    // Lipschitz: |d(u) - d(v)| <= ||u - v||.
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let cloud = random_cloud(&mut rng, 12, 6, 1.0);
        let u = rng::normal_vec(&mut rng, 6);
        let v = rng::normal_vec(&mut rng, 6);
        let lhs = (cloud.distance(&u)? - cloud.distance(&v)?).abs();
        let gap = lhs - vm::dist(&u, &v);
        worst = worst.max(gap);
    }
    run.check("distance-lipschitz", worst <= 1e-12, format!("worst_excess {worst:e}"));

    // Unit gradient norm off the set.
    let mut worst_dev: f64 = 0.0;
    for _ in 0..200 {
        let cloud = random_cloud(&mut rng, 8, 5, 1.0);
        let x = vm::scale(&rng::normal_vec(&mut rng, 5), 3.0);
        let set = TargetSet::Cloud(cloud);
        let d = set.distance(&x)?;
        if d < 1e-6 {
            continue;
        }
        if let Ok(g) = crate::geometry::grad_half_sq_distance(&x, &set) {
            worst_dev = worst_dev.max((vm::norm(&g) / d - 1.0).abs());
        }
    }
    run.check("distance-gradient-unit-norm", worst_dev <= 1e-9, format!("worst {worst_dev:e}"));

    // Smoothed squared distance lower-bounds the exact one.
    let mut ok_all = true;
    for _ in 0..200 {
        let cloud = random_cloud(&mut rng, 10, 8, 1.0);
        let x = rng::normal_vec(&mut rng, 8);
        let exact = cloud.distance(&x)?;
        let smoothed = crate::geometry::smoothed_sq_distance(&x, &cloud, 0.3)?;
        if smoothed > exact * exact + 1e-12 {
            ok_all = false;
        }
    }
    run.check("smoothed-below-exact", ok_all, String::new());

    // Finite-difference agreement for the half-squared-distance gradient.
    let mut worst_fd: f64 = 0.0;
    for _ in 0..50 {
        let cloud = random_cloud(&mut rng, 6, 4, 1.0);
        let set = TargetSet::Cloud(cloud);
        let x = vm::scale(&rng::normal_vec(&mut rng, 4), 2.0);
        let proj = set.project(&x)?;
        if proj.tie || proj.distance < 0.1 {
            continue;
        }
        let g = crate::geometry::grad_half_sq_distance(&x, &set)?;
        let h = 1e-6 * (1.0 + vm::norm(&x));
        for i in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let dp = set.distance(&xp)?;
            let dm = set.distance(&xm)?;
            let fd = (dp * dp - dm * dm) / (4.0 * h);
            let denom = g[i].abs().max(1.0);
            worst_fd = worst_fd.max((fd - g[i]).abs() / denom);
        }
    }
    run.check("half-sq-gradient-fd", worst_fd <= 1e-5, format!("worst {worst_fd:e}"));
    Ok(())
}

fn verify_denoiser(seed: u64, run: &mut SuiteRun) -> Result<()> {
    let mut rng = rng::child(seed, 202);
    // Ideal-denoiser gradient identity against finite differences of the
    // smoothed squared distance.
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let cloud = random_cloud(&mut rng, 10, 5, 1.0);
        let x = vm::scale(&rng::normal_vec(&mut rng, 5), 1.5);
        let sigma = 0.2 + 1.3 * {
            use rand::Rng;
            rng.gen::<f64>()
        };
        let out = crate::denoisers::ideal_denoise(&x, sigma, &cloud)?;
        let h = 1e-6 * (1.0 + vm::norm(&x));
        for i in 0..5 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = crate::geometry::smoothed_sq_distance(&xp, &cloud, sigma)?;
            let fm = crate::geometry::smoothed_sq_distance(&xm, &cloud, sigma)?;
            let fd = (fp - fm) / (4.0 * h); // gradient of half the value
            let target = sigma * out.epsilon[i];
            worst = worst.max((fd - target).abs() / target.abs().max(1.0));
        }
    }
    run.check("ideal-gradient-identity", worst <= 1e-5, format!("worst {worst:e}"));

    // Weights are a convex combination and x0_hat stays in the bounding box.
    let mut ok_all = true;
    for _ in 0..100 {
        let cloud = random_cloud(&mut rng, 12, 4, 1.0);
        let x = rng::normal_vec(&mut rng, 4);
        let out = crate::denoisers::ideal_denoise(&x, 0.5, &cloud)?;
        let w = out.weights.as_ref().expect("ideal weights");
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || w.iter().any(|&wi| wi < 0.0) {
            ok_all = false;
        }
        let (lo, hi) = cloud.bounding_box();
        for i in 0..4 {
            if out.x0_hat[i] < lo[i] - 1e-12 || out.x0_hat[i] > hi[i] + 1e-12 {
                ok_all = false;
            }
        }
    }
    run.check("ideal-convexity", ok_all, String::new());

    // Injection norm is exact.
    let mut worst_inj: f64 = 0.0;
    for _ in 0..100 {
        let cloud = random_cloud(&mut rng, 6, 4, 1.0);
        let set = TargetSet::Cloud(cloud.clone());
        let x = vm::scale(&rng::normal_vec(&mut rng, 4), 2.0);
        let dist = set.distance(&x)?;
        if dist == 0.0 {
            continue;
        }
        let sigma = 0.7;
        let inner = crate::denoisers::ideal_denoise(&x, sigma, &cloud)?;
        let out = crate::denoisers::inject_error(
            &inner,
            0.1,
            dist,
            sigma,
            &ErrorDirection::RandomOrthogonal,
            &set,
            &x,
            &mut rng,
        )?;
        let shift = sigma * vm::dist(&out.epsilon, &inner.epsilon);
        worst_inj = worst_inj.max((shift - 0.1 * dist).abs() / (0.1 * dist));
    }
    run.check("injection-norm-exact", worst_inj <= 1e-12, format!("worst {worst_inj:e}"));
    Ok(())
}

fn corrupt_factor() -> f64 {
    std::env::var(CORRUPT_BETA_ENV)
        .ok()
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap_or(1.0)
}

fn verify_sampler(seed: u64, run: &mut SuiteRun) -> Result<()> {
    let mut rng = rng::child(seed, 303);
    let n = 16;
    let clean = NoiseSchedule::loglinear(2.0, 0.01, 40)?;
    // Fault-injection hook: the sampler steps along a possibly corrupted
    // schedule while the identity below still checks against the clean one.
    let factor = corrupt_factor();
    let stepped = if factor == 1.0 {
        clean.clone()
    } else {
        let mut sigmas = vec![clean.sigma(clean.num_steps())];
        for t in (1..=clean.num_steps()).rev() {
            let beta = (1.0 - clean.sigma(t - 1) / clean.sigma(t)) * factor;
            let prev = sigmas.last().unwrap() * (1.0 - beta);
            sigmas.push(prev);
        }
        NoiseSchedule::from_sigmas_desc(sigmas)?
    };

    // Zero-error descent identity: dist(x_t) = sqrt(n) sigma_t throughout.
    let cloud = random_cloud(&mut rng, 30, n, 1.0);
    let set = TargetSet::Cloud(cloud);
    let mut worst: f64 = 0.0;
    for trial in 0..20u64 {
        let mut trng = rng::child(seed, 9000 + trial);
        let x_top = samplers::init_x_top(
            2.0,
            n,
            &InitRule::ExactDistance { direction: None },
            &set,
            &mut trng,
        )?;
        let denoiser = Denoiser::ExactProjection(set.clone());
        let traj =
            samplers::run(&SamplerSpec::ddim(), &stepped, &denoiser, &set, x_top, &mut trng)?;
        for rec in &traj.records {
            let expect = (n as f64).sqrt() * clean.sigma(rec.t);
            worst = worst.max((rec.distance / expect - 1.0).abs());
        }
    }
    run.check("descent-identity", worst <= 1e-9, format!("worst {worst:e}"));

    // Error bracketing under injected error.
    let model_eta = 0.1;
    let env = clean.bound_envelope(model_eta)?;
    let mut ok_all = true;
    for trial in 0..10u64 {
        let mut trng = rng::child(seed, 9100 + trial);
        let x_top = samplers::init_x_top(
            2.0,
            n,
            &InitRule::ExactDistance { direction: None },
            &set,
            &mut trng,
        )?;
        let denoiser = Denoiser::error_injected(
            Denoiser::ExactProjection(set.clone()),
            model_eta,
            ErrorDirection::RandomOrthogonal,
            set.clone(),
        )?;
        let traj =
            samplers::run(&SamplerSpec::ddim(), &clean, &denoiser, &set, x_top, &mut trng)?;
        let top = traj.records[0].distance;
        for rec in &traj.records[1..] {
            let t = rec.t + 1;
            let r = rec.distance / top;
            if r < env.lower(t) * (1.0 - 1e-9) || r > env.upper(t) * (1.0 + 1e-9) {
                ok_all = false;
            }
        }
    }
    run.check("error-bracketing", ok_all, String::new());

    // Extrapolation with gamma = 1 is DDIM exactly.
    let cloud2 = random_cloud(&mut rng, 8, 6, 1.0);
    let set2 = TargetSet::Cloud(cloud2.clone());
    let sched2 = NoiseSchedule::loglinear(3.0, 0.05, 12)?;
    let denoiser2 = Denoiser::Ideal(cloud2);
    let mut identical = true;
    for trial in 0..5u64 {
        let mk = |spec: &SamplerSpec| -> Result<Vec<f64>> {
            let mut trng = rng::child(seed, 9200 + trial);
            let x_top =
                samplers::init_x_top(3.0, 6, &InitRule::Gaussian, &set2, &mut trng)?;
            Ok(samplers::run(spec, &sched2, &denoiser2, &set2, x_top, &mut trng)?.final_x0)
        };
        if mk(&SamplerSpec::ddim())? != mk(&SamplerSpec::gradient_estimation(1.0))? {
            identical = false;
        }
    }
    run.check("gamma-one-is-ddim", identical, String::new());

    // Evaluation accounting.
    let mut trng = rng::child(seed, 9300);
    let x_top = samplers::init_x_top(3.0, 6, &InitRule::Gaussian, &set2, &mut trng)?;
    let traj = samplers::run(
        &SamplerSpec::gradient_estimation(2.0),
        &sched2,
        &denoiser2,
        &set2,
        x_top,
        &mut trng,
    )?;
    run.check(
        "one-evaluation-per-step",
        traj.evaluations == sched2.num_steps(),
        format!("evals {}", traj.evaluations),
    );
    Ok(())
}

fn verify_schedule(seed: u64, run: &mut SuiteRun) -> Result<()> {
    let mut rng = rng::child(seed, 404);
    use rand::Rng;
    // Constant-step boundary sharpness.
    let mut ok_all = true;
    for _ in 0..50 {
        let eta = 0.02 + 0.6 * rng.gen::<f64>();
        let nu = 1.05 + 3.0 * rng.gen::<f64>();
        let n = 2 + (rng.gen::<f64>() * 60.0) as usize;
        let b = beta_star(eta, nu, n)?;
        let model = ErrorModel::new(eta, nu)?;
        let at = NoiseSchedule::constant_beta(10.0, b, n)?;
        let above = NoiseSchedule::constant_beta(10.0, b * (1.0 + 1e-3), n)?;
        if !at.is_admissible(&model, None).admissible {
            ok_all = false;
        }
        if above.is_admissible(&model, None).admissible {
            ok_all = false;
        }
    }
    run.check("beta-star-boundary", ok_all, String::new());

    // Limit convergence at N = 1e5.
    let mut worst: f64 = 0.0;
    for (eta, nu) in [(0.1, 2.0), (0.2, 4.0), (0.5, 1.5)] {
        let b = beta_star(eta, nu, 100_000)?;
        let (lim, _) = limit_ratios(eta, nu)?;
        let prod = (1.0 - b).powi(100_000);
        worst = worst.max((prod - lim).abs() / lim);
    }
    run.check("limit-convergence", worst <= 0.01, format!("worst {worst:e}"));
    Ok(())
}

fn verify_concentration(seed: u64, run: &mut SuiteRun) -> Result<()> {
    let n = 1000;
    let manifold = ManifoldSpec::circle(vec![0.0; n], 1.0)?;
    let sigma = 0.1 * manifold.reach() / (n as f64).sqrt();
    let p = ConcentrationParams { manifold, sigma, t: 3.0, trials: 10_000, seed };
    let r = analysis::concentration_experiment(&p)?;
    run.check(
        "concentration-hypothesis",
        r.hypothesis_met,
        r.skip_reason.clone().unwrap_or_default(),
    );
    run.check(
        "concentration-distance-bound",
        r.freq_distance >= 0.95,
        format!("freq {}", r.freq_distance),
    );
    run.check(
        "concentration-projection-bound",
        r.freq_proj_error >= 0.95,
        format!("freq {}", r.freq_proj_error),
    );
    Ok(())
}

fn verify_tail_bound(seed: u64, run: &mut SuiteRun) -> Result<()> {
    let mut rng = rng::child(seed, 505);
    let mut ok_all = true;
    let mut worst_resid: f64 = 0.0;
    let mut checked = 0usize;
    for _ in 0..20 {
        let cloud = random_cloud(&mut rng, 15, 4, 2.0);
        let x = vm::axpy(&cloud.points()[0], 0.5, &rng::unit_vec(&mut rng, 4));
        let sigma = 0.4;
        let eta = 0.05;
        let dist = cloud.distance(&x)?;
        if dist == 0.0 {
            continue;
        }
        let alpha = 1.0
            + (2.0 * sigma * sigma / (dist * dist))
                * (1.0 / std::f64::consts::E + (cloud.len() as f64 / eta).ln())
            + 0.5;
        let p = TailBoundParams { cloud, x, sigma, alpha, eta };
        let r = analysis::tail_bound_check(&p)?;
        if r.skipped {
            continue;
        }
        checked += 1;
        if !r.holds {
            ok_all = false;
        }
        worst_resid = worst_resid.max(r.decomposition_residual);
    }
    run.check("tail-bound-holds", ok_all && checked > 0, format!("checked {checked}"));
    run.check(
        "tail-decomposition-consistency",
        worst_resid <= 1e-12,
        format!("worst {worst_resid:e}"),
    );
    Ok(())
}

fn verify_coordinates(seed: u64, run: &mut SuiteRun) -> Result<()> {
    let mut rng = rng::child(seed, 606);
    use rand::Rng;
    let n = 8;
    let mut worst_ddim: f64 = 0.0;
    let mut worst_ddpm: f64 = 0.0;
    for _ in 0..100 {
        // Random strictly decreasing alphabar grid of 4..8 levels.
        let k = 4 + (rng.gen::<f64>() * 4.0) as usize;
        let mut abs_grid: Vec<f64> = (0..k).map(|_| 0.02 + 0.96 * rng.gen::<f64>()).collect();
        abs_grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
        abs_grid.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        if abs_grid.len() < 2 {
            continue;
        }
        let k = abs_grid.len() - 1;
        let sigmas: Vec<f64> = abs_grid
            .iter()
            .map(|&a| crate::schedules::alphabar_to_sigma(a).unwrap())
            .collect();
        // abs_grid is descending in index, so index k is the highest noise.
        let x_top = rng::normal_vec(&mut rng, n);
        let mut x = x_top.clone();
        let mut z = vm::scale(&x_top, abs_grid[k].sqrt());
        let mut xd = x_top.clone();
        let mut zd = z.clone();
        for t in (1..=k).rev() {
            let eps = rng::normal_vec(&mut rng, n);
            let w = rng::normal_vec(&mut rng, n);
            x = samplers::ddim_step(&x, sigmas[t], sigmas[t - 1], &eps)?;
            z = samplers::ddim_step_z(&z, abs_grid[t], abs_grid[t - 1], &eps)?;
            let xz = vm::scale(&z, 1.0 / abs_grid[t - 1].sqrt());
            let rel = vm::dist(&x, &xz) / vm::norm(&x).max(1e-300);
            worst_ddim = worst_ddim.max(rel);
            xd = samplers::ddpm_step(&xd, sigmas[t], sigmas[t - 1], &eps, &w)?;
            zd = samplers::ddpm_step_z(&zd, abs_grid[t], abs_grid[t - 1], &eps, &w)?;
            let xzd = vm::scale(&zd, 1.0 / abs_grid[t - 1].sqrt());
            let reld = vm::dist(&xd, &xzd) / vm::norm(&xd).max(1e-300);
            worst_ddpm = worst_ddpm.max(reld);
        }
    }
    run.check("coordinate-equivalence-ddim", worst_ddim <= 1e-9, format!("worst {worst_ddim:e}"));
    run.check("coordinate-equivalence-ddpm", worst_ddpm <= 1e-9, format!("worst {worst_ddpm:e}"));
    Ok(())
}

// Keep the suite list in sync with the CLI enum for help text.
pub fn suite_names() -> BTreeSet<&'static str> {
    ["geometry", "denoiser", "sampler", "schedule", "concentration", "tail-bound", "coordinates"]
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_cfg(name: &str, body: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("distdiff-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    const BASE_CFG: &str = r#"
seed = 7
trials = 4

[dataset]
kind = "gaussian-blobs"
dim = 4
count = 12
seed = 3

[schedule]
kind = "loglinear"
sigma_top = 2.0
sigma_bottom = 0.01
steps = 15

[sampler]
kind = "ddim"
init = "exact-distance"

[denoiser]
kind = "exact-projection"

[error_model]
eta = 0.1
nu = 2.0
"#;

    fn cli_with(cmd: Command, cfg: &Path, overrides: Vec<String>) -> Cli {
        Cli {
            cmd,
            config: Some(cfg.to_path_buf()),
            seed: None,
            out: None,
            threads: None,
            overrides,
        }
    }

    #[test]
    fn config_parses_and_overrides_apply() {
        let path = write_cfg("base.toml", BASE_CFG);
        let cfg = load_config(
            &path,
            &["schedule.steps=20".into(), "sampler.gamma=1.5".into()],
            Some(11),
        )
        .unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.schedule.steps, 20);
        assert_eq!(cfg.sampler.gamma, 1.5);
    }

    #[test]
    fn unknown_field_is_a_config_error() {
        let path = write_cfg("bad.toml", &BASE_CFG.replace("count = 12", "countt = 12"));
        assert!(load_config(&path, &[], None).is_err());
    }

    #[test]
    fn manifest_round_trips_as_config() {
        let path = write_cfg("rt.toml", BASE_CFG);
        let cfg = load_config(&path, &[], None).unwrap();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = DatasetConfig {
            kind: "two-clusters".into(),
            path: None,
            header: false,
            dim: 5,
            count: 20,
            seed: 9,
            side: 2,
            spacing: 1.0,
            blobs: 3,
            std: 0.1,
            spread: 4.0,
            radius: 1.0,
        };
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a.points(), b.points());
        assert_eq!(a.len(), 20);
    }

    #[test]
    fn grid_generator_matches_examples() {
        let cfg = DatasetConfig {
            kind: "grid".into(),
            path: None,
            header: false,
            dim: 2,
            count: 4,
            seed: 0,
            side: 2,
            spacing: 1.0,
            blobs: 1,
            std: 0.1,
            spread: 1.0,
            radius: 1.0,
        };
        let cloud = generate_dataset(&cfg).unwrap();
        assert_eq!(cloud.len(), 4);
        assert!((cloud.diameter() - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn circle_samples_sit_on_the_circle() {
        let cfg = DatasetConfig {
            kind: "circle-samples".into(),
            path: None,
            header: false,
            dim: 16,
            count: 64,
            seed: 5,
            side: 2,
            spacing: 1.0,
            blobs: 1,
            std: 0.1,
            spread: 1.0,
            radius: 1.5,
        };
        let cloud = generate_dataset(&cfg).unwrap();
        for p in cloud.points() {
            assert!((vm::norm(p) - 1.5).abs() < 1e-12);
            assert!(p[2..].iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn sample_command_descent_identity() {
        let path = write_cfg("sample.toml", BASE_CFG);
        let cli = cli_with(Command::Sample, &path, vec![]);
        let out = run_cli(&cli);
        assert_eq!(out.exit_code, 0, "{}", out.stdout);
        // Summary line: last field is the max |dist/(sqrt(n) sigma) - 1|.
        let line = out.stdout.lines().nth(1).unwrap();
        let dev: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(dev <= 1e-9, "deviation {dev}");
    }

    #[test]
    fn sample_is_thread_count_invariant() {
        let path = write_cfg("threads.toml", BASE_CFG);
        let mut a = cli_with(Command::Sample, &path, vec![]);
        a.threads = Some(2);
        let mut b = cli_with(Command::Sample, &path, vec![]);
        b.threads = Some(8);
        let ra = run_cli(&a);
        let rb = run_cli(&b);
        assert_eq!(ra.stdout, rb.stdout);
    }

    #[test]
    fn schedule_beta_star_prints_worked_example() {
        let path = write_cfg("bs.toml", BASE_CFG);
        let cli = cli_with(
            Command::Schedule { sub: ScheduleCmd::BetaStar },
            &path,
            vec!["schedule.steps=50".into()],
        );
        let out = run_cli(&cli);
        assert_eq!(out.exit_code, 0);
        assert!(out.stdout.contains("one_minus_beta_star 0.878"), "{}", out.stdout);
    }

    #[test]
    fn schedule_limits_match_powers_of_two() {
        let path = write_cfg("lim.toml", BASE_CFG);
        let cli = cli_with(Command::Schedule { sub: ScheduleCmd::Limits }, &path, vec![]);
        let out = run_cli(&cli);
        let sigma_line = out.stdout.lines().next().unwrap();
        let v: f64 = sigma_line.split(' ').nth(1).unwrap().parse().unwrap();
        assert!((v - 2f64.powi(-10)).abs() < 1e-18);
    }

    #[test]
    fn schedule_check_exit_codes() {
        let path = write_cfg("chk.toml", BASE_CFG);
        let admissible = cli_with(
            Command::Schedule { sub: ScheduleCmd::Check },
            &path,
            vec![
                "schedule.kind=\"constant-beta\"".into(),
                "schedule.beta=0.01".into(),
                "schedule.steps=10".into(),
            ],
        );
        assert_eq!(run_cli(&admissible).exit_code, 0);
        let inadmissible = cli_with(
            Command::Schedule { sub: ScheduleCmd::Check },
            &path,
            vec![
                "schedule.kind=\"constant-beta\"".into(),
                "schedule.beta=0.9".into(),
                "schedule.steps=10".into(),
            ],
        );
        assert_eq!(run_cli(&inadmissible).exit_code, 1);
    }

    #[test]
    fn missing_config_is_exit_2() {
        let cli = Cli {
            cmd: Command::Sample,
            config: None,
            seed: None,
            out: None,
            threads: None,
            overrides: vec![],
        };
        assert_eq!(run_cli(&cli).exit_code, 2);
    }

    #[test]
    fn verify_suites_pass_and_are_deterministic() {
        let mk = || {
            let cli = Cli {
                cmd: Command::Verify { suite: Suite::Sampler },
                config: None,
                seed: Some(4),
                out: None,
                threads: None,
                overrides: vec![],
            };
            run_cli(&cli)
        };
        let a = mk();
        let b = mk();
        assert_eq!(a.exit_code, 0, "{}", a.stdout);
        assert_eq!(a.stdout, b.stdout);
    }

    #[test]
    fn verify_coordinates_scoped() {
        let cli = Cli {
            cmd: Command::Verify { suite: Suite::Coordinates },
            config: None,
            seed: Some(0),
            out: None,
            threads: None,
            overrides: vec![],
        };
        let out = run_cli(&cli);
        assert_eq!(out.exit_code, 0, "{}", out.stdout);
        assert!(out.stdout.contains("coordinate-equivalence-ddim"));
        assert!(!out.stdout.contains("descent-identity"));
    }
}
