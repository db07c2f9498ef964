//! Command-line front end of the `ssp-lab` binary.
//!
//! Subcommands: `plan`, `run`, `sweep`, `lowerbound` and `validate`. Every
//! flag of a subcommand can also be supplied through a JSON object passed
//! with `--config FILE` (keys are the flag names without dashes, e.g.
//! `{"mdp": "toy.json", "K": 4096}`); flags given on the command line take
//! precedence over the file. `SSP_LAB_SEED` provides the default seed.
//!
//! Results go to stdout or to files; diagnostics go to stderr as JSON lines.
//! Exit codes are fixed for scripting:
//!
//! | code | meaning                                                  |
//! |------|----------------------------------------------------------|
//! | 0    | success                                                  |
//! | 1    | usage error or parameter violation                       |
//! | 2    | malformed or unreadable input file                       |
//! | 3    | the MDP has no proper policy                             |
//! | 4    | infeasible floor or a mirror-descent solver failure      |
//! | 5    | `validate`: at least one property check failed           |

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::adversaries::{build_lower_bound, AdversaryError, AdversarySource, AdversarySpec, LowerBoundMode, LowerBoundParams};
use crate::harness::{
    property_suite, run_experiment, sweep, write_regret_csv, ExperimentConfig, HarnessError, PropertyOptions,
    RegretReport, SweepConfig, LOW_POWER_SAMPLES,
};
use crate::learners::{Algorithm, LearnerConfig, LearnerError, DEFAULT_DELTA};
use crate::mdp::{compute_fast_policy, MdpError, SspMdp, Validation, DEFAULT_STEP_CAP};
use crate::omd::OmdError;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "SSP_LAB_SEED";

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const NO_PROPER_POLICY: u8 = 3;
    pub const SOLVER: u8 = 4;
    pub const VALIDATION: u8 = 5;
}

/// Errors of a CLI invocation, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("malformed config file {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error("{failed} of {total} property checks failed")]
    Validation { failed: usize, total: usize },
    #[error("{count} trial(s) stopped on an infeasible floor or a solver failure: {first}")]
    SolverFailures { count: usize, first: String },
    #[error("{count} trial(s) failed: {first}")]
    TrialFailures { count: usize, first: String },
}

fn mdp_code(e: &MdpError) -> u8 {
    match e {
        MdpError::Parse(_) | MdpError::Invalid(_) | MdpError::Io { .. } => exit::PARSE,
        MdpError::NoProperPolicy(_) => exit::NO_PROPER_POLICY,
        MdpError::ImproperPolicy(_) | MdpError::Numerical(_) => exit::USAGE,
    }
}

fn adversary_code(e: &AdversaryError) -> u8 {
    match e {
        AdversaryError::Mdp(e) => mdp_code(e),
        AdversaryError::Format { .. } => exit::PARSE,
        _ => exit::USAGE,
    }
}

fn learner_code(e: &LearnerError) -> u8 {
    match e {
        LearnerError::Mdp(e) => mdp_code(e),
        LearnerError::Solver(OmdError::InfeasibleFloor(_) | OmdError::SolverFailure { .. }) => exit::SOLVER,
        _ => exit::USAGE,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Output { .. } | CliError::TrialFailures { .. } => exit::USAGE,
            CliError::Config { .. } => exit::PARSE,
            CliError::Mdp(e) => mdp_code(e),
            CliError::Adversary(e) => adversary_code(e),
            CliError::Learner(e) => learner_code(e),
            CliError::Harness(e) => match e {
                HarnessError::Mdp(e) => mdp_code(e),
                HarnessError::Learner(e) => learner_code(e),
                HarnessError::Adversary(e) => adversary_code(e),
                _ => exit::USAGE,
            },
            CliError::Validation { .. } => exit::VALIDATION,
            CliError::SolverFailures { .. } => exit::SOLVER,
        }
    }
}

/// Online learning for adversarial stochastic shortest path problems.
#[derive(Debug, Parser)]
#[command(name = "ssp-lab", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the diameter, the fast policy and its hitting time as JSON.
    Plan(PlanArgs),
    /// Run one learner against one adversary; write a regret CSV and a JSON summary.
    Run(RunArgs),
    /// Run a grid over learners, episode counts and seeds; fit √K slopes.
    Sweep(SweepArgs),
    /// Build a lower-bound instance and its cost law.
    Lowerbound(LowerBoundArgs),
    /// Run the Monte-Carlo property suite; exit 5 if any check fails.
    Validate(ValidateArgs),
}

/// Argument structs that can be completed from a JSON config file.
trait Overlay: DeserializeOwned + Sized {
    fn config_path(&self) -> Option<&Path>;
    /// Keeps every field given on the command line, filling the rest from
    /// `file`.
    fn overlay(self, file: Self) -> Self;

    fn resolve(self) -> Result<Self, CliError> {
        let Some(path) = self.config_path() else { return Ok(self) };
        let config_error = |message: String| CliError::Config { path: path.display().to_string(), message };
        let text = fs::read_to_string(path).map_err(|e| config_error(e.to_string()))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| config_error(e.to_string()))?;
        Ok(self.overlay(file))
    }
}

macro_rules! overlay_fields {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl Overlay for $ty {
            fn config_path(&self) -> Option<&Path> {
                self.config.as_deref()
            }

            fn overlay(self, file: Self) -> Self {
                $ty { config: self.config, $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanArgs {
    /// MDP description (JSON).
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}
overlay_fields!(PlanArgs { mdp });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    /// MDP description (JSON).
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    /// Learner: oreps, adaptive, skewed, bandit or bandit-hp.
    #[arg(long)]
    pub algo: Option<String>,
    /// Number of episodes.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Upper bound on the optimal policy's expected hitting time (required
    /// except for `adaptive` and lower-bound adversaries, which supply it).
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// First-stage horizon of the layered learners (default ⌈K^{1/3}⌉).
    #[arg(long = "H1")]
    #[serde(rename = "H1")]
    pub h1: Option<usize>,
    /// Confidence level δ (default 0.1).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Base seed (default: $SSP_LAB_SEED, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of independent trials (default 1).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Cost generator: constant:V, random:SEED, alternating:SEED, file:PATH,
    /// cycle:PATH, lowerbound:PATH or follow-learner.
    #[arg(long)]
    pub adversary: Option<String>,
    /// Output directory for regret.csv and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for trials (default: one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Random feasible competitors per projection audit (0 disables audits).
    #[arg(long = "audit-samples")]
    #[serde(rename = "audit-samples")]
    pub audit_samples: Option<usize>,
    /// Maximum steps per episode before truncation.
    #[arg(long = "step-cap")]
    #[serde(rename = "step-cap")]
    pub step_cap: Option<u64>,
    /// Replace the learner's learning rate η (exploration only).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Replace the skew coefficient λ (exploration only).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Replace the bias coefficient γ of bandit-hp (exploration only).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}
overlay_fields!(RunArgs { mdp, algo, k, t, h1, delta, seed, trials, adversary, out, jobs, audit_samples, step_cap, eta, lambda, gamma });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    /// MDP description (JSON).
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    /// Comma-separated learners.
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<String>>,
    /// Comma-separated episode counts.
    #[arg(long = "K", value_delimiter = ',')]
    #[serde(rename = "K")]
    pub k: Option<Vec<usize>>,
    /// Comma-separated seeds (default: the single base seed).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Hitting-time bound shared by the learners that need one.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// First-stage horizon of the layered learners.
    #[arg(long = "H1")]
    #[serde(rename = "H1")]
    pub h1: Option<usize>,
    /// Confidence level δ (default 0.1).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Base seed used when --seeds is absent (default: $SSP_LAB_SEED, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per grid cell (default 1).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Cost generator (see `run --help`).
    #[arg(long)]
    pub adversary: Option<String>,
    /// Output directory for sweep.csv and sweep.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for trials (default: one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Random feasible competitors per projection audit (0 disables audits).
    #[arg(long = "audit-samples")]
    #[serde(rename = "audit-samples")]
    pub audit_samples: Option<usize>,
    /// Maximum steps per episode before truncation.
    #[arg(long = "step-cap")]
    #[serde(rename = "step-cap")]
    pub step_cap: Option<u64>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}
overlay_fields!(SweepArgs { mdp, algos, k, seeds, t, h1, delta, seed, trials, adversary, out, jobs, audit_samples, step_cap });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerBoundArgs {
    /// Expected time to the goal from the escape state.
    #[arg(long = "D")]
    #[serde(rename = "D")]
    pub d: Option<usize>,
    /// Expected time to the goal from a branch via its goal action.
    #[arg(long = "Tstar")]
    #[serde(rename = "Tstar")]
    pub t_star: Option<usize>,
    /// Number of episodes the gap is tuned for.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// full or bandit (default full).
    #[arg(long)]
    pub mode: Option<String>,
    /// Seed of the good-branch draw and the cost draws (default: $SSP_LAB_SEED, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of branches N ≥ 2 (default 2).
    #[arg(long = "N", conflicts_with = "s")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Number of states S = N + 2 (alternative to --N).
    #[arg(long = "S")]
    #[serde(rename = "S")]
    pub s: Option<usize>,
    /// Output directory for mdp.json and law.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}
overlay_fields!(LowerBoundArgs { d, t_star, k, mode, seed, n, s, out });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateArgs {
    /// MDP description (JSON); rows need not be stochastic.
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    /// Episodes per Monte-Carlo check (default 100000).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed of the checks (default: $SSP_LAB_SEED, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// First-stage horizon of the layered checks (default 4).
    #[arg(long = "H1")]
    #[serde(rename = "H1")]
    pub h1: Option<usize>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}
overlay_fields!(ValidateArgs { mdp, samples, seed, h1 });

/// Writes one JSON diagnostic line to stderr.
fn diagnostic(event: &str, mut fields: Value) {
    if let Value::Object(map) = &mut fields {
        map.insert("event".into(), Value::String(event.into()));
    }
    eprintln!("{fields}");
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required flag {flag}")))
}

/// The seed from the flag or config, else `SSP_LAB_SEED`, else 0.
fn resolve_seed(seed: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Output { path: path.display().to_string(), message: e.to_string() })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output { path: dir.display().to_string(), message: e.to_string() })
}

fn to_pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report types serialise")
}

/// Loads the adversary and checks that learners needing `T` can get one.
fn load_adversary(spec: &str, mdp: &SspMdp, algorithms: &[Algorithm], budget: Option<f64>) -> Result<(AdversarySpec, AdversarySource), CliError> {
    let spec: AdversarySpec = spec.parse()?;
    let source = AdversarySource::load(&spec, mdp)?;
    if budget.is_none() && source.budget_hint().is_none() {
        if let Some(alg) = algorithms.iter().find(|a| a.needs_budget()) {
            return Err(CliError::Usage(format!("--T is required for --algo {alg}")));
        }
    }
    Ok((spec, source))
}

/// Turns per-trial failures into the matching error after outputs are written.
fn check_failures(reports: &[&RegretReport]) -> Result<(), CliError> {
    let failures: Vec<_> = reports.iter().flat_map(|r| &r.failures).collect();
    let Some(first) = failures.first() else { return Ok(()) };
    for f in &failures {
        diagnostic("trial-failure", json!({"trial": f.trial, "solver_failure": f.solver_failure, "message": f.message}));
    }
    let count = failures.len();
    let first = first.message.clone();
    if failures.iter().any(|f| f.solver_failure) {
        Err(CliError::SolverFailures { count, first })
    } else {
        Err(CliError::TrialFailures { count, first })
    }
}

fn cmd_plan(args: PlanArgs) -> Result<(), CliError> {
    let path = require(args.mdp, "--mdp")?;
    let mdp = SspMdp::load(&path, Validation::Strict)?;
    let fast = compute_fast_policy(&mdp)?;
    let policy: serde_json::Map<String, Value> = mdp
        .states()
        .map(|s| (mdp.state_name(s).to_string(), Value::String(mdp.action_name(mdp.pair(s, fast.actions[s.0])).to_string())))
        .collect();
    let hitting: serde_json::Map<String, Value> =
        mdp.states().map(|s| (mdp.state_name(s).to_string(), json!(fast.hitting_times[s.0]))).collect();
    let out = json!({
        "mdp": path.display().to_string(),
        "states": mdp.num_states(),
        "state_action_pairs": mdp.num_pairs(),
        "avg_actions": mdp.avg_actions(),
        "diameter": fast.diameter,
        "fast_policy": policy,
        "fast_hitting_time": fast.initial_hitting_time(&mdp),
        "hitting_times": hitting,
    });
    println!("{}", to_pretty(&out));
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let path = require(args.mdp, "--mdp")?;
    let algorithm: Algorithm = require(args.algo, "--algo")?.parse().map_err(|e: LearnerError| CliError::Usage(e.to_string()))?;
    let episodes = require(args.k, "--K")?;
    let adversary = require(args.adversary, "--adversary")?;
    let out = require(args.out, "--out")?;
    let seed = resolve_seed(args.seed)?;
    let mdp = SspMdp::load(&path, Validation::Strict)?;
    let (spec, source) = load_adversary(&adversary, &mdp, &[algorithm], args.t)?;

    let mut learner = LearnerConfig::new(algorithm, episodes, args.t);
    learner.h1 = args.h1;
    learner.delta = args.delta.unwrap_or(DEFAULT_DELTA);
    learner.overrides.eta = args.eta;
    learner.overrides.lambda = args.lambda;
    learner.overrides.gamma = args.gamma;
    learner.audit.samples = args.audit_samples.unwrap_or(0);
    learner.audit.seed = seed;
    let mut config = ExperimentConfig::new(learner, spec.to_string(), args.trials.unwrap_or(1), seed);
    config.jobs = args.jobs;
    config.step_cap = args.step_cap.unwrap_or(DEFAULT_STEP_CAP);

    let report = run_experiment(&mdp, &source, &config)?;
    if let Some(p) = &report.parameters {
        for w in &p.warnings {
            diagnostic("parameter-warning", json!({"algorithm": algorithm.id(), "message": w}));
        }
    }
    create_dir(&out)?;
    let mut csv = Vec::new();
    write_regret_csv(&report, &mut csv)?;
    write_file(&out.join("regret.csv"), &csv)?;
    let mut summary = serde_json::to_value(report.summary()).expect("summary serialises");
    summary["mdp"] = json!(path.display().to_string());
    write_file(&out.join("summary.json"), to_pretty(&summary).as_bytes())?;
    diagnostic(
        "run-finished",
        json!({
            "algorithm": algorithm.id(),
            "K": episodes,
            "trials": config.trials,
            "failures": report.failures.len(),
            "mean_regret": report.mean_regret,
            "std_error": report.std_error,
            "max_kkt_residual": report.diagnostics.max_kkt_residual,
            "out": out.display().to_string(),
        }),
    );
    check_failures(&[&report])
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let path = require(args.mdp, "--mdp")?;
    let algorithms = require(args.algos, "--algos")?
        .iter()
        .map(|a| a.parse::<Algorithm>().map_err(|e| CliError::Usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let episodes = require(args.k, "--K")?;
    let adversary = require(args.adversary, "--adversary")?;
    let out = require(args.out, "--out")?;
    let seeds = match args.seeds {
        Some(s) => s,
        None => vec![resolve_seed(args.seed)?],
    };
    let mdp = SspMdp::load(&path, Validation::Strict)?;
    let (spec, source) = load_adversary(&adversary, &mdp, &algorithms, args.t)?;

    let first = *algorithms.first().ok_or_else(|| CliError::Usage("--algos is empty".into()))?;
    let mut learner = LearnerConfig::new(first, *episodes.first().unwrap_or(&1), args.t);
    learner.h1 = args.h1;
    learner.delta = args.delta.unwrap_or(DEFAULT_DELTA);
    learner.audit.samples = args.audit_samples.unwrap_or(0);
    let mut base = ExperimentConfig::new(learner, spec.to_string(), args.trials.unwrap_or(1), seeds[0]);
    base.jobs = args.jobs;
    base.step_cap = args.step_cap.unwrap_or(DEFAULT_STEP_CAP);
    let grid = SweepConfig { base, algorithms, episodes, seeds };
    let report = sweep(&mdp, &source, &grid)?;

    create_dir(&out)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algorithm", "K", "seed", "trials", "failures", "mean_regret", "std_regret", "std_error", "mean_learner_cost"])
        .map_err(HarnessError::from)?;
    for c in &report.cells {
        let r = &c.report;
        w.write_record([
            c.algorithm.id().to_string(),
            c.episodes.to_string(),
            c.seed.to_string(),
            r.trials.len().to_string(),
            r.failures.len().to_string(),
            r.mean_regret.to_string(),
            r.std_regret.to_string(),
            r.std_error.to_string(),
            r.mean_learner_cost.to_string(),
        ])
        .map_err(HarnessError::from)?;
    }
    let csv = w.into_inner().map_err(|e| CliError::Output { path: "sweep.csv".into(), message: e.to_string() })?;
    write_file(&out.join("sweep.csv"), &csv)?;
    let cells: Vec<Value> = report
        .cells
        .iter()
        .map(|c| json!({"algorithm": c.algorithm, "K": c.episodes, "seed": c.seed, "summary": c.report.summary()}))
        .collect();
    let summary = json!({"mdp": path.display().to_string(), "grid": grid, "slope_fits": report.slopes, "cells": cells});
    write_file(&out.join("sweep.json"), to_pretty(&summary).as_bytes())?;
    for fit in &report.slopes {
        diagnostic("slope-fit", json!({"algorithm": fit.algorithm, "points": fit.points, "slope": fit.slope}));
    }
    check_failures(&report.cells.iter().map(|c| &c.report).collect::<Vec<_>>())
}

fn cmd_lowerbound(args: LowerBoundArgs) -> Result<(), CliError> {
    let diameter = require(args.d, "--D")?;
    let t_star = require(args.t_star, "--Tstar")?;
    let episodes = require(args.k, "--K")?;
    let out = require(args.out, "--out")?;
    let mode: LowerBoundMode = args.mode.as_deref().unwrap_or("full").parse()?;
    let seed = resolve_seed(args.seed)?;
    let branches = match (args.n, args.s) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--N and --S are mutually exclusive".into())),
        (Some(n), None) => n,
        (None, Some(s)) => s.checked_sub(2).ok_or_else(|| CliError::Usage(format!("--S {s} must be at least 4")))?,
        (None, None) => 2,
    };
    let lb = build_lower_bound(LowerBoundParams { diameter, t_star, episodes, mode, branches, seed })?;
    create_dir(&out)?;
    let mdp_path = out.join("mdp.json");
    let law_path = out.join("law.json");
    write_file(&mdp_path, lb.mdp.to_json_string().as_bytes())?;
    write_file(&law_path, lb.law.to_json_string(&lb.mdp).as_bytes())?;
    let summary = json!({
        "D": diameter,
        "Tstar": t_star,
        "K": episodes,
        "mode": mode,
        "N": branches,
        "S": branches + 2,
        "alpha": lb.law.alpha,
        "epsilon": lb.law.epsilon,
        "good_index": lb.law.good_index,
        "mdp": mdp_path.display().to_string(),
        "law": law_path.display().to_string(),
        "adversary": format!("lowerbound:{}", law_path.display()),
    });
    println!("{}", to_pretty(&summary));
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let path = require(args.mdp, "--mdp")?;
    let mdp = SspMdp::load(&path, Validation::Lenient)?;
    let opts = PropertyOptions {
        samples: args.samples.unwrap_or(LOW_POWER_SAMPLES),
        seed: resolve_seed(args.seed)?,
        h1: args.h1.unwrap_or(PropertyOptions::default().h1),
        cost: None,
    };
    let ledger = property_suite(&mdp, &opts);
    for w in &ledger.warnings {
        diagnostic("low-power-warning", json!({"message": w}));
    }
    println!("{}", to_pretty(&ledger));
    let failed = ledger.checks.iter().filter(|c| !c.passed).count();
    for c in ledger.checks.iter().filter(|c| !c.passed) {
        diagnostic("check-failed", json!({"check": c.name, "statistic": c.statistic, "bound": c.bound, "margin": c.margin}));
    }
    if failed > 0 {
        return Err(CliError::Validation { failed, total: ledger.checks.len() });
    }
    Ok(())
}

/// Executes a parsed invocation.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan(a) => cmd_plan(a.resolve()?),
        Command::Run(a) => cmd_run(a.resolve()?),
        Command::Sweep(a) => cmd_sweep(a.resolve()?),
        Command::Lowerbound(a) => cmd_lowerbound(a.resolve()?),
        Command::Validate(a) => cmd_validate(a.resolve()?),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Help and version requests exit with 0.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            // Help and version text is the requested output, not a diagnostic.
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            diagnostic("error", json!({"exit_code": code, "message": e.to_string()}));
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, r#"{"mdp": "a.json", "K": 10, "T": 3.5, "algo": "oreps"}"#).unwrap();
        let cli = Cli::try_parse_from(["ssp-lab", "run", "--config", cfg.to_str().unwrap(), "--K", "20"]).unwrap();
        let Command::Run(args) = cli.command else { panic!("expected run") };
        let args = args.resolve().unwrap();
        assert_eq!(args.k, Some(20));
        assert_eq!(args.t, Some(3.5));
        assert_eq!(args.algo.as_deref(), Some("oreps"));
        assert_eq!(args.mdp, Some(PathBuf::from("a.json")));
    }

    #[test]
    fn unknown_config_keys_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, r#"{"mpd": "a.json"}"#).unwrap();
        let code = main_with_args(["ssp-lab", "plan", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, exit::PARSE);
    }

    #[test]
    fn unknown_flags_are_usage_errors() {
        assert_eq!(main_with_args(["ssp-lab", "plan", "--bogus", "1"]), exit::USAGE);
        assert_eq!(main_with_args(["ssp-lab", "--help"]), exit::SUCCESS);
    }

    #[test]
    fn n_and_s_are_exclusive() {
        assert!(Cli::try_parse_from(["ssp-lab", "lowerbound", "--N", "2", "--S", "4"]).is_err());
    }
}
