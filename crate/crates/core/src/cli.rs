//! Command-line front end: `plan`, `baseline`, `compare` and `sweep`.
//!
//! Exit codes: 0 success, 2 invalid input or flags, 3 a size or budget cap
//! was hit, 1 anything else. Output files are written to a temporary file in
//! the target directory and renamed into place, so a failed run leaves none.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::baseline::{plan_baseline, BaselinePlanner, BaselineTimings};
use crate::decomposition::{DecompositionError, DecompositionJson, SpannerJson};
use crate::mdp::SolveError;
use crate::modified_mdp::{
    max_index, plan_with_cache, GridDiagnostics, GridMode, PlanConfig, PlanError, Planner, StageTimings,
    DEFAULT_STATE_CAP,
};
use crate::oracle::{horizon_for_slack, truncation_slack, Oracle, OracleConfig, OracleError};
use crate::pomdp::{load_pomdp, BeliefState, LoadOptions, ModelError, PomdpModel};
use crate::SCHEMA_VERSION;

#[derive(Debug, Parser)]
#[command(name = "mapomdp", version, about = "Rank-based grid planning for small POMDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan on the coefficient grid of the rank-r basis.
    Plan(PlanArgs),
    /// Plan on the belief-simplex grid.
    Baseline(BaselineArgs),
    /// Run both planners and the oracle and report them side by side.
    Compare(CompareArgs),
    /// Plan at several meshes and emit a CSV of value against mesh.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridModeArg {
    Reachable,
    Full,
}

impl From<GridModeArg> for GridMode {
    fn from(m: GridModeArg) -> Self {
        match m {
            GridModeArg::Reachable => GridMode::Reachable,
            GridModeArg::Full => GridMode::Full,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Model file: Cassandra `.POMDP`, or `.json` in the canonical model format.
    pub model: PathBuf,
    /// Value-iteration tolerance on the greedy policy's loss.
    #[arg(long, default_value_t = 1e-4)]
    pub vi_tol: f64,
    /// Evaluate the policy with the exact finite-horizon oracle.
    #[arg(long)]
    pub oracle: bool,
    /// Truncation slack of the oracle; picks its horizon.
    #[arg(long, default_value_t = 1e-2)]
    pub oracle_slack: f64,
    /// Node-expansion budget of the oracle.
    #[arg(long, default_value_t = crate::oracle::DEFAULT_BUDGET)]
    pub oracle_budget: u64,
    /// Largest number of grid states to build before giving up.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,
    /// Seed for simulated rollouts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of simulated rollouts of the policy to report.
    #[arg(long, default_value_t = 0)]
    pub rollouts: usize,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    pub no_timings: bool,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target accuracy; the coefficient mesh is epsilon / rank.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Build only grid states reachable from the start, or the whole lattice.
    #[arg(long, value_enum, default_value_t = GridModeArg::Reachable)]
    pub grid_mode: GridModeArg,
    /// Write the policy table as JSON.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
    /// Directory for the binary cache of per-signal dynamics.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Simplex mesh; 1/delta must be an integer.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Write the policy table as JSON.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target accuracy; the coefficient mesh is epsilon / rank.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Simplex mesh of the baseline; 1/delta must be an integer.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Build only grid states reachable from the start, or the whole lattice.
    #[arg(long, value_enum, default_value_t = GridModeArg::Reachable)]
    pub grid_mode: GridModeArg,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated meshes to plan at.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.4, 0.2, 0.1])]
    pub epsilons: Vec<f64>,
    /// Build only grid states reachable from the start, or the whole lattice.
    #[arg(long, value_enum, default_value_t = GridModeArg::Reachable)]
    pub grid_mode: GridModeArg,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("load: {0}")]
    Load(#[from] ModelError),
    #[error("{stage}: {source}")]
    Plan {
        stage: &'static str,
        #[source]
        source: PlanError,
    },
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Load(ModelError::Io { .. }) => 1,
            CliError::Load(_) | CliError::Argument(_) => 2,
            CliError::Plan { source, .. } => match source {
                PlanError::Mesh(_) | PlanError::Delta(_) | PlanError::Solve(SolveError::Tolerance(_)) => 2,
                PlanError::StateCap { .. } => 3,
                _ => 1,
            },
            CliError::Oracle(OracleError::Budget { .. }) => 3,
            CliError::Oracle(OracleError::Slack { .. }) => 2,
            CliError::Write { .. } => 1,
        }
    }
}

fn stage_of(e: &PlanError) -> &'static str {
    match e {
        PlanError::Decomposition(DecompositionError::Dimension { .. }) => "discover_basis",
        PlanError::Decomposition(_) => "improve_to_spanner",
        PlanError::Cache(_) => "precompute_dynamics",
        PlanError::StateCap { .. } | PlanError::Mesh(_) | PlanError::Delta(_) => "build_grid",
        PlanError::Solve(_) => "solve",
    }
}

fn plan_err(source: PlanError) -> CliError {
    CliError::Plan {
        stage: stage_of(&source),
        source,
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelSummary {
    pub path: String,
    pub states: usize,
    pub actions: usize,
    pub observations: usize,
    pub rewards: usize,
    pub discount: f64,
    pub reward_values: Vec<f64>,
    pub reward_scale: f64,
    pub reward_offset: f64,
}

impl ModelSummary {
    fn of(path: &Path, m: &PomdpModel) -> Self {
        ModelSummary {
            path: path.display().to_string(),
            states: m.num_states(),
            actions: m.num_actions(),
            observations: m.num_observations(),
            rewards: m.num_rewards(),
            discount: m.discount(),
            reward_values: m.reward_values().to_vec(),
            reward_scale: m.reward_scale(),
            reward_offset: m.reward_offset(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PlannerReport {
    pub rank: usize,
    pub epsilon: f64,
    pub mesh: f64,
    pub grid_mode: GridMode,
    pub discovered_basis: DecompositionJson,
    pub spanner: SpannerJson,
    pub grid_size: usize,
    /// `(2⌊2r/ε⌋ + 1)^r`, absent when it overflows.
    pub full_lattice_size: Option<u64>,
    pub diagnostics: GridDiagnostics,
    pub value_at_initial: f64,
    pub bellman_residual: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineReport {
    pub delta: f64,
    pub grid_size: usize,
    /// Number of points of the full simplex lattice, absent when it overflows.
    pub full_lattice_size: Option<u64>,
    pub max_mass_defect: f64,
    pub value_at_initial: f64,
    pub bellman_residual: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BaselineTimings>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleReport {
    pub horizon: usize,
    pub slack: f64,
    pub optimal_value: f64,
    pub first_action: usize,
    pub first_action_name: String,
    pub expansions: u64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RolloutReport {
    pub count: usize,
    pub horizon: usize,
    pub seed: u64,
    pub mean_discounted_return: f64,
}

/// A one-sided check `measured ≤ bound + 2·slack`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub name: String,
    pub bound: f64,
    pub slack: f64,
    pub measured: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(name: &str, bound: f64, slack: f64, measured: f64) -> Self {
        Verdict {
            name: name.into(),
            bound,
            slack,
            measured,
            pass: measured <= bound + 2.0 * slack,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub model: ModelSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rollouts: Option<RolloutReport>,
    pub verdicts: Vec<Verdict>,
}

/// Loads a model by extension: `.json` as canonical JSON, anything else as Cassandra text.
pub fn load_model(path: &Path) -> Result<PomdpModel, ModelError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        PomdpModel::from_json_str(&text)
    } else {
        load_pomdp(path, LoadOptions::default())
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s.into_bytes()
}

fn emit(target: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match target {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn coefficient_lattice_size(epsilon: f64, rank: usize) -> Option<u64> {
    let side = 2 * max_index(epsilon, rank) as u64 + 1;
    side.checked_pow(rank as u32)
}

fn simplex_lattice_size(steps: u32, states: usize) -> Option<u64> {
    // C(steps + n - 1, n - 1)
    let k = states.saturating_sub(1) as u64;
    let mut c: u64 = 1;
    for i in 1..=k {
        c = c.checked_mul(steps as u64 + i)? / i;
    }
    Some(c)
}

fn check_common(c: &CommonArgs) -> Result<(), CliError> {
    if c.vi_tol.is_nan() || c.vi_tol <= 0.0 {
        return Err(CliError::Argument(format!("--vi-tol must be positive, got {}", c.vi_tol)));
    }
    if c.oracle_slack.is_nan() || c.oracle_slack <= 0.0 {
        return Err(CliError::Argument(format!(
            "--oracle-slack must be positive, got {}",
            c.oracle_slack
        )));
    }
    if c.state_cap == 0 {
        return Err(CliError::Argument("--state-cap must be positive".into()));
    }
    Ok(())
}

struct OracleRun<'m> {
    oracle: Oracle<'m>,
    report: OracleReport,
}

fn run_oracle<'m>(model: &'m PomdpModel, c: &CommonArgs) -> Result<OracleRun<'m>, CliError> {
    let horizon = horizon_for_slack(model.discount(), c.oracle_slack)?;
    let mut oracle = Oracle::new(
        model,
        OracleConfig {
            memoize: true,
            budget: c.oracle_budget,
        },
    );
    let (value, action) = oracle.exact_value(model.initial_belief(), horizon)?;
    Ok(OracleRun {
        report: OracleReport {
            horizon,
            slack: truncation_slack(model.discount(), horizon),
            optimal_value: value,
            first_action: action,
            first_action_name: model.actions()[action].clone(),
            expansions: oracle.expansions(),
        },
        oracle,
    })
}

fn rollouts<F>(model: &PomdpModel, c: &CommonArgs, policy: F) -> Result<Option<RolloutReport>, CliError>
where
    F: Fn(&BeliefState) -> usize,
{
    if c.rollouts == 0 {
        return Ok(None);
    }
    let horizon = horizon_for_slack(model.discount(), c.oracle_slack)? + 1;
    let gamma = model.discount();
    let total: f64 = (0..c.rollouts as u64)
        .map(|i| {
            model
                .sample_trajectory(model.initial_belief(), &policy, horizon, c.seed.wrapping_add(i))
                .iter()
                .enumerate()
                .map(|(t, s)| gamma.powi(t as i32) * s.reward)
                .sum::<f64>()
        })
        .sum();
    Ok(Some(RolloutReport {
        count: c.rollouts,
        horizon,
        seed: c.seed,
        mean_discounted_return: total / c.rollouts as f64,
    }))
}

fn planner_report(model: &PomdpModel, p: &Planner, epsilon: f64, timings: bool) -> PlannerReport {
    let r = p.spanner.rank();
    PlannerReport {
        rank: r,
        epsilon,
        mesh: p.mesh(),
        grid_mode: p.grid_mode,
        discovered_basis: p.discovered.to_json(model),
        spanner: p.spanner.to_json(model),
        grid_size: p.result.grid_size(),
        full_lattice_size: coefficient_lattice_size(epsilon, r),
        diagnostics: p.grid_diagnostics,
        value_at_initial: p.result.value_at_initial(),
        bellman_residual: p.result.bellman_residual,
        iterations: p.result.iterations,
        policy_value: None,
        gap: None,
        timings: timings.then_some(p.timings),
    }
}

fn baseline_report(model: &PomdpModel, b: &BaselinePlanner, delta: f64, timings: bool) -> BaselineReport {
    BaselineReport {
        delta,
        grid_size: b.result.grid_size(),
        full_lattice_size: simplex_lattice_size(b.steps, model.num_states()),
        max_mass_defect: b.max_mass_defect,
        value_at_initial: b.result.value_at_initial(),
        bellman_residual: b.result.bellman_residual,
        iterations: b.result.iterations,
        policy_value: None,
        gap: None,
        timings: timings.then_some(b.timings),
    }
}

/// Allowed oracle gap of the coefficient-grid policy.
pub fn planner_bound(epsilon: f64, discount: f64) -> f64 {
    epsilon / (1.0 - discount).powi(4)
}

/// Allowed oracle gap of the simplex-grid policy.
pub fn baseline_bound(delta: f64, discount: f64) -> f64 {
    2.0 * delta / (1.0 - discount).powi(3)
}

fn run_planner(model: &PomdpModel, c: &CommonArgs, epsilon: f64, mode: GridModeArg, cache: Option<&Path>) -> Result<Planner, CliError> {
    let mut cfg = PlanConfig::new(epsilon, c.vi_tol);
    cfg.grid.mode = mode.into();
    cfg.grid.state_cap = c.state_cap;
    plan_with_cache(model, cfg, cache).map_err(plan_err)
}

fn cmd_plan(a: &PlanArgs) -> Result<(), CliError> {
    let c = &a.common;
    check_common(c)?;
    let model = load_model(&c.model)?;
    let planner = run_planner(&model, c, a.epsilon, a.grid_mode, a.cache_dir.as_deref())?;
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: "plan".into(),
        model: ModelSummary::of(&c.model, &model),
        planner: Some(planner_report(&model, &planner, a.epsilon, !c.no_timings)),
        baseline: None,
        oracle: None,
        rollouts: rollouts(&model, c, |b| planner.act(b))?,
        verdicts: Vec::new(),
    };
    if c.oracle {
        let mut run = run_oracle(&model, c)?;
        let value = run
            .oracle
            .evaluate_policy(|b| planner.act(b), model.initial_belief(), run.report.horizon)?;
        let gap = run.report.optimal_value - value;
        let p = report.planner.as_mut().unwrap();
        p.policy_value = Some(value);
        p.gap = Some(gap);
        report.verdicts.push(Verdict::new(
            "plannerGap",
            planner_bound(a.epsilon, model.discount()),
            run.report.slack,
            gap,
        ));
        run.report.expansions = run.oracle.expansions();
        report.oracle = Some(run.report);
    }
    if let Some(path) = &a.policy_out {
        write_atomic(path, &to_json_bytes(&planner.result.to_json(model.actions())))?;
    }
    emit(c.json_out.as_deref(), &to_json_bytes(&report))
}

fn cmd_baseline(a: &BaselineArgs) -> Result<(), CliError> {
    let c = &a.common;
    check_common(c)?;
    let model = load_model(&c.model)?;
    let base = plan_baseline(&model, a.delta, c.vi_tol, Some(c.state_cap)).map_err(plan_err)?;
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: "baseline".into(),
        model: ModelSummary::of(&c.model, &model),
        planner: None,
        baseline: Some(baseline_report(&model, &base, a.delta, !c.no_timings)),
        oracle: None,
        rollouts: rollouts(&model, c, |b| base.act(b))?,
        verdicts: Vec::new(),
    };
    if c.oracle {
        let mut run = run_oracle(&model, c)?;
        let value = run
            .oracle
            .evaluate_policy(|b| base.act(b), model.initial_belief(), run.report.horizon)?;
        let gap = run.report.optimal_value - value;
        let b = report.baseline.as_mut().unwrap();
        b.policy_value = Some(value);
        b.gap = Some(gap);
        report.verdicts.push(Verdict::new(
            "baselineGap",
            baseline_bound(a.delta, model.discount()),
            run.report.slack,
            gap,
        ));
        run.report.expansions = run.oracle.expansions();
        report.oracle = Some(run.report);
    }
    if let Some(path) = &a.policy_out {
        write_atomic(path, &to_json_bytes(&base.result.to_json(model.actions())))?;
    }
    emit(c.json_out.as_deref(), &to_json_bytes(&report))
}

/// Runs both planners and the oracle; shared by the CLI and the tests.
pub fn compare(model: &PomdpModel, path: &Path, a: &CompareArgs) -> Result<RunReport, CliError> {
    let c = &a.common;
    check_common(c)?;
    let planner = run_planner(model, c, a.epsilon, a.grid_mode, None)?;
    let base = plan_baseline(model, a.delta, c.vi_tol, Some(c.state_cap)).map_err(plan_err)?;
    let mut run = run_oracle(model, c)?;
    let h = run.report.horizon;
    let b0 = model.initial_belief();
    let pv = run.oracle.evaluate_policy(|b| planner.act(b), b0, h)?;
    let bv = run.oracle.evaluate_policy(|b| base.act(b), b0, h)?;
    let opt = run.report.optimal_value;
    let mut pr = planner_report(model, &planner, a.epsilon, !c.no_timings);
    pr.policy_value = Some(pv);
    pr.gap = Some(opt - pv);
    let mut br = baseline_report(model, &base, a.delta, !c.no_timings);
    br.policy_value = Some(bv);
    br.gap = Some(opt - bv);
    let gamma = model.discount();
    let slack = run.report.slack;
    run.report.expansions = run.oracle.expansions();
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        command: "compare".into(),
        model: ModelSummary::of(path, model),
        verdicts: vec![
            Verdict::new("plannerGap", planner_bound(a.epsilon, gamma), slack, opt - pv),
            Verdict::new("baselineGap", baseline_bound(a.delta, gamma), slack, opt - bv),
        ],
        planner: Some(pr),
        baseline: Some(br),
        oracle: Some(run.report),
        rollouts: None,
    })
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let model = load_model(&a.common.model)?;
    let report = compare(&model, &a.common.model, a)?;
    let (p, b) = (report.planner.as_ref().unwrap(), report.baseline.as_ref().unwrap());
    eprintln!("{:<10} {:>10} {:>12} {:>12}", "planner", "grid", "value", "gap");
    eprintln!("{:<10} {:>10} {:>12.6} {:>12.6}", "rank", p.grid_size, p.policy_value.unwrap(), p.gap.unwrap());
    eprintln!("{:<10} {:>10} {:>12.6} {:>12.6}", "simplex", b.grid_size, b.policy_value.unwrap(), b.gap.unwrap());
    emit(a.common.json_out.as_deref(), &to_json_bytes(&report))
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let c = &a.common;
    check_common(c)?;
    if a.epsilons.is_empty() {
        return Err(CliError::Argument("--epsilons needs at least one value".into()));
    }
    let model = load_model(&c.model)?;
    let mut oracle_run = if c.oracle { Some(run_oracle(&model, c)?) } else { None };
    let mut csv = String::from("# epsilon,mesh,rank,grid_size,value_at_initial,policy_value,optimal_value,gap\n");
    for &eps in &a.epsilons {
        let p = run_planner(&model, c, eps, a.grid_mode, None)?;
        let (pv, opt) = match oracle_run.as_mut() {
            Some(run) => {
                let v = run
                    .oracle
                    .evaluate_policy(|b| p.act(b), model.initial_belief(), run.report.horizon)?;
                (v, run.report.optimal_value)
            }
            None => (f64::NAN, f64::NAN),
        };
        writeln!(
            csv,
            "{eps},{},{},{},{},{pv},{opt},{}",
            p.mesh(),
            p.spanner.rank(),
            p.result.grid_size(),
            p.result.value_at_initial(),
            opt - pv
        )
        .unwrap();
    }
    emit(a.csv_out.as_deref(), csv.as_bytes())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
