use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use admission_core::action_space::ActionSource;
use admission_core::adp::Hyperparams;
use admission_core::exact::{
    decode_table, encode_table, sweep_action_totals, value_iteration, PolicyTable, ValueTable,
    ViOptions,
};
use admission_core::instances;
use admission_core::model::{Model, ProblemConfig};
use admission_core::sim::{
    run_simulation, AdpPolicy, MyopicPolicy, Policy, SimulationPlan, SimulationReport, TablePolicy,
};
use serde::{Deserialize, Serialize};

use crate::error::{io_at, CliError, Result};
use crate::output::{
    aggregate_rows, week_rows, write_csv, AggregateRow, AGGREGATE_FILE, AGGREGATE_HEADER,
    MANIFEST_FILE, SOLVE_FILE, WEEKS_FILE, WEEKS_HEADER,
};
use crate::sweep::{write_sweep, SweepSpec};

/// Policy families. The `-star` variants search the reduced action set.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Myopic,
    Vi,
    ViStar,
    Adp,
    AdpStar,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Myopic => "myopic",
            Self::Vi => "vi",
            Self::ViStar => "vi-star",
            Self::Adp => "adp",
            Self::AdpStar => "adp-star",
        }
    }

    pub fn source(self) -> ActionSource {
        match self {
            Self::Vi | Self::Adp => ActionSource::Full,
            _ => ActionSource::Reduced,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Self::Vi | Self::ViStar)
    }

    pub fn is_adp(self) -> bool {
        matches!(self, Self::Adp | Self::AdpStar)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViSettings {
    /// Defaults to `1e-6 / (1 - γ)`.
    pub stop_residual: Option<f64>,
    pub max_iterations: u64,
    pub max_states: u64,
}

impl Default for ViSettings {
    fn default() -> Self {
        let o = ViOptions::default();
        Self {
            stop_residual: o.stop_residual,
            max_iterations: o.max_iterations,
            max_states: o.max_states,
        }
    }
}

impl ViSettings {
    pub fn options(&self, source: ActionSource) -> ViOptions {
        ViOptions {
            source,
            stop_residual: self.stop_residual,
            max_iterations: self.max_iterations,
            max_states: self.max_states,
        }
    }
}

/// Reads and validates a TOML instance file.
pub fn load_config(path: &Path) -> Result<ProblemConfig> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    ProblemConfig::from_toml_str(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_config(path: &Path, config: &ProblemConfig) -> Result<()> {
    let text = config.to_toml_string()?;
    fs::write(path, text).map_err(io_at(path))
}

/// A built-in name or a config file, exactly one of them. Returns a label
/// for outputs together with the config.
pub fn resolve_instance(
    instance: Option<&str>,
    config: Option<&Path>,
) -> Result<(String, ProblemConfig)> {
    match (instance, config) {
        (Some(name), None) => Ok((name.to_string(), instances::builtin(name)?)),
        (None, Some(path)) => {
            let cfg = load_config(path)?;
            let label = if cfg.name.is_empty() {
                path.file_stem()
                    .map_or_else(|| "config".into(), |s| s.to_string_lossy().into_owned())
            } else {
                cfg.name.clone()
            };
            Ok((label, cfg))
        }
        (Some(_), Some(_)) => Err(CliError::Usage(
            "give either --instance or --config, not both".into(),
        )),
        (None, None) => Err(CliError::Usage("one of --instance or --config is required".into())),
    }
}

/// Everything needed to rerun a simulation or comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub instance: String,
    pub config: ProblemConfig,
    pub solvers: Vec<SolverKind>,
    pub plan: SimulationPlan,
    /// Used by the ADP solvers; the action source comes from the solver.
    pub hyper: Hyperparams,
    pub vi: ViSettings,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.plan.validate()?;
        if self.solvers.is_empty() {
            return Err(CliError::Usage("at least one solver is required".into()));
        }
        if self.solvers.iter().any(|s| s.is_adp()) {
            self.hyper.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub instance: String,
    pub solver: SolverKind,
    pub states: u64,
    pub iterations: u64,
    pub residual: f64,
    pub converged: bool,
    pub wall_ms: f64,
    /// `‖A*‖` over one sweep.
    pub evaluated_actions: f64,
    /// `‖A‖` over one sweep.
    pub feasible_actions: f64,
    pub action_ratio: f64,
}

pub struct Solved {
    pub values: ValueTable,
    pub policy: PolicyTable,
    pub summary: SolveSummary,
}

fn exact_only(solver: SolverKind) -> Result<()> {
    if solver.is_exact() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{} is not an exact solver; use vi or vi-star",
            solver.label()
        )))
    }
}

/// Value iteration plus the per-sweep action counts.
pub fn solve_exact(
    instance: &str,
    model: &Model,
    solver: SolverKind,
    vi: &ViSettings,
) -> Result<Solved> {
    exact_only(solver)?;
    let t0 = Instant::now();
    let (values, policy) = value_iteration(model, &vi.options(solver.source()))?;
    let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    let totals = sweep_action_totals(model, values.space(), solver.source());
    let summary = SolveSummary {
        instance: instance.to_string(),
        solver,
        states: values.space().len() as u64,
        iterations: values.iterations,
        residual: values.residual,
        converged: values.converged,
        wall_ms,
        evaluated_actions: totals.evaluated as f64,
        feasible_actions: totals.feasible as f64,
        action_ratio: totals.ratio(),
    };
    Ok(Solved {
        values,
        policy,
        summary,
    })
}

pub fn write_table(path: &Path, solved: &Solved) -> Result<()> {
    let bytes = encode_table(&solved.values, Some(&solved.policy))?;
    fs::write(path, bytes).map_err(io_at(path))
}

/// Loads a cached table and checks it belongs to `model`.
pub fn read_table(path: &Path, model: &Model) -> Result<(ValueTable, PolicyTable)> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    let d = decode_table(&bytes)?;
    if !d.values.matches(model) {
        return Err(CliError::Usage(format!(
            "{} was solved for a different instance",
            path.display()
        )));
    }
    let policy = d
        .policy
        .ok_or_else(|| CliError::Usage(format!("{} holds no policy", path.display())))?;
    Ok((d.values, policy))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_at(path))
}

/// One simulated policy.
pub struct RunOutput {
    pub solver: SolverKind,
    pub report: SimulationReport,
    pub solve: Option<SolveSummary>,
}

/// Builds the policy for `solver` and simulates it. Exact solvers read the
/// table at `table` when it exists and write it there after solving
/// otherwise.
pub fn run_solver(
    spec: &ExperimentSpec,
    solver: SolverKind,
    table: Option<&Path>,
) -> Result<RunOutput> {
    let model = Model::new(spec.config.clone())?;
    let mut solve = None;
    let mut policy: Box<dyn Policy> = match solver {
        SolverKind::Myopic => Box::new(MyopicPolicy),
        SolverKind::Vi | SolverKind::ViStar => {
            let source = solver.source();
            let (space, actions) = match table.filter(|p| p.exists()) {
                Some(p) => {
                    let (values, policy) = read_table(p, &model)?;
                    (values.space().clone(), policy)
                }
                None => {
                    let solved = solve_exact(&spec.instance, &model, solver, &spec.vi)?;
                    if let Some(p) = table {
                        write_table(p, &solved)?;
                    }
                    let space = solved.values.space().clone();
                    solve = Some(solved.summary);
                    (space, solved.policy)
                }
            };
            let totals = sweep_action_totals(&model, &space, source);
            Box::new(TablePolicy::new(solver.label(), actions, source).with_sweep_totals(totals))
        }
        SolverKind::Adp | SolverKind::AdpStar => {
            let hyper = Hyperparams {
                source: solver.source(),
                ..spec.hyper
            };
            Box::new(AdpPolicy::new(&model, hyper, spec.plan.seed)?)
        }
    };
    let mut report = run_simulation(&model, policy.as_mut(), &spec.plan)?;
    report.policy = solver.label().to_string();
    Ok(RunOutput {
        solver,
        report,
        solve,
    })
}

pub fn run_all(spec: &ExperimentSpec, table: Option<&Path>) -> Result<Vec<RunOutput>> {
    spec.validate()?;
    if table.is_some() && spec.solvers.iter().filter(|s| s.is_exact()).count() > 1 {
        return Err(CliError::Usage(
            "a cached table can serve only one exact solver per run".into(),
        ));
    }
    spec.solvers
        .iter()
        .map(|&s| run_solver(spec, s, table))
        .collect()
}

/// Aggregate rows of every run, in solver order.
pub fn aggregate_all(runs: &[RunOutput]) -> Vec<AggregateRow> {
    runs.iter().flat_map(|r| aggregate_rows(&r.report)).collect()
}

/// Runs the experiment and writes `weeks.csv`, `aggregate.csv`,
/// `manifest.json` and, after an exact solve, `solve.json` into `out`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out: &Path,
    table: Option<&Path>,
) -> Result<(Vec<RunOutput>, Vec<PathBuf>)> {
    let runs = run_all(spec, table)?;
    fs::create_dir_all(out).map_err(io_at(out))?;
    let mut files = Vec::new();
    let weeks: Vec<_> = runs.iter().flat_map(|r| week_rows(&r.report)).collect();
    let p = out.join(WEEKS_FILE);
    write_csv(&p, &WEEKS_HEADER, &weeks)?;
    files.push(p);
    let p = out.join(AGGREGATE_FILE);
    write_csv(&p, &AGGREGATE_HEADER, &aggregate_all(&runs))?;
    files.push(p);
    let solves: Vec<&SolveSummary> = runs.iter().filter_map(|r| r.solve.as_ref()).collect();
    if !solves.is_empty() {
        let p = out.join(SOLVE_FILE);
        write_json(&p, &solves)?;
        files.push(p);
    }
    let p = out.join(MANIFEST_FILE);
    write_json(&p, &Manifest::new(Run::Experiment(spec.clone())))?;
    files.push(p);
    Ok((runs, files))
}

pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "spec", rename_all = "kebab-case")]
pub enum Run {
    Experiment(ExperimentSpec),
    Sweep(SweepSpec),
}

/// The inputs of a run; replaying it rewrites identical CSV files apart
/// from the wall-time columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub core_version: String,
    pub run: Run,
}

impl Manifest {
    pub fn new(run: Run) -> Self {
        Self {
            format_version: MANIFEST_FORMAT,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: admission_core::VERSION.to_string(),
            run,
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format_version != MANIFEST_FORMAT {
        return Err(CliError::Usage(format!(
            "manifest format {} is not supported (expected {MANIFEST_FORMAT})",
            m.format_version
        )));
    }
    Ok(m)
}

/// Reruns a manifest into `out`.
pub fn replay(manifest: &Manifest, out: &Path) -> Result<Vec<PathBuf>> {
    match &manifest.run {
        Run::Experiment(spec) => Ok(run_experiment(spec, out, None)?.1),
        Run::Sweep(spec) => Ok(write_sweep(spec, out)?.1),
    }
}
