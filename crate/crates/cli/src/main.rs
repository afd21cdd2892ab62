use std::path::{Path, PathBuf};
use std::process::ExitCode;

use admission_cli::experiment::{write_json, write_table};
use admission_cli::output::{comparison_table, SOLVE_FILE, TABLE_FILE};
use admission_cli::{
    read_manifest, replay, resolve_instance, run_experiment, solve_exact, validate_dir,
    write_sweep, CliError, ExperimentSpec, Result, SolverKind, SweepParam, SweepSpec, ViSettings,
};
use admission_core::action_space::ActionSource;
use admission_core::adp::Hyperparams;
use admission_core::exact::{scientific, state_space_log10, StateSpace};
use admission_core::model::Model;
use admission_core::sim::SimulationPlan;
use clap::{Args, Parser, Subcommand};

/// Weekly elective-surgery admission control: exact and approximate
/// policies, Monte-Carlo evaluation and sensitivity sweeps.
#[derive(Parser)]
#[command(name = "admission", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Instance file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in instance: small-2spec, cabg or multi-9spec.
    #[arg(long, value_name = "NAME")]
    instance: Option<String>,
}

impl Source {
    fn resolve(&self) -> Result<(String, admission_core::model::ProblemConfig)> {
        resolve_instance(self.instance.as_deref(), self.config.as_deref())
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, default_value_t = 1000)]
    weeks: u32,
    /// Duration and length-of-stay scenarios per week.
    #[arg(long, default_value_t = 10_000)]
    scenarios: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl PlanArgs {
    fn plan(&self) -> SimulationPlan {
        SimulationPlan {
            weeks: self.weeks,
            scenarios: self.scenarios,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct AdpArgs {
    /// Trace decay.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Initial variance scale.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Steps per trajectory.
    #[arg(long, default_value_t = 1000)]
    traj_depth: u32,
    /// Relative change of the weights that ends a week's learning.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Trajectory cap per week.
    #[arg(long, default_value_t = 200)]
    max_trajectories: u32,
}

impl AdpArgs {
    fn hyper(&self) -> Hyperparams {
        Hyperparams {
            lambda: self.lambda,
            beta: self.beta,
            depth: self.traj_depth,
            epsilon: self.epsilon,
            max_trajectories: self.max_trajectories,
            source: ActionSource::Reduced,
        }
    }
}

#[derive(Args)]
struct ViArgs {
    /// Sup-norm change that ends value iteration [default: 1e-6/(1-γ)].
    #[arg(long)]
    stop_residual: Option<f64>,
    #[arg(long, default_value_t = ViSettings::default().max_iterations)]
    max_iterations: u64,
    /// Enumeration guard.
    #[arg(long, default_value_t = ViSettings::default().max_states)]
    max_states: u64,
}

impl ViArgs {
    fn settings(&self) -> ViSettings {
        ViSettings {
            stop_residual: self.stop_residual,
            max_iterations: self.max_iterations,
            max_states: self.max_states,
        }
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR", env = admission_cli::OUT_DIR_ENV, default_value = "admission-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance and print its dimensions.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Value iteration; writes the value/policy table and a summary.
    SolveExact {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "vi-star")]
        solver: SolverKind,
        #[command(flatten)]
        vi: ViArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simulate one policy.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "myopic")]
        solver: SolverKind,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        adp: AdpArgs,
        #[command(flatten)]
        vi: ViArgs,
        /// Value table cache for vi/vi-star: read if present, written otherwise.
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simulate several policies on shared arrivals.
    Compare {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "myopic,adp-star")]
        solver: Vec<SolverKind>,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        adp: AdpArgs,
        #[command(flatten)]
        vi: ViArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// One experiment per grid value and seed.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "myopic")]
        solver: Vec<SolverKind>,
        /// c_d, c_o, c_e, B_<j>, R, lambda or beta.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        adp: AdpArgs,
        #[command(flatten)]
        vi: ViArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Rerun the experiment recorded in a manifest.
    Replay {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn report_files(out: &Path, files: &[PathBuf]) -> Result<()> {
    for (path, rows) in validate_dir(out)? {
        println!("wrote {} ({rows} rows)", path.display());
    }
    for f in files.iter().filter(|f| f.extension().is_some_and(|e| e != "csv")) {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { source } => {
            let (label, cfg) = source.resolve()?;
            let model = Model::new(cfg)?;
            let log10 = state_space_log10(&model);
            println!("{label}: valid");
            println!("  specialties      {}", model.specialty_count());
            println!("  patient types    {}", model.type_count());
            println!("  arrival caps     {:?}", model.arrival_caps());
            println!("  state space      {} states", scientific(log10));
            let forced = (0..model.type_count())
                .filter(|&t| model.is_forced_by_cost(t))
                .count();
            println!("  cost-forced types {forced}");
            Ok(())
        }
        Command::SolveExact {
            source,
            solver,
            vi,
            out,
        } => {
            let (label, cfg) = source.resolve()?;
            let model = Model::new(cfg)?;
            let settings = vi.settings();
            // refuse before allocating anything
            StateSpace::new(&model, settings.max_states)?;
            let solved = solve_exact(&label, &model, solver, &settings)?;
            std::fs::create_dir_all(&out.out).map_err(|source| CliError::Io {
                path: out.out.clone(),
                source,
            })?;
            let table = out.out.join(TABLE_FILE);
            write_table(&table, &solved)?;
            let summary = out.out.join(SOLVE_FILE);
            write_json(&summary, &solved.summary)?;
            let s = &solved.summary;
            println!(
                "{label} {}: {} states, {} sweeps, residual {:.3e}{}, {:.1} s, A*/A {:.4}",
                solver.label(),
                s.states,
                s.iterations,
                s.residual,
                if s.converged { "" } else { " (not converged)" },
                s.wall_ms / 1e3,
                s.action_ratio
            );
            println!("wrote {}\nwrote {}", table.display(), summary.display());
            Ok(())
        }
        Command::Simulate {
            source,
            solver,
            plan,
            adp,
            vi,
            table,
            out,
        } => {
            let (instance, config) = source.resolve()?;
            let spec = ExperimentSpec {
                instance,
                config,
                solvers: vec![solver],
                plan: plan.plan(),
                hyper: adp.hyper(),
                vi: vi.settings(),
            };
            let (runs, files) = run_experiment(&spec, &out.out, table.as_deref())?;
            let reports: Vec<_> = runs.iter().map(|r| &r.report).collect();
            print!("{}", comparison_table(&reports));
            report_files(&out.out, &files)
        }
        Command::Compare {
            source,
            solver,
            plan,
            adp,
            vi,
            out,
        } => {
            let (instance, config) = source.resolve()?;
            let spec = ExperimentSpec {
                instance,
                config,
                solvers: solver,
                plan: plan.plan(),
                hyper: adp.hyper(),
                vi: vi.settings(),
            };
            let (runs, files) = run_experiment(&spec, &out.out, None)?;
            let reports: Vec<_> = runs.iter().map(|r| &r.report).collect();
            print!("{}", comparison_table(&reports));
            report_files(&out.out, &files)
        }
        Command::Sweep {
            source,
            solver,
            param,
            values,
            seeds,
            plan,
            adp,
            vi,
            out,
        } => {
            let (instance, config) = source.resolve()?;
            let spec = SweepSpec {
                parameter: param,
                values,
                seeds,
                base: ExperimentSpec {
                    instance,
                    config,
                    solvers: solver,
                    plan: plan.plan(),
                    hyper: adp.hyper(),
                    vi: vi.settings(),
                },
            };
            let (outcome, files) = write_sweep(&spec, &out.out)?;
            for r in outcome.summary.iter().filter(|r| r.metric == "cost") {
                println!(
                    "{} = {:<10} {:<9} c {:>10.1} ± {:.1} over {} seeds",
                    r.parameter, r.value, r.policy, r.mean, r.std, r.seeds
                );
            }
            if outcome.failures > 0 {
                eprintln!("{} grid rows failed; see the status column", outcome.failures);
            }
            report_files(&out.out, &files)
        }
        Command::Replay { manifest, out } => {
            let m = read_manifest(&manifest)?;
            let files = replay(&m, &out.out)?;
            report_files(&out.out, &files)
        }
    }
}
