use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use quake_recovery::harness::{
    auc, emit_experiment, run_experiment, run_recovery, sample_case, sample_cases, Experiment,
    ExperimentConfig, HarnessError,
};
use quake_recovery::hazard::ComponentDamage;
use quake_recovery::oracle::check;
use quake_recovery::{RecoverySim, RepairModel};

#[derive(Parser)]
#[command(version, about = "Post-earthquake water network recovery planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated planner names (configured or built-in presets).
    #[arg(long, value_delimiter = ',')]
    planners: Vec<String>,
    /// Number of scenarios; overrides the configuration.
    #[arg(long)]
    scenarios: Option<usize>,
    /// Comma-separated crew counts; overrides the configuration.
    #[arg(long, value_delimiter = ',')]
    resources: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample damage scenarios and dump them as JSON.
    Scenario {
        #[command(flatten)]
        common: Common,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario under one planner and print the action trace.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Which scenario of the batch to run.
        #[arg(long, default_value_t = 0)]
        scenario_id: usize,
        /// Also write the trace as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment and write curves and summaries.
    Batch {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the tabular-MDP oracle checks.
    OracleCheck {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Also write the report as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn runtime(e: anyhow::Error) -> Failure {
    Failure::Runtime(e)
}

fn load(common: &Common) -> Result<Experiment, Failure> {
    let (mut config, base) = match &common.config {
        Some(path) => (
            Experiment::read_config(path)?,
            path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        ),
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(n) = common.scenarios {
        config.num_scenarios = n;
    }
    if !common.resources.is_empty() {
        config.resources = common.resources.clone();
    }
    if !common.planners.is_empty() {
        config.select_planners(&common.planners)?;
    }
    Ok(Experiment::load(config, &base)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime)
}

#[derive(Serialize)]
struct ScenarioDump {
    scenario_id: usize,
    seed: u64,
    num_damaged: usize,
    damaged: BTreeMap<String, ComponentDamage>,
}

fn scenario(common: &Common, out: Option<&Path>) -> Result<(), Failure> {
    let exp = load(common)?;
    let dumps: Vec<ScenarioDump> = sample_cases(&exp)?
        .into_iter()
        .map(|c| ScenarioDump {
            scenario_id: c.scenario_id,
            seed: c.seed,
            num_damaged: c.damage.num_damaged(),
            damaged: exp
                .network
                .components()
                .iter()
                .zip(&c.damage.components)
                .filter(|(_, d)| d.state.is_damaged())
                .map(|(comp, d)| (comp.id.clone(), *d))
                .collect(),
        })
        .collect();
    match out {
        Some(path) => write_json(path, &dumps),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(&dumps).expect("serializable")
            );
            Ok(())
        }
    }
}

fn plan(common: &Common, scenario_id: usize, out: Option<&Path>) -> Result<(), Failure> {
    let mut common = common.clone();
    if common.planners.is_empty() {
        common.planners = vec!["tea".into()];
    }
    let exp = load(&common)?;
    let planner = &exp.config.planners[0];
    let resources = exp.config.resources[0];
    let case = sample_case(&exp, scenario_id)?;
    let sim = RecoverySim::new(
        &exp.network,
        RepairModel::hazus(exp.hazard.pipe.days_per_break),
        resources,
    );
    let run = run_recovery(&sim, &case.damage, case.scenario_id, planner, case.seed).map_err(
        |source| HarnessError::Scenario {
            scenario_id,
            seed: case.seed,
            planner: planner.name.clone(),
            source,
        },
    )?;
    println!(
        "scenario {scenario_id} (seed {}), {} damaged, planner {}, {resources} crews",
        case.seed,
        case.damage.num_damaged(),
        planner.name
    );
    println!("day 0: {} served", run.curve.points[0].1);
    for s in &run.stages {
        let n = s.n.map_or("-".to_string(), |n| n.to_string());
        println!(
            "stage {:>3} day {:>9.3}  n {:>3}  simq {:>6}  assign [{}]  done [{}]  served {}",
            s.stage,
            s.elapsed_days,
            n,
            s.simq_calls,
            s.assigned.join(" "),
            s.completed.join(" "),
            s.served_population
        );
    }
    let end = run.curve.final_day();
    println!(
        "recovered at day {end:.3}, AUC {:.1} person-days",
        auc(&run.curve, end)
    );
    if let Some(path) = out {
        write_json(path, &run.stages)?;
    }
    Ok(())
}

fn batch(common: &Common, out: &Path) -> Result<(), Failure> {
    let exp = load(common)?;
    let results = run_experiment(&exp)?;
    emit_experiment(&results, out)?;
    for r in &results {
        println!(
            "M = {}: {} scenarios, horizon {:.2} days",
            r.resources,
            r.scenarios.len(),
            r.horizon_days
        );
        for p in &r.planners {
            println!(
                "  {:<12} AUC {:>14.1} ± {:<10.1} SimQ {}",
                p.name, p.auc_mean, p.auc_se, p.simq_total
            );
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn oracle_check(seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let reports = check::run_all(seed);
    for r in &reports {
        println!(
            "{} {}: {} ({:.2}s)",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail,
            r.elapsed.as_secs_f64()
        );
    }
    if let Some(path) = out {
        write_json(path, &reports)?;
    }
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!("oracle checks failed")))
    }
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    match command {
        Command::Scenario { common, out } => scenario(common, out.as_deref()),
        Command::Plan {
            common,
            scenario_id,
            out,
        } => plan(common, *scenario_id, out.as_deref()),
        Command::Batch { common, out } => batch(common, out),
        Command::OracleCheck { seed, out } => oracle_check(*seed, out.as_deref()),
    }
}

/// The error chain, skipping causes already quoted by their parent.
fn report(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg = format!("{msg}: {text}");
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(Failure::Config(anyhow!("--threads must be at least 1"))),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Failure::Runtime(e.into())),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {}", report(&e));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", report(&e));
            ExitCode::from(3)
        }
    }
}
