//! `memevo` — evolve spiking networks with memristive synapses on a 2D
//! navigation task, and analyse the artifacts.
//!
//! Every command is deterministic given `--seed`; `--jobs` only changes
//! wall-clock time, never output bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use memevo_core::arena::{run_trial, Scenario};
use memevo_core::config::{apply_config_text, KEY_HELP};
use memevo_core::evolution::SystemKind;
use memevo_core::harness::{
    census_table, characterize_csv, comparison_report, derive_seed, load_network_json,
    load_run_metrics, parse_trial_log_csv, run_experiment, stdp_trace, topology_census,
    trace_csv, trial_log_csv, write_atomic, Profile, RunConfig,
};
use memevo_core::synapse::{characterize, MemristorParams};

#[derive(Parser)]
#[command(
    name = "memevo",
    version,
    about = "Evolve spiking networks with memristive plastic synapses in a 2D arena",
    after_help = config_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn config_help() -> String {
    let mut s = String::from(
        "CONFIG KEYS (for --config FILE, one key=value per line, # comments):\n",
    );
    for (key, desc) in KEY_HELP {
        s.push_str(&format!("  {key:<26} {desc}\n"));
    }
    s.push_str(
        "\nARTIFACTS:\n  \
         snapshots.csv   repeat,generation,best_f,mean_f,neurons,connectivity_pct,mu,psi,omega,tau,solved\n  \
         metrics.csv     repeat,performance,high_fitness,neurons,connectivity_pct,solved,fully_solved,trials_to_second_reward\n  \
         best_trial.csv  timestep,x,y,heading,action,f,pos/neg stdp per kind,mean_w per kind\n",
    );
    s
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Hp,
    Peo,
    Lin,
    Ga,
    Het,
}

impl From<SystemArg> for SystemKind {
    fn from(v: SystemArg) -> Self {
        match v {
            SystemArg::Hp => SystemKind::Hp,
            SystemArg::Peo => SystemKind::Peo,
            SystemArg::Lin => SystemKind::Lin,
            SystemArg::Ga => SystemKind::Ga,
            SystemArg::Het => SystemKind::Het,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Static,
    Dynamic,
}

impl From<ScenarioArg> for Scenario {
    fn from(v: ScenarioArg) -> Self {
        match v {
            ScenarioArg::Static => Scenario::Static,
            ScenarioArg::Dynamic => Scenario::Dynamic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Desk,
}

#[derive(Args)]
struct RunArgs {
    /// Connection substrate to evolve.
    #[arg(long, value_enum)]
    system: SystemArg,
    /// Reward scenario.
    #[arg(long, value_enum, default_value = "static")]
    scenario: ScenarioArg,
    /// Named parameter bundle: paper (100x1000x30) or desk (40x300x10).
    #[arg(long, value_enum, default_value = "desk")]
    profile: ProfileArg,
    /// Master seed; repeats derive their own seeds from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $MEMEVO_OUT or ./runs, plus a run name).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for repeats.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    /// key=value config file applied over the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override: population size.
    #[arg(long)]
    population: Option<usize>,
    /// Override: generations per repeat.
    #[arg(long)]
    generations: Option<u32>,
    /// Override: generations between snapshots.
    #[arg(long)]
    snapshot_interval: Option<u32>,
    /// Override: number of repeats.
    #[arg(long)]
    repeats: Option<u32>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment and write its artifacts.
    Run(RunArgs),
    /// Sweep each device kind through a full positive and negative pass.
    Characterize {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tally a saved network's enabled connections by kind and placement.
    Census {
        /// Network JSON file (e.g. repeat_000/best_network.json).
        #[arg(long)]
        network: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smooth a trial log into per-kind moving averages.
    Trace {
        /// Trial log CSV (e.g. repeat_000/best_trial.csv).
        #[arg(long)]
        log: PathBuf,
        /// Moving-average window in timesteps.
        #[arg(long, default_value_t = 10)]
        window: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare finished runs metric by metric with t-tests.
    Compare {
        /// Two or more run directories.
        #[arg(long = "runs", num_args = 2.., required = true)]
        runs: Vec<PathBuf>,
    },
    /// Re-run one trial of a saved network and write its trajectory.
    Replay {
        /// Network JSON file.
        #[arg(long)]
        network: PathBuf,
        /// Scenario to replay under.
        #[arg(long, value_enum, default_value = "static")]
        scenario: ScenarioArg,
        /// Trial seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors that should exit with the usage code rather than the failure code.
fn is_usage_error(err: &anyhow::Error) -> bool {
    matches!(
        err.downcast_ref::<memevo_core::Error>(),
        Some(memevo_core::Error::Config(_)) | Some(memevo_core::Error::Schema(_))
    ) || err.is::<UsageError>()
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_usage_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Characterize { out } => cmd_characterize(&out),
        Command::Census { network, out } => cmd_census(&network, out.as_deref()),
        Command::Trace { log, window, out } => cmd_trace(&log, window, &out),
        Command::Compare { runs } => cmd_compare(&runs),
        Command::Replay { network, scenario, seed, out } => {
            cmd_replay(&network, scenario.into(), seed, &out)
        }
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let profile = match args.profile {
        ProfileArg::Paper => Profile::Paper,
        ProfileArg::Desk => Profile::Desk,
    };
    let system: SystemKind = args.system.into();
    let scenario: Scenario = args.scenario.into();
    let mut cfg = RunConfig::from_profile(profile, system, scenario, args.seed);
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        apply_config_text(&mut cfg, &text)?;
    }
    if let Some(v) = args.population {
        cfg.population = v;
    }
    if let Some(v) = args.generations {
        cfg.generations = v;
    }
    if let Some(v) = args.snapshot_interval {
        cfg.snapshot_interval = v;
    }
    if let Some(v) = args.repeats {
        cfg.repeats = v;
    }
    cfg.jobs = args.jobs;
    cfg.validate()?;

    let out = args.out.unwrap_or_else(|| {
        let root = std::env::var_os("MEMEVO_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(format!(
            "{}-{}-seed{}",
            system.label(),
            scenario.label(),
            args.seed
        ))
    });

    let metrics = run_experiment(&cfg, &out)?;
    let solved = metrics.iter().filter(|m| m.solved).count();
    let fully = metrics.iter().filter(|m| m.fully_solved).count();
    println!("run complete: {}", out.display());
    println!(
        "  repeats {}  solved {}/{}{}",
        cfg.repeats,
        solved,
        cfg.repeats,
        if matches!(scenario, Scenario::Dynamic) {
            format!("  both rewards {fully}/{}", cfg.repeats)
        } else {
            String::new()
        }
    );
    for m in &metrics {
        println!(
            "  repeat {:>2}: performance {:>4}  high fitness {:>8.1}",
            m.repeat, m.performance, m.high_fitness
        );
    }
    Ok(())
}

fn cmd_characterize(out: &Path) -> anyhow::Result<()> {
    let rows = characterize(&MemristorParams::default());
    write_atomic(out, &characterize_csv(&rows))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_census(network: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let net = load_network_json(
        &fs::read_to_string(network)
            .with_context(|| format!("reading {}", network.display()))
            .map_err(|e| UsageError(format!("{e:#}")))?,
    )?;
    let table = census_table(&topology_census(&net));
    match out {
        Some(path) => {
            write_atomic(path, &table)?;
            println!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn cmd_trace(log: &Path, window: usize, out: &Path) -> anyhow::Result<()> {
    if window == 0 {
        bail!(UsageError("window must be positive".into()));
    }
    let rows = parse_trial_log_csv(
        &fs::read_to_string(log)
            .with_context(|| format!("reading {}", log.display()))
            .map_err(|e| UsageError(format!("{e:#}")))?,
    )?;
    let trace = stdp_trace(&rows, window);
    write_atomic(out, &trace_csv(&trace))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_compare(runs: &[PathBuf]) -> anyhow::Result<()> {
    let mut loaded = Vec::new();
    for dir in runs {
        if !dir.is_dir() {
            bail!(UsageError(format!("no such run directory: {}", dir.display())));
        }
        loaded.push(load_run_metrics(dir).map_err(|e| UsageError(format!("{e:#}")))?);
    }
    print!("{}", comparison_report(&loaded)?);
    Ok(())
}

fn cmd_replay(network: &Path, scenario: Scenario, seed: u64, out: &Path) -> anyhow::Result<()> {
    let mut net = load_network_json(
        &fs::read_to_string(network)
            .with_context(|| format!("reading {}", network.display()))
            .map_err(|e| UsageError(format!("{e:#}")))?,
    )?;
    let cfg = memevo_core::arena::ArenaConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let result = run_trial(&mut net, &cfg, scenario, &mut rng, true);
    write_atomic(out, &trial_log_csv(&result.log))?;
    println!(
        "replayed {} timesteps, fitness {}, goal {}{}",
        result.timesteps,
        result.fitness,
        result.phase1_goal,
        if matches!(scenario, Scenario::Dynamic) {
            format!(", second reward {}", result.phase2_goal)
        } else {
            String::new()
        }
    );
    Ok(())
}
