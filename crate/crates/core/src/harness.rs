//! Experiment orchestration: repeats, snapshots, metrics, artifacts, and
//! the analysis helpers that read them back.
//!
//! A run executes `repeats` independent repeats of the evolutionary loop,
//! each seeded from the master seed by a documented split, and persists
//! everything needed to reproduce or compare runs:
//!
//! ```text
//! out/
//!   manifest.json            run parameters, seed, completion flag
//!   snapshots.csv            per-generation population statistics
//!   metrics.csv              one summary row per repeat
//!   repeat_000/
//!     final_population.json  all members plus generator state
//!     best_network.json      fittest genome of the final population
//!     best_trial.csv         trajectory log of that genome replayed
//! ```
//!
//! Repeats may run on any number of worker threads; artifacts are written
//! in repeat order after all workers finish, so output bytes never depend
//! on the parallelism degree.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{run_trial, ArenaConfig, Scenario, TrialLogRow, TrialResult};
use crate::evolution::{ga_cycle, EvalOutcome, Member, Population, SystemKind};
use crate::snn::{Action, Layer, Network, NetworkParams};
use crate::stats::{mean_sd, welch_t_test};
use crate::synapse::{ConnectionKind, CurveRow, MemristorParams};
use crate::{Error, Result};

/// Seed stream used when replaying the best network for its trajectory log.
const REPLAY_STREAM: u64 = 0x5245_504c_4159; // "REPLAY"

/// Derives a child seed from a master seed and a stream index.
///
/// This is the splitmix64 finalizer over `master ^ (stream * golden)`; it
/// is the documented, stable rule for repeat and replay seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named parameter bundles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full-scale protocol: population 100, 1000 generations, 30 repeats.
    Paper,
    /// Desk-scale: population 40, 300 generations, 10 repeats.
    Desk,
}

/// Everything a run needs. Profiles provide defaults; config files and
/// flags override them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemKind,
    pub scenario: Scenario,
    pub population: usize,
    pub generations: u32,
    pub snapshot_interval: u32,
    pub repeats: u32,
    pub seed: u64,
    /// Worker threads for repeats; never affects output bytes.
    #[serde(skip)]
    pub jobs: usize,
    pub net_params: NetworkParams,
    pub mem_params: MemristorParams,
    pub arena: ArenaConfig,
}

impl RunConfig {
    pub fn from_profile(
        profile: Profile,
        system: SystemKind,
        scenario: Scenario,
        seed: u64,
    ) -> Self {
        let (population, generations, repeats) = match profile {
            Profile::Paper => (100, 1000, 30),
            Profile::Desk => (40, 300, 10),
        };
        Self {
            system,
            scenario,
            population,
            generations,
            snapshot_interval: 20,
            repeats,
            seed,
            jobs: 1,
            net_params: NetworkParams::default(),
            mem_params: MemristorParams::default(),
            arena: ArenaConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("population must be at least 2".into()));
        }
        if self.snapshot_interval == 0 {
            return Err(Error::Config("snapshot interval must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        self.net_params.validate().map_err(Error::Config)?;
        self.mem_params.validate().map_err(Error::Config)?;
        self.arena.validate().map_err(Error::Config)?;
        Ok(())
    }
}

/// Population statistics captured at one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationSnapshot {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub mean_connected_neurons: f64,
    pub mean_enabled_pct: f64,
    pub mean_mutation_rate: f64,
    pub mean_node_event_rate: f64,
    pub mean_node_add_bias: f64,
    pub mean_toggle_rate: f64,
    /// Whether any network in this repeat has reached the goal so far.
    pub solved: bool,
}

impl GenerationSnapshot {
    pub fn capture(pop: &Population, generation: u32, solved: bool) -> Self {
        let n = pop.members.len() as f64;
        let mean = |f: &dyn Fn(&Member) -> f64| pop.members.iter().map(f).sum::<f64>() / n;
        Self {
            generation,
            best_fitness: pop.best().net.fitness,
            mean_fitness: pop.mean_fitness(),
            mean_connected_neurons: mean(&|m| m.net.connected_neuron_count() as f64),
            mean_enabled_pct: mean(&|m| 100.0 * m.net.enabled_fraction()),
            mean_mutation_rate: mean(&|m| m.net.mutation_rate),
            mean_node_event_rate: mean(&|m| m.net.node_event_rate),
            mean_node_add_bias: mean(&|m| m.net.node_add_bias),
            mean_toggle_rate: mean(&|m| m.net.toggle_rate),
            solved,
        }
    }
}

/// Summary of one finished repeat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatMetrics {
    pub repeat: u32,
    /// First generation in which any network reached the goal;
    /// `generations + 1` when none did.
    pub performance: u32,
    /// Fitness of the best network in the final population.
    pub high_fitness: f64,
    pub mean_connected_neurons: f64,
    pub mean_enabled_pct: f64,
    pub solved: bool,
    /// Dynamic scenario: both rewards collected at least once.
    pub fully_solved: bool,
    /// Dynamic scenario: trials evaluated before the second reward was
    /// first collected; `total evaluations + 1` when it never was.
    pub trials_to_second_reward: u32,
}

/// Everything produced by one repeat.
#[derive(Debug, Clone)]
pub struct RepeatResult {
    pub repeat: u32,
    pub seed: u64,
    pub snapshots: Vec<GenerationSnapshot>,
    pub metrics: RepeatMetrics,
    pub population: PopulationFile,
    pub best_network: Network,
    pub best_trial: Vec<TrialLogRow>,
}

/// On-disk form of a population, sufficient to resume evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationFile {
    pub schema: String,
    pub system: SystemKind,
    pub generation: u32,
    pub rng: ChaCha8Rng,
    pub members: Vec<Member>,
}

/// First generation at which the goal was reached, or the sentinel
/// `generations + 1` for a repeat that never solved.
pub fn performance_metric(first_solved: Option<u32>, generations: u32) -> u32 {
    first_solved.unwrap_or(generations + 1)
}

/// Runs one repeat of the evolutionary protocol.
pub fn run_repeat(cfg: &RunConfig, repeat: u32) -> RepeatResult {
    let seed = derive_seed(cfg.seed, u64::from(repeat));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop = Population::new(
        cfg.system,
        cfg.population,
        &cfg.net_params,
        &cfg.mem_params,
        &mut rng,
    );

    let mut evals: u32 = 0;
    let mut first_solved: Option<u32> = None;
    let mut first_full: Option<u32> = None;
    let mut trials_to_second: Option<u32> = None;

    // generation 0: evaluate the founders in member order
    for i in 0..pop.members.len() {
        let result = run_trial(
            &mut pop.members[i].net,
            &cfg.arena,
            cfg.scenario,
            &mut rng,
            false,
        );
        evals += 1;
        pop.members[i].net.fitness = result.fitness;
        if result.phase1_goal && first_solved.is_none() {
            first_solved = Some(0);
        }
        if result.phase2_goal {
            first_full.get_or_insert(0);
            trials_to_second.get_or_insert(evals);
        }
    }

    let mut snapshots = vec![GenerationSnapshot::capture(&pop, 0, first_solved.is_some())];
    for g in 1..=cfg.generations {
        let arena = &cfg.arena;
        let scenario = cfg.scenario;
        ga_cycle(&mut pop, &mut rng, |net, rng| {
            let result: TrialResult = run_trial(net, arena, scenario, rng, false);
            evals += 1;
            if result.phase1_goal && first_solved.is_none() {
                first_solved = Some(g);
            }
            if result.phase2_goal {
                first_full.get_or_insert(g);
                trials_to_second.get_or_insert(evals);
            }
            EvalOutcome {
                fitness: result.fitness,
                solved: result.phase1_goal,
                fully_solved: result.phase2_goal,
            }
        });
        if g % cfg.snapshot_interval == 0 || g == cfg.generations {
            snapshots.push(GenerationSnapshot::capture(&pop, g, first_solved.is_some()));
        }
    }

    let metrics = {
        let last = snapshots.last().expect("at least the founder snapshot");
        RepeatMetrics {
            repeat,
            performance: performance_metric(first_solved, cfg.generations),
            high_fitness: pop.best().net.fitness,
            mean_connected_neurons: last.mean_connected_neurons,
            mean_enabled_pct: last.mean_enabled_pct,
            solved: first_solved.is_some(),
            fully_solved: first_full.is_some(),
            trials_to_second_reward: trials_to_second.unwrap_or(evals + 1),
        }
    };

    let population = PopulationFile {
        schema: "memevo.population.v1".into(),
        system: cfg.system,
        generation: cfg.generations,
        rng: rng.clone(),
        members: pop.members.clone(),
    };

    let mut best_network = pop.best().net.clone();
    let mut replay_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, REPLAY_STREAM));
    let best_trial = run_trial(
        &mut best_network,
        &cfg.arena,
        cfg.scenario,
        &mut replay_rng,
        true,
    )
    .log;

    RepeatResult {
        repeat,
        seed,
        snapshots,
        metrics,
        population,
        best_network,
        best_trial,
    }
}

/// Runs all repeats on up to `cfg.jobs` worker threads. Results come back
/// in repeat order regardless of scheduling.
pub fn run_repeats(cfg: &RunConfig) -> Vec<RepeatResult> {
    let repeats = cfg.repeats as usize;
    let workers = cfg.jobs.max(1).min(repeats);
    if workers <= 1 {
        return (0..cfg.repeats).map(|r| run_repeat(cfg, r)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<RepeatResult>>> = Mutex::new(vec![None; repeats]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::Relaxed);
                if r >= repeats {
                    break;
                }
                let result = run_repeat(cfg, r as u32);
                slots.lock().expect("result mutex poisoned")[r] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("result mutex poisoned")
        .into_iter()
        .map(|r| r.expect("every repeat filled"))
        .collect()
}

/// Run manifest, written before and after the repeats so interrupted runs
/// are recognizable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub system: SystemKind,
    pub scenario: Scenario,
    pub seed: u64,
    pub population: usize,
    pub generations: u32,
    pub snapshot_interval: u32,
    pub repeats: u32,
    pub complete: bool,
    pub artifacts: Vec<String>,
}

impl Manifest {
    fn new(cfg: &RunConfig, complete: bool, artifacts: Vec<String>) -> Self {
        Self {
            schema: "memevo.manifest.v1".into(),
            system: cfg.system,
            scenario: cfg.scenario,
            seed: cfg.seed,
            population: cfg.population,
            generations: cfg.generations,
            snapshot_interval: cfg.snapshot_interval,
            repeats: cfg.repeats,
            complete,
            artifacts,
        }
    }
}

/// Writes a file atomically: the contents land under a temporary name and
/// are renamed into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn float(v: f64) -> String {
    // shortest round-trip formatting keeps artifacts byte-stable
    format!("{v}")
}

/// Renders the per-generation snapshot table for all repeats.
pub fn snapshots_csv(results: &[RepeatResult]) -> String {
    let mut out = String::from("# memevo.snapshots.v1\n");
    out.push_str(
        "repeat,generation,best_f,mean_f,neurons,connectivity_pct,mu,psi,omega,tau,solved\n",
    );
    for r in results {
        for s in &r.snapshots {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.repeat,
                s.generation,
                float(s.best_fitness),
                float(s.mean_fitness),
                float(s.mean_connected_neurons),
                float(s.mean_enabled_pct),
                float(s.mean_mutation_rate),
                float(s.mean_node_event_rate),
                float(s.mean_node_add_bias),
                float(s.mean_toggle_rate),
                u8::from(s.solved),
            ));
        }
    }
    out
}

/// Renders the one-row-per-repeat metric summary.
pub fn metrics_csv(results: &[RepeatResult]) -> String {
    let mut out = String::from("# memevo.metrics.v1\n");
    out.push_str(
        "repeat,performance,high_fitness,neurons,connectivity_pct,solved,fully_solved,trials_to_second_reward\n",
    );
    for r in results {
        let m = &r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            m.repeat,
            m.performance,
            float(m.high_fitness),
            float(m.mean_connected_neurons),
            float(m.mean_enabled_pct),
            u8::from(m.solved),
            u8::from(m.fully_solved),
            m.trials_to_second_reward,
        ));
    }
    out
}

/// Renders a trial trajectory log.
pub fn trial_log_csv(rows: &[TrialLogRow]) -> String {
    let mut out = String::from("# memevo.trial.v1\n");
    out.push_str(
        "timestep,x,y,heading,action,f,pos_stdp_hp,neg_stdp_hp,pos_stdp_peo,neg_stdp_peo,pos_stdp_lin,neg_stdp_lin,mean_w_hp,mean_w_peo,mean_w_lin\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.timestep,
            float(r.x),
            float(r.y),
            float(r.heading),
            r.action.label(),
            float(r.fitness),
            r.stdp_pos[0],
            r.stdp_neg[0],
            r.stdp_pos[1],
            r.stdp_neg[1],
            r.stdp_pos[2],
            r.stdp_neg[2],
            float(r.mean_w[0]),
            float(r.mean_w[1]),
            float(r.mean_w[2]),
        ));
    }
    out
}

/// Parses a trajectory log written by [`trial_log_csv`].
pub fn parse_trial_log_csv(text: &str) -> Result<Vec<TrialLogRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("timestep") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(Error::Schema(format!(
                "trial log line {}: expected 15 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let fval = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::Schema(format!("trial log line {}: bad float", lineno + 1)))
        };
        let uval = |i: usize| -> Result<u32> {
            fields[i]
                .parse()
                .map_err(|_| Error::Schema(format!("trial log line {}: bad count", lineno + 1)))
        };
        let action = match fields[4] {
            "forward" => Action::Forward,
            "left" => Action::TurnLeft,
            "right" => Action::TurnRight,
            other => {
                return Err(Error::Schema(format!(
                    "trial log line {}: unknown action {other:?}",
                    lineno + 1
                )))
            }
        };
        rows.push(TrialLogRow {
            timestep: uval(0)?,
            x: fval(1)?,
            y: fval(2)?,
            heading: fval(3)?,
            action,
            fitness: fval(5)?,
            stdp_pos: [uval(6)?, uval(8)?, uval(10)?],
            stdp_neg: [uval(7)?, uval(9)?, uval(11)?],
            mean_w: [fval(12)?, fval(13)?, fval(14)?],
        });
    }
    Ok(rows)
}

/// Renders the device characterization sweep.
pub fn characterize_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("# memevo.characterize.v1\n");
    out.push_str("kind,step,q,M,W\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.kind.label(),
            r.step,
            float(r.q),
            float(r.m),
            float(r.w),
        ));
    }
    out
}

/// Serializes a network genome with its schema tag.
pub fn network_json(net: &Network) -> Result<String> {
    #[derive(Serialize)]
    struct File<'a> {
        schema: &'a str,
        network: &'a Network,
    }
    Ok(serde_json::to_string_pretty(&File {
        schema: "memevo.network.v1",
        network: net,
    })?)
}

/// Loads a network genome saved by [`network_json`].
pub fn load_network_json(text: &str) -> Result<Network> {
    #[derive(Deserialize)]
    struct File {
        schema: String,
        network: Network,
    }
    let file: File = serde_json::from_str(text)?;
    if file.schema != "memevo.network.v1" {
        return Err(Error::Schema(format!(
            "expected memevo.network.v1, got {:?}",
            file.schema
        )));
    }
    file.network.validate().map_err(Error::Schema)?;
    Ok(file.network)
}

/// Executes a full experiment and writes every artifact under `out`.
pub fn run_experiment(cfg: &RunConfig, out: &Path) -> Result<Vec<RepeatMetrics>> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let manifest_path = out.join("manifest.json");
    write_atomic(
        &manifest_path,
        &serde_json::to_string_pretty(&Manifest::new(cfg, false, Vec::new()))?,
    )?;

    let results = run_repeats(cfg);

    let mut artifacts = vec!["snapshots.csv".to_string(), "metrics.csv".to_string()];
    write_atomic(&out.join("snapshots.csv"), &snapshots_csv(&results))?;
    write_atomic(&out.join("metrics.csv"), &metrics_csv(&results))?;
    for r in &results {
        let dir = out.join(format!("repeat_{:03}", r.repeat));
        fs::create_dir_all(&dir)?;
        let rel = |name: &str| format!("repeat_{:03}/{name}", r.repeat);
        write_atomic(
            &dir.join("final_population.json"),
            &serde_json::to_string(&r.population)?,
        )?;
        write_atomic(&dir.join("best_network.json"), &network_json(&r.best_network)?)?;
        write_atomic(&dir.join("best_trial.csv"), &trial_log_csv(&r.best_trial))?;
        artifacts.push(rel("final_population.json"));
        artifacts.push(rel("best_network.json"));
        artifacts.push(rel("best_trial.csv"));
    }
    write_atomic(
        &manifest_path,
        &serde_json::to_string_pretty(&Manifest::new(cfg, true, artifacts))?,
    )?;
    Ok(results.iter().map(|r| r.metrics).collect())
}

/// Per-kind enabled-connection tallies over a network's structure.
///
/// Kinds index in `ConnectionKind::VARIABLE` order with constants last;
/// layer pairs are input–hidden, hidden–hidden, hidden–output; input
/// modality follows the sensor order (light sensors feed inputs 0–2,
/// proximity sensors inputs 3–5).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TopologyCensus {
    pub by_layer: [[u32; 3]; 4],
    pub by_pre_polarity: [[u32; 2]; 4],
    pub by_post_polarity: [[u32; 2]; 4],
    pub by_input_modality: [[u32; 2]; 4],
}

impl TopologyCensus {
    pub fn total(&self) -> u32 {
        self.by_layer.iter().flatten().sum()
    }
}

fn kind_slot(kind: ConnectionKind) -> usize {
    kind.variable_index().unwrap_or(3)
}

/// Counts enabled connections by kind, placement, endpoint polarity, and
/// attached sensor modality.
pub fn topology_census(net: &Network) -> TopologyCensus {
    let mut census = TopologyCensus::default();
    for c in &net.connections {
        if !c.enabled {
            continue;
        }
        let k = kind_slot(c.kind);
        let pair = match (c.pre.layer, c.post.layer) {
            (Layer::Input, Layer::Hidden) => 0,
            (Layer::Hidden, Layer::Hidden) => 1,
            (Layer::Hidden, Layer::Output) => 2,
            other => unreachable!("illegal layer pair {other:?}"),
        };
        census.by_layer[k][pair] += 1;
        let pol = |p: crate::snn::Polarity| usize::from(p == crate::snn::Polarity::Inhibitory);
        census.by_pre_polarity[k][pol(net.neuron(c.pre).polarity)] += 1;
        census.by_post_polarity[k][pol(net.neuron(c.post).polarity)] += 1;
        if c.pre.layer == Layer::Input {
            // inputs 0..3 carry light sensors, 3..6 proximity sensors
            let modality = usize::from(c.pre.index >= 3);
            census.by_input_modality[k][modality] += 1;
        }
    }
    census
}

/// Renders the census as an aligned text table.
pub fn census_table(census: &TopologyCensus) -> String {
    let kinds = ["hp", "peo", "lin", "const"];
    let mut out = String::from("# memevo.census.v1\n");
    out.push_str(&format!(
        "{:<7}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}\n",
        "kind", "in-hid", "hid-hid", "hid-out", "pre-exc", "pre-inh", "post-exc", "post-inh",
        "light", "ir"
    ));
    for (k, label) in kinds.iter().enumerate() {
        out.push_str(&format!(
            "{:<7}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}\n",
            label,
            census.by_layer[k][0],
            census.by_layer[k][1],
            census.by_layer[k][2],
            census.by_pre_polarity[k][0],
            census.by_pre_polarity[k][1],
            census.by_post_polarity[k][0],
            census.by_post_polarity[k][1],
            census.by_input_modality[k][0],
            census.by_input_modality[k][1],
        ));
    }
    out.push_str(&format!("total enabled: {}\n", census.total()));
    out
}

/// One row of the smoothed per-kind activity trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub timestep: u32,
    pub mean_w: [f64; 3],
    pub pos: [f64; 3],
    pub neg: [f64; 3],
}

/// Moving average of per-kind weights and event counts over the previous
/// `window` timesteps (inclusive, truncated at the start of the log).
pub fn stdp_trace(rows: &[TrialLogRow], window: usize) -> Vec<TraceRow> {
    assert!(window > 0, "window must be positive");
    let mut out = Vec::with_capacity(rows.len());
    for t in 0..rows.len() {
        let lo = t.saturating_sub(window - 1);
        let span = &rows[lo..=t];
        let n = span.len() as f64;
        let mut row = TraceRow {
            timestep: rows[t].timestep,
            mean_w: [0.0; 3],
            pos: [0.0; 3],
            neg: [0.0; 3],
        };
        for k in 0..3 {
            row.mean_w[k] = span.iter().map(|r| r.mean_w[k]).sum::<f64>() / n;
            row.pos[k] = span.iter().map(|r| f64::from(r.stdp_pos[k])).sum::<f64>() / n;
            row.neg[k] = span.iter().map(|r| f64::from(r.stdp_neg[k])).sum::<f64>() / n;
        }
        out.push(row);
    }
    out
}

/// Renders the smoothed trace.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("# memevo.trace.v1\n");
    out.push_str(
        "timestep,mean_w_hp,mean_w_peo,mean_w_lin,pos_hp,pos_peo,pos_lin,neg_hp,neg_peo,neg_lin\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.timestep,
            float(r.mean_w[0]),
            float(r.mean_w[1]),
            float(r.mean_w[2]),
            float(r.pos[0]),
            float(r.pos[1]),
            float(r.pos[2]),
            float(r.neg[0]),
            float(r.neg[1]),
            float(r.neg[2]),
        ));
    }
    out
}

/// Metric samples loaded back from a finished run directory.
#[derive(Debug, Clone)]
pub struct RunMetricsFile {
    pub label: String,
    pub manifest: Manifest,
    pub performance: Vec<f64>,
    pub high_fitness: Vec<f64>,
    pub neurons: Vec<f64>,
    pub connectivity: Vec<f64>,
    pub trials_to_second: Vec<f64>,
}

/// Loads the manifest and metric table of a run directory.
pub fn load_run_metrics(dir: &Path) -> Result<RunMetricsFile> {
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let text = fs::read_to_string(dir.join("metrics.csv"))?;
    let mut file = RunMetricsFile {
        label: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string()),
        manifest,
        performance: Vec::new(),
        high_fitness: Vec::new(),
        neurons: Vec::new(),
        connectivity: Vec::new(),
        trials_to_second: Vec::new(),
    };
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("repeat") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Schema(format!(
                "metrics.csv: expected 8 fields, got {}",
                fields.len()
            )));
        }
        let f = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::Schema("metrics.csv: bad number".into()))
        };
        file.performance.push(f(1)?);
        file.high_fitness.push(f(2)?);
        file.neurons.push(f(3)?);
        file.connectivity.push(f(4)?);
        file.trials_to_second.push(f(7)?);
    }
    Ok(file)
}

/// Pairwise comparison report over run directories: per metric, the mean
/// (standard deviation) of each run and the two-sided p-value of the
/// unequal-variance t-test.
pub fn comparison_report(runs: &[RunMetricsFile]) -> Result<String> {
    if runs.len() < 2 {
        return Err(Error::Config("compare needs at least two runs".into()));
    }
    let scenario = runs[0].manifest.scenario;
    for r in runs {
        if r.manifest.scenario != scenario {
            return Err(Error::Config(format!(
                "scenario mismatch: {} is {:?}, {} is {:?}",
                runs[0].label, scenario, r.label, r.manifest.scenario
            )));
        }
        if !r.manifest.complete {
            return Err(Error::Config(format!("run {} is incomplete", r.label)));
        }
    }

    type MetricGetter = fn(&RunMetricsFile) -> &Vec<f64>;
    let metrics: [(&str, MetricGetter); 4] = [
        ("Performance", |r| &r.performance),
        ("High fitness", |r| &r.high_fitness),
        ("Neurons", |r| &r.neurons),
        ("Connectivity", |r| &r.connectivity),
    ];

    let mut out = String::from("# memevo.compare.v1\n");
    out.push_str(&format!("scenario: {}\n\n", scenario.label()));
    out.push_str(&format!("{:<24}", "run (system)"));
    for (name, _) in &metrics {
        out.push_str(&format!("{name:>22}"));
    }
    out.push('\n');
    for r in runs {
        out.push_str(&format!(
            "{:<24}",
            format!("{} ({})", r.label, r.manifest.system.label())
        ));
        for (_, get) in &metrics {
            let (m, sd) = mean_sd(get(r));
            out.push_str(&format!("{:>22}", format!("{m:.1} ({sd:.1})")));
        }
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&format!("{:<24}", "pair"));
    for (name, _) in &metrics {
        out.push_str(&format!("{:>22}", format!("p({name})")));
    }
    out.push('\n');
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            out.push_str(&format!(
                "{:<24}",
                format!("{} vs {}", runs[i].label, runs[j].label)
            ));
            for (_, get) in &metrics {
                let t = welch_t_test(get(&runs[i]), get(&runs[j]))?;
                out.push_str(&format!("{:>22}", format!("{:.4}", t.p)));
            }
            out.push('\n');
        }
    }
    Ok(out)
}
