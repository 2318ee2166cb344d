//! Flat key=value run configuration.
//!
//! Config files are plain text: one `dotted.key=value` per line, `#`
//! comments, blank lines ignored. Keys mirror the parameter structs
//! (`snn.*`, `mem.*`, `arena.*`, `run.*`) and apply on top of a profile;
//! command-line flags win over the file.

use crate::harness::RunConfig;
use crate::{Error, Result};

/// Every recognized key with a short description, for help text.
pub const KEY_HELP: &[(&str, &str)] = &[
    ("run.population", "population size"),
    ("run.generations", "generations per repeat"),
    ("run.snapshot_interval", "generations between snapshots"),
    ("run.repeats", "independent repeats"),
    ("snn.a", "membrane drive constant"),
    ("snn.b", "membrane leak constant"),
    ("snn.c", "post-spike reset potential"),
    ("snn.c_ini", "trial-start membrane potential"),
    ("snn.y_thresh", "spike threshold"),
    ("snn.steps_per_timestep", "network steps per agent timestep (= window size)"),
    ("snn.last_spike_init", "last-spike counter value on firing"),
    ("snn.theta_s", "plasticity coincidence threshold"),
    ("mem.r_on", "low resistance bound"),
    ("mem.r_off", "high resistance bound"),
    ("mem.beta", "device constant"),
    ("mem.lifetime", "plasticity events for a full weight sweep"),
    ("arena.radius", "agent body radius"),
    ("arena.speed", "forward speed per timestep"),
    ("arena.start_x", "start x position"),
    ("arena.start_y", "start y position"),
    ("arena.start_jitter", "sample the start pose in the legal region (true/false)"),
    ("arena.goal_line", "goal threshold on x+y (and y-x after relocation)"),
    ("arena.ir_range", "proximity sensor range"),
    ("arena.ir_noise", "proximity noise half-width"),
    ("arena.light_noise", "light noise half-width"),
    ("arena.slippage", "wheel slippage probability per timestep"),
    ("arena.cap", "timestep budget per trial"),
    ("arena.light_saturation", "intensity ceiling of the light model"),
];

/// Applies one parsed key onto the config.
fn apply_key(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("invalid value {value:?} for {what}"));
    let f = || value.parse::<f64>().map_err(|_| bad(key));
    let u = || value.parse::<u32>().map_err(|_| bad(key));
    let b = || value.parse::<bool>().map_err(|_| bad(key));
    match key {
        "run.population" => cfg.population = u()? as usize,
        "run.generations" => cfg.generations = u()?,
        "run.snapshot_interval" => cfg.snapshot_interval = u()?,
        "run.repeats" => cfg.repeats = u()?,
        "snn.a" => cfg.net_params.drive = f()?,
        "snn.b" => cfg.net_params.leak = f()?,
        "snn.c" => cfg.net_params.reset_potential = f()?,
        "snn.c_ini" => cfg.net_params.initial_potential = f()?,
        "snn.y_thresh" => cfg.net_params.spike_threshold = f()?,
        "snn.steps_per_timestep" => cfg.net_params.steps_per_timestep = u()?,
        "snn.last_spike_init" => {
            cfg.net_params.last_spike_init = value.parse().map_err(|_| bad(key))?
        }
        "snn.theta_s" => cfg.net_params.stdp_threshold = value.parse().map_err(|_| bad(key))?,
        "mem.r_on" => cfg.mem_params.r_on = f()?,
        "mem.r_off" => cfg.mem_params.r_off = f()?,
        "mem.beta" => cfg.mem_params.beta = f()?,
        "mem.lifetime" => cfg.mem_params.mem_lifetime = u()?,
        "arena.radius" => cfg.arena.agent_radius = f()?,
        "arena.speed" => cfg.arena.forward_speed = f()?,
        "arena.start_x" => cfg.arena.start.0 = f()?,
        "arena.start_y" => cfg.arena.start.1 = f()?,
        "arena.start_jitter" => cfg.arena.start_jitter = b()?,
        "arena.goal_line" => cfg.arena.goal_line = f()?,
        "arena.ir_range" => cfg.arena.ir_range = f()?,
        "arena.ir_noise" => cfg.arena.ir_noise = f()?,
        "arena.light_noise" => cfg.arena.light_noise = f()?,
        "arena.slippage" => cfg.arena.slippage = f()?,
        "arena.cap" => cfg.arena.timestep_cap = u()?,
        "arena.light_saturation" => cfg.arena.light_max_intensity = f()?,
        other => return Err(Error::Config(format!("unknown config key {other:?}"))),
    }
    Ok(())
}

/// Applies a whole config document onto `cfg`, then re-validates it.
pub fn apply_config_text(cfg: &mut RunConfig, text: &str) -> Result<()> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
        })?;
        apply_key(cfg, key.trim(), value.trim())?;
    }
    cfg.validate()
}
