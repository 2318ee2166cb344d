//! Walled 2D arena with a central box obstacle and a corner light source,
//! plus the differential-drive agent that navigates it.
//!
//! Geometry is in meters with the arena spanning [-1, 1] on both axes and
//! north along +y. Headings are radians, counterclockwise, zero pointing
//! east. One trial couples the network to the agent: sense, run a network
//! timestep, move, check for bumps, score.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::snn::{Action, Network, INPUT_COUNT};

/// Raw reading of a fully saturated proximity sensor.
const IR_RAW_MAX: f64 = 1023.0;
/// Raw light reading under full illumination.
const LIGHT_RAW_BRIGHT: f64 = 8.0;
/// Raw light reading in darkness.
const LIGHT_RAW_DARK: f64 = 500.0;
/// Fitness bonus for reaching the goal region.
const GOAL_BONUS: f64 = 2500.0;
/// Scale of the positional fitness term.
const FITNESS_SCALE: f64 = 1000.0;
/// Floor of the positional denominator; caps the term at 10000.
const DENOM_FLOOR: f64 = 0.1;
/// Distance the agent reverses after a bump.
const BUMP_REVERSE: f64 = 0.1;
/// Timestep penalty charged per bump.
const BUMP_PENALTY: u32 = 10;

/// Sensor bearings relative to the heading: left, front-left, right.
const SENSOR_BEARINGS: [f64; 3] = [
    std::f64::consts::FRAC_PI_2,
    std::f64::consts::PI / 18.0,
    -std::f64::consts::FRAC_PI_2,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Fixed reward in the upper-right, clean sensors, positional fitness.
    Static,
    /// Noisy sensors and slippage; the reward relocates to the upper-left
    /// once found, and fitness is the number of rewards collected.
    Dynamic,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Static => "static",
            Scenario::Dynamic => "dynamic",
        }
    }
}

/// World geometry and trial constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArenaConfig {
    /// Half-width of the square arena.
    pub half_extent: f64,
    /// Half-width of the central box obstacle.
    pub box_half: f64,
    /// Light source position.
    pub light: (f64, f64),
    /// Body radius of the agent.
    pub agent_radius: f64,
    /// Forward wheel speed, distance per timestep.
    pub forward_speed: f64,
    /// Start position; the agent always starts facing north.
    pub start: (f64, f64),
    /// Sample the start uniformly from the legal start region instead.
    pub start_jitter: bool,
    /// Goal line: the static goal is `x + y >= goal_line`, the relocated
    /// dynamic goal `y - x >= goal_line`.
    pub goal_line: f64,
    /// Range of the proximity sensors.
    pub ir_range: f64,
    /// Multiplicative proximity-sensor noise half-width.
    pub ir_noise: f64,
    /// Multiplicative light-sensor noise half-width.
    pub light_noise: f64,
    /// Probability per timestep that both wheels slip and produce nothing.
    pub slippage: f64,
    /// Trial length budget in timesteps.
    pub timestep_cap: u32,
    /// Distance at which the light intensity saturates.
    pub light_min_distance: f64,
    /// Intensity ceiling used for normalization.
    pub light_max_intensity: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            half_extent: 1.0,
            box_half: 0.4,
            light: (1.0, 1.0),
            agent_radius: 0.0275,
            forward_speed: 0.005,
            start: (-0.8, -0.8),
            start_jitter: false,
            goal_line: 1.6,
            ir_range: 0.1,
            ir_noise: 0.02,
            light_noise: 0.10,
            slippage: 0.1,
            timestep_cap: 4000,
            light_min_distance: 0.05,
            light_max_intensity: 400.0,
        }
    }
}

impl ArenaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.half_extent <= 0.0 || self.box_half <= 0.0 || self.box_half >= self.half_extent {
            return Err("box must fit inside the arena".into());
        }
        if self.agent_radius <= 0.0 || self.forward_speed <= 0.0 {
            return Err("agent radius and speed must be positive".into());
        }
        if self.start.0 + self.start.1 >= -1.5 && !self.start_jitter {
            return Err("start must satisfy x + y < -1.5".into());
        }
        if self.timestep_cap == 0 {
            return Err("timestep cap must be positive".into());
        }
        Ok(())
    }

    /// The eight obstacle segments: outer walls then box faces.
    fn segments(&self) -> [Segment; 8] {
        let h = self.half_extent;
        let b = self.box_half;
        [
            Segment::new((-h, -h), (h, -h)),
            Segment::new((h, -h), (h, h)),
            Segment::new((h, h), (-h, h)),
            Segment::new((-h, h), (-h, -h)),
            Segment::new((-b, -b), (b, -b)),
            Segment::new((b, -b), (b, b)),
            Segment::new((b, b), (-b, b)),
            Segment::new((-b, b), (-b, -b)),
        ]
    }
}

/// Agent position and heading. North is +y; a fresh trial faces north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl AgentPose {
    pub fn facing_north(x: f64, y: f64) -> Self {
        Self { x, y, heading: std::f64::consts::FRAC_PI_2 }
    }

    fn direction(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: (f64, f64),
    b: (f64, f64),
}

impl Segment {
    fn new(a: (f64, f64), b: (f64, f64)) -> Self {
        Self { a, b }
    }

    /// Distance along a ray from `origin` in `dir` to this segment, if hit.
    fn ray_distance(&self, origin: (f64, f64), dir: (f64, f64)) -> Option<f64> {
        let e = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let denom = dir.0 * e.1 - dir.1 * e.0;
        if denom.abs() < 1e-15 {
            return None;
        }
        let ao = (self.a.0 - origin.0, self.a.1 - origin.1);
        let t = (ao.0 * e.1 - ao.1 * e.0) / denom;
        let u = (ao.0 * dir.1 - ao.1 * dir.0) / denom;
        if t >= 0.0 && (0.0..=1.0).contains(&u) {
            Some(t)
        } else {
            None
        }
    }

    /// Closest point of the segment to `p` and its distance.
    fn closest(&self, p: (f64, f64)) -> ((f64, f64), f64) {
        let e = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len2 = e.0 * e.0 + e.1 * e.1;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.0 - self.a.0) * e.0 + (p.1 - self.a.1) * e.1) / len2).clamp(0.0, 1.0)
        };
        let c = (self.a.0 + t * e.0, self.a.1 + t * e.1);
        let d = ((p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)).sqrt();
        (c, d)
    }

    /// Whether the segment from `p` to `q` crosses this one.
    fn crossed_by(&self, p: (f64, f64), q: (f64, f64)) -> bool {
        let r = (q.0 - p.0, q.1 - p.1);
        let s = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let denom = r.0 * s.1 - r.1 * s.0;
        if denom.abs() < 1e-15 {
            return false;
        }
        let pa = (self.a.0 - p.0, self.a.1 - p.1);
        let t = (pa.0 * s.1 - pa.1 * s.0) / denom;
        let u = (pa.0 * r.1 - pa.1 * r.0) / denom;
        (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
    }
}

/// Point on the body rim where a sensor with the given relative bearing sits,
/// plus the absolute direction it faces.
fn sensor_frame(pose: &AgentPose, bearing: f64, cfg: &ArenaConfig) -> ((f64, f64), (f64, f64)) {
    let abs = pose.heading + bearing;
    let dir = (abs.cos(), abs.sin());
    let origin = (
        pose.x + cfg.agent_radius * dir.0,
        pose.y + cfg.agent_radius * dir.1,
    );
    (origin, dir)
}

/// Proximity reading along one bearing: raw in [0, 1023] and scaled in
/// [0, 1], linear in distance over the sensing range.
pub fn ir_reading<R: Rng>(
    pose: &AgentPose,
    bearing: f64,
    cfg: &ArenaConfig,
    noisy: bool,
    rng: &mut R,
) -> (f64, f64) {
    let (origin, dir) = sensor_frame(pose, bearing, cfg);
    let mut distance = f64::INFINITY;
    for seg in cfg.segments() {
        if let Some(t) = seg.ray_distance(origin, dir) {
            distance = distance.min(t);
        }
    }
    let mut scaled = (1.0 - distance / cfg.ir_range).max(0.0);
    if noisy {
        let factor = rng.random_range(1.0 - cfg.ir_noise..=1.0 + cfg.ir_noise);
        scaled = (scaled * factor).clamp(0.0, 1.0);
    }
    (IR_RAW_MAX * scaled, scaled)
}

/// Light reading along one bearing: raw in [8, 500] (bright to dark) and
/// scaled in [0, 1] (dark to bright). Inverse-square with cosine
/// directivity; the box casts a hard shadow and rearward bearings see
/// nothing.
pub fn light_reading<R: Rng>(
    pose: &AgentPose,
    bearing: f64,
    cfg: &ArenaConfig,
    noisy: bool,
    rng: &mut R,
) -> (f64, f64) {
    let (origin, dir) = sensor_frame(pose, bearing, cfg);
    let to_light = (cfg.light.0 - origin.0, cfg.light.1 - origin.1);
    let d = (to_light.0 * to_light.0 + to_light.1 * to_light.1).sqrt();

    let mut scaled = if d < 1e-9 {
        1.0
    } else {
        let cos = (dir.0 * to_light.0 + dir.1 * to_light.1) / d;
        let b = cfg.box_half;
        let box_faces = [
            Segment::new((-b, -b), (b, -b)),
            Segment::new((b, -b), (b, b)),
            Segment::new((b, b), (-b, b)),
            Segment::new((-b, b), (-b, -b)),
        ];
        let occluded = box_faces.iter().any(|f| f.crossed_by(origin, cfg.light));
        if cos <= 0.0 || occluded {
            0.0
        } else {
            let denom = (d * d).max(cfg.light_min_distance * cfg.light_min_distance);
            (cos / denom).clamp(0.0, cfg.light_max_intensity) / cfg.light_max_intensity
        }
    };
    if noisy {
        let factor = rng.random_range(1.0 - cfg.light_noise..=1.0 + cfg.light_noise);
        scaled = (scaled * factor).clamp(0.0, 1.0);
    }
    (LIGHT_RAW_DARK - (LIGHT_RAW_DARK - LIGHT_RAW_BRIGHT) * scaled, scaled)
}

/// Body-contact flags for the front-left and front-right quadrants.
pub fn contact_flags(pose: &AgentPose, cfg: &ArenaConfig) -> (bool, bool) {
    let mut left = false;
    let mut right = false;
    for seg in cfg.segments() {
        let (point, d) = seg.closest((pose.x, pose.y));
        if d > cfg.agent_radius + 1e-9 {
            continue;
        }
        let toward = (point.1 - pose.y).atan2(point.0 - pose.x);
        let rel = wrap_angle(toward - pose.heading);
        // the bumpers sit on the front half only; side-on grazing contact
        // (exactly perpendicular to the heading) does not press them
        if (0.0..std::f64::consts::FRAC_PI_2).contains(&rel) {
            left = true;
        }
        if (-std::f64::consts::FRAC_PI_2 < rel) && rel <= 0.0 {
            right = true;
        }
    }
    (left, right)
}

/// One full sensor sweep plus bump flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenseReading {
    /// Scaled values in network input order:
    /// light left, light front-left, light right, then the proximity
    /// sensors in the same bearing order.
    pub sensors: [f64; INPUT_COUNT],
    pub bump_left: bool,
    pub bump_right: bool,
}

/// Reads all six sensors. In noisy mode each sensor consumes exactly one
/// uniform draw, in input order, so trials replay bit-identically.
pub fn sense<R: Rng>(
    pose: &AgentPose,
    cfg: &ArenaConfig,
    noisy: bool,
    rng: &mut R,
) -> SenseReading {
    let mut sensors = [0.0; INPUT_COUNT];
    for (i, &bearing) in SENSOR_BEARINGS.iter().enumerate() {
        sensors[i] = light_reading(pose, bearing, cfg, noisy, rng).1;
    }
    for (i, &bearing) in SENSOR_BEARINGS.iter().enumerate() {
        sensors[3 + i] = ir_reading(pose, bearing, cfg, noisy, rng).1;
    }
    let (bump_left, bump_right) = contact_flags(pose, cfg);
    SenseReading { sensors, bump_left, bump_right }
}

/// Clamps a tentative position out of the box obstacle and inside the
/// walls, sliding along faces by cancelling only the penetrating axis.
fn resolve_collisions(prev: (f64, f64), mut p: (f64, f64), cfg: &ArenaConfig) -> (f64, f64) {
    let b = cfg.box_half + cfg.agent_radius;
    if p.0.abs() < b && p.1.abs() < b {
        let out_x = prev.0.abs() >= b;
        let out_y = prev.1.abs() >= b;
        if out_x {
            p.0 = b.copysign(prev.0);
        }
        if out_y {
            p.1 = b.copysign(prev.1);
        }
        if !out_x && !out_y {
            // degenerate: already overlapping; push out along the shallower axis
            if b - p.0.abs() <= b - p.1.abs() {
                p.0 = b.copysign(p.0);
            } else {
                p.1 = b.copysign(p.1);
            }
        }
    }
    let w = cfg.half_extent - cfg.agent_radius;
    (p.0.clamp(-w, w), p.1.clamp(-w, w))
}

/// Advances the pose by one action. Differential drive on a wheel base of
/// one body diameter; turns halve the inner wheel. In noisy mode one
/// uniform draw decides wheel slippage before anything moves.
pub fn apply_action<R: Rng>(
    pose: &AgentPose,
    action: Action,
    cfg: &ArenaConfig,
    noisy: bool,
    rng: &mut R,
) -> AgentPose {
    if noisy && rng.random_range(0.0..1.0) < cfg.slippage {
        return *pose;
    }
    let v = cfg.forward_speed;
    let (left, right) = match action {
        Action::Forward => (v, v),
        Action::TurnLeft => (v / 2.0, v),
        Action::TurnRight => (v, v / 2.0),
    };
    let speed = (left + right) / 2.0;
    let turn = (right - left) / (2.0 * cfg.agent_radius);
    let mid = pose.heading + turn / 2.0;
    let target = (pose.x + speed * mid.cos(), pose.y + speed * mid.sin());
    let (x, y) = resolve_collisions((pose.x, pose.y), target, cfg);
    AgentPose { x, y, heading: wrap_angle(pose.heading + turn) }
}

/// Backs the agent away from a bump and charges the timestep penalty.
pub fn bump_interrupt(pose: &AgentPose, st: u32, cfg: &ArenaConfig) -> (AgentPose, u32) {
    let (dx, dy) = pose.direction();
    let target = (pose.x - BUMP_REVERSE * dx, pose.y - BUMP_REVERSE * dy);
    let (x, y) = resolve_collisions((pose.x, pose.y), target, cfg);
    (AgentPose { x, y, heading: pose.heading }, st + BUMP_PENALTY)
}

/// Positional fitness at the end of a timestep. The positional term peaks
/// at 10000 thanks to the denominator floor, the elapsed timesteps are
/// subtracted, the goal bonus added, and the result clamped at zero.
pub fn fitness_step(pose: &AgentPose, st: u32, goal_reached: bool, cfg: &ArenaConfig) -> f64 {
    let denom = (cfg.goal_line - (pose.x + pose.y).abs()).max(DENOM_FLOOR);
    let bonus = if goal_reached { GOAL_BONUS } else { 0.0 };
    (FITNESS_SCALE / denom - f64::from(st) + bonus).max(0.0)
}

/// One logged timestep of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialLogRow {
    pub timestep: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub action: Action,
    pub fitness: f64,
    /// Positive plasticity events this timestep, per variable kind.
    pub stdp_pos: [u32; 3],
    /// Negative plasticity events this timestep, per variable kind.
    pub stdp_neg: [u32; 3],
    /// Mean enabled weight per variable kind.
    pub mean_w: [f64; 3],
}

/// Outcome of a single trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub fitness: f64,
    /// Timesteps consumed, bump penalties included.
    pub timesteps: u32,
    pub phase1_goal: bool,
    pub phase2_goal: bool,
    pub log: Vec<TrialLogRow>,
}

/// Runs one trial of a network in the arena.
///
/// The network is reset first (membranes, counters, variable weights). The
/// timestep loop is sense → network timestep → move → bump check → score.
/// The cap counts real control cycles; bump penalties inflate only the
/// timestep ledger `st` that fitness sees, so `st` can exceed the cap.
/// Static trials end at the goal or the cap, and keep the best positional
/// fitness. Dynamic trials run noisy, score one reward per goal region in
/// order, never reset the network between the two phases, and use the
/// reward count as fitness.
pub fn run_trial<R: Rng>(
    net: &mut Network,
    cfg: &ArenaConfig,
    scenario: Scenario,
    rng: &mut R,
    record_log: bool,
) -> TrialResult {
    net.reset_for_trial();
    let noisy = matches!(scenario, Scenario::Dynamic);

    let start = if cfg.start_jitter {
        let w = cfg.half_extent - cfg.agent_radius;
        loop {
            let x = rng.random_range(-w..=-0.5);
            let y = rng.random_range(-w..=-0.5);
            if x + y < -1.5 {
                break (x, y);
            }
        }
    } else {
        cfg.start
    };
    let mut pose = AgentPose::facing_north(start.0, start.1);

    let mut cycles: u32 = 0;
    let mut st: u32 = 0;
    let mut best = 0.0f64;
    let mut phase1 = false;
    let mut phase2 = false;
    let mut log = Vec::new();

    while cycles < cfg.timestep_cap {
        let reading = sense(&pose, cfg, noisy, rng);
        let action = net.run_timestep(&reading.sensors);
        pose = apply_action(&pose, action, cfg, noisy, rng);
        cycles += 1;
        st += 1;
        let (bl, br) = contact_flags(&pose, cfg);
        if bl || br {
            let (p, s) = bump_interrupt(&pose, st, cfg);
            pose = p;
            st = s;
        }

        let fitness_now;
        let done;
        match scenario {
            Scenario::Static => {
                let goal = pose.x + pose.y >= cfg.goal_line;
                fitness_now = fitness_step(&pose, st, goal, cfg);
                best = best.max(fitness_now);
                phase1 |= goal;
                done = goal;
            }
            Scenario::Dynamic => {
                if !phase1 && pose.x + pose.y >= cfg.goal_line {
                    phase1 = true;
                } else if phase1 && !phase2 && pose.y - pose.x >= cfg.goal_line {
                    phase2 = true;
                }
                fitness_now = f64::from(u8::from(phase1) + u8::from(phase2));
                done = phase2;
            }
        }

        if record_log {
            let counts = net.timestep_stdp_counts();
            log.push(TrialLogRow {
                timestep: st,
                x: pose.x,
                y: pose.y,
                heading: pose.heading,
                action,
                fitness: fitness_now,
                stdp_pos: [counts[0][0], counts[1][0], counts[2][0]],
                stdp_neg: [counts[0][1], counts[1][1], counts[2][1]],
                mean_w: net.mean_weight_by_kind(),
            });
        }
        if done {
            break;
        }
    }

    let fitness = match scenario {
        Scenario::Static => best,
        Scenario::Dynamic => f64::from(u8::from(phase1) + u8::from(phase2)),
    };
    TrialResult { fitness, timesteps: st, phase1_goal: phase1, phase2_goal: phase2, log }
}
