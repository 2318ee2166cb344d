//! Leaky integrate-and-fire network engine.
//!
//! A network is three layers of neurons joined by directed connections.
//! Sensor currents drive the input layer; spikes propagate input → hidden →
//! output within a step, except hidden → hidden traffic, which is delayed by
//! the index gap between sender and receiver. Twenty-one steps make one
//! agent timestep, at the end of which the two output spike windows are
//! classified and decoded into a motor action.

use serde::{Deserialize, Serialize};

use crate::synapse::{
    self, Connection, ConnectionKind, MemristorParams, StdpPolarity,
};

/// Number of sensor-driven input neurons.
pub const INPUT_COUNT: usize = 6;
/// Number of motor output neurons.
pub const OUTPUT_COUNT: usize = 2;
/// Hidden-layer size of a freshly created network.
pub const INITIAL_HIDDEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Input,
    Hidden,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Excitatory,
    Inhibitory,
}

impl Polarity {
    fn sign(self) -> f64 {
        match self {
            Polarity::Excitatory => 1.0,
            Polarity::Inhibitory => -1.0,
        }
    }
}

/// Address of a neuron: its layer and position within that layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeuronRef {
    pub layer: Layer,
    pub index: usize,
}

impl NeuronRef {
    pub fn input(index: usize) -> Self {
        Self { layer: Layer::Input, index }
    }
    pub fn hidden(index: usize) -> Self {
        Self { layer: Layer::Hidden, index }
    }
    pub fn output(index: usize) -> Self {
        Self { layer: Layer::Output, index }
    }
}

/// One neuron: its genome polarity plus the runtime membrane state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub polarity: Polarity,
    /// Membrane potential; non-negative.
    #[serde(skip)]
    pub y: f64,
    /// Last-spike counter, counting down from `last_spike_init`.
    #[serde(skip)]
    pub ls: u8,
}

impl NeuronState {
    pub fn new(polarity: Polarity) -> Self {
        Self { polarity, y: 0.0, ls: 0 }
    }
}

/// Membrane and plasticity constants shared by every neuron of a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Constant excitation added every step.
    pub drive: f64,
    /// Proportional decay per step.
    pub leak: f64,
    /// Potential after a spike.
    pub reset_potential: f64,
    /// Potential at trial start.
    pub initial_potential: f64,
    /// Firing threshold.
    pub spike_threshold: f64,
    /// Steps per agent timestep; also the output-window size.
    pub steps_per_timestep: u32,
    /// Value a last-spike counter is set to when its neuron fires.
    pub last_spike_init: u8,
    /// Counter sum that must be exceeded for a plasticity event.
    pub stdp_threshold: u8,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            drive: 0.3,
            leak: 0.05,
            reset_potential: 0.0,
            initial_potential: 0.5,
            spike_threshold: 1.0,
            steps_per_timestep: 21,
            last_spike_init: 3,
            stdp_threshold: 4,
        }
    }
}

impl NetworkParams {
    /// Output-window size; equal to the steps per timestep by construction.
    pub fn window_size(&self) -> u32 {
        self.steps_per_timestep
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.drive <= 0.0 || self.leak <= 0.0 || self.spike_threshold <= 0.0 {
            return Err("drive, leak and spike_threshold must be positive".into());
        }
        if self.reset_potential < 0.0 || self.initial_potential < 0.0 {
            return Err("potentials must be non-negative".into());
        }
        if self.steps_per_timestep == 0 {
            return Err("steps_per_timestep must be at least 1".into());
        }
        Ok(())
    }
}

/// One Euler update of a membrane potential. Returns the new potential and
/// whether the neuron fired. The potential is clamped at zero before the
/// threshold test, and resets after a spike.
pub fn integrate_membrane(y: f64, input: f64, p: &NetworkParams) -> (f64, bool) {
    let mut v = y + input + p.drive - p.leak * y;
    if v < 0.0 {
        v = 0.0;
    }
    if v > p.spike_threshold {
        (p.reset_potential, true)
    } else {
        (v, false)
    }
}

/// Steps a spike spends in flight on a connection.
///
/// Only hidden → hidden edges have latency: the gap between the sender and
/// receiver indices. Those edges must run from higher to lower index, which
/// keeps the hidden layer feed-forward and the latency positive.
pub fn connection_delay(pre: NeuronRef, post: NeuronRef) -> u32 {
    match (pre.layer, post.layer) {
        (Layer::Hidden, Layer::Hidden) => {
            assert!(
                pre.index > post.index,
                "hidden edge must run from higher to lower index ({} -> {})",
                pre.index,
                post.index
            );
            (pre.index - post.index) as u32
        }
        _ => 0,
    }
}

/// Output-window classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowClass {
    Low,
    High,
}

/// Classifies a spike count against the window size: low when the count is
/// below half the window.
pub fn classify_window(spikes: u32, window: u32) -> WindowClass {
    if 2 * spikes < window {
        WindowClass::Low
    } else {
        WindowClass::High
    }
}

/// Motor action decoded from the two output windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
}

impl Action {
    pub fn label(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::TurnLeft => "left",
            Action::TurnRight => "right",
        }
    }
}

/// Decodes the pair of window classes into an action. Matching classes mean
/// forward; a lone high first output turns left, a lone high second output
/// turns right.
pub fn decode_action(first: WindowClass, second: WindowClass) -> Action {
    match (first, second) {
        (WindowClass::High, WindowClass::Low) => Action::TurnLeft,
        (WindowClass::Low, WindowClass::High) => Action::TurnRight,
        _ => Action::Forward,
    }
}

/// A spike in flight on a delayed hidden → hidden connection.
#[derive(Debug, Clone, Copy, PartialEq)]
struct QueuedSpike {
    due: u64,
    target: usize,
    weight: f64,
}

/// Per-trial delivery lists, rebuilt whenever the topology changes.
///
/// Neuron slots flatten the three layers for the plasticity pass: inputs
/// first, then hidden, then outputs.
#[derive(Debug, Clone, Default)]
struct TopoCache {
    /// Connection indices leaving each input neuron.
    input_out: Vec<Vec<usize>>,
    /// Connection indices leaving each hidden neuron.
    hidden_out: Vec<Vec<usize>>,
    /// Enabled variable connections in genome order, with the flat slots
    /// of their endpoints.
    plastic: Vec<(u32, u32, u32)>,
}

/// Per-timestep plasticity tallies: `[kind][polarity]` over the variable
/// kinds in `ConnectionKind::VARIABLE` order.
pub type StdpCounts = [[u32; 2]; 3];

/// A complete individual: genome (neurons, connections, self-adaptive rates)
/// plus the runtime state of a trial in progress.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub params: NetworkParams,
    pub mem_params: MemristorParams,
    pub inputs: Vec<NeuronState>,
    pub hidden: Vec<NeuronState>,
    pub outputs: Vec<NeuronState>,
    pub connections: Vec<Connection>,
    /// Mutation rate (weights for constant networks, device kind for
    /// heterogeneous ones).
    #[serde(rename = "mu")]
    pub mutation_rate: f64,
    /// Probability of a node addition/removal event per offspring.
    #[serde(rename = "psi")]
    pub node_event_rate: f64,
    /// Probability that a node event is an addition rather than a removal.
    #[serde(rename = "omega")]
    pub node_add_bias: f64,
    /// Per-connection enable/disable toggle probability.
    #[serde(rename = "tau")]
    pub toggle_rate: f64,
    pub fitness: f64,

    #[serde(skip)]
    queue: Vec<QueuedSpike>,
    #[serde(skip)]
    step_counter: u64,
    #[serde(skip)]
    windows: [u32; OUTPUT_COUNT],
    #[serde(skip)]
    stdp_counts: StdpCounts,
    #[serde(skip)]
    spiked: Vec<NeuronRef>,
    #[serde(skip)]
    topo: Option<TopoCache>,
    #[serde(skip)]
    scratch_hidden: Vec<f64>,
    #[serde(skip)]
    scratch_ls: Vec<u8>,
}

impl Network {
    /// Assembles a genome. Input and output neurons are always excitatory;
    /// the self-adaptive rates start at zero and the runtime state stays
    /// blank until the first trial reset.
    pub fn new(
        params: NetworkParams,
        mem_params: MemristorParams,
        hidden: Vec<NeuronState>,
        connections: Vec<Connection>,
    ) -> Self {
        Self {
            params,
            mem_params,
            inputs: vec![NeuronState::new(Polarity::Excitatory); INPUT_COUNT],
            hidden,
            outputs: vec![NeuronState::new(Polarity::Excitatory); OUTPUT_COUNT],
            connections,
            mutation_rate: 0.0,
            node_event_rate: 0.0,
            node_add_bias: 0.0,
            toggle_rate: 0.0,
            fitness: 0.0,
            queue: Vec::new(),
            step_counter: 0,
            windows: [0; OUTPUT_COUNT],
            stdp_counts: Default::default(),
            spiked: Vec::new(),
            topo: None,
            scratch_hidden: Vec::new(),
            scratch_ls: Vec::new(),
        }
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden.len()
    }

    pub fn neuron(&self, r: NeuronRef) -> &NeuronState {
        match r.layer {
            Layer::Input => &self.inputs[r.index],
            Layer::Hidden => &self.hidden[r.index],
            Layer::Output => &self.outputs[r.index],
        }
    }

    pub fn neuron_mut(&mut self, r: NeuronRef) -> &mut NeuronState {
        match r.layer {
            Layer::Input => &mut self.inputs[r.index],
            Layer::Hidden => &mut self.hidden[r.index],
            Layer::Output => &mut self.outputs[r.index],
        }
    }

    /// Neurons that fired during the most recent step.
    pub fn last_spikes(&self) -> &[NeuronRef] {
        &self.spiked
    }

    /// Output spike counts for the current timestep window.
    pub fn output_windows(&self) -> [u32; OUTPUT_COUNT] {
        self.windows
    }

    /// Plasticity event tallies accumulated over the current timestep.
    pub fn timestep_stdp_counts(&self) -> StdpCounts {
        self.stdp_counts
    }

    /// Global step index (total steps run since the last trial reset).
    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    /// Mean cached weight of enabled connections per variable kind; zero for
    /// a kind with no enabled connections.
    pub fn mean_weight_by_kind(&self) -> [f64; 3] {
        let mut sums = [0.0f64; 3];
        let mut counts = [0u32; 3];
        for c in &self.connections {
            if !c.enabled {
                continue;
            }
            if let Some(k) = c.kind.variable_index() {
                sums[k] += c.weight;
                counts[k] += 1;
            }
        }
        let mut means = [0.0f64; 3];
        for k in 0..3 {
            if counts[k] > 0 {
                means[k] = sums[k] / f64::from(counts[k]);
            }
        }
        means
    }

    /// Neurons touched by at least one enabled connection.
    pub fn connected_neuron_count(&self) -> usize {
        let mut input_hit = [false; INPUT_COUNT];
        let mut output_hit = [false; OUTPUT_COUNT];
        let mut hidden_hit = vec![false; self.hidden.len()];
        let mut mark = |r: NeuronRef| match r.layer {
            Layer::Input => input_hit[r.index] = true,
            Layer::Hidden => hidden_hit[r.index] = true,
            Layer::Output => output_hit[r.index] = true,
        };
        for c in &self.connections {
            if c.enabled {
                mark(c.pre);
                mark(c.post);
            }
        }
        input_hit.iter().filter(|&&b| b).count()
            + hidden_hit.iter().filter(|&&b| b).count()
            + output_hit.iter().filter(|&&b| b).count()
    }

    /// Fraction of present connections that are enabled, in [0, 1].
    pub fn enabled_fraction(&self) -> f64 {
        if self.connections.is_empty() {
            return 0.0;
        }
        self.connections.iter().filter(|c| c.enabled).count() as f64
            / self.connections.len() as f64
    }

    /// Drops cached delivery lists and in-flight state. Called by the
    /// structural operators; the next trial reset rebuilds everything.
    pub fn invalidate_topology(&mut self) {
        self.topo = None;
        self.queue.clear();
    }

    /// Restores the runtime state for a fresh trial: membranes to the
    /// initial potential, counters and windows to zero, in-flight spikes
    /// dropped, and every variable connection back to weight 0.5.
    pub fn reset_for_trial(&mut self) {
        let y0 = self.params.initial_potential;
        for n in self
            .inputs
            .iter_mut()
            .chain(self.hidden.iter_mut())
            .chain(self.outputs.iter_mut())
        {
            n.y = y0;
            n.ls = 0;
        }
        for c in &mut self.connections {
            synapse::reset_connection(c, &self.mem_params);
        }
        self.queue.clear();
        self.step_counter = 0;
        self.windows = [0; OUTPUT_COUNT];
        self.stdp_counts = Default::default();
        self.rebuild_topology();
    }

    fn rebuild_topology(&mut self) {
        let slot = |r: NeuronRef| -> u32 {
            (match r.layer {
                Layer::Input => r.index,
                Layer::Hidden => INPUT_COUNT + r.index,
                Layer::Output => INPUT_COUNT + self.hidden.len() + r.index,
            }) as u32
        };
        let mut cache = TopoCache {
            input_out: vec![Vec::new(); INPUT_COUNT],
            hidden_out: vec![Vec::new(); self.hidden.len()],
            plastic: Vec::new(),
        };
        for (i, c) in self.connections.iter().enumerate() {
            if !c.enabled {
                continue;
            }
            match c.pre.layer {
                Layer::Input => cache.input_out[c.pre.index].push(i),
                Layer::Hidden => cache.hidden_out[c.pre.index].push(i),
                Layer::Output => unreachable!("output neurons have no outgoing edges"),
            }
            if c.kind.is_variable() {
                cache.plastic.push((i as u32, slot(c.pre), slot(c.post)));
            }
        }
        self.topo = Some(cache);
    }

    /// Runs one processing step with the given sensor currents.
    ///
    /// Update order within the step: input neurons integrate their sensor
    /// currents; spikes from inputs (ascending index, each neuron's edges in
    /// genome order) and due delayed spikes (enqueue order) accumulate onto
    /// hidden drive; hidden neurons integrate in ascending index order,
    /// firing ones enqueue delayed hidden traffic and drive outputs
    /// directly; output neurons integrate and count spikes into their
    /// windows; a plasticity pass visits enabled variable connections in
    /// genome order; finally every last-spike counter decays by one.
    pub fn run_step(&mut self, sensors: &[f64; INPUT_COUNT]) {
        if self.topo.is_none() {
            self.rebuild_topology();
        }
        let now = self.step_counter;
        self.spiked.clear();

        // input layer
        let mut input_fired = [false; INPUT_COUNT];
        for (i, n) in self.inputs.iter_mut().enumerate() {
            let (y, fired) = integrate_membrane(n.y, sensors[i], &self.params);
            n.y = y;
            if fired {
                n.ls = self.params.last_spike_init;
                input_fired[i] = true;
                self.spiked.push(NeuronRef::input(i));
            }
        }

        // hidden drive: input spikes first, then due delayed spikes
        let mut hidden_drive = std::mem::take(&mut self.scratch_hidden);
        hidden_drive.clear();
        hidden_drive.resize(self.hidden.len(), 0.0);
        {
            let topo = self.topo.as_ref().unwrap();
            for (i, fired) in input_fired.iter().enumerate() {
                if !fired {
                    continue;
                }
                let sign = self.inputs[i].polarity.sign();
                for &ci in &topo.input_out[i] {
                    let c = &self.connections[ci];
                    hidden_drive[c.post.index] += sign * c.weight;
                }
            }
        }
        self.queue.retain(|s| {
            if s.due == now {
                hidden_drive[s.target] += s.weight;
                false
            } else {
                true
            }
        });

        // hidden layer, ascending index
        let mut output_drive = [0.0f64; OUTPUT_COUNT];
        for (i, drive) in hidden_drive.iter().enumerate() {
            let (y, fired) = integrate_membrane(self.hidden[i].y, *drive, &self.params);
            self.hidden[i].y = y;
            if !fired {
                continue;
            }
            self.hidden[i].ls = self.params.last_spike_init;
            self.spiked.push(NeuronRef::hidden(i));
            let sign = self.hidden[i].polarity.sign();
            let topo = self.topo.as_ref().unwrap();
            for &ci in &topo.hidden_out[i] {
                let c = &self.connections[ci];
                match c.post.layer {
                    Layer::Hidden => self.queue.push(QueuedSpike {
                        due: now + u64::from(c.delay),
                        target: c.post.index,
                        weight: sign * c.weight,
                    }),
                    Layer::Output => output_drive[c.post.index] += sign * c.weight,
                    Layer::Input => unreachable!("no edges back into the input layer"),
                }
            }
        }
        self.scratch_hidden = hidden_drive;

        // output layer
        for (k, n) in self.outputs.iter_mut().enumerate() {
            let (y, fired) = integrate_membrane(n.y, output_drive[k], &self.params);
            n.y = y;
            if fired {
                n.ls = self.params.last_spike_init;
                self.windows[k] += 1;
                self.spiked.push(NeuronRef::output(k));
            }
        }

        // plasticity pass over enabled variable connections
        {
            let threshold = self.params.stdp_threshold;
            let mem = self.mem_params;
            let Network {
                connections,
                inputs,
                hidden,
                outputs,
                topo,
                stdp_counts,
                scratch_ls,
                ..
            } = self;
            scratch_ls.clear();
            scratch_ls.extend(inputs.iter().map(|n| n.ls));
            scratch_ls.extend(hidden.iter().map(|n| n.ls));
            scratch_ls.extend(outputs.iter().map(|n| n.ls));
            let topo = topo.as_ref().unwrap();
            for &(ci, pre, post) in &topo.plastic {
                let ls_pre = scratch_ls[pre as usize];
                let ls_post = scratch_ls[post as usize];
                if ls_pre + ls_post <= threshold || ls_pre == ls_post {
                    continue;
                }
                if let Some(polarity) = synapse::stdp_update(
                    &mut connections[ci as usize],
                    ls_pre,
                    ls_post,
                    threshold,
                    &mem,
                ) {
                    let k = connections[ci as usize].kind.variable_index().unwrap();
                    let pol = match polarity {
                        StdpPolarity::Positive => 0,
                        StdpPolarity::Negative => 1,
                    };
                    stdp_counts[k][pol] += 1;
                }
            }
        }

        // counter decay
        for n in self
            .inputs
            .iter_mut()
            .chain(self.hidden.iter_mut())
            .chain(self.outputs.iter_mut())
        {
            n.ls = n.ls.saturating_sub(1);
        }

        self.step_counter += 1;
    }

    /// Starts a fresh output window and plasticity tally, as `run_timestep`
    /// does before its steps. For callers driving the engine step by step.
    pub fn begin_timestep(&mut self) {
        self.windows = [0; OUTPUT_COUNT];
        self.stdp_counts = Default::default();
    }

    /// Runs one agent timestep: clears the output windows and plasticity
    /// tallies, holds the sensor currents constant for the configured number
    /// of steps, then classifies the windows into an action. Membranes,
    /// counters, charges and in-flight spikes persist across timesteps.
    pub fn run_timestep(&mut self, sensors: &[f64; INPUT_COUNT]) -> Action {
        self.begin_timestep();
        for _ in 0..self.params.steps_per_timestep {
            self.run_step(sensors);
        }
        let w = self.params.window_size();
        decode_action(
            classify_window(self.windows[0], w),
            classify_window(self.windows[1], w),
        )
    }

    /// Checks every structural invariant of the genome.
    pub fn validate(&self) -> Result<(), String> {
        self.params.validate()?;
        self.mem_params.validate()?;
        if self.inputs.len() != INPUT_COUNT {
            return Err(format!("expected {INPUT_COUNT} input neurons"));
        }
        if self.outputs.len() != OUTPUT_COUNT {
            return Err(format!("expected {OUTPUT_COUNT} output neurons"));
        }
        if self.hidden.is_empty() {
            return Err("hidden layer must stay non-empty".into());
        }
        for n in self.inputs.iter().chain(self.outputs.iter()) {
            if n.polarity != Polarity::Excitatory {
                return Err("input and output neurons must be excitatory".into());
            }
        }
        for (i, c) in self.connections.iter().enumerate() {
            let in_bounds = |r: NeuronRef| match r.layer {
                Layer::Input => r.index < INPUT_COUNT,
                Layer::Hidden => r.index < self.hidden.len(),
                Layer::Output => r.index < OUTPUT_COUNT,
            };
            if !in_bounds(c.pre) || !in_bounds(c.post) {
                return Err(format!("connection {i} references a missing neuron"));
            }
            match (c.pre.layer, c.post.layer) {
                (Layer::Input, Layer::Hidden) | (Layer::Hidden, Layer::Output) => {}
                (Layer::Hidden, Layer::Hidden) => {
                    if c.pre.index <= c.post.index {
                        return Err(format!(
                            "connection {i} violates hidden index ordering"
                        ));
                    }
                }
                other => return Err(format!("connection {i} joins illegal layers {other:?}")),
            }
            if c.delay != connection_delay(c.pre, c.post) {
                return Err(format!("connection {i} has a stale delay"));
            }
            match c.kind {
                ConnectionKind::Const => {
                    if !(0.0..=1.0).contains(&c.weight) {
                        return Err(format!("connection {i} weight out of range"));
                    }
                }
                _ => {
                    if !(0.0..=self.mem_params.q_max() + 1e-12).contains(&c.q) {
                        return Err(format!("connection {i} charge out of range"));
                    }
                    if !(0.0..=1.0).contains(&c.weight) {
                        return Err(format!("connection {i} weight out of range"));
                    }
                }
            }
        }
        for rate in [
            self.mutation_rate,
            self.node_event_rate,
            self.node_add_bias,
            self.toggle_rate,
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(format!("self-adaptive rate {rate} out of range"));
            }
        }
        if self.fitness < 0.0 {
            return Err("fitness must be non-negative".into());
        }
        Ok(())
    }
}
