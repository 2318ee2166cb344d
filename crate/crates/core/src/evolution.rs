//! Steady-state genetic algorithm with self-adaptive rates.
//!
//! Each generation selects two parents fitness-proportionately, clones them,
//! perturbs every self-adaptive rate log-normally, applies the system's
//! mutation operator plus the node and connection-selection operators,
//! evaluates the two offspring, inserts them, and deletes the two
//! lowest-fitness members. There is no crossover; parents stay and compete
//! with their offspring.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::snn::{
    connection_delay, Layer, Network, NetworkParams, NeuronRef, NeuronState, Polarity,
    INITIAL_HIDDEN, INPUT_COUNT, OUTPUT_COUNT,
};
use crate::synapse::{
    init_q_for_weight, weight_for, Connection, ConnectionKind, MemristorParams,
};

/// Smallest value a self-adaptive rate may take after adaptation.
pub const RATE_FLOOR: f64 = 1e-6;

/// Which connection substrate a population evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Hp,
    Peo,
    Lin,
    /// Constant weights, mutated between trials by the genetic algorithm.
    Ga,
    /// Heterogeneous mixtures of the three variable kinds.
    Het,
}

impl SystemKind {
    pub fn label(self) -> &'static str {
        match self {
            SystemKind::Hp => "hp",
            SystemKind::Peo => "peo",
            SystemKind::Lin => "lin",
            SystemKind::Ga => "ga",
            SystemKind::Het => "het",
        }
    }

    /// Kind assigned to a brand-new or re-enabled connection.
    fn draw_kind<R: Rng>(self, rng: &mut R) -> ConnectionKind {
        match self {
            SystemKind::Hp => ConnectionKind::Hp,
            SystemKind::Peo => ConnectionKind::Peo,
            SystemKind::Lin => ConnectionKind::Lin,
            SystemKind::Ga => ConnectionKind::Const,
            SystemKind::Het => ConnectionKind::VARIABLE[rng.random_range(0..3)],
        }
    }
}

/// Builds one connection for genesis, node addition, or re-enabling.
/// Draw order: kind (heterogeneous systems only), then weight (constant
/// kind only). Variable kinds start at weight 0.5.
fn draw_connection<R: Rng>(
    pre: NeuronRef,
    post: NeuronRef,
    system: SystemKind,
    enabled: bool,
    mem: &MemristorParams,
    rng: &mut R,
) -> Connection {
    let kind = system.draw_kind(rng);
    let weight = match kind {
        ConnectionKind::Const => rng.random_range(0.0..1.0),
        _ => 0.5,
    };
    Connection::new(pre, post, kind, enabled, weight, mem)
}

/// Creates a fresh network of the given system kind.
///
/// Nine hidden neurons, each excitatory with probability one half; every
/// legal connection present and enabled. Draw order: the nine polarities,
/// then per connection (inputs to hidden in input-major order, hidden to
/// hidden from each higher index down, hidden to outputs in hidden-major
/// order) its kind/weight draws, then the four self-adaptive rates.
pub fn new_network<R: Rng>(
    system: SystemKind,
    params: &NetworkParams,
    mem: &MemristorParams,
    rng: &mut R,
) -> Network {
    let hidden: Vec<NeuronState> = (0..INITIAL_HIDDEN)
        .map(|_| {
            let polarity = if rng.random_range(0.0..1.0) < 0.5 {
                Polarity::Excitatory
            } else {
                Polarity::Inhibitory
            };
            NeuronState::new(polarity)
        })
        .collect();

    let mut connections = Vec::new();
    for i in 0..INPUT_COUNT {
        for h in 0..INITIAL_HIDDEN {
            connections.push(draw_connection(
                NeuronRef::input(i),
                NeuronRef::hidden(h),
                system,
                true,
                mem,
                rng,
            ));
        }
    }
    for pre in 1..INITIAL_HIDDEN {
        for post in 0..pre {
            connections.push(draw_connection(
                NeuronRef::hidden(pre),
                NeuronRef::hidden(post),
                system,
                true,
                mem,
                rng,
            ));
        }
    }
    for h in 0..INITIAL_HIDDEN {
        for o in 0..OUTPUT_COUNT {
            connections.push(draw_connection(
                NeuronRef::hidden(h),
                NeuronRef::output(o),
                system,
                true,
                mem,
                rng,
            ));
        }
    }

    let mut net = Network::new(*params, *mem, hidden, connections);
    net.mutation_rate = rng.random_range(0.0..0.25);
    net.node_event_rate = rng.random_range(0.0..0.5);
    net.node_add_bias = rng.random_range(0.0..1.0);
    net.toggle_rate = rng.random_range(0.0..0.25);
    net
}

/// Log-normal perturbation of a self-adaptive rate with an explicit normal
/// deviate, clamped into `(RATE_FLOOR, 1]`.
pub fn self_adapt_with(value: f64, normal: f64) -> f64 {
    (value * normal.exp()).clamp(RATE_FLOOR, 1.0)
}

/// Log-normal perturbation with a fresh standard-normal draw (Box–Muller,
/// two uniforms per call).
pub fn self_adapt<R: Rng>(value: f64, rng: &mut R) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    let normal = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    self_adapt_with(value, normal)
}

/// Redraws each enabled constant weight with probability `rate`.
/// Variable connections are never weight-mutated.
pub fn mutate_weights<R: Rng>(net: &mut Network, rate: f64, rng: &mut R) {
    for c in &mut net.connections {
        if c.kind == ConnectionKind::Const && c.enabled && rng.random_range(0.0..1.0) < rate {
            c.weight = rng.random_range(0.0..1.0);
        }
    }
}

/// Switches each connection, with probability `rate`, to one of the two
/// other variable kinds (even odds), re-initialized at weight 0.5.
pub fn mutate_types<R: Rng>(net: &mut Network, rate: f64, rng: &mut R) {
    let mem = net.mem_params;
    for c in &mut net.connections {
        if !c.kind.is_variable() || rng.random_range(0.0..1.0) >= rate {
            continue;
        }
        let others: [ConnectionKind; 2] = match c.kind {
            ConnectionKind::Hp => [ConnectionKind::Peo, ConnectionKind::Lin],
            ConnectionKind::Peo => [ConnectionKind::Hp, ConnectionKind::Lin],
            ConnectionKind::Lin => [ConnectionKind::Hp, ConnectionKind::Peo],
            ConnectionKind::Const => unreachable!(),
        };
        c.kind = others[usize::from(rng.random_range(0.0..1.0) < 0.5)];
        c.q = init_q_for_weight(c.kind, 0.5, &mem);
        c.weight = weight_for(c.kind, c.q, &mem);
    }
}

/// With probability `event_rate`, adds a hidden neuron (probability
/// `add_bias`) or removes a uniformly chosen one. Removal is skipped when
/// only one hidden neuron remains.
pub fn node_event<R: Rng>(
    net: &mut Network,
    event_rate: f64,
    add_bias: f64,
    system: SystemKind,
    rng: &mut R,
) {
    if rng.random_range(0.0..1.0) >= event_rate {
        return;
    }
    if rng.random_range(0.0..1.0) < add_bias {
        add_hidden_neuron(net, system, rng);
    } else {
        remove_hidden_neuron(net, rng);
    }
}

/// Appends a hidden neuron at the top index and wires every legal edge
/// around it, each enabled with probability one half.
///
/// Draw order: polarity, then per connection (inputs to the new neuron,
/// the new neuron down to each existing hidden neuron, the new neuron to
/// each output) an enable draw followed by the kind/weight draws.
fn add_hidden_neuron<R: Rng>(net: &mut Network, system: SystemKind, rng: &mut R) {
    let mem = net.mem_params;
    let new = net.hidden.len();
    let polarity = if rng.random_range(0.0..1.0) < 0.5 {
        Polarity::Excitatory
    } else {
        Polarity::Inhibitory
    };
    net.hidden.push(NeuronState::new(polarity));

    let push = |net: &mut Network, pre: NeuronRef, post: NeuronRef, rng: &mut R| {
        let enabled = rng.random_range(0.0..1.0) < 0.5;
        let conn = draw_connection(pre, post, system, enabled, &mem, rng);
        net.connections.push(conn);
    };
    for i in 0..INPUT_COUNT {
        push(net, NeuronRef::input(i), NeuronRef::hidden(new), rng);
    }
    for post in 0..new {
        push(net, NeuronRef::hidden(new), NeuronRef::hidden(post), rng);
    }
    for o in 0..OUTPUT_COUNT {
        push(net, NeuronRef::hidden(new), NeuronRef::output(o), rng);
    }
    net.invalidate_topology();
}

/// Removes a uniformly chosen hidden neuron together with its connections,
/// re-indexing the survivors and refreshing affected delays.
fn remove_hidden_neuron<R: Rng>(net: &mut Network, rng: &mut R) {
    if net.hidden.len() <= 1 {
        return;
    }
    let victim = rng.random_range(0..net.hidden.len());
    net.hidden.remove(victim);
    net.connections.retain(|c| {
        !(c.pre == NeuronRef::hidden(victim) || c.post == NeuronRef::hidden(victim))
    });
    for c in &mut net.connections {
        if c.pre.layer == Layer::Hidden && c.pre.index > victim {
            c.pre.index -= 1;
        }
        if c.post.layer == Layer::Hidden && c.post.index > victim {
            c.post.index -= 1;
        }
        c.delay = connection_delay(c.pre, c.post);
    }
    net.invalidate_topology();
}

/// Toggles each connection with probability `rate`. A re-enabled constant
/// connection gets a fresh uniform weight; a re-enabled variable connection
/// returns to weight 0.5, with heterogeneous systems redrawing its kind.
pub fn connection_event<R: Rng>(
    net: &mut Network,
    rate: f64,
    system: SystemKind,
    rng: &mut R,
) {
    let mem = net.mem_params;
    for c in &mut net.connections {
        if rng.random_range(0.0..1.0) >= rate {
            continue;
        }
        c.enabled = !c.enabled;
        if c.enabled {
            match system {
                SystemKind::Ga => c.weight = rng.random_range(0.0..1.0),
                SystemKind::Het => {
                    c.kind = system.draw_kind(rng);
                    c.q = init_q_for_weight(c.kind, 0.5, &mem);
                    c.weight = weight_for(c.kind, c.q, &mem);
                }
                _ => {
                    c.q = init_q_for_weight(c.kind, 0.5, &mem);
                    c.weight = weight_for(c.kind, c.q, &mem);
                }
            }
        }
    }
    net.invalidate_topology();
}

/// A population member with its insertion age (smaller is older).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Member {
    pub net: Network,
    pub age: u64,
}

/// Evaluation verdict handed back by the trial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOutcome {
    pub fitness: f64,
    /// Reached the (first) goal region.
    pub solved: bool,
    /// Collected the relocated reward as well (dynamic scenario only).
    pub fully_solved: bool,
}

/// What a generation observed, for experiment bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GenerationOutcome {
    pub evaluations: u32,
    pub any_solved: bool,
    pub any_fully_solved: bool,
}

/// Fixed-size population of one system kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Population {
    pub system: SystemKind,
    pub members: Vec<Member>,
    next_age: u64,
}

impl Population {
    /// Creates `size` fresh unevaluated networks.
    pub fn new<R: Rng>(
        system: SystemKind,
        size: usize,
        params: &NetworkParams,
        mem: &MemristorParams,
        rng: &mut R,
    ) -> Self {
        let members = (0..size)
            .map(|age| Member {
                net: new_network(system, params, mem, rng),
                age: age as u64,
            })
            .collect();
        Self { system, members, next_age: size as u64 }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn best(&self) -> &Member {
        self.members
            .iter()
            .max_by(|a, b| a.net.fitness.total_cmp(&b.net.fitness))
            .expect("population is never empty")
    }

    pub fn mean_fitness(&self) -> f64 {
        self.members.iter().map(|m| m.net.fitness).sum::<f64>() / self.members.len() as f64
    }
}

/// Roulette-wheel parent selection over non-negative fitness; a fitness-free
/// population falls back to a uniform draw.
pub fn select_parent_index<R: Rng>(members: &[Member], rng: &mut R) -> usize {
    assert!(!members.is_empty(), "cannot select from an empty population");
    let total: f64 = members.iter().map(|m| m.net.fitness).sum();
    if total <= 0.0 {
        return rng.random_range(0..members.len());
    }
    let mark = rng.random_range(0.0..total);
    let mut cursor = 0.0;
    for (i, m) in members.iter().enumerate() {
        cursor += m.net.fitness;
        if mark < cursor {
            return i;
        }
    }
    members.len() - 1
}

/// One steady-state generation.
///
/// Two parents are drawn; each clone adapts its four rates, mutates
/// (weights for constant networks, device kinds for heterogeneous ones),
/// runs the node event then the connection event, and is evaluated. Both
/// offspring are inserted and the two lowest-fitness members deleted, ties
/// broken oldest-first.
pub fn ga_cycle<R, F>(pop: &mut Population, rng: &mut R, mut evaluate: F) -> GenerationOutcome
where
    R: Rng,
    F: FnMut(&mut Network, &mut R) -> EvalOutcome,
{
    let mut outcome = GenerationOutcome::default();
    let parents = [
        select_parent_index(&pop.members, rng),
        select_parent_index(&pop.members, rng),
    ];
    for parent in parents {
        let mut child = pop.members[parent].net.clone();
        child.fitness = 0.0;
        child.mutation_rate = self_adapt(child.mutation_rate, rng);
        child.node_event_rate = self_adapt(child.node_event_rate, rng);
        child.node_add_bias = self_adapt(child.node_add_bias, rng);
        child.toggle_rate = self_adapt(child.toggle_rate, rng);
        let (mutation, node_rate, add_bias, toggle) = (
            child.mutation_rate,
            child.node_event_rate,
            child.node_add_bias,
            child.toggle_rate,
        );
        match pop.system {
            SystemKind::Ga => mutate_weights(&mut child, mutation, rng),
            SystemKind::Het => mutate_types(&mut child, mutation, rng),
            _ => {}
        }
        node_event(&mut child, node_rate, add_bias, pop.system, rng);
        connection_event(&mut child, toggle, pop.system, rng);

        let verdict = evaluate(&mut child, rng);
        child.fitness = verdict.fitness;
        outcome.evaluations += 1;
        outcome.any_solved |= verdict.solved;
        outcome.any_fully_solved |= verdict.fully_solved;

        pop.members.push(Member { net: child, age: pop.next_age });
        pop.next_age += 1;
    }

    for _ in 0..2 {
        let doomed = pop
            .members
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.net
                    .fitness
                    .total_cmp(&b.net.fitness)
                    .then(a.age.cmp(&b.age))
            })
            .map(|(i, _)| i)
            .expect("population is never empty");
        pop.members.remove(doomed);
    }
    outcome
}
