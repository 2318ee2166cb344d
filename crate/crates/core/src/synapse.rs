//! Variable-connection device models and the stepwise-waveform plasticity rule.
//!
//! Three variable connection kinds share a single charge state `q` in
//! `[0, q_max]` but map charge to synaptic weight differently:
//!
//! * `Hp` — weight is normalized inverse memristance, `W = R_on / M`.
//!   Insensitive near W = 0, steep near W = 1.
//! * `Peo` — the mirrored profile, `W = 1 - R_on / (R_off + R_on - M)`.
//!   Steep near W = 0, insensitive near W = 1.
//! * `Lin` — constant sensitivity; every plasticity event moves the weight
//!   by exactly `1 / mem_lifetime`.
//!
//! `Const` connections carry a plain weight and ignore plasticity entirely.

use serde::{Deserialize, Serialize};

use crate::snn::{Layer, NeuronRef};

/// Device constants shared by every variable connection in a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorParams {
    /// Low-resistance bound.
    pub r_on: f64,
    /// High-resistance bound.
    pub r_off: f64,
    /// Device constant folding thickness and dopant mobility.
    pub beta: f64,
    /// Number of plasticity events needed to sweep the full charge range.
    pub mem_lifetime: u32,
}

impl Default for MemristorParams {
    fn default() -> Self {
        Self {
            r_on: 0.01,
            r_off: 1.0,
            beta: 100.0,
            mem_lifetime: 1000,
        }
    }
}

impl MemristorParams {
    /// Upper bound of the charge state: `(R_on - R_off) / (-R_on * R_off * beta)`.
    pub fn q_max(&self) -> f64 {
        (self.r_on - self.r_off) / (-self.r_on * self.r_off * self.beta)
    }

    /// Charge moved by one plasticity event.
    pub fn delta_q(&self) -> f64 {
        self.q_max() / f64::from(self.mem_lifetime)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.r_on > 0.0 && self.r_on < self.r_off) {
            return Err(format!(
                "memristor bounds must satisfy 0 < r_on < r_off (got {} and {})",
                self.r_on, self.r_off
            ));
        }
        if self.beta <= 0.0 {
            return Err(format!("beta must be positive (got {})", self.beta));
        }
        if self.mem_lifetime == 0 {
            return Err("mem_lifetime must be at least 1".into());
        }
        if self.q_max() <= 0.0 {
            return Err("derived q_max is not positive".into());
        }
        Ok(())
    }
}

/// Device kind of a single connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    Hp,
    Peo,
    Lin,
    Const,
}

impl ConnectionKind {
    /// The three kinds whose weight varies during a trial.
    pub const VARIABLE: [ConnectionKind; 3] =
        [ConnectionKind::Hp, ConnectionKind::Peo, ConnectionKind::Lin];

    pub fn is_variable(self) -> bool {
        !matches!(self, ConnectionKind::Const)
    }

    /// Dense index for per-kind tallies over the variable kinds.
    pub fn variable_index(self) -> Option<usize> {
        match self {
            ConnectionKind::Hp => Some(0),
            ConnectionKind::Peo => Some(1),
            ConnectionKind::Lin => Some(2),
            ConnectionKind::Const => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConnectionKind::Hp => "hp",
            ConnectionKind::Peo => "peo",
            ConnectionKind::Lin => "lin",
            ConnectionKind::Const => "const",
        }
    }
}

/// Instantaneous memristance for a charge state.
pub fn memristance(q: f64, p: &MemristorParams) -> f64 {
    debug_assert!(
        (-1e-9..=p.q_max() + 1e-9).contains(&q),
        "charge {q} outside [0, q_max]"
    );
    p.r_off - p.r_off * p.r_on * p.beta * q
}

/// Weight of an HP-like connection: inverse memristance, normalized so the
/// fully-doped device reads 1.
pub fn weight_hp(m: f64, p: &MemristorParams) -> f64 {
    p.r_on / m
}

/// Weight of a PEO-PANI-like connection: mirror image of the HP profile.
pub fn weight_peo(m: f64, p: &MemristorParams) -> f64 {
    1.0 - p.r_on / (p.r_off + p.r_on - m)
}

/// Weight of a linear-resistor connection.
///
/// The charge only ever moves in whole `delta_q` steps, so the weight is
/// evaluated on that grid; this keeps the per-event weight change at exactly
/// `1 / mem_lifetime` instead of accumulating rounding drift.
pub fn weight_lin(q: f64, p: &MemristorParams) -> f64 {
    let events = (q / p.delta_q()).round();
    (events / f64::from(p.mem_lifetime)).clamp(0.0, 1.0)
}

/// Weight of a variable connection at charge `q`.
///
/// Panics on `Const`, which has no charge-to-weight map.
pub fn weight_for(kind: ConnectionKind, q: f64, p: &MemristorParams) -> f64 {
    match kind {
        ConnectionKind::Hp => weight_hp(memristance(q, p), p),
        ConnectionKind::Peo => weight_peo(memristance(q, p), p),
        ConnectionKind::Lin => weight_lin(q, p),
        ConnectionKind::Const => panic!("constant connections have no charge state"),
    }
}

/// Charge that makes a variable connection read weight `w0`.
///
/// Panics if `w0` lies outside the kind's reachable weight range.
pub fn init_q_for_weight(kind: ConnectionKind, w0: f64, p: &MemristorParams) -> f64 {
    let inv = p.r_off * p.r_on * p.beta;
    match kind {
        ConnectionKind::Hp => {
            let lo = p.r_on / p.r_off;
            assert!(
                (lo..=1.0).contains(&w0),
                "HP weight {w0} outside [{lo}, 1]"
            );
            let m = p.r_on / w0;
            (p.r_off - m) / inv
        }
        ConnectionKind::Peo => {
            let hi = 1.0 - p.r_on / p.r_off;
            assert!(
                (0.0..=hi).contains(&w0),
                "PEO weight {w0} outside [0, {hi}]"
            );
            let m = p.r_off + p.r_on - p.r_on / (1.0 - w0);
            (p.r_off - m) / inv
        }
        ConnectionKind::Lin => {
            assert!((0.0..=1.0).contains(&w0), "LIN weight {w0} outside [0, 1]");
            w0 * p.q_max()
        }
        ConnectionKind::Const => panic!("constant connections have no charge state"),
    }
}

/// A directed synapse between two neurons.
///
/// `weight` caches the derived device weight for variable kinds and stores
/// the genome weight for `Const`. `q` is meaningful for variable kinds only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub pre: NeuronRef,
    pub post: NeuronRef,
    pub kind: ConnectionKind,
    pub enabled: bool,
    pub q: f64,
    pub weight: f64,
    pub delay: u32,
}

impl Connection {
    /// Builds a connection with a legal delay.
    ///
    /// Panics on an illegal edge (self-loop, input→output, or a
    /// hidden→hidden edge that does not run from higher to lower index).
    pub fn new(
        pre: NeuronRef,
        post: NeuronRef,
        kind: ConnectionKind,
        enabled: bool,
        weight: f64,
        p: &MemristorParams,
    ) -> Self {
        let delay = crate::snn::connection_delay(pre, post);
        let (q, weight) = match kind {
            ConnectionKind::Const => (0.0, weight),
            variable => {
                let q = init_q_for_weight(variable, weight, p);
                (q, weight_for(variable, q, p))
            }
        };
        Self {
            pre,
            post,
            kind,
            enabled,
            q,
            weight,
            delay,
        }
    }

    pub fn layer_pair(&self) -> (Layer, Layer) {
        (self.pre.layer, self.post.layer)
    }
}

/// Direction of a single plasticity event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdpPolarity {
    Positive,
    Negative,
}

/// One recorded plasticity event, for detailed traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StdpEvent {
    /// Index of the connection in the network's connection list.
    pub connection: usize,
    pub polarity: StdpPolarity,
    pub timestep: u32,
    pub step: u32,
}

/// Applies the coincidence rule to an enabled variable connection.
///
/// The last-spike counters of the endpoints must sum above `threshold` and
/// differ; the more recently spiking side decides the direction. The charge
/// saturates at the ends of its range and the cached weight is recomputed.
pub fn stdp_update(
    conn: &mut Connection,
    ls_pre: u8,
    ls_post: u8,
    threshold: u8,
    p: &MemristorParams,
) -> Option<StdpPolarity> {
    debug_assert!(conn.enabled && conn.kind.is_variable());
    if u16::from(ls_pre) + u16::from(ls_post) <= u16::from(threshold) || ls_pre == ls_post {
        return None;
    }
    let polarity = if ls_pre < ls_post {
        conn.q += p.delta_q();
        StdpPolarity::Positive
    } else {
        conn.q -= p.delta_q();
        StdpPolarity::Negative
    };
    conn.q = conn.q.clamp(0.0, p.q_max());
    conn.weight = weight_for(conn.kind, conn.q, p);
    Some(polarity)
}

/// Restores a variable connection to its pre-trial weight of 0.5.
/// Constant connections are untouched.
pub fn reset_connection(conn: &mut Connection, p: &MemristorParams) {
    if conn.kind.is_variable() {
        conn.q = init_q_for_weight(conn.kind, 0.5, p);
        conn.weight = weight_for(conn.kind, conn.q, p);
    }
}

/// One row of the device characterization sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub kind: ConnectionKind,
    pub step: u32,
    pub q: f64,
    pub m: f64,
    pub w: f64,
}

/// Sweeps each variable kind through `mem_lifetime` positive events followed
/// by `mem_lifetime` negative events, starting from a pristine device.
///
/// Step 0 is the pristine state; the events are driven through the real
/// plasticity rule with counter pairs (2, 3) and (3, 2).
pub fn characterize(p: &MemristorParams) -> Vec<CurveRow> {
    let mut rows = Vec::with_capacity(3 * (2 * p.mem_lifetime as usize + 1));
    for kind in ConnectionKind::VARIABLE {
        let mut conn = Connection::new(
            NeuronRef::hidden(1),
            NeuronRef::hidden(0),
            kind,
            true,
            0.5,
            p,
        );
        conn.q = 0.0;
        conn.weight = weight_for(kind, conn.q, p);
        let mut push = |step: u32, conn: &Connection| {
            rows.push(CurveRow {
                kind,
                step,
                q: conn.q,
                m: memristance(conn.q, p),
                w: conn.weight,
            });
        };
        push(0, &conn);
        for step in 1..=2 * p.mem_lifetime {
            let (ls_pre, ls_post) = if step <= p.mem_lifetime { (2, 3) } else { (3, 2) };
            stdp_update(&mut conn, ls_pre, ls_post, 4, p);
            push(step, &conn);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> MemristorParams {
        MemristorParams::default()
    }

    #[test]
    fn q_max_matches_reference_values() {
        let p = params();
        assert!((p.q_max() - 0.99).abs() < 1e-15);
        // doubling beta halves q_max
        let doubled = MemristorParams {
            beta: 200.0,
            ..params()
        };
        assert!((doubled.q_max() - 0.495).abs() < 1e-15);
        // bounds collapsing drives q_max to zero
        let tight = MemristorParams {
            r_on: 0.9999999,
            ..params()
        };
        assert!(tight.q_max() < 1e-5);
    }

    #[test]
    fn memristance_endpoints() {
        let p = params();
        assert_eq!(memristance(0.0, &p), p.r_off);
        assert!((memristance(p.q_max(), &p) - p.r_on).abs() < 1e-12);
        assert!((memristance(0.495, &p) - 0.505).abs() < 1e-12);
    }

    #[test]
    fn hp_weight_anchors() {
        let p = params();
        assert!((weight_hp(p.r_off, &p) - 0.01).abs() < 1e-15);
        assert!((weight_hp(p.r_on, &p) - 1.0).abs() < 1e-12);
        // 910 events out of 1000 from pristine lands just inside the sensitive range
        let q = 0.91 * p.q_max();
        let w = weight_hp(memristance(q, &p), &p);
        assert!((w - 0.1009).abs() < 1e-3, "got {w}");
    }

    #[test]
    fn peo_weight_anchors() {
        let p = params();
        assert!((weight_peo(memristance(0.0, &p), &p) - 0.0).abs() < 1e-12);
        assert!((weight_peo(memristance(p.q_max(), &p), &p) - 0.99).abs() < 1e-12);
        let q = 0.09 * p.q_max();
        let w = weight_peo(memristance(q, &p), &p);
        assert!((w - 0.8990918264379415).abs() < 1e-9, "got {w}");
    }

    #[test]
    fn lin_weight_is_exact_per_event() {
        let p = params();
        assert_eq!(weight_lin(0.0, &p), 0.0);
        assert_eq!(weight_lin(p.q_max(), &p), 1.0);
        // accumulate charge the way trials do and require exact n/1000 weights
        let mut q = 0.0;
        for n in 1..=1000u32 {
            q = (q + p.delta_q()).min(p.q_max());
            assert_eq!(weight_lin(q, &p), f64::from(n) / 1000.0, "event {n}");
        }
    }

    #[test]
    fn init_q_inverts_each_weight_map() {
        let p = params();
        assert!((init_q_for_weight(ConnectionKind::Hp, 0.5, &p) - 0.98).abs() < 1e-12);
        assert!((init_q_for_weight(ConnectionKind::Peo, 0.5, &p) - 0.01).abs() < 1e-12);
        assert!((init_q_for_weight(ConnectionKind::Lin, 0.5, &p) - 0.495).abs() < 1e-12);
        assert_eq!(init_q_for_weight(ConnectionKind::Peo, 0.0, &p), 0.0);
        for kind in ConnectionKind::VARIABLE {
            let q = init_q_for_weight(kind, 0.5, &p);
            assert!((weight_for(kind, q, &p) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    #[should_panic]
    fn init_q_rejects_out_of_range_weight() {
        init_q_for_weight(ConnectionKind::Peo, 0.9999, &params());
    }

    fn test_conn(kind: ConnectionKind) -> Connection {
        Connection::new(
            NeuronRef::hidden(1),
            NeuronRef::hidden(0),
            kind,
            true,
            0.5,
            &params(),
        )
    }

    #[test]
    fn stdp_fires_on_coincidence_only() {
        let p = params();
        let mut c = test_conn(ConnectionKind::Lin);
        let q0 = c.q;

        // presynaptic 2, postsynaptic 3: potentiation
        assert_eq!(
            stdp_update(&mut c, 2, 3, 4, &p),
            Some(StdpPolarity::Positive)
        );
        assert!((c.q - (q0 + p.delta_q())).abs() < 1e-15);

        // reversed order: depression
        assert_eq!(
            stdp_update(&mut c, 3, 2, 4, &p),
            Some(StdpPolarity::Negative)
        );

        // ties and sub-threshold sums do nothing
        assert_eq!(stdp_update(&mut c, 2, 2, 4, &p), None);
        assert_eq!(stdp_update(&mut c, 3, 3, 4, &p), None);
        assert_eq!(stdp_update(&mut c, 1, 2, 4, &p), None);
        assert_eq!(stdp_update(&mut c, 0, 3, 4, &p), None);
    }

    #[test]
    fn stdp_saturates_at_charge_bounds() {
        let p = params();
        let mut c = test_conn(ConnectionKind::Hp);
        for _ in 0..3000 {
            stdp_update(&mut c, 2, 3, 4, &p);
        }
        assert_eq!(c.q, p.q_max());
        for _ in 0..5000 {
            stdp_update(&mut c, 3, 2, 4, &p);
        }
        assert_eq!(c.q, 0.0);
    }

    #[test]
    fn reset_restores_half_weight_and_spares_constants() {
        let p = params();
        let mut c = test_conn(ConnectionKind::Hp);
        c.q = p.q_max();
        reset_connection(&mut c, &p);
        assert!((c.q - 0.98).abs() < 1e-12);
        assert!((c.weight - 0.5).abs() < 1e-12);

        let mut lin = test_conn(ConnectionKind::Lin);
        lin.q = 0.0;
        reset_connection(&mut lin, &p);
        assert!((lin.q - 0.495).abs() < 1e-12);

        let mut k = Connection::new(
            NeuronRef::hidden(1),
            NeuronRef::hidden(0),
            ConnectionKind::Const,
            true,
            0.7,
            &p,
        );
        reset_connection(&mut k, &p);
        assert_eq!(k.weight, 0.7);
    }

    #[test]
    fn constant_weight_immune_to_stdp_waveforms() {
        let p = params();
        let c = Connection::new(
            NeuronRef::hidden(2),
            NeuronRef::hidden(0),
            ConnectionKind::Const,
            true,
            0.31,
            &p,
        );
        // the engine never routes constants through stdp_update; assert the
        // reset path and the characterization sweep leave them alone too
        let mut copy = c;
        reset_connection(&mut copy, &p);
        assert_eq!(copy, c);
    }

    #[test]
    fn characterization_sweep_shape() {
        let p = params();
        let rows = characterize(&p);
        assert_eq!(rows.len(), 3 * 2001);
        for kind in ConnectionKind::VARIABLE {
            let kind_rows: Vec<_> = rows.iter().filter(|r| r.kind == kind).collect();
            assert_eq!(kind_rows[0].step, 0);
            assert_eq!(kind_rows[0].q, 0.0);
            assert_eq!(kind_rows[2000].step, 2000);
            // full positive sweep saturates, full negative sweep returns to zero
            assert!((kind_rows[1000].q - p.q_max()).abs() < 1e-12);
            assert!(kind_rows[2000].q.abs() < 1e-12);
        }
    }

    #[test]
    fn full_traversal_takes_exactly_mem_lifetime_events() {
        let p = params();
        for kind in ConnectionKind::VARIABLE {
            let mut c = test_conn(kind);
            c.q = 0.0;
            c.weight = weight_for(kind, 0.0, &p);
            let mut events = 0;
            while c.q < p.q_max() {
                stdp_update(&mut c, 2, 3, 4, &p);
                events += 1;
                assert!(events <= p.mem_lifetime, "never saturated");
            }
            assert_eq!(events, p.mem_lifetime);
        }
    }

    proptest! {
        #[test]
        fn weights_stay_in_range_and_monotone(steps in 0u32..=1000) {
            let p = params();
            for kind in ConnectionKind::VARIABLE {
                let q = f64::from(steps) * p.delta_q();
                let q = q.min(p.q_max());
                let w = weight_for(kind, q, &p);
                prop_assert!((0.0..=1.0).contains(&w));
                if steps > 0 {
                    let prev = weight_for(kind, (f64::from(steps - 1) * p.delta_q()).min(p.q_max()), &p);
                    prop_assert!(w >= prev, "{kind:?} not monotone at {steps}");
                }
            }
        }

        #[test]
        fn sensitivity_mirror_between_hp_and_peo(frac in 0.0f64..=1.0) {
            let p = params();
            let q = frac * p.q_max();
            let sum = weight_peo(memristance(q, &p), &p)
                + weight_hp(memristance(p.q_max() - q, &p), &p);
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn incremental_charge_matches_replayed_sum(pairs in proptest::collection::vec((0u8..=3, 0u8..=3), 0..400)) {
            let p = params();
            for kind in ConnectionKind::VARIABLE {
                let mut c = test_conn(kind);
                let q0 = c.q;
                for &(pre, post) in &pairs {
                    stdp_update(&mut c, pre, post, 4, &p);
                }
                // brute-force replay of the signed deltas with clamping
                let mut q = q0;
                for &(pre, post) in &pairs {
                    if u16::from(pre) + u16::from(post) > 4 && pre != post {
                        q += if pre < post { p.delta_q() } else { -p.delta_q() };
                        q = q.clamp(0.0, p.q_max());
                    }
                }
                prop_assert_eq!(c.q, q);
            }
        }
    }
}
