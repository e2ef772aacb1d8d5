//! The collective utility and its per-agent shaping.
//!
//! The world reward of a wave is Σ over nodes of (wave throughput × per-packet
//! cost at windowed load). An agent here is one branching (router,
//! destination) pair; its shaped utility for a wave is the world reward minus
//! the world reward of the same snapshot with that destination's traffic
//! clamped to zero everywhere. Lower is better throughout: rewards are costs.
//!
//! Clamping removes all traffic bound for the destination, not just the
//! agent's share, so the clamped term is identical for every candidate the
//! agent weighs. Ranking candidates by shaped utility therefore ranks them
//! exactly as the world reward itself would: the utility is aligned with the
//! collective objective while depending on far fewer of the system's moving
//! parts, which is what makes it learnable per agent.

use crate::engine::{walk_chain, DecisionMap, WaveState};
use crate::topology::{NetworkSpec, NodeKind};

// --- Snapshots --------------------------------------------------------------

/// A priced moment of the simulation: wave throughput and windowed throughput
/// for every (node, destination) cell. Everything the world reward needs.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSnapshot {
    dest_count: usize,
    /// Most recent wave's throughput, `node * dest_count + slot`.
    x: Vec<f64>,
    /// Windowed mean throughput, same layout.
    xw: Vec<f64>,
}

impl WaveSnapshot {
    pub fn from_state(spec: &NetworkSpec, state: &WaveState) -> Self {
        let n = spec.node_count();
        let nd = spec.destinations().len();
        let mut x = vec![0.0; n * nd];
        let mut xw = vec![0.0; n * nd];
        for v in 0..n {
            for s in 0..nd {
                x[v * nd + s] = state.current_x(v, s);
                xw[v * nd + s] = state.windowed_x(v, s);
            }
        }
        Self { dest_count: nd, x, xw }
    }

    /// Builds a snapshot from raw cells; both matrices are `node-major` with
    /// `dest_count` columns.
    pub fn from_parts(dest_count: usize, x: Vec<f64>, xw: Vec<f64>) -> Self {
        assert_eq!(x.len(), xw.len());
        assert!(dest_count > 0 && x.len() % dest_count == 0);
        Self { dest_count, x, xw }
    }

    pub fn dest_count(&self) -> usize {
        self.dest_count
    }

    pub fn current_x(&self, node: usize, dest_slot: usize) -> f64 {
        self.x[node * self.dest_count + dest_slot]
    }

    pub fn windowed_x(&self, node: usize, dest_slot: usize) -> f64 {
        self.xw[node * self.dest_count + dest_slot]
    }

    /// Wave throughput of a node over all destinations.
    pub fn wave_throughput(&self, node: usize) -> f64 {
        let base = node * self.dest_count;
        self.x[base..base + self.dest_count].iter().sum()
    }

    /// Windowed load of a node over all destinations; cost functions are
    /// evaluated here.
    pub fn router_load(&self, node: usize) -> f64 {
        let base = node * self.dest_count;
        self.xw[base..base + self.dest_count].iter().sum()
    }
}

// --- World reward and clamping ------------------------------------------------

/// Σ over nodes of wave throughput times per-packet cost at windowed load.
pub fn world_reward(spec: &NetworkSpec, snap: &WaveSnapshot) -> f64 {
    let mut total = 0.0;
    for v in 0..spec.node_count() {
        let z = snap.wave_throughput(v);
        if z == 0.0 {
            continue;
        }
        total += z * spec.node(v).cost.eval_raw(snap.router_load(v));
    }
    total
}

/// The snapshot with every node's traffic for one destination zeroed, wave
/// and windowed alike.
pub fn clamp_destination(spec: &NetworkSpec, snap: &WaveSnapshot, dest_slot: usize) -> WaveSnapshot {
    let mut out = snap.clone();
    for v in 0..spec.node_count() {
        out.x[v * out.dest_count + dest_slot] = 0.0;
        out.xw[v * out.dest_count + dest_slot] = 0.0;
    }
    out
}

/// Shaped utility of a destination's agents on this snapshot: world reward
/// minus the destination-clamped world reward, folded into a single pass.
pub fn wave_wlr(spec: &NetworkSpec, snap: &WaveSnapshot, dest_slot: usize) -> f64 {
    let nd = snap.dest_count;
    let mut total = 0.0;
    for v in 0..spec.node_count() {
        let cell = v * nd + dest_slot;
        let z = snap.wave_throughput(v);
        let z_clamped = z - snap.x[cell];
        if z == 0.0 && z_clamped == 0.0 {
            continue;
        }
        let cost = &spec.node(v).cost;
        let load = snap.router_load(v);
        let load_clamped = (load - snap.xw[cell]).max(0.0);
        total += z * cost.eval_raw(load) - z_clamped * cost.eval_raw(load_clamped);
    }
    total
}

// --- Counterfactual routing ------------------------------------------------------

/// The snapshot that results from rerouting one agent's traffic through
/// `candidate`, everything else held fixed.
///
/// The agent's windowed contribution is subtracted from every node it
/// currently loads and its full per-wave amount is added along the route the
/// current decisions induce from `candidate` on. The wave-throughput plane is
/// adjusted the same way using the most recent wave's route. Loads never go
/// negative: subtraction clips at zero, which only matters in the first few
/// waves after a route change.
pub fn hypothetical_snapshot(
    spec: &NetworkSpec,
    state: &WaveState,
    decisions: &DecisionMap,
    node: usize,
    dest_slot: usize,
    candidate: usize,
) -> WaveSnapshot {
    let pair = spec
        .pair_index(node, dest_slot)
        .expect("counterfactuals are defined at branching pairs");
    let nd = spec.destinations().len();
    let mut snap = WaveSnapshot::from_state(spec, state);

    let x_own = own_amount(spec, state, node, dest_slot);

    for v in 0..spec.node_count() {
        let c = state.own_node_contrib(pair, v);
        if c != 0.0 {
            let cell = v * nd + dest_slot;
            snap.xw[cell] = (snap.xw[cell] - c).max(0.0);
        }
    }
    let mut choices = decisions.choices().to_vec();
    choices[pair] = candidate;
    walk_chain(spec, &choices, node, dest_slot, |at| {
        snap.xw[at * nd + dest_slot] += x_own;
    });

    if let Some(prev) = state.last_decisions() {
        let x_prev = state.current_x(node, dest_slot);
        if x_prev != 0.0 {
            walk_chain(spec, prev, node, dest_slot, |at| {
                let cell = at * nd + dest_slot;
                snap.x[cell] = (snap.x[cell] - x_prev).max(0.0);
            });
        }
    }
    walk_chain(spec, &choices, node, dest_slot, |at| {
        snap.x[at * nd + dest_slot] += x_own;
    });

    snap
}

/// Shaped utility of the counterfactual snapshot for `candidate`.
pub fn hypothetical_wlr(
    spec: &NetworkSpec,
    state: &WaveState,
    decisions: &DecisionMap,
    node: usize,
    dest_slot: usize,
    candidate: usize,
) -> f64 {
    let snap = hypothetical_snapshot(spec, state, decisions, node, dest_slot, candidate);
    wave_wlr(spec, &snap, dest_slot)
}

/// The per-wave amount an agent reroutes: a source always injects its
/// commodities' packets; a router moves whatever reached it last wave.
pub(crate) fn own_amount(spec: &NetworkSpec, state: &WaveState, node: usize, dest_slot: usize) -> f64 {
    if spec.node(node).kind == NodeKind::Source {
        let dest = spec.destinations()[dest_slot];
        spec.commodities()
            .iter()
            .filter(|c| c.source == node && c.destination == dest)
            .map(|c| c.packets as f64)
            .sum()
    } else {
        state.current_x(node, dest_slot)
    }
}

// --- Tests -------------------------------------------------------------------------
