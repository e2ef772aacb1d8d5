//! Routing policies and the run loop that drives them.
//!
//! Each wave, every branching (router, destination) pair picks a next hop
//! before any packet moves, and all scores are read off the state the
//! previous wave left behind. Three policies are provided:
//!
//! * **ispa** re-derives a shortest path per pair at frozen windowed loads,
//!   the classical ideal of running a shortest-path algorithm everywhere at
//!   once.
//! * **fk** (full knowledge) scores each candidate hop by the shaped
//!   collective utility of its counterfactual snapshot (see [`crate::wlr`])
//!   and takes the minimum.
//! * **mb** (memory based) estimates that same utility from the pair's own
//!   observation history instead of computing it, steered back to **fk** on
//!   a coin flip per decision.
//!
//! Runs are deterministic given their seeds. Each run derives three named
//! RNG streams (bootstrap ties, decision ties, steering coins), so at
//! steering 1.0 a memory-based run consumes the tie stream in exact lockstep
//! with a full-knowledge run and reproduces its decision sequence verbatim.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{
    aggregate_metrics, run_wave, DecisionMap, ExperimentCell, SimConfig, WaveMetrics, WaveState,
};
use crate::seed::{stream_base, stream_seed};
use crate::topology::NetworkSpec;
use crate::wlr::{hypothetical_wlr, own_amount, wave_wlr, WaveSnapshot};

const STREAM_BOOTSTRAP_TIE: u64 = 0xB0;
const STREAM_TIE: u64 = 0x71;
const STREAM_STEERING: u64 = 0x5C;

// --- Policies and configuration -----------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Ispa,
    FullKnowledge,
    MemoryBased,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Ispa => "ispa",
            Policy::FullKnowledge => "fk",
            Policy::MemoryBased => "mb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ispa" => Some(Policy::Ispa),
            "fk" => Some(Policy::FullKnowledge),
            "mb" => Some(Policy::MemoryBased),
            _ => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PolicyConfig {
    pub policy: Policy,
    /// Probability that a memory-based decision is delegated to full
    /// knowledge. Ignored by the other policies.
    pub steering: f64,
    /// Waves of shortest-path routing run first to seed the training store.
    /// Only memory-based runs have this phase.
    pub bootstrap_waves: usize,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Ispa,
            steering: 0.5,
            bootstrap_waves: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("no training examples for router {router:?} toward {dest:?}; bootstrap first")]
    EmptyStore { router: String, dest: String },
    #[error("steering must lie in [0, 1], got {value}")]
    BadSteering { value: f64 },
}

// --- Training store --------------------------------------------------------------

/// One observation a decision point can learn from: the windowed flows on its
/// out-edges after a wave, and the shaped utility that wave realized.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: Vec<f64>,
    pub output: f64,
}

/// Append-only per-(router, destination) example lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingStore {
    map: BTreeMap<(u32, u32), Vec<TrainingExample>>,
}

impl TrainingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, node: usize, dest_slot: usize, example: TrainingExample) {
        self.map
            .entry((node as u32, dest_slot as u32))
            .or_default()
            .push(example);
    }

    pub fn examples(&self, node: usize, dest_slot: usize) -> &[TrainingExample] {
        self.map
            .get(&(node as u32, dest_slot as u32))
            .map_or(&[], |v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.map.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

// --- Single decisions --------------------------------------------------------------

/// A scored decision: the chosen hop, its score, and the full candidate
/// slate it won against. Scores are costs; lower wins; exact ties are broken
/// uniformly at random.
#[derive(Debug, Clone)]
pub struct Decision {
    pub hop: usize,
    pub estimate: f64,
    pub candidates: Vec<usize>,
    pub scores: Vec<f64>,
}

fn pick_min(candidates: Vec<usize>, scores: Vec<f64>, rng: &mut ChaCha8Rng) -> Decision {
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..candidates.len())
        .filter(|&i| scores[i] == best)
        .collect();
    let ix = if tied.len() == 1 {
        tied[0]
    } else {
        *tied.choose(rng).expect("at least one candidate")
    };
    Decision {
        hop: candidates[ix],
        estimate: best,
        candidates,
        scores,
    }
}

/// Shortest-path decision at frozen windowed loads: each candidate hop is
/// scored by the cheapest route through it, a route's cost being the sum of
/// its nodes' per-packet costs at their current windowed loads.
pub fn ispa_decide(
    spec: &NetworkSpec,
    state: &WaveState,
    node: usize,
    dest_slot: usize,
    rng: &mut ChaCha8Rng,
) -> Decision {
    let paths = spec
        .paths_for(node, dest_slot)
        .expect("shortest-path decisions happen at branching pairs");
    let candidates: Vec<usize> = spec.valid_next_hops(node, dest_slot).collect();
    let mut scores = vec![f64::INFINITY; candidates.len()];
    for path in paths {
        let cost: f64 = path
            .iter()
            .map(|&v| spec.node(v).cost.eval_raw(state.router_load(v)))
            .sum();
        let k = candidates
            .iter()
            .position(|&c| c == path[1])
            .expect("path's first hop is a candidate");
        scores[k] = scores[k].min(cost);
    }
    pick_min(candidates, scores, rng)
}

/// Full-knowledge decision: each candidate is scored by the shaped utility
/// of its counterfactual snapshot under the current decisions.
pub fn fk_decide(
    spec: &NetworkSpec,
    state: &WaveState,
    decisions: &DecisionMap,
    node: usize,
    dest_slot: usize,
    rng: &mut ChaCha8Rng,
) -> Decision {
    let candidates: Vec<usize> = spec.valid_next_hops(node, dest_slot).collect();
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&c| hypothetical_wlr(spec, state, decisions, node, dest_slot, c))
        .collect();
    pick_min(candidates, scores, rng)
}

/// Memory-based decision. With probability `steering` (coin from
/// `steer_rng`) the decision is delegated to [`fk_decide`]; otherwise each
/// candidate's utility is estimated by nearest neighbor over the pair's
/// stored examples and the minimum estimate wins.
///
/// The query for candidate `c` is the pair's out-edge flow vector with the
/// pair's own windowed flow subtracted out and its per-wave amount placed on
/// the edge to `c`. Among equally near examples the earliest stored wins.
///
/// Returns which policy actually made the call alongside the decision.
#[allow(clippy::too_many_arguments)]
pub fn mb_decide(
    spec: &NetworkSpec,
    state: &WaveState,
    store: &TrainingStore,
    decisions: &DecisionMap,
    node: usize,
    dest_slot: usize,
    steering: f64,
    steer_rng: &mut ChaCha8Rng,
    tie_rng: &mut ChaCha8Rng,
) -> Result<(Policy, Decision), RoutingError> {
    if !(0.0..=1.0).contains(&steering) {
        return Err(RoutingError::BadSteering { value: steering });
    }
    if steer_rng.random::<f64>() < steering {
        return Ok((
            Policy::FullKnowledge,
            fk_decide(spec, state, decisions, node, dest_slot, tie_rng),
        ));
    }

    let examples = store.examples(node, dest_slot);
    if examples.is_empty() {
        return Err(RoutingError::EmptyStore {
            router: spec.node(node).id.clone(),
            dest: spec.node(spec.destinations()[dest_slot]).id.clone(),
        });
    }

    let pair = spec
        .pair_index(node, dest_slot)
        .expect("memory-based decisions happen at branching pairs");
    let out = spec.out_neighbors(node);
    let flows: Vec<f64> = spec
        .out_edge_slots(node)
        .iter()
        .map(|&e| state.windowed_link_flow(e))
        .collect();
    let own: Vec<f64> = (0..out.len()).map(|k| state.own_hop_contrib(pair, k)).collect();
    let x_own = own_amount(spec, state, node, dest_slot);

    let candidates: Vec<usize> = spec.valid_next_hops(node, dest_slot).collect();
    let mut query = vec![0.0; out.len()];
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&c| {
            for k in 0..out.len() {
                query[k] = (flows[k] - own[k]).max(0.0) + if out[k] == c { x_own } else { 0.0 };
            }
            nearest_output(examples, &query)
        })
        .collect();
    Ok((Policy::MemoryBased, pick_min(candidates, scores, tie_rng)))
}

fn nearest_output(examples: &[TrainingExample], query: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    let mut output = 0.0;
    for ex in examples {
        let d2: f64 = ex
            .input
            .iter()
            .zip(query)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 < best {
            best = d2;
            output = ex.output;
        }
    }
    output
}

// --- Observers ------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Bootstrap,
    Main,
}

/// One decision, announced before it is written into the decision map. The
/// state and map are as the deciding policy saw them.
pub struct DecisionEvent<'a> {
    pub phase: Phase,
    /// Wave index local to the phase.
    pub wave: u64,
    pub node: usize,
    pub dest_slot: usize,
    /// The policy that actually made this call; steered memory-based
    /// decisions report as full knowledge.
    pub policy: Policy,
    pub chosen: usize,
    pub estimate: f64,
    pub candidates: &'a [usize],
    pub scores: &'a [f64],
    pub state: &'a WaveState,
    pub decisions: &'a DecisionMap,
}

pub struct WaveEndEvent<'a> {
    pub phase: Phase,
    pub wave: u64,
    pub state: &'a WaveState,
    pub metrics: &'a WaveMetrics,
}

/// Hooks into a run. All methods default to no-ops.
pub trait RunObserver {
    fn on_decision(&mut self, _event: &DecisionEvent<'_>) {}
    fn on_wave_end(&mut self, _event: &WaveEndEvent<'_>) {}
}

/// The trivial observer.
pub struct NoopObserver;

impl RunObserver for NoopObserver {}

// --- Run loop ----------------------------------------------------------------------

type Decider<'r> = dyn FnMut(
        &NetworkSpec,
        &WaveState,
        &DecisionMap,
        &TrainingStore,
        usize,
        usize,
    ) -> Result<(Policy, Decision), RoutingError>
    + 'r;

struct PhasePlan {
    phase: Phase,
    waves: usize,
    /// First wave index whose metrics are measured; `None` measures nothing.
    measure_from: Option<usize>,
    record_examples: bool,
}

fn run_phase(
    spec: &NetworkSpec,
    sim: &SimConfig,
    plan: PhasePlan,
    store: &mut TrainingStore,
    decide: &mut Decider<'_>,
    observer: &mut dyn RunObserver,
) -> Result<Vec<WaveMetrics>, RoutingError> {
    let mut state = WaveState::new(spec, sim.window_waves);
    let mut decisions = DecisionMap::initial(spec);
    let mut measured = Vec::new();

    for wave in 0..plan.waves {
        for pair in 0..spec.branching_pairs().len() {
            let (node, slot) = spec.branching_pairs()[pair];
            let (label, decision) = decide(spec, &state, &decisions, store, node, slot)?;
            observer.on_decision(&DecisionEvent {
                phase: plan.phase,
                wave: wave as u64,
                node,
                dest_slot: slot,
                policy: label,
                chosen: decision.hop,
                estimate: decision.estimate,
                candidates: &decision.candidates,
                scores: &decision.scores,
                state: &state,
                decisions: &decisions,
            });
            decisions.set(pair, decision.hop);
        }

        let (next, metrics) = run_wave(spec, state, &decisions);
        state = next;

        if plan.record_examples {
            let snap = WaveSnapshot::from_state(spec, &state);
            let utility_by_slot: Vec<f64> = (0..spec.destinations().len())
                .map(|slot| wave_wlr(spec, &snap, slot))
                .collect();
            for &(node, slot) in spec.branching_pairs() {
                let input: Vec<f64> = spec
                    .out_edge_slots(node)
                    .iter()
                    .map(|&e| state.windowed_link_flow(e))
                    .collect();
                store.push(
                    node,
                    slot,
                    TrainingExample {
                        input,
                        output: utility_by_slot[slot],
                    },
                );
            }
        }

        observer.on_wave_end(&WaveEndEvent {
            phase: plan.phase,
            wave: wave as u64,
            state: &state,
            metrics: &metrics,
        });
        if plan.measure_from.is_some_and(|from| wave >= from) {
            measured.push(metrics);
        }
    }
    Ok(measured)
}

fn rng_streams(sim: &SimConfig, pol: &PolicyConfig) -> (ChaCha8Rng, ChaCha8Rng, ChaCha8Rng) {
    let base = stream_base(sim.seed, pol.seed);
    (
        ChaCha8Rng::seed_from_u64(stream_seed(base, STREAM_BOOTSTRAP_TIE)),
        ChaCha8Rng::seed_from_u64(stream_seed(base, STREAM_TIE)),
        ChaCha8Rng::seed_from_u64(stream_seed(base, STREAM_STEERING)),
    )
}

/// Runs only the shortest-path seeding phase of a memory-based run and
/// returns the store it builds. A memory-based [`run_policy`] with the same
/// configuration starts from exactly this store.
pub fn bootstrap(spec: &NetworkSpec, sim: &SimConfig, pol: &PolicyConfig) -> TrainingStore {
    let (mut rng_boot, _, _) = rng_streams(sim, pol);
    let mut store = TrainingStore::new();
    let mut decide = |spec: &NetworkSpec,
                      state: &WaveState,
                      _map: &DecisionMap,
                      _store: &TrainingStore,
                      node: usize,
                      slot: usize| {
        Ok((Policy::Ispa, ispa_decide(spec, state, node, slot, &mut rng_boot)))
    };
    run_phase(
        spec,
        sim,
        PhasePlan {
            phase: Phase::Bootstrap,
            waves: pol.bootstrap_waves,
            measure_from: None,
            record_examples: true,
        },
        &mut store,
        &mut decide,
        &mut NoopObserver,
    )
    .expect("bootstrap decisions cannot fail");
    store
}

/// Runs a policy to completion and aggregates the measured waves.
pub fn run_policy(
    spec: &NetworkSpec,
    sim: &SimConfig,
    pol: &PolicyConfig,
) -> Result<ExperimentCell, RoutingError> {
    run_policy_observed(spec, sim, pol, &mut NoopObserver)
}

/// [`run_policy`] with observer hooks on every decision and wave.
///
/// Memory-based runs first bootstrap a store over `bootstrap_waves` waves of
/// shortest-path routing, then restart the simulation from scratch under the
/// memory-based policy, learning onward from every wave. The other policies
/// skip straight to the main phase. Measurement covers the last
/// `measure_waves` waves of the main phase.
pub fn run_policy_observed(
    spec: &NetworkSpec,
    sim: &SimConfig,
    pol: &PolicyConfig,
    observer: &mut dyn RunObserver,
) -> Result<ExperimentCell, RoutingError> {
    if pol.policy == Policy::MemoryBased && !(0.0..=1.0).contains(&pol.steering) {
        return Err(RoutingError::BadSteering {
            value: pol.steering,
        });
    }
    let (mut rng_boot, mut rng_tie, mut rng_steer) = rng_streams(sim, pol);

    let mut store = TrainingStore::new();
    if pol.policy == Policy::MemoryBased {
        let mut decide = |spec: &NetworkSpec,
                          state: &WaveState,
                          _map: &DecisionMap,
                          _store: &TrainingStore,
                          node: usize,
                          slot: usize| {
            Ok((Policy::Ispa, ispa_decide(spec, state, node, slot, &mut rng_boot)))
        };
        run_phase(
            spec,
            sim,
            PhasePlan {
                phase: Phase::Bootstrap,
                waves: pol.bootstrap_waves,
                measure_from: None,
                record_examples: true,
            },
            &mut store,
            &mut decide,
            observer,
        )?;
    }

    let steering = pol.steering;
    let mut decide: Box<Decider<'_>> = match pol.policy {
        Policy::Ispa => Box::new(
            move |spec: &NetworkSpec,
                  state: &WaveState,
                  _map: &DecisionMap,
                  _store: &TrainingStore,
                  node: usize,
                  slot: usize| {
                Ok((Policy::Ispa, ispa_decide(spec, state, node, slot, &mut rng_tie)))
            },
        ),
        Policy::FullKnowledge => Box::new(
            move |spec: &NetworkSpec,
                  state: &WaveState,
                  map: &DecisionMap,
                  _store: &TrainingStore,
                  node: usize,
                  slot: usize| {
                Ok((
                    Policy::FullKnowledge,
                    fk_decide(spec, state, map, node, slot, &mut rng_tie),
                ))
            },
        ),
        Policy::MemoryBased => Box::new(
            move |spec: &NetworkSpec,
                  state: &WaveState,
                  map: &DecisionMap,
                  store: &TrainingStore,
                  node: usize,
                  slot: usize| {
                mb_decide(
                    spec,
                    state,
                    store,
                    map,
                    node,
                    slot,
                    steering,
                    &mut rng_steer,
                    &mut rng_tie,
                )
            },
        ),
    };

    let measured = run_phase(
        spec,
        sim,
        PhasePlan {
            phase: Phase::Main,
            waves: sim.warmup_waves + sim.measure_waves,
            measure_from: Some(sim.warmup_waves),
            record_examples: pol.policy == Policy::MemoryBased,
        },
        &mut store,
        &mut decide,
        observer,
    )?;
    Ok(aggregate_metrics(&measured, sim.metric_mode))
}

// --- Tests ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_benchmark, enumerate_paths, BenchmarkId, Family, Variant};

    fn bench(family: Family, variant: Variant, loads: &[u32]) -> NetworkSpec {
        build_benchmark(BenchmarkId::new(family, variant), loads).unwrap()
    }

    fn short_sim(seed: u64) -> SimConfig {
        SimConfig {
            window_waves: 20,
            warmup_waves: 40,
            measure_waves: 40,
            seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn cold_shortest_path_takes_the_empty_crossing() {
        let spec = bench(Family::Hex, Variant::NetB, &[1]);
        let state = WaveState::new(&spec, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = spec.node_ix("s").unwrap();
        let d = ispa_decide(&spec, &state, s, 0, &mut rng);
        // At zero load the crossing route prices at 10 against 50 each side.
        assert_eq!(d.hop, spec.node_ix("cl").unwrap());
        assert_eq!(d.estimate, 10.0);
    }

    /// Every shortest-path decision must match a brute-force minimum over all
    /// enumerated routes, priced at the same frozen loads.
    #[test]
    fn shortest_path_agrees_with_enumeration() {
        struct Check<'s> {
            spec: &'s NetworkSpec,
            seen: usize,
        }
        impl RunObserver for Check<'_> {
            fn on_decision(&mut self, ev: &DecisionEvent<'_>) {
                let spec = self.spec;
                let from = &spec.node(ev.node).id;
                let to = &spec.node(spec.destinations()[ev.dest_slot]).id;
                let best = enumerate_paths(spec, from, to)
                    .unwrap()
                    .iter()
                    .map(|path| {
                        path.iter()
                            .map(|id| {
                                let v = spec.node_ix(id).unwrap();
                                spec.node(v).cost.eval_raw(ev.state.router_load(v))
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    (ev.estimate - best).abs() < 1e-12,
                    "wave {} at {}: {} vs {}",
                    ev.wave,
                    from,
                    ev.estimate,
                    best
                );
                self.seen += 1;
            }
        }
        let spec = bench(Family::Ray, Variant::NetB, &[3, 3]);
        let mut check = Check { spec: &spec, seen: 0 };
        run_policy_observed(
            &spec,
            &short_sim(5),
            &PolicyConfig {
                policy: Policy::Ispa,
                seed: 5,
                ..PolicyConfig::default()
            },
            &mut check,
        )
        .unwrap();
        assert_eq!(check.seen, 80 * spec.branching_pairs().len());
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let spec = bench(Family::Hex, Variant::NetB, &[4]);
        for policy in [Policy::Ispa, Policy::FullKnowledge, Policy::MemoryBased] {
            let pol = PolicyConfig {
                policy,
                steering: 0.5,
                bootstrap_waves: 15,
                seed: 9,
            };
            let a = run_policy(&spec, &short_sim(3), &pol).unwrap();
            let b = run_policy(&spec, &short_sim(3), &pol).unwrap();
            assert_eq!(a.mean.to_bits(), b.mean.to_bits(), "{policy}");
            assert_eq!(a.stddev.to_bits(), b.stddev.to_bits(), "{policy}");
        }
    }

    #[test]
    fn store_grows_through_both_phases() {
        let spec = bench(Family::Hex, Variant::NetB, &[2]);
        let sim = short_sim(11);
        let pol = PolicyConfig {
            policy: Policy::MemoryBased,
            steering: 0.5,
            bootstrap_waves: 25,
            seed: 2,
        };
        let mut store = bootstrap(&spec, &sim, &pol);
        for &(node, slot) in spec.branching_pairs() {
            assert_eq!(store.examples(node, slot).len(), 25);
        }
        assert_eq!(bootstrap(&spec, &sim, &pol), store);

        // A recording main phase appends one example per pair per wave.
        let (_, mut rng_tie, mut rng_steer) = rng_streams(&sim, &pol);
        let mut decide = |spec: &NetworkSpec,
                          state: &WaveState,
                          map: &DecisionMap,
                          store: &TrainingStore,
                          node: usize,
                          slot: usize| {
            mb_decide(spec, state, store, map, node, slot, 0.5, &mut rng_steer, &mut rng_tie)
        };
        run_phase(
            &spec,
            &sim,
            PhasePlan {
                phase: Phase::Main,
                waves: 30,
                measure_from: None,
                record_examples: true,
            },
            &mut store,
            &mut decide,
            &mut NoopObserver,
        )
        .unwrap();
        for &(node, slot) in spec.branching_pairs() {
            assert_eq!(store.examples(node, slot).len(), 55);
        }
    }

    #[test]
    fn memory_based_without_examples_errors() {
        let spec = bench(Family::Hex, Variant::NetB, &[2]);
        let pol = PolicyConfig {
            policy: Policy::MemoryBased,
            steering: 0.0,
            bootstrap_waves: 0,
            seed: 1,
        };
        match run_policy(&spec, &short_sim(1), &pol) {
            Err(RoutingError::EmptyStore { router, .. }) => assert!(!router.is_empty()),
            other => panic!("expected empty-store error, got {other:?}"),
        }
    }

    #[test]
    fn steering_outside_unit_interval_errors() {
        let spec = bench(Family::Hex, Variant::NetB, &[2]);
        for bad in [-0.1, 1.5, f64::NAN] {
            let pol = PolicyConfig {
                policy: Policy::MemoryBased,
                steering: bad,
                bootstrap_waves: 5,
                seed: 1,
            };
            assert!(matches!(
                run_policy(&spec, &short_sim(1), &pol),
                Err(RoutingError::BadSteering { .. })
            ));
        }
    }

    #[derive(Default)]
    struct LogRows {
        rows: Vec<(Phase, u64, usize, usize, Policy, usize, u64)>,
    }
    impl RunObserver for LogRows {
        fn on_decision(&mut self, ev: &DecisionEvent<'_>) {
            self.rows.push((
                ev.phase,
                ev.wave,
                ev.node,
                ev.dest_slot,
                ev.policy,
                ev.chosen,
                ev.estimate.to_bits(),
            ));
        }
    }

    /// At steering 1.0 every memory-based decision is delegated, and because
    /// coins, ties, and bootstrap ties draw from separate streams, the main
    /// phase replays a pure full-knowledge run exactly.
    #[test]
    fn fully_steered_run_replays_full_knowledge() {
        let spec = bench(Family::Hex, Variant::NetB, &[4]);
        let sim = short_sim(21);

        let mut fk_log = LogRows::default();
        let fk_cell = run_policy_observed(
            &spec,
            &sim,
            &PolicyConfig {
                policy: Policy::FullKnowledge,
                seed: 77,
                ..PolicyConfig::default()
            },
            &mut fk_log,
        )
        .unwrap();

        let mut mb_log = LogRows::default();
        let mb_cell = run_policy_observed(
            &spec,
            &sim,
            &PolicyConfig {
                policy: Policy::MemoryBased,
                steering: 1.0,
                bootstrap_waves: 30,
                seed: 77,
            },
            &mut mb_log,
        )
        .unwrap();

        let mb_main: Vec<_> = mb_log
            .rows
            .iter()
            .filter(|r| r.0 == Phase::Main)
            .cloned()
            .collect();
        assert_eq!(fk_log.rows, mb_main);
        assert!(mb_log.rows.iter().any(|r| r.0 == Phase::Bootstrap && r.4 == Policy::Ispa));
        assert_eq!(fk_cell.mean.to_bits(), mb_cell.mean.to_bits());
    }

    #[test]
    fn nearest_neighbor_prefers_earliest_on_ties() {
        let examples = vec![
            TrainingExample { input: vec![1.0, 0.0], output: 10.0 },
            TrainingExample { input: vec![0.0, 1.0], output: 20.0 },
            TrainingExample { input: vec![1.0, 0.0], output: 30.0 },
        ];
        // Equidistant from both unit vectors: the first stored example wins.
        assert_eq!(nearest_output(&examples, &[0.5, 0.5]), 10.0);
        assert_eq!(nearest_output(&examples, &[0.9, 0.1]), 10.0);
        assert_eq!(nearest_output(&examples, &[0.1, 0.9]), 20.0);
    }
}
