//! Wave-granular simulator for packet routing over layered cost-router
//! networks.
//!
//! A network is a DAG of sources, cost routers, dummies, and destinations in
//! which every route of a commodity has the same hop count. Time advances in
//! waves: each wave, every source injects its packets, routers forward them
//! along per-destination next-hop decisions, and every packet reaches its
//! destination within the wave. Router costs are functions of *windowed*
//! load, the mean per-wave throughput over the trailing window, so routing
//! decisions feed back into future costs.
//!
//! Three decision policies are provided: a shortest-path rule that greedily
//! minimizes each packet's own route cost at frozen loads, a collective rule
//! that scores candidate hops by their effect on a world utility, and a
//! memory-based variant of the collective rule that estimates that effect
//! from observed history instead of computing it. The `analysis` module holds
//! closed-form companions: a two-player routing game, a static route-cost
//! model, and threshold dynamics for a two-option load balancer.

pub mod analysis;
pub mod engine;
pub mod routing;
pub mod seed;
pub mod topology;
pub mod wlr;

pub use analysis::{
    hex_static_cost, lb_bounds, lb_optimal_k, lb_simulate, lb_threshold_solve,
    marginal_decision_rule, two_router_game, AnalysisError, BoundsReport, MarginalComparison,
    OptimalThreshold, Pick, ThresholdProblem, ThresholdRun, TwoRouterOutcome,
};
pub use engine::{
    aggregate_metrics, run_wave, trace_rows, DecisionMap, ExperimentCell, MetricMode, SimConfig,
    TraceRow, WaveMetrics, WaveState,
};
pub use routing::{
    bootstrap, fk_decide, ispa_decide, mb_decide, run_policy, run_policy_observed, Decision,
    DecisionEvent, NoopObserver, Phase, Policy, PolicyConfig, RoutingError, RunObserver,
    TrainingExample, TrainingStore, WaveEndEvent,
};
pub use topology::{
    build_benchmark, enumerate_paths, eval_cost, from_text, to_text, validate_network,
    BenchmarkId, Commodity, CostFunction, Family, NetworkSpec, NodeKind, NodeSpec, TopologyError,
    ValidationReport, Variant, Violation,
};
pub use wlr::{
    clamp_destination, hypothetical_snapshot, hypothetical_wlr, wave_wlr, world_reward,
    WaveSnapshot,
};
