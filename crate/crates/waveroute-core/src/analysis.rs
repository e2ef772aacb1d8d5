//! Closed-form companions to the simulator: a two-agent shared-router game,
//! the one-shot marginal routing comparison, a static route-cost model of the
//! augmented hex network, and threshold dynamics for a two-option load
//! balancer.
//!
//! These small models give independent numbers the simulation can be checked
//! against, with no waves, windows, or randomness involved.

use thiserror::Error;

use crate::topology::CostFunction;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("expected {expected} per-path counts, got {got}")]
    PathCount { expected: usize, got: usize },
    #[error("threshold {k} outside the open range (1, {max})")]
    ThresholdOutOfRange { k: f64, max: f64 },
    #[error("cost difference does not change sign on [1, W-1]; no balance point")]
    NoBalancePoint,
}

// --- Two-router game -----------------------------------------------------------

/// Costs of the two-agent game where each agent routes one unit either over a
/// shared router or over its own alternative router.
///
/// Quoted outcomes of this game mix per-agent and total readings, so both are
/// reported: `both_shared_per_agent` is what one unit pays when both share,
/// `both_alt_total` is the system cost when both go their own way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoRouterOutcome {
    /// One agent alone on the shared router.
    pub alone_shared: f64,
    /// Each agent's cost when both use the shared router.
    pub both_shared_per_agent: f64,
    pub both_shared_total: f64,
    /// Each agent's cost when both use their own alternative.
    pub both_alt_per_agent: f64,
    pub both_alt_total: f64,
}

pub fn two_router_game(shared: &CostFunction, alt: &CostFunction) -> TwoRouterOutcome {
    let alone_shared = shared.eval_raw(1.0);
    let both_shared_per_agent = shared.eval_raw(2.0);
    let both_alt_per_agent = alt.eval_raw(1.0);
    TwoRouterOutcome {
        alone_shared,
        both_shared_per_agent,
        both_shared_total: 2.0 * both_shared_per_agent,
        both_alt_per_agent,
        both_alt_total: 2.0 * both_alt_per_agent,
    }
}

// --- Marginal decision rule -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    A,
    B,
    Even,
}

/// One packet facing routers A (currently empty) and B (carrying `y_b`),
/// judged two ways: by the packet's own cost, and by the change in total
/// cost its placement causes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalComparison {
    /// The packet's own cost on A: `V_A(1)`.
    pub own_cost_a: f64,
    /// The packet's own cost on B: `V_B(y_b + 1)`.
    pub own_cost_b: f64,
    /// Total-cost increase of placing it on B:
    /// `(y_b+1) V_B(y_b+1) - y_b V_B(y_b)`. (On A the increase is just
    /// `V_A(1)`.)
    pub marginal_cost_b: f64,
    /// Choice by own cost alone.
    pub selfish_pick: Pick,
    /// Choice by total-cost change.
    pub collective_pick: Pick,
    pub disagree: bool,
}

pub fn marginal_decision_rule(v_a: &CostFunction, v_b: &CostFunction, y_b: f64) -> MarginalComparison {
    assert!(y_b >= 0.0, "existing load cannot be negative");
    let own_cost_a = v_a.eval_raw(1.0);
    let own_cost_b = v_b.eval_raw(y_b + 1.0);
    let marginal_cost_b = (y_b + 1.0) * own_cost_b - y_b * v_b.eval_raw(y_b);
    let pick = |a: f64, b: f64| {
        if a < b {
            Pick::A
        } else if b < a {
            Pick::B
        } else {
            Pick::Even
        }
    };
    let selfish_pick = pick(own_cost_a, own_cost_b);
    let collective_pick = pick(own_cost_a, marginal_cost_b);
    MarginalComparison {
        own_cost_a,
        own_cost_b,
        marginal_cost_b,
        selfish_pick,
        collective_pick,
        disagree: selfish_pick != collective_pick,
    }
}

// --- Static hex route costs ----------------------------------------------------------

/// Per-traveler cost of each route of the hex network under a static
/// assignment, base variant: `a` travelers on the left route, `b` on the
/// right.
///
/// Left route: cheap `10x` router then `50 + x`; right route mirrored.
pub fn hex_static_cost_base(a: u32, b: u32) -> [f64; 2] {
    let with_crossing = hex_static_cost_augmented(a, b, 0);
    [with_crossing[0], with_crossing[1]]
}

/// Per-traveler route costs of the augmented hex network: `c` travelers take
/// the crossing route over both cheap routers and the `10 + x` bridge.
pub fn hex_static_cost_augmented(a: u32, b: u32, c: u32) -> [f64; 3] {
    let (a, b, c) = (a as f64, b as f64, c as f64);
    let left_cheap = 10.0 * (a + c);
    let right_cheap = 10.0 * (b + c);
    [
        left_cheap + (50.0 + a),
        (50.0 + b) + right_cheap,
        left_cheap + (10.0 + c) + right_cheap,
    ]
}

/// Route costs under a static assignment given as one count per route: two
/// routes in the base variant, three with the crossing.
pub fn hex_static_cost(assignment: &[u32]) -> Result<Vec<f64>, AnalysisError> {
    match assignment {
        [a, b] => Ok(hex_static_cost_base(*a, *b).to_vec()),
        [a, b, c] => Ok(hex_static_cost_augmented(*a, *b, *c).to_vec()),
        other => Err(AnalysisError::PathCount {
            expected: 3,
            got: other.len(),
        }),
    }
}

// --- Load-balancer threshold dynamics --------------------------------------------------

/// Two options A and B serving a population of `w` agents, one re-deciding
/// per step; costs are functions of the fraction of agents on each option.
#[derive(Debug, Clone)]
pub struct ThresholdProblem {
    pub c_a: CostFunction,
    pub c_b: CostFunction,
    /// Window length: the population size and the decision memory.
    pub w: usize,
}

impl ThresholdProblem {
    pub fn new(c_a: CostFunction, c_b: CostFunction, w: usize) -> Self {
        assert!(w >= 4, "window too short for threshold dynamics");
        Self { c_a, c_b, w }
    }
}

/// The load-balancing threshold: the `k` at which the two options' costs
/// even out, solving `C_A(k/W) = C_B(1 - k/W)` by bisection on `[1, W-1]`
/// to an absolute cost difference below 1e-12.
pub fn lb_threshold_solve(p: &ThresholdProblem) -> Result<f64, AnalysisError> {
    let w = p.w as f64;
    let diff = |k: f64| p.c_a.eval_raw(k / w) - p.c_b.eval_raw(1.0 - k / w);
    let (mut lo, mut hi) = (1.0, w - 1.0);
    let (d_lo, d_hi) = (diff(lo), diff(hi));
    if d_lo == 0.0 {
        return Ok(lo);
    }
    if d_hi == 0.0 {
        return Ok(hi);
    }
    if d_lo.signum() == d_hi.signum() {
        return Err(AnalysisError::NoBalancePoint);
    }
    let rising = d_lo < 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        let d = diff(mid);
        if d.abs() < 1e-12 || mid == lo || mid == hi {
            return Ok(mid);
        }
        if (d < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Average-cost bounds for the threshold policy at `k`, plus the two solved
/// thresholds they are usually evaluated at.
#[derive(Debug, Clone, Copy)]
pub struct BoundsReport {
    /// Upper bound on the policy's average cost at `k`.
    pub upper1: f64,
    /// Smoother upper bound, the one optimized over `k`.
    pub upper2: f64,
    /// Lower bound on the policy's average cost at `k`.
    pub low1: f64,
    /// Lower bound at the load-balancing threshold itself.
    pub lb_lower: f64,
    /// The load-balancing threshold.
    pub k_lb: f64,
    /// The `k` minimizing `upper2`.
    pub k_opt: f64,
}

fn upper1_at(p: &ThresholdProblem, k: f64) -> f64 {
    let w = p.w as f64;
    let k_star = k.floor();
    ((k_star + 1.0) / w) * p.c_a.eval_raw((k + 1.0) / w)
        + (1.0 - k_star / w) * p.c_b.eval_raw(1.0 - (k - 1.0) / w)
}

fn upper2_at(p: &ThresholdProblem, k: f64) -> f64 {
    let w = p.w as f64;
    let fa = (k + 1.0) / w;
    let fb = 1.0 + 2.0 / w - (k + 1.0) / w;
    fa * p.c_a.eval_raw(fa) + fb * p.c_b.eval_raw(fb)
}

fn low1_at(p: &ThresholdProblem, k: f64) -> f64 {
    let w = p.w as f64;
    let k_star = k.floor();
    (k_star / w) * p.c_a.eval_raw((k - 1.0) / w)
        + (1.0 - 1.0 / w - k_star / w) * p.c_b.eval_raw(1.0 - (k + 1.0) / w)
}

fn lb_lower_at(p: &ThresholdProblem, k: f64) -> f64 {
    let w = p.w as f64;
    let fa = (k - 1.0) / w;
    let fb = 1.0 - 2.0 / w - (k - 1.0) / w;
    fa * p.c_a.eval_raw(fa) + fb * p.c_b.eval_raw(fb)
}

pub fn lb_bounds(p: &ThresholdProblem, k: f64) -> Result<BoundsReport, AnalysisError> {
    let max = p.w as f64 - 1.0;
    if !(k > 1.0 && k < max) {
        return Err(AnalysisError::ThresholdOutOfRange { k, max });
    }
    let k_lb = lb_threshold_solve(p)?;
    let k_opt = lb_optimal_k(p).k;
    Ok(BoundsReport {
        upper1: upper1_at(p, k),
        upper2: upper2_at(p, k),
        low1: low1_at(p, k),
        lb_lower: lb_lower_at(p, k_lb),
        k_lb,
        k_opt,
    })
}

/// The threshold minimizing the smooth upper bound.
#[derive(Debug, Clone, Copy)]
pub struct OptimalThreshold {
    pub k: f64,
    /// Set when the pre-scan found the bound non-unimodal and the result came
    /// from a dense grid instead of golden-section search.
    pub grid_fallback: bool,
}

/// Minimizes the smooth upper bound over `(1, W-1)`: a coarse scan checks
/// unimodality, then golden-section search refines to 1e-9; a non-unimodal
/// scan falls back to a dense grid argmin.
pub fn lb_optimal_k(p: &ThresholdProblem) -> OptimalThreshold {
    let lo = 1.0;
    let hi = p.w as f64 - 1.0;
    let coarse = 2048;
    let at = |i: usize, n: usize| lo + (hi - lo) * i as f64 / n as f64;

    let values: Vec<f64> = (0..=coarse).map(|i| upper2_at(p, at(i, coarse))).collect();
    let mut descents_ended = false;
    let mut unimodal = true;
    for pair in values.windows(2) {
        if pair[1] < pair[0] {
            if descents_ended {
                unimodal = false;
                break;
            }
        } else if pair[1] > pair[0] {
            descents_ended = true;
        }
    }

    if !unimodal {
        let dense = 2_000_000;
        let best = (0..=dense)
            .map(|i| at(i, dense))
            .min_by(|&a, &b| upper2_at(p, a).total_cmp(&upper2_at(p, b)))
            .unwrap();
        return OptimalThreshold {
            k: best,
            grid_fallback: true,
        };
    }

    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (upper2_at(p, c), upper2_at(p, d));
    while b - a > 1e-9 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = upper2_at(p, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = upper2_at(p, d);
        }
    }
    OptimalThreshold {
        k: 0.5 * (a + b),
        grid_fallback: false,
    }
}

/// What a threshold-policy run settles into.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdRun {
    /// Mean per-step cost over the measured steps (after a 2W warmup).
    pub average_cost: f64,
    /// Floor of the band S(t) was observed in over the measured steps.
    pub empirical_k_star: i64,
    /// First step from which S(t) stayed inside {⌊k⌋, ⌊k⌋+1} to the end.
    pub absorbed_at: Option<usize>,
}

/// Simulates the threshold policy for `steps` steps: each step the count
/// `S(t)` of A-choices in the last `W` steps decides the next choice (A iff
/// `S(t) <= k`), which then pays `C_A(S(t)/W)` or `C_B(1 - S(t)/W)`.
///
/// The window starts empty and fills under the policy itself; statistics
/// cover everything after the first `2W` steps. The per-step change of S is
/// checked to be -1, 0, or +1 throughout.
pub fn lb_simulate(p: &ThresholdProblem, k: f64, steps: usize) -> ThresholdRun {
    assert!(steps >= 10 * p.w, "simulate at least ten windows");
    let w = p.w as f64;
    let warmup = 2 * p.w;

    let mut window = std::collections::VecDeque::with_capacity(p.w + 1);
    let mut s: i64 = 0;
    let mut trajectory: Vec<i64> = Vec::with_capacity(steps);
    let mut total = 0.0;
    let mut measured = 0usize;

    for t in 0..steps {
        let frac_a = s as f64 / w;
        let choose_a = (s as f64) <= k;
        let cost = if choose_a {
            p.c_a.eval_raw(frac_a)
        } else {
            p.c_b.eval_raw(1.0 - frac_a)
        };
        if t >= warmup {
            total += cost;
            measured += 1;
        }

        window.push_back(choose_a);
        if choose_a {
            s += 1;
        }
        if window.len() > p.w {
            if window.pop_front().unwrap() {
                s -= 1;
            }
        }
        if let Some(&prev) = trajectory.last() {
            assert!((s - prev).abs() <= 1, "S moved by more than one in a step");
        }
        trajectory.push(s);
    }

    let k_star = k.floor() as i64;
    let band = [k_star, k_star + 1];
    let absorbed_at = match trajectory.iter().rposition(|s| !band.contains(s)) {
        None => Some(0),
        Some(last_out) if last_out + 1 < trajectory.len() => Some(last_out + 1),
        Some(_) => None,
    };
    let empirical_k_star = trajectory[warmup.min(trajectory.len() - 1)..]
        .iter()
        .copied()
        .min()
        .unwrap_or(0);

    ThresholdRun {
        average_cost: total / measured as f64,
        empirical_k_star,
        absorbed_at,
    }
}

// --- Tests ------------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cf(c0: f64, c1: f64, c2: f64, c3: f64, clog: f64) -> CostFunction {
        CostFunction::new(c0, c1, c2, c3, clog).unwrap()
    }

    fn footnote_problem() -> ThresholdProblem {
        ThresholdProblem::new(cf(0.0, 0.0, 1.0, 0.0, 0.0), cf(0.0, 1.0, 0.0, 0.0, 0.0), 1000)
    }

    #[test]
    fn shared_router_game_outcomes() {
        let cubic = cf(0.0, 0.0, 0.0, 1.0, 0.0);
        let double = cf(0.0, 2.0, 0.0, 0.0, 0.0);
        let out = two_router_game(&cubic, &double);
        assert_eq!(out.alone_shared, 1.0);
        assert_eq!(out.both_shared_per_agent, 8.0);
        assert_eq!(out.both_shared_total, 16.0);
        assert_eq!(out.both_alt_per_agent, 2.0);
        assert_eq!(out.both_alt_total, 4.0);

        let linear = cf(0.0, 1.0, 0.0, 0.0, 0.0);
        let out = two_router_game(&linear, &linear);
        assert_eq!(out.alone_shared, 1.0);
        assert_eq!(out.both_shared_per_agent, 2.0);
        assert_eq!(out.both_alt_per_agent, 1.0);
    }

    #[test]
    fn marginal_rule_flags_the_disagreement() {
        let const12 = cf(12.0, 0.0, 0.0, 0.0, 0.0);
        let linear = cf(0.0, 1.0, 0.0, 0.0, 0.0);
        let cmp = marginal_decision_rule(&const12, &linear, 10.0);
        assert_eq!(cmp.own_cost_a, 12.0);
        assert_eq!(cmp.own_cost_b, 11.0);
        assert_eq!(cmp.marginal_cost_b, 21.0);
        assert_eq!(cmp.selfish_pick, Pick::B);
        assert_eq!(cmp.collective_pick, Pick::A);
        assert!(cmp.disagree);

        let zero = CostFunction::zero();
        let cmp = marginal_decision_rule(&const12, &zero, 5.0);
        assert_eq!(cmp.selfish_pick, Pick::B);
        assert_eq!(cmp.collective_pick, Pick::B);
        assert!(!cmp.disagree);

        let cmp = marginal_decision_rule(&linear, &linear, 0.0);
        assert_eq!(cmp.selfish_pick, Pick::Even);
        assert_eq!(cmp.collective_pick, Pick::Even);
        assert!(!cmp.disagree);
    }

    #[test]
    fn static_hex_costs_match_worked_cases() {
        assert_eq!(hex_static_cost(&[1, 0]).unwrap()[0], 61.0);
        assert_eq!(hex_static_cost(&[3, 3]).unwrap()[0], 83.0);
        assert_eq!(hex_static_cost(&[3, 3]).unwrap()[1], 83.0);
        let all = hex_static_cost(&[2, 2, 2]).unwrap();
        assert_eq!(all, vec![92.0, 92.0, 92.0]);
        assert_eq!(hex_static_cost(&[0, 0, 1]).unwrap()[2], 31.0);
        assert!(matches!(
            hex_static_cost(&[1, 2, 3, 4]),
            Err(AnalysisError::PathCount { .. })
        ));
    }

    #[test]
    fn static_hex_variants_agree_with_crossing_empty() {
        for a in 0..6 {
            for b in 0..6 {
                let base = hex_static_cost_base(a, b);
                let aug = hex_static_cost_augmented(a, b, 0);
                assert_eq!(base[0], aug[0]);
                assert_eq!(base[1], aug[1]);
            }
        }
    }

    #[test]
    fn balance_threshold_solutions() {
        let k = lb_threshold_solve(&footnote_problem()).unwrap();
        assert_abs_diff_eq!(k / 1000.0, 0.6180339887, epsilon = 1e-8);

        let linear = cf(0.0, 1.0, 0.0, 0.0, 0.0);
        let sym = ThresholdProblem::new(linear, linear, 1000);
        assert_abs_diff_eq!(lb_threshold_solve(&sym).unwrap() / 1000.0, 0.5, epsilon = 1e-9);

        let double = cf(0.0, 2.0, 0.0, 0.0, 0.0);
        let skew = ThresholdProblem::new(linear, double, 900);
        assert_abs_diff_eq!(
            lb_threshold_solve(&skew).unwrap() / 900.0,
            2.0 / 3.0,
            epsilon = 1e-9
        );

        let offset = ThresholdProblem::new(cf(2.0, 1.0, 0.0, 0.0, 0.0), linear, 1000);
        assert!(matches!(
            lb_threshold_solve(&offset),
            Err(AnalysisError::NoBalancePoint)
        ));
    }

    #[test]
    fn bounds_hit_the_worked_numbers() {
        let p = footnote_problem();
        let k_lb = lb_threshold_solve(&p).unwrap();
        let report = lb_bounds(&p, k_lb).unwrap();
        assert_abs_diff_eq!(report.upper1, 0.383496, epsilon = 1e-4);
        assert_abs_diff_eq!(report.low1, 0.380440, epsilon = 1e-4);
        assert_abs_diff_eq!(report.lb_lower, 0.380060, epsilon = 1e-4);
        assert!(report.low1 <= report.upper1);
        assert_abs_diff_eq!(report.k_lb / 1000.0, 0.618034, epsilon = 1e-6);

        assert!(matches!(
            lb_bounds(&p, 0.5),
            Err(AnalysisError::ThresholdOutOfRange { .. })
        ));
    }

    #[test]
    fn optimal_threshold_matches_closed_form() {
        let p = footnote_problem();
        let opt = lb_optimal_k(&p);
        assert!(!opt.grid_fallback);
        let w = 1000.0f64;
        let closed = -1.0 / 3.0 - 1.0 / w + (28.0 + 48.0 / w).sqrt() / 6.0;
        assert_abs_diff_eq!(opt.k / w, closed, epsilon = 1e-7);
        assert_abs_diff_eq!(upper2_at(&p, opt.k), 0.370678, epsilon = 1e-4);

        // The certificate: at its own balance point the policy provably pays
        // more than the optimized threshold guarantees.
        let k_lb = lb_threshold_solve(&p).unwrap();
        let report = lb_bounds(&p, k_lb).unwrap();
        assert!(report.lb_lower > upper2_at(&p, opt.k));
    }

    #[test]
    fn simulation_absorbs_and_respects_bounds() {
        let p = footnote_problem();
        let k_lb = lb_threshold_solve(&p).unwrap();
        let run = lb_simulate(&p, k_lb, 100_000);
        assert_eq!(run.empirical_k_star, 618);
        let absorbed = run.absorbed_at.expect("trajectory settles");
        assert!(absorbed < 10_000, "absorbed at {absorbed}");

        let report = lb_bounds(&p, k_lb).unwrap();
        assert!(run.average_cost >= report.low1, "{} vs {}", run.average_cost, report.low1);
        assert!(run.average_cost <= report.upper1, "{} vs {}", run.average_cost, report.upper1);

        let opt = lb_optimal_k(&p);
        let run_opt = lb_simulate(&p, opt.k, 100_000);
        assert!(run_opt.average_cost <= 0.371);
        assert!(run_opt.average_cost < run.average_cost);
    }

    #[test]
    fn tiny_threshold_saturates_to_the_second_option() {
        let p = ThresholdProblem::new(
            cf(0.0, 0.0, 1.0, 0.0, 0.0),
            cf(0.0, 1.0, 0.0, 0.0, 0.0),
            100,
        );
        let run = lb_simulate(&p, 0.5, 20_000);
        // At most one agent ever sits on A, so the cost sits near C_B(1).
        assert!((run.average_cost - 1.0).abs() < 0.05, "{}", run.average_cost);
        assert!(run.empirical_k_star <= 1);
    }
}
