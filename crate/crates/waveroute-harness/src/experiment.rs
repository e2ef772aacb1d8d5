//! Fans an experiment out over cells and seeds, aggregates the per-run means,
//! and flags regimes where the augmented network costs more than the base
//! one.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use waveroute_core::seed::{fnv1a64, splitmix64};
use waveroute_core::{
    build_benchmark, run_policy, BenchmarkId, Family, MetricMode, Policy, PolicyConfig, SimConfig,
    Variant,
};

use crate::config::ExperimentConfig;
use crate::HarnessError;

/// One aggregated cell of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub family: Family,
    pub variant: Variant,
    pub regime: Vec<u32>,
    pub policy: Policy,
    /// Delegation probability for memory-based cells; 0 for the rest.
    pub steering: f64,
    pub metric_mode: MetricMode,
    /// Mean over runs of the per-run mean cost.
    pub mean: f64,
    /// Population standard deviation over the run means.
    pub stddev: f64,
    /// Variant-b cell costing more than its variant-a counterpart by more
    /// than the configured margin.
    pub braess: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    /// Cells that failed or could not be cross-checked, in row order.
    pub notes: Vec<String>,
}

pub fn regime_string(regime: &[u32]) -> String {
    let parts: Vec<String> = regime.iter().map(u32::to_string).collect();
    parts.join(",")
}

/// Seed for one run of one cell. The cell identity covers family, variant,
/// and regime but deliberately not policy or steering, so every policy in a
/// section sees the same sequence of per-run seeds and cross-policy
/// comparisons are paired.
pub fn run_seed(master: u64, family: Family, variant: Variant, regime: &[u32], run: u32) -> u64 {
    let traffic = format!("{}/{}/{}", family, variant, regime_string(regime));
    splitmix64(splitmix64(master ^ fnv1a64(traffic.as_bytes())).wrapping_add(run as u64))
}

#[derive(Debug, Clone)]
struct CellSpec {
    variant: Variant,
    regime: Vec<u32>,
    policy: Policy,
    steering: f64,
}

fn cell_list(config: &ExperimentConfig) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    for &variant in &config.variants {
        for regime in &config.regimes {
            for &policy in &config.policies {
                let steerings: &[f64] = if policy == Policy::MemoryBased {
                    &config.steering
                } else {
                    &[0.0]
                };
                for &steering in steerings {
                    cells.push(CellSpec {
                        variant,
                        regime: regime.clone(),
                        policy,
                        steering,
                    });
                }
            }
        }
    }
    cells
}

fn run_cell(config: &ExperimentConfig, cell: &CellSpec) -> Result<(f64, f64), String> {
    let id = BenchmarkId::new(config.family, cell.variant);
    let describe = || {
        format!(
            "{}/{} regime {} policy {} steering {}",
            config.family,
            cell.variant,
            regime_string(&cell.regime),
            cell.policy,
            cell.steering
        )
    };
    let spec = build_benchmark(id, &cell.regime).map_err(|e| format!("{}: {e}", describe()))?;

    let mut means = Vec::with_capacity(config.runs as usize);
    for run in 0..config.runs {
        let sim = SimConfig {
            window_waves: config.window_waves,
            warmup_waves: config.warmup_waves,
            measure_waves: config.measure_waves,
            seed: run_seed(config.seed, config.family, cell.variant, &cell.regime, run),
            metric_mode: config.metric_mode,
        };
        let pol = PolicyConfig {
            policy: cell.policy,
            steering: cell.steering,
            bootstrap_waves: config.bootstrap_waves,
            seed: 0,
        };
        let outcome = run_policy(&spec, &sim, &pol).map_err(|e| format!("{}: {e}", describe()))?;
        means.push(outcome.mean);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / means.len() as f64;
    Ok((mean, var.sqrt()))
}

/// Runs the cells on a small worker pool. Workers pull the next unclaimed
/// cell and send its outcome back; the collecting loop here is the only
/// writer of the result table.
fn run_cells(config: &ExperimentConfig, cells: &[CellSpec]) -> Vec<Result<(f64, f64), String>> {
    let workers = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cells.len());
    if workers <= 1 {
        return cells.iter().map(|cell| run_cell(config, cell)).collect();
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut outcomes: Vec<Option<Result<(f64, f64), String>>> = vec![None; cells.len()];
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let ix = next.fetch_add(1, Ordering::Relaxed);
                if ix >= cells.len() {
                    break;
                }
                if tx.send((ix, run_cell(config, &cells[ix]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (ix, outcome) in rx {
            outcomes[ix] = Some(outcome);
        }
    });
    outcomes.into_iter().map(|o| o.expect("every cell ran")).collect()
}

/// Runs every cell of the experiment and assembles the report. Failed cells
/// become notes and the rest of the report still comes out; the whole report
/// is a pure function of the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let cells = cell_list(config);
    let outcomes = run_cells(config, &cells);

    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (cell, outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok((mean, stddev)) => rows.push(ReportRow {
                family: config.family,
                variant: cell.variant,
                regime: cell.regime.clone(),
                policy: cell.policy,
                steering: cell.steering,
                metric_mode: config.metric_mode,
                mean,
                stddev,
                braess: false,
            }),
            Err(note) => notes.push(note),
        }
    }

    for ix in 0..rows.len() {
        if rows[ix].variant != Variant::NetB {
            continue;
        }
        let base = rows.iter().find(|r| {
            r.variant == Variant::NetA
                && r.regime == rows[ix].regime
                && r.policy == rows[ix].policy
                && r.steering.to_bits() == rows[ix].steering.to_bits()
        });
        match base {
            Some(base) => {
                rows[ix].braess = rows[ix].mean > base.mean * (1.0 + config.epsilon);
            }
            None if config.variants.contains(&Variant::NetA) => notes.push(format!(
                "{}/b regime {} policy {}: no base-variant cell to compare",
                config.family,
                regime_string(&rows[ix].regime),
                rows[ix].policy
            )),
            None => {}
        }
    }

    Ok(ExperimentReport { rows, notes })
}

/// One paradox hit: the augmented network cost more than the base one for the
/// same regime and policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BraessFinding {
    pub family: Family,
    pub regime: Vec<u32>,
    pub policy: Policy,
    pub steering: f64,
    pub base_mean: f64,
    pub augmented_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BraessSummary {
    pub findings: Vec<BraessFinding>,
    /// Paradox counts per policy, for policies present in the report.
    pub per_policy: Vec<(Policy, usize)>,
    pub notes: Vec<String>,
}

/// Reads the paradox flags out of a report and pairs each flagged cell with
/// its base-variant mean. Variant-b cells without a base counterpart are
/// skipped with a note.
pub fn braess_check(report: &ExperimentReport) -> BraessSummary {
    let mut summary = BraessSummary::default();
    let mut counts: Vec<(Policy, usize)> = Vec::new();
    for row in &report.rows {
        if row.variant != Variant::NetB {
            continue;
        }
        let base = report.rows.iter().find(|r| {
            r.variant == Variant::NetA
                && r.family == row.family
                && r.regime == row.regime
                && r.policy == row.policy
                && r.steering.to_bits() == row.steering.to_bits()
        });
        let Some(base) = base else {
            summary.notes.push(format!(
                "{}/b regime {} policy {}: missing base variant, skipped",
                row.family,
                regime_string(&row.regime),
                row.policy
            ));
            continue;
        };
        match counts.iter_mut().find(|(p, _)| *p == row.policy) {
            Some(entry) => {
                if row.braess {
                    entry.1 += 1;
                }
            }
            None => counts.push((row.policy, row.braess as usize)),
        }
        if row.braess {
            summary.findings.push(BraessFinding {
                family: row.family,
                regime: row.regime.clone(),
                policy: row.policy,
                steering: row.steering,
                base_mean: base.mean,
                augmented_mean: row.mean,
            });
        }
    }
    summary.per_policy = counts;
    summary
}

/// Runs the memory-based policy once per steering value. The endpoints 0.0
/// (never delegate) and 1.0 (always delegate) are included even when absent
/// from `values`.
pub fn steering_sweep(
    config: &ExperimentConfig,
    values: &[f64],
) -> Result<ExperimentReport, HarnessError> {
    if !config.policies.contains(&Policy::MemoryBased) {
        return Err(HarnessError::SweepNeedsMemoryBased {
            label: config.label.clone(),
        });
    }
    let mut steering: Vec<f64> = values.to_vec();
    for endpoint in [0.0, 1.0] {
        if !steering.iter().any(|&s| s == endpoint) {
            steering.push(endpoint);
        }
    }
    steering.sort_by(f64::total_cmp);
    steering.dedup();

    let mut sweep = config.clone();
    sweep.policies = vec![Policy::MemoryBased];
    sweep.steering = steering;
    run_experiment(&sweep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_hex() -> ExperimentConfig {
        let mut config = ExperimentConfig::new("tiny", Family::Hex);
        config.regimes = vec![vec![1], vec![3]];
        config.runs = 2;
        config.window_waves = 50;
        config.warmup_waves = 100;
        config.measure_waves = 150;
        config.seed = 11;
        config
    }

    #[test]
    fn run_seeds_split_cleanly() {
        let a = run_seed(1, Family::Hex, Variant::NetA, &[3], 0);
        let b = run_seed(1, Family::Hex, Variant::NetA, &[3], 1);
        let c = run_seed(1, Family::Hex, Variant::NetB, &[3], 0);
        let d = run_seed(2, Family::Hex, Variant::NetA, &[3], 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);

        let paired = run_seed(1, Family::Hex, Variant::NetA, &[3], 0);
        assert_eq!(a, paired);
    }

    #[test]
    fn reports_are_deterministic_and_flag_the_paradox() {
        let config = tiny_hex();
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert!(report.notes.is_empty());

        let row = |variant, regime: &[u32]| {
            report
                .rows
                .iter()
                .find(|r| r.variant == variant && r.regime == regime)
                .unwrap()
        };
        assert!(!row(Variant::NetA, &[1]).braess);
        assert!(!row(Variant::NetA, &[3]).braess);
        assert!(!row(Variant::NetB, &[1]).braess, "crossing helps at light load");
        assert!(row(Variant::NetB, &[3]).braess, "crossing hurts at heavy load");

        let again = run_experiment(&config).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn single_run_cells_have_zero_spread() {
        let mut config = tiny_hex();
        config.runs = 1;
        config.regimes = vec![vec![2]];
        config.variants = vec![Variant::NetA];
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].stddev, 0.0);
    }

    #[test]
    fn braess_summary_counts_per_policy() {
        let report = run_experiment(&tiny_hex()).unwrap();
        let summary = braess_check(&report);
        assert_eq!(summary.per_policy, vec![(Policy::Ispa, 1)]);
        assert_eq!(summary.findings.len(), 1);
        let finding = &summary.findings[0];
        assert_eq!(finding.regime, vec![3]);
        assert!(finding.augmented_mean > finding.base_mean);
        assert!(summary.notes.is_empty());

        let mut lonely = report.clone();
        lonely.rows.retain(|r| r.variant == Variant::NetB);
        let summary = braess_check(&lonely);
        assert_eq!(summary.findings.len(), 0);
        assert_eq!(summary.notes.len(), 2);
    }

    #[test]
    fn sweep_requires_and_isolates_the_learner() {
        let config = tiny_hex();
        assert!(matches!(
            steering_sweep(&config, &[0.5]),
            Err(HarnessError::SweepNeedsMemoryBased { .. })
        ));

        let mut config = config;
        config.policies = vec![Policy::Ispa, Policy::MemoryBased];
        config.variants = vec![Variant::NetB];
        config.regimes = vec![vec![2]];
        config.runs = 1;
        config.bootstrap_waves = 30;
        let report = steering_sweep(&config, &[0.5]).unwrap();
        let steerings: Vec<f64> = report.rows.iter().map(|r| r.steering).collect();
        assert_eq!(steerings, vec![0.0, 0.5, 1.0]);
        assert!(report.rows.iter().all(|r| r.policy == Policy::MemoryBased));
    }
}
