use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use waveroute_core::{
    build_benchmark, hex_static_cost, lb_bounds, lb_optimal_k, lb_threshold_solve, run_policy_observed,
    two_router_game, BenchmarkId, CostFunction, PolicyConfig, SimConfig, ThresholdProblem,
};
use waveroute_harness::{
    braess_check, parse_config, regime_string, run_experiment, run_seed, steering_sweep,
    write_report_csv, write_trace_csv, ExperimentConfig, ExperimentReport, TraceLogger,
};

#[derive(Parser)]
#[command(name = "waveroute", version, about = "Wave-granular routing benchmarks and analyses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file and emit the report CSV.
    Simulate {
        config: PathBuf,
        /// Merge all sections into one CSV at this path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write a per-wave trace of the first cell's first run.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run experiments and report where the added link raised the cost.
    Braess { config: PathBuf },
    /// Cross the memory-based policy with a list of steering values.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1.0")]
        steering: Vec<f64>,
        /// Merge all sections into one CSV at this path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Closed-form analyses, no simulation involved.
    #[command(subcommand)]
    Analyze(Analyze),
}

#[derive(Subcommand)]
enum Analyze {
    /// Threshold load-balancer bounds and the improvement certificate.
    Lb(LbArgs),
    /// Static per-route costs of the hex benchmark.
    HexStatic {
        /// Travelers per route: two counts for the base network, three with
        /// the crossing. Omit for a tour of worked assignments.
        counts: Vec<u32>,
    },
    /// Two agents sharing one router versus using their own.
    TwoRouter,
}

#[derive(Args)]
struct LbArgs {
    /// Population and window size W. Costs are fixed to C_A(f) = f^2 against
    /// C_B(f) = f.
    #[arg(long, default_value_t = 1000)]
    window: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            output,
            trace,
        } => simulate(&config, output.as_deref(), trace.as_deref()),
        Command::Braess { config } => braess(&config),
        Command::Sweep {
            config,
            steering,
            output,
        } => sweep(&config, &steering, output.as_deref()),
        Command::Analyze(Analyze::Lb(args)) => analyze_lb(args.window),
        Command::Analyze(Analyze::HexStatic { counts }) => analyze_hex_static(&counts),
        Command::Analyze(Analyze::TwoRouter) => {
            analyze_two_router();
            Ok(())
        }
    }
}

fn load_experiments(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let experiments = parse_config(&text)?;
    if experiments.is_empty() {
        bail!("{} defines no experiments", path.display());
    }
    Ok(experiments)
}

fn emit_report(report: &ExperimentReport, dest: Option<&Path>) -> Result<()> {
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    match dest {
        Some(path) => {
            write_report_csv(report, fs::File::create(path)?)?;
            eprintln!("wrote {} rows to {}", report.rows.len(), path.display());
        }
        None => write_report_csv(report, io::stdout().lock())?,
    }
    Ok(())
}

/// Runs each section and routes its rows to the merged `--output` file, the
/// section's own `output` path, or stdout.
fn emit_all(
    experiments: &[ExperimentConfig],
    reports: Vec<ExperimentReport>,
    merged_dest: Option<&Path>,
) -> Result<()> {
    if let Some(path) = merged_dest {
        let mut merged = ExperimentReport::default();
        for report in reports {
            merged.rows.extend(report.rows);
            merged.notes.extend(report.notes);
        }
        return emit_report(&merged, Some(path));
    }
    for (config, report) in experiments.iter().zip(reports) {
        emit_report(&report, config.output.as_deref())?;
    }
    Ok(())
}

fn simulate(config_path: &Path, output: Option<&Path>, trace: Option<&Path>) -> Result<()> {
    let experiments = load_experiments(config_path)?;
    if let Some(path) = trace {
        write_first_cell_trace(&experiments[0], path)?;
    }
    let reports = experiments
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>, _>>()?;
    emit_all(&experiments, reports, output)
}

fn braess(config_path: &Path) -> Result<()> {
    let experiments = load_experiments(config_path)?;
    for config in &experiments {
        let report = run_experiment(config)?;
        let summary = braess_check(&report);
        println!("[{}]", config.label);
        for note in report.notes.iter().chain(&summary.notes) {
            println!("  note: {note}");
        }
        for finding in &summary.findings {
            println!(
                "  {}/b regime {} policy {}: {:.2} -> {:.2}",
                finding.family,
                regime_string(&finding.regime),
                finding.policy,
                finding.base_mean,
                finding.augmented_mean
            );
        }
        for (policy, hits) in &summary.per_policy {
            let compared = report
                .rows
                .iter()
                .filter(|r| {
                    r.policy == *policy && r.variant == waveroute_core::Variant::NetB
                })
                .count();
            println!("  {policy}: paradox in {hits} of {compared} augmented cells");
        }
    }
    Ok(())
}

fn sweep(config_path: &Path, steering: &[f64], output: Option<&Path>) -> Result<()> {
    let experiments = load_experiments(config_path)?;
    let swept: Vec<&ExperimentConfig> = experiments
        .iter()
        .filter(|c| c.policies.contains(&waveroute_core::Policy::MemoryBased))
        .collect();
    if swept.is_empty() {
        bail!("no section in {} enables the mb policy", config_path.display());
    }
    for skipped in experiments
        .iter()
        .filter(|c| !c.policies.contains(&waveroute_core::Policy::MemoryBased))
    {
        eprintln!("skipping [{}]: no mb policy", skipped.label);
    }
    let mut reports = Vec::new();
    let mut configs = Vec::new();
    for config in swept {
        reports.push(steering_sweep(config, steering)?);
        configs.push(config.clone());
    }
    emit_all(&configs, reports, output)
}

fn write_first_cell_trace(config: &ExperimentConfig, path: &Path) -> Result<()> {
    config.validate()?;
    let variant = config.variants[0];
    let regime = &config.regimes[0];
    let spec = build_benchmark(BenchmarkId::new(config.family, variant), regime)?;
    let sim = SimConfig {
        window_waves: config.window_waves,
        warmup_waves: config.warmup_waves,
        measure_waves: config.measure_waves,
        seed: run_seed(config.seed, config.family, variant, regime, 0),
        metric_mode: config.metric_mode,
    };
    let pol = PolicyConfig {
        policy: config.policies[0],
        steering: config.steering.first().copied().unwrap_or(0.5),
        bootstrap_waves: config.bootstrap_waves,
        seed: 0,
    };
    let mut logger = TraceLogger::new(&spec);
    run_policy_observed(&spec, &sim, &pol, &mut logger)?;
    write_trace_csv(logger.rows(), fs::File::create(path)?)?;
    eprintln!(
        "wrote {} trace rows for {}/{} to {}",
        logger.rows().len(),
        config.family,
        variant,
        path.display()
    );
    Ok(())
}

fn analyze_lb(window: usize) -> Result<()> {
    let quadratic = CostFunction::new(0.0, 0.0, 1.0, 0.0, 0.0)?;
    let linear = CostFunction::new(0.0, 1.0, 0.0, 0.0, 0.0)?;
    let p = ThresholdProblem::new(quadratic, linear, window);
    let w = window as f64;

    let k_lb = lb_threshold_solve(&p)?;
    let at_balance = lb_bounds(&p, k_lb)?;
    let opt = lb_optimal_k(&p);
    let at_opt = lb_bounds(&p, opt.k)?;

    println!("threshold load balancer, C_A(f) = f^2 vs C_B(f) = f, W = {window}");
    println!();
    println!("balance threshold   k_lb  = {k_lb:.4}  (k_lb/W  = {:.6})", k_lb / w);
    println!("  average cost there sits in [{:.6}, {:.6}]", at_balance.low1, at_balance.upper1);
    println!("  and can never drop below lb_lower = {:.6}", at_balance.lb_lower);
    println!();
    if opt.grid_fallback {
        println!("optimized threshold came from a dense grid (bound was not unimodal)");
    }
    println!("optimized threshold k_opt = {:.4}  (k_opt/W = {:.6})", opt.k, opt.k / w);
    println!("  average cost there is at most upper2 = {:.6}", at_opt.upper2);
    println!();
    println!(
        "certificate: lb_lower {:.6} > upper2 {:.6}, so equalizing the two",
        at_balance.lb_lower, at_opt.upper2
    );
    println!("options' costs is strictly worse than thresholding at k_opt");
    Ok(())
}

fn analyze_hex_static(counts: &[u32]) -> Result<()> {
    let show = |counts: &[u32]| -> Result<()> {
        let costs = hex_static_cost(counts)?;
        let labeled: Vec<String> = costs
            .iter()
            .enumerate()
            .map(|(ix, c)| format!("route {} = {c:.2}", ix + 1))
            .collect();
        println!("assignment {counts:?}: {}", labeled.join(", "));
        Ok(())
    };
    if counts.is_empty() {
        println!("per-route costs under static assignments (counts per route):");
        for case in [&[1, 0][..], &[3, 3], &[2, 2, 2], &[0, 0, 1]] {
            show(case)?;
        }
    } else {
        show(counts)?;
    }
    Ok(())
}

fn analyze_two_router() {
    let cubic = CostFunction::new(0.0, 0.0, 0.0, 1.0, 0.0).expect("constant coefficients");
    let double = CostFunction::new(0.0, 2.0, 0.0, 0.0, 0.0).expect("constant coefficients");
    let game = two_router_game(&cubic, &double);
    println!("two agents, shared router x^3 vs own routers 2x:");
    println!("  one agent alone on the shared router pays {:.2}", game.alone_shared);
    println!(
        "  both on the shared router pay {:.2} each ({:.2} total)",
        game.both_shared_per_agent, game.both_shared_total
    );
    println!(
        "  both on their own routers pay {:.2} each ({:.2} total)",
        game.both_alt_per_agent, game.both_alt_total
    );
    println!("  sharing looks cheaper to each mover, yet everyone ends up worse off");
}
