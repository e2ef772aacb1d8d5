//! Report, decision-log, and trace CSVs. The report CSV is the output
//! contract: what it says is what the experiment measured, and reading it
//! back yields the same rows that were written.

use std::io;

use waveroute_core::{
    trace_rows, DecisionEvent, Family, MetricMode, NetworkSpec, Phase, Policy, RunObserver,
    TraceRow, Variant, WaveEndEvent,
};

use crate::experiment::{regime_string, ExperimentReport, ReportRow};
use crate::HarnessError;

pub const REPORT_HEADER: [&str; 9] = [
    "family",
    "variant",
    "regime",
    "policy",
    "steering",
    "metric_mode",
    "mean",
    "stddev",
    "braess",
];

pub fn write_report_csv<W: io::Write>(report: &ExperimentReport, out: W) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(REPORT_HEADER)?;
    for row in &report.rows {
        writer.write_record([
            row.family.as_str(),
            row.variant.as_str(),
            &regime_string(&row.regime),
            row.policy.as_str(),
            &row.steering.to_string(),
            row.metric_mode.as_str(),
            &row.mean.to_string(),
            &row.stddev.to_string(),
            if row.braess { "true" } else { "false" },
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn report_to_csv_string(report: &ExperimentReport) -> String {
    let mut buf = Vec::new();
    write_report_csv(report, &mut buf).expect("writing to a buffer cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn field_error(record: usize, message: String) -> HarnessError {
    HarnessError::CsvField { record, message }
}

/// Reads a report CSV back into rows. Notes are not part of the CSV, so the
/// returned report carries none.
pub fn read_report_csv<R: io::Read>(input: R) -> Result<ExperimentReport, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(REPORT_HEADER) {
        return Err(field_error(0, format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (ix, record) in reader.records().enumerate() {
        let record = record?;
        let number = ix + 1;
        let field = |col: usize| record.get(col).unwrap_or("");
        let family = Family::parse(field(0))
            .ok_or_else(|| field_error(number, format!("unknown family {:?}", field(0))))?;
        let variant = Variant::parse(field(1))
            .ok_or_else(|| field_error(number, format!("unknown variant {:?}", field(1))))?;
        let regime = field(2)
            .split(',')
            .map(|s| s.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| field_error(number, format!("bad regime {:?}", field(2))))?;
        let policy = Policy::parse(field(3))
            .ok_or_else(|| field_error(number, format!("unknown policy {:?}", field(3))))?;
        let steering = field(4)
            .parse::<f64>()
            .map_err(|_| field_error(number, format!("bad steering {:?}", field(4))))?;
        let metric_mode = MetricMode::parse(field(5))
            .ok_or_else(|| field_error(number, format!("unknown metric mode {:?}", field(5))))?;
        let mean = field(6)
            .parse::<f64>()
            .map_err(|_| field_error(number, format!("bad mean {:?}", field(6))))?;
        let stddev = field(7)
            .parse::<f64>()
            .map_err(|_| field_error(number, format!("bad stddev {:?}", field(7))))?;
        let braess = match field(8) {
            "true" => true,
            "false" => false,
            other => return Err(field_error(number, format!("bad braess flag {other:?}"))),
        };
        rows.push(ReportRow {
            family,
            variant,
            regime,
            policy,
            steering,
            metric_mode,
            mean,
            stddev,
            braess,
        });
    }
    Ok(ExperimentReport {
        rows,
        notes: Vec::new(),
    })
}

// --- Decision log -----------------------------------------------------------------

/// One routing decision of the measured phase.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionLogRow {
    pub wave: u64,
    pub router: String,
    pub dest: String,
    /// Policy that made the call; steered memory-based decisions log as fk.
    pub policy: Policy,
    pub chosen: String,
    pub estimate: f64,
}

/// Observer that collects the main-phase decision log. Bootstrap decisions
/// are training scaffolding and stay out of the log.
pub struct DecisionLogger<'s> {
    spec: &'s NetworkSpec,
    rows: Vec<DecisionLogRow>,
}

impl<'s> DecisionLogger<'s> {
    pub fn new(spec: &'s NetworkSpec) -> Self {
        Self {
            spec,
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[DecisionLogRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<DecisionLogRow> {
        self.rows
    }
}

impl RunObserver for DecisionLogger<'_> {
    fn on_decision(&mut self, event: &DecisionEvent<'_>) {
        if event.phase != Phase::Main {
            return;
        }
        let dest = self.spec.destinations()[event.dest_slot];
        self.rows.push(DecisionLogRow {
            wave: event.wave,
            router: self.spec.node(event.node).id.clone(),
            dest: self.spec.node(dest).id.clone(),
            policy: event.policy,
            chosen: self.spec.node(event.chosen).id.clone(),
            estimate: event.estimate,
        });
    }
}

pub fn write_decision_log_csv<W: io::Write>(
    rows: &[DecisionLogRow],
    out: W,
) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["wave", "router", "dest", "policy", "chosen", "estimate"])?;
    for row in rows {
        writer.write_record([
            &row.wave.to_string(),
            &row.router,
            &row.dest,
            row.policy.as_str(),
            &row.chosen,
            &row.estimate.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

// --- Per-wave trace ------------------------------------------------------------------

/// Observer that collects per-wave router traces over the main phase.
pub struct TraceLogger<'s> {
    spec: &'s NetworkSpec,
    rows: Vec<TraceRow>,
}

impl<'s> TraceLogger<'s> {
    pub fn new(spec: &'s NetworkSpec) -> Self {
        Self {
            spec,
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }
}

impl RunObserver for TraceLogger<'_> {
    fn on_wave_end(&mut self, event: &WaveEndEvent<'_>) {
        if event.phase != Phase::Main {
            return;
        }
        self.rows.extend(trace_rows(self.spec, event.state, event.wave));
    }
}

pub fn write_trace_csv<W: io::Write>(rows: &[TraceRow], out: W) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "wave",
        "router",
        "dest",
        "throughput",
        "windowed_load",
        "router_cost",
    ])?;
    for row in rows {
        writer.write_record([
            &row.wave.to_string(),
            &row.router,
            &row.dest,
            &row.throughput.to_string(),
            &row.windowed_load.to_string(),
            &row.router_cost.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
