//! Experiment files: a flat `key = value` format with one `[section]` per
//! experiment, checked into `configs/`.

use std::path::PathBuf;

use waveroute_core::{Family, MetricMode, Policy, Variant};

use crate::HarnessError;

/// One experiment: a benchmark family crossed with variants, load regimes,
/// policies, and steering values, each cell averaged over seeded runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Section name from the config file.
    pub label: String,
    pub family: Family,
    pub variants: Vec<Variant>,
    /// Per-source packet counts, one vector per load regime.
    pub regimes: Vec<Vec<u32>>,
    pub policies: Vec<Policy>,
    /// Steering values to cross with the memory-based policy. The other
    /// policies ignore steering and run once per cell.
    pub steering: Vec<f64>,
    pub runs: u32,
    pub window_waves: usize,
    pub warmup_waves: usize,
    pub measure_waves: usize,
    /// Master seed; per-run seeds are split off it.
    pub seed: u64,
    pub metric_mode: MetricMode,
    pub bootstrap_waves: usize,
    /// Relative margin before a variant-b mean counts as a paradox.
    pub epsilon: f64,
    pub output: Option<PathBuf>,
}

/// Cost aggregation the published tables use for each family.
pub fn default_metric_mode(family: Family) -> MetricMode {
    match family {
        Family::Butterfly | Family::Ray => MetricMode::SumOverSources,
        _ => MetricMode::GlobalPerPacket,
    }
}

impl ExperimentConfig {
    /// A single-section config with library defaults, ready to be narrowed
    /// down in tests and probes.
    pub fn new(label: &str, family: Family) -> Self {
        Self {
            label: label.to_string(),
            family,
            variants: vec![Variant::NetA, Variant::NetB],
            regimes: Vec::new(),
            policies: vec![Policy::Ispa],
            steering: vec![0.5],
            runs: 20,
            window_waves: 50,
            warmup_waves: 200,
            measure_waves: 800,
            seed: 0,
            metric_mode: default_metric_mode(family),
            bootstrap_waves: 100,
            epsilon: 0.02,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |message: String| {
            Err(HarnessError::InvalidExperiment {
                label: self.label.clone(),
                message,
            })
        };
        if self.runs == 0 {
            return fail("runs must be at least 1".into());
        }
        if self.variants.is_empty() || self.policies.is_empty() {
            return fail("needs at least one variant and one policy".into());
        }
        if self.regimes.is_empty() {
            return fail("needs at least one load regime".into());
        }
        let want = self.family.source_count();
        for regime in &self.regimes {
            if regime.len() != want {
                return fail(format!(
                    "regime {:?} has {} loads; {} has {} sources",
                    regime,
                    regime.len(),
                    self.family.as_str(),
                    want
                ));
            }
        }
        if self.steering.is_empty() && self.policies.contains(&Policy::MemoryBased) {
            return fail("memory-based policy needs at least one steering value".into());
        }
        for &s in &self.steering {
            if !(0.0..=1.0).contains(&s) {
                return fail(format!("steering {s} outside [0, 1]"));
            }
        }
        if self.window_waves == 0 || self.measure_waves == 0 {
            return fail("window and measurement must cover at least one wave".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return fail(format!("epsilon {} must be finite and nonnegative", self.epsilon));
        }
        Ok(())
    }
}

fn parse_list<T>(value: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).ok_or_else(|| format!("bad {what} {s:?}")))
        .collect()
}

fn apply_key(config: &mut ExperimentConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "family" => {
            config.family = Family::parse(value).ok_or_else(|| format!("unknown family {value:?}"))?;
            config.metric_mode = default_metric_mode(config.family);
        }
        "variants" => config.variants = parse_list(value, "variant", Variant::parse)?,
        "regimes" => {
            config.regimes = value
                .split('|')
                .map(|regime| parse_list(regime, "load", |s| s.parse::<u32>().ok()))
                .collect::<Result<_, _>>()?;
        }
        "policies" => config.policies = parse_list(value, "policy", Policy::parse)?,
        "steering" => config.steering = parse_list(value, "steering value", |s| s.parse::<f64>().ok())?,
        "runs" => config.runs = value.parse().map_err(|_| format!("bad runs {value:?}"))?,
        "window_waves" => config.window_waves = value.parse().map_err(|_| format!("bad window_waves {value:?}"))?,
        "warmup_waves" => config.warmup_waves = value.parse().map_err(|_| format!("bad warmup_waves {value:?}"))?,
        "measure_waves" => config.measure_waves = value.parse().map_err(|_| format!("bad measure_waves {value:?}"))?,
        "seed" => config.seed = value.parse().map_err(|_| format!("bad seed {value:?}"))?,
        "metric_mode" => {
            config.metric_mode =
                MetricMode::parse(value).ok_or_else(|| format!("unknown metric mode {value:?}"))?;
        }
        "bootstrap_waves" => {
            config.bootstrap_waves = value.parse().map_err(|_| format!("bad bootstrap_waves {value:?}"))?;
        }
        "epsilon" => config.epsilon = value.parse().map_err(|_| format!("bad epsilon {value:?}"))?,
        "output" => config.output = Some(PathBuf::from(value)),
        other => return Err(format!("unknown key {other:?}")),
    }
    Ok(())
}

/// Parses an experiment file. Blank lines and `#` comments are skipped; every
/// other line is a `[section]` header or a `key = value` pair. `family` keys
/// must come before keys that depend on it (`regimes` is checked against the
/// family's source count at the end of each section).
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>, HarnessError> {
    let mut experiments: Vec<ExperimentConfig> = Vec::new();
    let mut current: Option<(ExperimentConfig, Vec<String>)> = None;

    let mut close = |section: Option<(ExperimentConfig, Vec<String>)>| -> Result<(), HarnessError> {
        if let Some((config, keys)) = section {
            if !keys.iter().any(|k| k == "family") {
                return Err(HarnessError::InvalidExperiment {
                    label: config.label,
                    message: "missing family".into(),
                });
            }
            config.validate()?;
            experiments.push(config);
        }
        Ok(())
    };

    for (ix, raw) in text.lines().enumerate() {
        let line = ix + 1;
        let fail = |message: String| Err(HarnessError::ConfigLine { line, message });
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return fail("unterminated section header".into());
            };
            let name = name.trim();
            if name.is_empty() {
                return fail("empty section name".into());
            }
            close(current.take())?;
            current = Some((ExperimentConfig::new(name, Family::Hex), Vec::new()));
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return fail(format!("expected key = value, got {content:?}"));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some((config, seen)) = current.as_mut() else {
            return fail(format!("key {key:?} outside any [section]"));
        };
        if seen.iter().any(|k| k == key) {
            return fail(format!("duplicate key {key:?} in section {:?}", config.label));
        }
        seen.push(key.to_string());
        if let Err(message) = apply_key(config, key, value) {
            return fail(message);
        }
    }
    close(current.take())?;
    Ok(experiments)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# table runs
[hex-table]
family = hex
regimes = 1 | 2 | 3 | 4
runs = 20
window_waves = 200
warmup_waves = 600
seed = 7

[ray-probe]
family = ray
variants = b
regimes = 3,3
policies = ispa, mb
steering = 0.0, 0.5, 1.0
runs = 2
output = ray.csv
";

    #[test]
    fn parses_sections_with_defaults() {
        let configs = parse_config(SAMPLE).unwrap();
        assert_eq!(configs.len(), 2);

        let hex = &configs[0];
        assert_eq!(hex.label, "hex-table");
        assert_eq!(hex.family, Family::Hex);
        assert_eq!(hex.variants, vec![Variant::NetA, Variant::NetB]);
        assert_eq!(hex.regimes.len(), 4);
        assert_eq!(hex.regimes[2], vec![3]);
        assert_eq!(hex.policies, vec![Policy::Ispa]);
        assert_eq!(hex.window_waves, 200);
        assert_eq!(hex.warmup_waves, 600);
        assert_eq!(hex.measure_waves, 800);
        assert_eq!(hex.seed, 7);
        assert_eq!(hex.metric_mode, MetricMode::GlobalPerPacket);
        assert!(hex.output.is_none());

        let ray = &configs[1];
        assert_eq!(ray.family, Family::Ray);
        assert_eq!(ray.variants, vec![Variant::NetB]);
        assert_eq!(ray.policies, vec![Policy::Ispa, Policy::MemoryBased]);
        assert_eq!(ray.steering, vec![0.0, 0.5, 1.0]);
        assert_eq!(ray.metric_mode, MetricMode::SumOverSources);
        assert_eq!(ray.output.as_deref(), Some(std::path::Path::new("ray.csv")));
    }

    fn line_of(err: HarnessError) -> usize {
        match err {
            HarnessError::ConfigLine { line, .. } => line,
            other => panic!("expected a line error, got {other}"),
        }
    }

    #[test]
    fn rejects_malformed_files() {
        assert_eq!(line_of(parse_config("family = hex\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_config("[x]\nfamily hex\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_config("[x]\nfamly = hex\n").unwrap_err()), 2);
        assert_eq!(
            line_of(parse_config("[x]\nruns = 1\nruns = 2\n").unwrap_err()),
            3
        );
        assert_eq!(line_of(parse_config("[x\nfamily = hex\n").unwrap_err()), 1);
    }

    #[test]
    fn validation_checks_regimes_against_sources() {
        let err = parse_config("[x]\nfamily = butterfly\nregimes = 1,1\n").unwrap_err();
        assert!(matches!(err, HarnessError::InvalidExperiment { .. }), "{err}");
        let err = parse_config("[x]\nregimes = 1,1\n").unwrap_err();
        assert!(err.to_string().contains("missing family"), "{err}");

        let mut config = ExperimentConfig::new("probe", Family::Hex);
        config.regimes = vec![vec![1]];
        config.validate().unwrap();
        config.runs = 0;
        assert!(config.validate().is_err());
        config.runs = 1;
        config.steering = vec![1.5];
        assert!(config.validate().is_err());
    }
}
