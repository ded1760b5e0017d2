use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sweep::{SweepSpec, SweepTarget};
use crate::model::{ParamName, Params};
use crate::scenario::{
    full_cycle, preset, CycleSettings, PresetName, Scenario, ScheduleRule, Violation,
};

pub const DEFAULT_PRECISION: usize = 12;
pub const PRECISION_RANGE: std::ops::RangeInclusive<usize> = 6..=17;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub chart: Option<PathBuf>,
    pub chart_enabled: bool,
    /// Significant digits of every floating-point CSV field.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            csv: None,
            chart: None,
            chart_enabled: true,
            precision: DEFAULT_PRECISION,
        }
    }
}

/// A validated run: the scenario to simulate plus optional sweep and output settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<PresetName>,
    pub scenario: Scenario,
    pub sweep: Option<SweepSpec>,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed configuration at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration:{}", list(.0))]
    Invalid(Vec<Violation>),
}

fn list(vs: &[Violation]) -> String {
    vs.iter().map(|v| format!("\n  {v}")).collect()
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
}

impl RawParams {
    fn entries(&self) -> [(ParamName, Option<f64>); 6] {
        [
            (ParamName::Alpha, self.alpha),
            (ParamName::Beta, self.beta),
            (ParamName::Mu, self.mu),
            (ParamName::Nu, self.nu),
            (ParamName::K, self.k),
            (ParamName::L, self.l),
        ]
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    target: String,
    lo: f64,
    hi: f64,
    steps: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chart: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chart_enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    precision: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<RawParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cycle: Option<CycleSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rules: Option<Vec<ScheduleRule>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
}

fn position(text: &[u8], offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let column = offset
        - before
            .iter()
            .rposition(|&b| b == b'\n')
            .map_or(0, |p| p + 1)
        + 1;
    (line, column)
}

/// Parses and validates a JSON run configuration.
///
/// Fields left out fall back to the named preset (`stable` when none is given);
/// `rules` replaces the preset's rules wholesale. All violations are reported together.
pub fn parse_config(text: &[u8]) -> Result<RunConfig, ConfigError> {
    if let Err(e) = std::str::from_utf8(text) {
        let (line, column) = position(text, e.valid_up_to());
        return Err(ConfigError::Parse {
            line,
            column,
            message: "invalid UTF-8".into(),
        });
    }
    let raw: RawConfig = serde_json::from_slice(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(raw)
}

fn build(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let mut out = Vec::new();

    let preset_name = match raw.preset.as_deref().map(str::parse::<PresetName>) {
        None => None,
        Some(Ok(name)) => Some(name),
        Some(Err(e)) => {
            out.push(Violation::new("preset", e.to_string()));
            None
        }
    };
    let mut scenario = match (preset_name, &raw.cycle) {
        (Some(PresetName::FullCycle), cycle) => full_cycle(&cycle.unwrap_or_default()),
        (name, cycle) => {
            if cycle.is_some() {
                out.push(Violation::new(
                    "cycle",
                    "only valid with preset `full_cycle`",
                ));
            }
            preset(name.unwrap_or(PresetName::Stable))
        }
    };

    if let Some(overrides) = &raw.params {
        let mut p = scenario.initial_params;
        for (name, value) in overrides.entries() {
            let Some(v) = value else { continue };
            match p.with(name, v) {
                Ok(next) => p = next,
                Err(e) => out.push(Violation::new(format!("params.{name}"), e.to_string())),
            }
        }
        scenario.initial_params = p;
    }
    if let Some(v) = raw.initial_rate {
        scenario.initial_rate = v;
    }
    if let Some(v) = raw.horizon {
        scenario.horizon = v;
    }
    if let Some(v) = raw.rate_floor {
        scenario.rate_floor = v;
    }
    if let Some(v) = raw.sample_every {
        scenario.sample_every = v;
    }
    if let Some(rules) = raw.rules {
        scenario.rules = rules;
    }
    out.extend(scenario.validate());

    let sweep = raw.sweep.and_then(|s| {
        let target = match s.target.parse::<SweepTarget>() {
            Ok(t) => t,
            Err(e) => {
                out.push(Violation::new("sweep.target", e));
                return None;
            }
        };
        match SweepSpec::new(
            target,
            s.lo,
            s.hi,
            s.steps,
            scenario.initial_params,
            scenario.initial_rate,
        ) {
            Ok(spec) => Some(spec),
            Err(vs) => {
                out.extend(vs);
                None
            }
        }
    });

    let raw_out = raw.output.unwrap_or_default();
    let precision = raw_out.precision.map_or(DEFAULT_PRECISION, |p| p as usize);
    if !PRECISION_RANGE.contains(&precision) {
        out.push(Violation::new(
            "output.precision",
            format!(
                "must be between {} and {}",
                PRECISION_RANGE.start(),
                PRECISION_RANGE.end()
            ),
        ));
    }
    let output = OutputConfig {
        csv: raw_out.csv,
        chart: raw_out.chart,
        chart_enabled: raw_out.chart_enabled.unwrap_or(true),
        precision,
    };

    if !out.is_empty() {
        return Err(ConfigError::Invalid(out));
    }
    Ok(RunConfig {
        preset: preset_name,
        scenario,
        sweep,
        output,
    })
}

fn explicit_params(p: &Params) -> RawParams {
    RawParams {
        alpha: Some(p.alpha()),
        beta: Some(p.beta()),
        mu: Some(p.mu()),
        nu: Some(p.nu()),
        k: Some(p.k()),
        l: Some(p.l()),
    }
}

/// A complete, editable configuration for a preset, with every field spelled out.
pub fn preset_config_json(name: PresetName) -> String {
    let sc = preset(name);
    let raw = RawConfig {
        preset: Some(name.to_string()),
        params: Some(explicit_params(&sc.initial_params)),
        initial_rate: Some(sc.initial_rate),
        horizon: Some(sc.horizon),
        rate_floor: Some(sc.rate_floor),
        sample_every: Some(sc.sample_every),
        cycle: None,
        rules: Some(sc.rules),
        sweep: None,
        output: Some(RawOutput {
            csv: Some(PathBuf::from(format!("{name}.csv"))),
            chart: Some(PathBuf::from(format!("{name}.svg"))),
            chart_enabled: Some(true),
            precision: Some(DEFAULT_PRECISION as u64),
        }),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("config serializes");
    text.push('\n');
    text
}
