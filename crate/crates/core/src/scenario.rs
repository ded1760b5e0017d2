//! Trigger-driven scenarios with time-varying parameters.
//!
//! A [`Scenario`] starts from fixed parameters and an initial rate and runs a
//! list of [`ScheduleRule`]s at every step. Each step:
//!
//! 1. records the state and its risk report under the parameters in force;
//! 2. evaluates the rules in listed order against the recorded state and
//!    applies every rule whose condition holds;
//! 3. advances the rate with the (possibly updated) parameters.
//!
//! Rules see each other's effects within a step: parameter conditions read the
//! live parameters and [`Condition::RuleFired`] includes rules that fired
//! earlier in the same pass. State conditions (rate, regime, distances) read
//! the recorded state.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{self, MarketState, ParamName, Params};
use crate::regime::{CriticalParamSelector, Regime, RegimeKind};
use crate::risk::{self, RiskReport};

pub const DEFAULT_RATE_FLOOR: f64 = 0.0123;

fn default_rate_floor() -> f64 {
    DEFAULT_RATE_FLOOR
}

fn default_sample_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Condition {
    Always,
    TimeAtLeast {
        t: u64,
    },
    /// `i <= threshold`; without a threshold the scenario's rate floor is used.
    RateBelow {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<f64>,
    },
    /// `i >= threshold`.
    RateAbove {
        threshold: f64,
    },
    RegimeIs {
        regime: RegimeKind,
    },
    /// Absolute stability distance of `selector` is strictly below `threshold`.
    DistanceBelow {
        selector: CriticalParamSelector,
        threshold: f64,
    },
    ParamAbove {
        param: ParamName,
        value: f64,
    },
    ParamBelow {
        param: ParamName,
        value: f64,
    },
    RuleFired {
        id: String,
    },
    All {
        of: Vec<Condition>,
    },
    Any {
        of: Vec<Condition>,
    },
    Not {
        of: Box<Condition>,
    },
}

struct RuleContext<'a> {
    t: u64,
    rate: f64,
    regime: RegimeKind,
    risk: &'a RiskReport,
    params: &'a Params,
    rate_floor: f64,
    fired: &'a HashSet<String>,
}

impl Condition {
    fn holds(&self, cx: &RuleContext<'_>) -> bool {
        match self {
            Condition::Always => true,
            Condition::TimeAtLeast { t } => cx.t >= *t,
            Condition::RateBelow { threshold } => cx.rate <= threshold.unwrap_or(cx.rate_floor),
            Condition::RateAbove { threshold } => cx.rate >= *threshold,
            Condition::RegimeIs { regime } => cx.regime == *regime,
            Condition::DistanceBelow {
                selector,
                threshold,
            } => cx.risk.get(*selector).stability_distance_abs < *threshold,
            Condition::ParamAbove { param, value } => cx.params.get(*param) > *value,
            Condition::ParamBelow { param, value } => cx.params.get(*param) < *value,
            Condition::RuleFired { id } => cx.fired.contains(id),
            Condition::All { of } => of.iter().all(|c| c.holds(cx)),
            Condition::Any { of } => of.iter().any(|c| c.holds(cx)),
            Condition::Not { of } => !of.holds(cx),
        }
    }

    fn validate(&self, path: &str, ids: &HashSet<&str>, out: &mut Vec<Violation>) {
        let mut finite = |name: &str, v: f64| {
            if !v.is_finite() {
                out.push(Violation::new(format!("{path}.{name}"), "must be finite"));
            }
        };
        match self {
            Condition::Always | Condition::TimeAtLeast { .. } | Condition::RegimeIs { .. } => {}
            Condition::RateBelow { threshold: Some(v) } | Condition::RateAbove { threshold: v } => {
                if !(v.is_finite() && *v > 0.0) {
                    out.push(Violation::new(
                        format!("{path}.threshold"),
                        "rate threshold must be finite and positive",
                    ));
                }
            }
            Condition::RateBelow { threshold: None } => {}
            Condition::DistanceBelow { threshold, .. } => finite("threshold", *threshold),
            Condition::ParamAbove { value, .. } | Condition::ParamBelow { value, .. } => {
                finite("value", *value)
            }
            Condition::RuleFired { id } => {
                if !ids.contains(id.as_str()) {
                    out.push(Violation::new(
                        format!("{path}.id"),
                        format!("no rule with id `{id}`"),
                    ));
                }
            }
            Condition::All { of } | Condition::Any { of } => {
                for (n, c) in of.iter().enumerate() {
                    c.validate(&format!("{path}.of[{n}]"), ids, out);
                }
            }
            Condition::Not { of } => of.validate(&format!("{path}.of"), ids, out),
        }
    }
}

/// Parameter change applied when a rule fires. `k` and `l` are allowed for experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    SetParam {
        param: ParamName,
        value: f64,
    },
    AddToParam {
        param: ParamName,
        delta: f64,
    },
    MultiplyParam {
        param: ParamName,
        factor: f64,
    },
    /// Moves toward `target` by at most `per_step_delta`, landing exactly on it.
    RampParam {
        param: ParamName,
        target: f64,
        per_step_delta: f64,
    },
}

impl Action {
    pub fn param(&self) -> ParamName {
        match self {
            Action::SetParam { param, .. }
            | Action::AddToParam { param, .. }
            | Action::MultiplyParam { param, .. }
            | Action::RampParam { param, .. } => *param,
        }
    }

    /// New parameters, or an error when the result is not strictly positive.
    pub fn apply(&self, p: &Params) -> Result<Params, ModelError> {
        let current = p.get(self.param());
        let value = match *self {
            Action::SetParam { value, .. } => value,
            Action::AddToParam { delta, .. } => current + delta,
            Action::MultiplyParam { factor, .. } => current * factor,
            Action::RampParam {
                target,
                per_step_delta,
                ..
            } => {
                let step = per_step_delta.abs();
                if (target - current).abs() <= step {
                    target
                } else if target > current {
                    current + step
                } else {
                    current - step
                }
            }
        };
        p.with(self.param(), value)
    }

    fn validate(&self, path: &str, out: &mut Vec<Violation>) {
        let (name, v) = match *self {
            Action::SetParam { value, .. } => ("value", value),
            Action::AddToParam { delta, .. } => ("delta", delta),
            Action::MultiplyParam { factor, .. } => ("factor", factor),
            Action::RampParam {
                target,
                per_step_delta,
                ..
            } => {
                if !(target.is_finite() && target > 0.0) {
                    out.push(Violation::new(
                        format!("{path}.target"),
                        "must be finite and positive",
                    ));
                }
                ("per_step_delta", per_step_delta)
            }
        };
        if !v.is_finite() {
            out.push(Violation::new(format!("{path}.{name}"), "must be finite"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleRule {
    pub id: String,
    pub condition: Condition,
    pub action: Action,
    #[serde(default)]
    pub one_shot: bool,
}

impl ScheduleRule {
    pub fn new(id: impl Into<String>, condition: Condition, action: Action) -> Self {
        ScheduleRule {
            id: id.into(),
            condition,
            action,
            one_shot: false,
        }
    }

    pub fn once(mut self) -> Self {
        self.one_shot = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub initial_params: Params,
    pub initial_rate: f64,
    pub horizon: u64,
    #[serde(default)]
    pub rules: Vec<ScheduleRule>,
    #[serde(default = "default_rate_floor")]
    pub rate_floor: f64,
    /// Output thinning only; every step is always computed.
    #[serde(default = "default_sample_every")]
    pub sample_every: u64,
}

/// A single failed invariant, addressed by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl Scenario {
    /// Every invariant violation, not just the first.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.initial_rate.is_finite() && self.initial_rate > 0.0) {
            out.push(Violation::new(
                "initial_rate",
                "must be finite and positive",
            ));
        }
        if self.horizon < 1 {
            out.push(Violation::new("horizon", "must be at least 1"));
        }
        if !(self.rate_floor.is_finite() && self.rate_floor > 0.0) {
            out.push(Violation::new("rate_floor", "must be finite and positive"));
        }
        if self.sample_every < 1 {
            out.push(Violation::new("sample_every", "must be at least 1"));
        }
        let ids: HashSet<&str> = self.rules.iter().map(|r| r.id.as_str()).collect();
        let mut seen = HashSet::new();
        for (n, rule) in self.rules.iter().enumerate() {
            let path = format!("rules[{n}]");
            if rule.id.is_empty() || rule.id.contains([',', ';', '\n', '\r', '"']) {
                out.push(Violation::new(
                    format!("{path}.id"),
                    "must be non-empty and free of , ; \" and newlines",
                ));
            }
            if !seen.insert(rule.id.as_str()) {
                out.push(Violation::new(
                    format!("{path}.id"),
                    format!("duplicate rule id `{}`", rule.id),
                ));
            }
            rule.condition
                .validate(&format!("{path}.condition"), &ids, &mut out);
            rule.action.validate(&format!("{path}.action"), &mut out);
        }
        out
    }
}

/// A rule whose condition held but whose action would have made a parameter non-positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedAction {
    pub rule_id: String,
    pub error: ModelError,
}

/// One recorded step: the state, the parameters that produced it, and its measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub i: f64,
    pub n_loans: f64,
    pub d_defaults: f64,
    pub params: Params,
    pub a: f64,
    pub i_fix: Option<f64>,
    pub regime: Regime,
    pub risk: RiskReport,
    pub fired_rules: Vec<String>,
    pub rejected: Vec<RejectedAction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    Overflow,
    Underflow,
}

/// Why a run stopped before its horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    /// Time of the last recorded state; advancing from it failed.
    pub at_t: u64,
    pub kind: DivergenceKind,
    pub error: ModelError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub abort: Option<Abort>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.abort.is_none()
    }

    pub fn regimes(&self) -> impl Iterator<Item = RegimeKind> + '_ {
        self.records.iter().map(|r| r.regime.kind)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot build the initial state: {0}")]
    Model(#[from] ModelError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Runs a scenario to its horizon, or until the rate leaves the representable range.
pub fn run_scenario(sc: &Scenario) -> Result<Trajectory, ScenarioError> {
    let violations = sc.validate();
    if !violations.is_empty() {
        return Err(ScenarioError::Invalid(violations));
    }
    let mut params = sc.initial_params;
    let mut state = MarketState::at_rate(0, sc.initial_rate, &params)?;
    let mut fired_ever: HashSet<String> = HashSet::new();
    let mut retired = vec![false; sc.rules.len()];
    let mut tr = Trajectory {
        records: Vec::with_capacity(sc.horizon.min(1 << 20) as usize),
        abort: None,
    };

    for t in 0..sc.horizon {
        let recorded = params;
        let report = risk::risk_report(&recorded, state.rate());
        let mut fired_rules = Vec::new();
        let mut rejected = Vec::new();
        for (n, rule) in sc.rules.iter().enumerate() {
            if retired[n] {
                continue;
            }
            let cx = RuleContext {
                t,
                rate: state.rate(),
                regime: report.regime.kind,
                risk: &report,
                params: &params,
                rate_floor: sc.rate_floor,
                fired: &fired_ever,
            };
            if !rule.condition.holds(&cx) {
                continue;
            }
            match rule.action.apply(&params) {
                Ok(next) => {
                    params = next;
                    fired_rules.push(rule.id.clone());
                    fired_ever.insert(rule.id.clone());
                    if rule.one_shot {
                        retired[n] = true;
                    }
                }
                Err(error) => rejected.push(RejectedAction {
                    rule_id: rule.id.clone(),
                    error,
                }),
            }
        }
        tr.records.push(TrajectoryRecord {
            t,
            i: state.rate(),
            n_loans: state.loans(),
            d_defaults: state.defaults(),
            params: recorded,
            a: report.a,
            i_fix: report.i_fix,
            regime: report.regime,
            risk: report,
            fired_rules,
            rejected,
        });
        if t + 1 == sc.horizon {
            break;
        }
        match model::step(&state, &params) {
            Ok(next) => state = next,
            Err(error) => {
                let kind = match error {
                    ModelError::RateUnderflow { .. } => DivergenceKind::Underflow,
                    ModelError::DomainOverflow { log_magnitude, .. } if log_magnitude < 0.0 => {
                        DivergenceKind::Underflow
                    }
                    _ => DivergenceKind::Overflow,
                };
                tr.abort = Some(Abort {
                    at_t: t,
                    kind,
                    error,
                });
                break;
            }
        }
    }
    Ok(tr)
}

/// A maximal run of one regime, `start_t..=end_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Phase {
    pub label: RegimeKind,
    pub start_t: u64,
    pub end_t: u64,
}

impl Phase {
    pub fn steps(&self) -> u64 {
        self.end_t - self.start_t + 1
    }
}

/// Minimum number of steps a regime must persist to count as a phase.
pub const MIN_PHASE_LEN: u64 = 2;

/// Splits a trajectory into contiguous regime phases.
///
/// Runs shorter than [`MIN_PHASE_LEN`] are absorbed into the preceding phase
/// (or the following one at the very start), then equal neighbours merge.
pub fn detect_phases(tr: &Trajectory) -> Vec<Phase> {
    let mut runs: Vec<Phase> = Vec::new();
    for r in &tr.records {
        match runs.last_mut() {
            Some(last) if last.label == r.regime.kind => last.end_t = r.t,
            _ => runs.push(Phase {
                label: r.regime.kind,
                start_t: r.t,
                end_t: r.t,
            }),
        }
    }
    if runs.iter().all(|p| p.steps() < MIN_PHASE_LEN) {
        return match (runs.first(), runs.last()) {
            (Some(first), Some(last)) => vec![Phase {
                label: first.label,
                start_t: first.start_t,
                end_t: last.end_t,
            }],
            _ => Vec::new(),
        };
    }

    let mut phases: Vec<Phase> = Vec::new();
    let mut pending_start: Option<u64> = None;
    for run in runs {
        if run.steps() >= MIN_PHASE_LEN {
            let start_t = pending_start.take().unwrap_or(run.start_t);
            match phases.last_mut() {
                Some(last) if last.label == run.label => last.end_t = run.end_t,
                _ => phases.push(Phase {
                    label: run.label,
                    start_t,
                    end_t: run.end_t,
                }),
            }
        } else if let Some(last) = phases.last_mut() {
            last.end_t = run.end_t;
        } else {
            pending_start.get_or_insert(run.start_t);
        }
    }
    phases
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Stable,
    Bubble,
    FullCycle,
    AlphaOnlyCrash,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Stable,
        PresetName::Bubble,
        PresetName::FullCycle,
        PresetName::AlphaOnlyCrash,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Stable => "stable",
            PresetName::Bubble => "bubble",
            PresetName::FullCycle => "full_cycle",
            PresetName::AlphaOnlyCrash => "alpha_only_crash",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown preset `{0}` (expected one of stable, bubble, full_cycle, alpha_only_crash)")]
pub struct UnknownPreset(pub String);

impl FromStr for PresetName {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownPreset(s.to_string()))
    }
}

/// The calm-economy parameters: `alpha = beta = 1`, `mu = nu = 0.499`, `k = 105.5`, `l = 0.0096`.
pub fn cycle_params() -> Params {
    Params::new(1.0, 1.0, 0.499, 0.499, 105.5, 0.0096).expect("valid constants")
}

pub const CYCLE_INITIAL_RATE: f64 = 0.042;

/// Knobs of the `full_cycle` preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleSettings {
    /// Steps of calm before banks start raising alpha.
    pub stable_steps: u64,
    /// Confidence ramp: alpha increment per step until the shock.
    pub alpha_increment: f64,
    /// Value beta jumps to when the rate reaches the floor.
    pub beta_shock: f64,
    /// Alpha decrement per step after the shock, down to its initial value.
    pub alpha_decrement: f64,
    /// Beta decrement per step once alpha is back, down to its initial value.
    pub beta_decrement: f64,
    pub horizon: u64,
    pub rate_floor: f64,
}

impl Default for CycleSettings {
    fn default() -> Self {
        CycleSettings {
            stable_steps: 100,
            alpha_increment: 0.002,
            beta_shock: 1.6,
            alpha_decrement: 0.01,
            beta_decrement: 0.02,
            horizon: 4000,
            rate_floor: DEFAULT_RATE_FLOOR,
        }
    }
}

pub mod rule_ids {
    pub const CONFIDENCE: &str = "confidence";
    pub const BETA_SHOCK: &str = "beta_shock";
    pub const ALPHA_COOLDOWN: &str = "alpha_cooldown";
    pub const BETA_RECOVERY: &str = "beta_recovery";
    pub const OPTIMISM: &str = "optimism";
}

/// Stable growth, a confidence-driven bubble, a beta shock at the rate floor,
/// the crash, and the recovery back to the initial parameters.
pub fn full_cycle(settings: &CycleSettings) -> Scenario {
    use rule_ids::*;
    let base = cycle_params();
    let shocked = || Condition::RuleFired {
        id: BETA_SHOCK.into(),
    };
    let rules = vec![
        ScheduleRule::new(
            CONFIDENCE,
            Condition::All {
                of: vec![
                    Condition::TimeAtLeast {
                        t: settings.stable_steps,
                    },
                    Condition::Not {
                        of: Box::new(shocked()),
                    },
                ],
            },
            Action::AddToParam {
                param: ParamName::Alpha,
                delta: settings.alpha_increment,
            },
        ),
        ScheduleRule::new(
            BETA_SHOCK,
            Condition::RateBelow { threshold: None },
            Action::SetParam {
                param: ParamName::Beta,
                value: settings.beta_shock,
            },
        )
        .once(),
        ScheduleRule::new(
            ALPHA_COOLDOWN,
            Condition::All {
                of: vec![
                    shocked(),
                    Condition::ParamAbove {
                        param: ParamName::Alpha,
                        value: base.alpha(),
                    },
                ],
            },
            Action::RampParam {
                param: ParamName::Alpha,
                target: base.alpha(),
                per_step_delta: settings.alpha_decrement,
            },
        ),
        ScheduleRule::new(
            BETA_RECOVERY,
            Condition::All {
                of: vec![
                    shocked(),
                    Condition::Not {
                        of: Box::new(Condition::ParamAbove {
                            param: ParamName::Alpha,
                            value: base.alpha(),
                        }),
                    },
                    Condition::ParamAbove {
                        param: ParamName::Beta,
                        value: base.beta(),
                    },
                ],
            },
            Action::RampParam {
                param: ParamName::Beta,
                target: base.beta(),
                per_step_delta: settings.beta_decrement,
            },
        ),
    ];
    Scenario {
        initial_params: base,
        initial_rate: CYCLE_INITIAL_RATE,
        horizon: settings.horizon,
        rules,
        rate_floor: settings.rate_floor,
        sample_every: 1,
    }
}

pub fn preset(name: PresetName) -> Scenario {
    match name {
        PresetName::Stable => Scenario {
            initial_params: cycle_params(),
            initial_rate: CYCLE_INITIAL_RATE,
            horizon: 400,
            rules: Vec::new(),
            rate_floor: DEFAULT_RATE_FLOOR,
            sample_every: 1,
        },
        PresetName::Bubble => Scenario {
            initial_params: cycle_params(),
            initial_rate: CYCLE_INITIAL_RATE,
            horizon: 200,
            rules: vec![ScheduleRule::new(
                rule_ids::CONFIDENCE,
                Condition::TimeAtLeast { t: 20 },
                Action::RampParam {
                    param: ParamName::Alpha,
                    target: 1.02,
                    per_step_delta: 0.002,
                },
            )],
            rate_floor: DEFAULT_RATE_FLOOR,
            sample_every: 1,
        },
        PresetName::FullCycle => full_cycle(&CycleSettings::default()),
        PresetName::AlphaOnlyCrash => Scenario {
            initial_params: Params::new(1.007, 1.0, 0.499, 0.499, 1e-12, 1.27e12)
                .expect("valid constants"),
            initial_rate: 0.03,
            horizon: 300,
            rules: vec![ScheduleRule::new(
                rule_ids::OPTIMISM,
                Condition::Always,
                Action::AddToParam {
                    param: ParamName::Alpha,
                    delta: 1e-4,
                },
            )],
            rate_floor: DEFAULT_RATE_FLOOR,
            sample_every: 1,
        },
    }
}
