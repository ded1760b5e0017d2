//! Regime classification and critical parameters.
//!
//! The composite exponent `a` decides stability: the fixed point attracts for
//! `a < 1` and repels for `a > 1`, with a transcritical bifurcation at `a = 1`.
//! In the repelling case the side of the fixed point the rate sits on decides
//! between a bubble (rate collapses to zero) and a crash (rate explodes).
//!
//! Critical *stability* values are the single-parameter values that put `a`
//! on 1. Critical *direction* values are the ones that zero the position
//! expression at the current rate, flipping bubble and crash.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{ModelError, Result};
use crate::model::{self, Guards, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    Stable,
    AtFixedPoint,
    Bubble,
    Crash,
    BifurcationConstant,
    BifurcationToZero,
    BifurcationToInfinity,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 7] = [
        RegimeKind::Stable,
        RegimeKind::AtFixedPoint,
        RegimeKind::Bubble,
        RegimeKind::Crash,
        RegimeKind::BifurcationConstant,
        RegimeKind::BifurcationToZero,
        RegimeKind::BifurcationToInfinity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::Stable => "Stable",
            RegimeKind::AtFixedPoint => "AtFixedPoint",
            RegimeKind::Bubble => "Bubble",
            RegimeKind::Crash => "Crash",
            RegimeKind::BifurcationConstant => "BifurcationConstant",
            RegimeKind::BifurcationToZero => "BifurcationToZero",
            RegimeKind::BifurcationToInfinity => "BifurcationToInfinity",
        }
    }

    pub fn is_bifurcation(self) -> bool {
        matches!(
            self,
            RegimeKind::BifurcationConstant
                | RegimeKind::BifurcationToZero
                | RegimeKind::BifurcationToInfinity
        )
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        RegimeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown regime `{s}`"))
    }
}

/// Qualitative behaviour of the system started from a given rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub a: f64,
    /// Absent at the bifurcation point. May be `0` or `inf` when `ln i_fix`
    /// leaves the double range near `a = 1`; classification uses logs.
    pub i_fix: Option<f64>,
}

/// Classifies the trajectory started at `i0` under parameters `p`.
pub fn classify(p: &Params, i0: f64) -> Regime {
    classify_with(p, i0, &Guards::default())
}

pub fn classify_with(p: &Params, i0: f64, guards: &Guards) -> Regime {
    let a = p.composite_exponent();
    let log_fix = match model::log_fixed_point(p, guards) {
        Ok(v) => v,
        Err(_) => {
            let log_c = model::log_bifurcation_constant(p);
            let kind = if log_c.abs() <= guards.eps_c {
                RegimeKind::BifurcationConstant
            } else if log_c < 0.0 {
                RegimeKind::BifurcationToZero
            } else {
                RegimeKind::BifurcationToInfinity
            };
            return Regime {
                kind,
                a,
                i_fix: None,
            };
        }
    };
    let offset = i0.ln() - log_fix;
    let kind = if offset.abs() <= guards.eps_pos {
        RegimeKind::AtFixedPoint
    } else if a < 1.0 {
        RegimeKind::Stable
    } else if offset > 0.0 {
        RegimeKind::Crash
    } else {
        RegimeKind::Bubble
    };
    Regime {
        kind,
        a,
        i_fix: Some(log_fix.exp()),
    }
}

/// One of the four exponents, or the joint multiplier Delta applied to all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalParamSelector {
    Alpha,
    Beta,
    Mu,
    Nu,
    #[serde(rename = "Delta")]
    Delta,
}

impl CriticalParamSelector {
    pub const ALL: [CriticalParamSelector; 5] = [
        CriticalParamSelector::Alpha,
        CriticalParamSelector::Beta,
        CriticalParamSelector::Mu,
        CriticalParamSelector::Nu,
        CriticalParamSelector::Delta,
    ];

    pub const EXPONENTS: [CriticalParamSelector; 4] = [
        CriticalParamSelector::Alpha,
        CriticalParamSelector::Beta,
        CriticalParamSelector::Mu,
        CriticalParamSelector::Nu,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriticalParamSelector::Alpha => "alpha",
            CriticalParamSelector::Beta => "beta",
            CriticalParamSelector::Mu => "mu",
            CriticalParamSelector::Nu => "nu",
            CriticalParamSelector::Delta => "Delta",
        }
    }

    /// Current value of the selected quantity; Delta is a multiplier, so 1.
    pub fn current(self, p: &Params) -> f64 {
        match self {
            CriticalParamSelector::Alpha => p.alpha(),
            CriticalParamSelector::Beta => p.beta(),
            CriticalParamSelector::Mu => p.mu(),
            CriticalParamSelector::Nu => p.nu(),
            CriticalParamSelector::Delta => 1.0,
        }
    }
}

impl FromStr for CriticalParamSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        CriticalParamSelector::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown selector `{s}`"))
    }
}

/// A critical value with a flag telling whether it is a usable (positive) parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalValue {
    pub value: f64,
    pub attainable: bool,
}

impl CriticalValue {
    fn new(value: f64) -> Self {
        CriticalValue {
            value,
            attainable: value > 0.0,
        }
    }
}

/// Value at which `a` crosses 1 when only the selected quantity varies.
///
/// `alpha = (1 - beta*nu)/mu`, `beta = (1 - alpha*mu)/nu`,
/// `mu = (1 - beta*nu)/alpha`, `nu = (1 - alpha*mu)/beta`, `Delta = 1/sqrt(a)`.
pub fn critical_stability(p: &Params, sel: CriticalParamSelector) -> CriticalValue {
    let am = p.alpha() * p.mu();
    let bn = p.beta() * p.nu();
    let value = match sel {
        CriticalParamSelector::Alpha => (1.0 - bn) / p.mu(),
        CriticalParamSelector::Beta => (1.0 - am) / p.nu(),
        CriticalParamSelector::Mu => (1.0 - bn) / p.alpha(),
        CriticalParamSelector::Nu => (1.0 - am) / p.beta(),
        CriticalParamSelector::Delta => 1.0 / p.composite_exponent().sqrt(),
    };
    CriticalValue::new(value)
}

/// Value that zeroes the position expression at the current rate `i_t`.
///
/// Solves `alpha*mu*ln(i/k) + beta*nu*ln(i/l) - ln i = 0` for the selected
/// exponent (linear) or for the multiplier Delta (quadratic in Delta).
pub fn critical_direction(
    p: &Params,
    i_t: f64,
    sel: CriticalParamSelector,
) -> Result<CriticalValue> {
    if !(i_t.is_finite() && i_t > 0.0) {
        return Err(ModelError::InvalidParam {
            name: "i_t",
            value: i_t,
        });
    }
    let log_i = i_t.ln();
    let over_k = log_i - p.k().ln();
    let over_l = log_i - p.l().ln();
    let loan_term = p.alpha() * p.mu() * over_k;
    let default_term = p.beta() * p.nu() * over_l;
    let singular = || ModelError::SingularDenominator {
        selector: sel,
        rate: i_t,
    };

    let value = match sel {
        CriticalParamSelector::Alpha | CriticalParamSelector::Mu => {
            let other = if sel == CriticalParamSelector::Alpha {
                p.mu()
            } else {
                p.alpha()
            };
            let denom = other * over_k;
            if denom == 0.0 {
                return Err(singular());
            }
            (log_i - default_term) / denom
        }
        CriticalParamSelector::Beta | CriticalParamSelector::Nu => {
            let other = if sel == CriticalParamSelector::Beta {
                p.nu()
            } else {
                p.beta()
            };
            let denom = other * over_l;
            if denom == 0.0 {
                return Err(singular());
            }
            (log_i - loan_term) / denom
        }
        CriticalParamSelector::Delta => {
            let denom = loan_term + default_term;
            if denom == 0.0 {
                return Err(singular());
            }
            let radicand = log_i / denom;
            if radicand.is_nan() || radicand < 0.0 {
                return Err(ModelError::NegativeRadicand {
                    radicand,
                    rate: i_t,
                });
            }
            radicand.sqrt()
        }
    };
    Ok(CriticalValue::new(value))
}

/// Limit of [`critical_direction`] as `ln i_t -> ±inf`.
///
/// Equal to [`critical_stability`] for every selector; shares its code path.
pub fn asymptotic_critical_direction(p: &Params, sel: CriticalParamSelector) -> CriticalValue {
    critical_stability(p, sel)
}

/// Applies the multiplier `delta` to all four exponents.
pub fn scale_exponents(p: &Params, delta: f64) -> Result<Params> {
    Params::new(
        p.alpha() * delta,
        p.beta() * delta,
        p.mu() * delta,
        p.nu() * delta,
        p.k(),
        p.l(),
    )
}
