//! Systemic-risk measures: distances from the current parameters to their
//! critical stability and critical direction values.

use serde::{Deserialize, Serialize};

use crate::model::{Guards, Params};
use crate::regime::{self, CriticalParamSelector, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMode {
    Absolute,
    Relative,
}

fn apply_mode(gap: f64, sel: CriticalParamSelector, p: &Params, mode: DistanceMode) -> f64 {
    match (mode, sel) {
        (DistanceMode::Absolute, _) | (DistanceMode::Relative, CriticalParamSelector::Delta) => gap,
        (DistanceMode::Relative, _) => gap / sel.current(p),
    }
}

/// `lambda_crit - lambda` (absolute) or that gap over `lambda` (relative).
///
/// Exactly zero when `|a - 1| <= eps_a`. Negative values for exponent
/// selectors mean the system is unstable; a non-attainable critical value
/// still yields a (negative) distance.
pub fn stability_distance(p: &Params, sel: CriticalParamSelector, mode: DistanceMode) -> f64 {
    stability_distance_with(p, sel, mode, &Guards::default())
}

pub fn stability_distance_with(
    p: &Params,
    sel: CriticalParamSelector,
    mode: DistanceMode,
    guards: &Guards,
) -> f64 {
    if (p.composite_exponent() - 1.0).abs() <= guards.eps_a {
        return 0.0;
    }
    let gap = regime::critical_stability(p, sel).value - sel.current(p);
    apply_mode(gap, sel, p, mode)
}

/// `lambda_crit(i_t) - lambda`, or `None` where the critical direction value is undefined.
pub fn direction_distance(
    p: &Params,
    i_t: f64,
    sel: CriticalParamSelector,
    mode: DistanceMode,
) -> Option<f64> {
    let critical = regime::critical_direction(p, i_t, sel).ok()?;
    Some(apply_mode(critical.value - sel.current(p), sel, p, mode))
}

/// All measures for one selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectorRisk {
    pub critical_stability: f64,
    pub attainable: bool,
    pub stability_distance_abs: f64,
    pub stability_distance_rel: f64,
    pub critical_direction: Option<f64>,
    pub direction_distance_abs: Option<f64>,
    pub direction_distance_rel: Option<f64>,
}

impl SelectorRisk {
    fn evaluate(p: &Params, i_t: f64, sel: CriticalParamSelector) -> Self {
        let stability = regime::critical_stability(p, sel);
        SelectorRisk {
            critical_stability: stability.value,
            attainable: stability.attainable,
            stability_distance_abs: stability_distance(p, sel, DistanceMode::Absolute),
            stability_distance_rel: stability_distance(p, sel, DistanceMode::Relative),
            critical_direction: regime::critical_direction(p, i_t, sel)
                .ok()
                .map(|c| c.value),
            direction_distance_abs: direction_distance(p, i_t, sel, DistanceMode::Absolute),
            direction_distance_rel: direction_distance(p, i_t, sel, DistanceMode::Relative),
        }
    }
}

/// Every critical value and distance at one state, plus its classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub a: f64,
    pub i_t: f64,
    pub i_fix: Option<f64>,
    pub regime: Regime,
    pub alpha: SelectorRisk,
    pub beta: SelectorRisk,
    pub mu: SelectorRisk,
    pub nu: SelectorRisk,
    #[serde(rename = "Delta")]
    pub delta: SelectorRisk,
}

impl RiskReport {
    pub fn get(&self, sel: CriticalParamSelector) -> &SelectorRisk {
        match sel {
            CriticalParamSelector::Alpha => &self.alpha,
            CriticalParamSelector::Beta => &self.beta,
            CriticalParamSelector::Mu => &self.mu,
            CriticalParamSelector::Nu => &self.nu,
            CriticalParamSelector::Delta => &self.delta,
        }
    }
}

pub fn risk_report(p: &Params, i_t: f64) -> RiskReport {
    let regime = regime::classify(p, i_t);
    let eval = |sel| SelectorRisk::evaluate(p, i_t, sel);
    RiskReport {
        a: p.composite_exponent(),
        i_t,
        i_fix: regime.i_fix,
        regime,
        alpha: eval(CriticalParamSelector::Alpha),
        beta: eval(CriticalParamSelector::Beta),
        mu: eval(CriticalParamSelector::Mu),
        nu: eval(CriticalParamSelector::Nu),
        delta: eval(CriticalParamSelector::Delta),
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::regime::RegimeKind;

    fn cycle_params() -> Params {
        Params::new(1.0, 1.0, 0.499, 0.499, 105.5, 0.0096).unwrap()
    }

    #[test]
    fn stability_distance_examples() {
        let p = cycle_params();
        let d = stability_distance(&p, CriticalParamSelector::Alpha, DistanceMode::Absolute);
        assert!((d - 0.0040080160320641283).abs() < 1e-15);
        let d = stability_distance(&p, CriticalParamSelector::Delta, DistanceMode::Absolute);
        assert!((d - 0.0010015025043828895).abs() < 1e-15);
        let r = stability_distance(&p, CriticalParamSelector::Delta, DistanceMode::Relative);
        assert_eq!(r, d);
    }

    #[test]
    fn zero_at_criticality() {
        let p = Params::new(1.0, 1.0, 0.5, 0.5, 3.0, 0.2).unwrap();
        for sel in CriticalParamSelector::ALL {
            for mode in [DistanceMode::Absolute, DistanceMode::Relative] {
                assert_eq!(stability_distance(&p, sel, mode), 0.0);
            }
        }
    }

    #[test]
    fn relative_is_absolute_over_current() {
        let p = Params::new(1.3, 0.7, 0.4, 0.55, 3.0, 0.2).unwrap();
        for sel in CriticalParamSelector::EXPONENTS {
            let abs = stability_distance(&p, sel, DistanceMode::Absolute);
            let rel = stability_distance(&p, sel, DistanceMode::Relative);
            assert_eq!(rel, abs / sel.current(&p));
            let abs = direction_distance(&p, 0.07, sel, DistanceMode::Absolute).unwrap();
            let rel = direction_distance(&p, 0.07, sel, DistanceMode::Relative).unwrap();
            assert_eq!(rel, abs / sel.current(&p));
        }
    }

    #[test]
    fn direction_distance_delta_at_cycle_start() {
        let d = direction_distance(
            &cycle_params(),
            0.042,
            CriticalParamSelector::Delta,
            DistanceMode::Absolute,
        )
        .unwrap();
        assert!((d - -1.0245937797136701e-6).abs() < 1e-13);
    }

    #[test]
    fn direction_distance_absent_when_undefined() {
        let p = Params::new(1.2, 0.8, 0.6, 0.7, 3.0, 0.02).unwrap();
        assert_eq!(
            direction_distance(
                &p,
                3.0,
                CriticalParamSelector::Alpha,
                DistanceMode::Absolute
            ),
            None
        );
        let r = risk_report(&p, 3.0);
        assert_eq!(r.alpha.direction_distance_abs, None);
        assert_eq!(r.alpha.direction_distance_rel, None);
        assert!(r.beta.direction_distance_abs.is_some());
    }

    #[test]
    fn direction_distance_zero_on_boundary() {
        let p = Params::new(1.2, 0.8, 0.6, 0.7, 3.0, 0.02).unwrap();
        let beta = regime::critical_direction(&p, 1.5, CriticalParamSelector::Beta)
            .unwrap()
            .value;
        let on = p.with(crate::model::ParamName::Beta, beta).unwrap();
        let d = direction_distance(
            &on,
            1.5,
            CriticalParamSelector::Beta,
            DistanceMode::Absolute,
        )
        .unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn report_for_stable_cycle_parameters() {
        let r = risk_report(&cycle_params(), 0.042);
        assert_eq!(r.regime.kind, RegimeKind::Stable);
        for sel in CriticalParamSelector::ALL {
            assert!(r.get(sel).stability_distance_abs > 0.0);
        }
    }

    #[test]
    fn report_for_unstable_fixture() {
        let p = Params::with_fixed_point(1.0, 1.0, 0.55, 0.55, 0.04).unwrap();
        for (i_t, kind) in [(0.035, RegimeKind::Bubble), (0.045, RegimeKind::Crash)] {
            let r = risk_report(&p, i_t);
            assert_eq!(r.regime.kind, kind);
            for sel in CriticalParamSelector::ALL {
                assert!(r.get(sel).stability_distance_abs < 0.0);
            }
        }
    }

    #[test]
    fn report_matches_individual_calls() {
        let p = Params::new(1.3, 0.7, 0.4, 0.55, 3.0, 0.2).unwrap();
        let i_t = 0.09;
        let r = risk_report(&p, i_t);
        for sel in CriticalParamSelector::ALL {
            let s = r.get(sel);
            assert_eq!(
                s.critical_stability,
                regime::critical_stability(&p, sel).value
            );
            assert_eq!(
                s.stability_distance_abs,
                stability_distance(&p, sel, DistanceMode::Absolute)
            );
            assert_eq!(
                s.stability_distance_rel,
                stability_distance(&p, sel, DistanceMode::Relative)
            );
            assert_eq!(
                s.direction_distance_abs,
                direction_distance(&p, i_t, sel, DistanceMode::Absolute)
            );
            assert_eq!(
                s.direction_distance_rel,
                direction_distance(&p, i_t, sel, DistanceMode::Relative)
            );
        }
        assert_eq!(r.regime, regime::classify(&p, i_t));
    }
}
