//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use umwe::io::{run_sweep, SweepSpec, SweepTarget};
use umwe::model::{self, MarketState, ParamName, Params};
use umwe::regime::{self, classify, CriticalParamSelector, RegimeKind};
use umwe::risk::{stability_distance, DistanceMode};
use umwe::scenario::{cycle_params, detect_phases, preset, rule_ids, run_scenario, PresetName};
use umwe::ModelError;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check, Duration);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel(x: f64, y: f64) -> f64 {
    ((x - y) / y).abs()
}

fn model_err(e: ModelError) -> String {
    e.to_string()
}

fn fixed_point_reproduction() -> Check {
    let fix = model::fixed_point(&cycle_params()).map_err(model_err)?;
    ensure!((fix - 0.04186).abs() <= 5e-5, "i_fix = {fix}");
    Ok(())
}

/// Iterates until the step fails, returning the visited rates and the error.
fn run_until_guard(p: &Params, i0: f64) -> (Vec<f64>, Option<ModelError>) {
    let mut s = MarketState::at_rate(0, i0, p).unwrap();
    let mut rates = vec![i0];
    for _ in 0..100_000 {
        match model::step(&s, p) {
            Ok(next) => {
                rates.push(next.rate());
                s = next;
            }
            Err(e) => return (rates, Some(e)),
        }
    }
    (rates, None)
}

fn regime_reproduction() -> Check {
    let stable = Params::with_fixed_point(1.0, 1.0, 0.45, 0.45, 0.04).map_err(model_err)?;
    ensure!(
        classify(&stable, 0.045).kind == RegimeKind::Stable,
        "a = 0.9 not Stable"
    );
    let mut s = MarketState::at_rate(0, 0.045, &stable).map_err(model_err)?;
    for _ in 0..200 {
        let next = model::step(&s, &stable).map_err(model_err)?;
        ensure!(
            next.rate() < s.rate() && next.rate() > 0.04,
            "approach not monotone at t = {}",
            s.t()
        );
        s = next;
    }
    ensure!((s.rate() - 0.04).abs() < 1e-6, "i(200) = {}", s.rate());

    let unstable = Params::with_fixed_point(1.0, 1.0, 0.55, 0.55, 0.04).map_err(model_err)?;
    ensure!(
        classify(&unstable, 0.035).kind == RegimeKind::Bubble,
        "i0 = 0.035 not Bubble"
    );
    let (rates, err) = run_until_guard(&unstable, 0.035);
    ensure!(
        rates.windows(2).all(|w| w[1] < w[0]),
        "bubble not strictly decreasing"
    );
    ensure!(
        matches!(err, Some(ModelError::RateUnderflow { .. })),
        "bubble ended with {err:?}"
    );

    ensure!(
        classify(&unstable, 0.045).kind == RegimeKind::Crash,
        "i0 = 0.045 not Crash"
    );
    let (rates, err) = run_until_guard(&unstable, 0.045);
    ensure!(
        rates.windows(2).all(|w| w[1] > w[0]),
        "crash not strictly increasing"
    );
    ensure!(
        matches!(err, Some(ModelError::DomainOverflow { .. })),
        "crash ended with {err:?}"
    );
    Ok(())
}

/// Random parameters with both channel exponents in [0.05, 0.6) and scales near 1.
fn random_params(rng: &mut ChaCha8Rng) -> Params {
    let am = rng.gen_range(0.05..0.6);
    let bn = rng.gen_range(0.05..0.6);
    let mu = rng.gen_range(0.1..1.0);
    let nu = rng.gen_range(0.1..1.0);
    let k = rng.gen_range(0.8f64.ln()..1.25f64.ln()).exp();
    let l = rng.gen_range(0.8f64.ln()..1.25f64.ln()).exp();
    Params::new(am / mu, bn / nu, mu, nu, k, l).unwrap()
}

fn closed_form_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = rng.gen_range(0.5..0.999);
        let share = rng.gen_range(0.1..0.9);
        let alpha = rng.gen_range(0.5..2.0);
        let beta = rng.gen_range(0.5..2.0);
        let (am, bn) = (share * a, (1.0 - share) * a);
        let k: f64 = rng.gen_range(1e-3f64.ln()..1e3f64.ln()).exp();
        let i_fix: f64 = rng.gen_range(0.005f64.ln()..0.5f64.ln()).exp();
        // place the fixed point: ln c = (1 - a) ln i_fix
        let ln_l = (-(1.0 - a) * i_fix.ln() - am * k.ln()) / bn;
        let p =
            Params::new(alpha, beta, am / alpha, bn / beta, k, ln_l.exp()).map_err(model_err)?;
        let i0 = rng.gen_range(0.001..0.5);
        let mut s = MarketState::at_rate(0, i0, &p).map_err(model_err)?;
        for t in 1..=200 {
            s = model::step(&s, &p).map_err(model_err)?;
            worst = worst.max(rel(s.rate(), model::rate_at(t, i0, &p).map_err(model_err)?));
        }
    }
    ensure!(worst < 1e-9, "max relative error {worst:e}");
    Ok(())
}

fn asymptotic_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        for sel in CriticalParamSelector::EXPONENTS {
            let stable = regime::critical_stability(&p, sel);
            let dir = regime::critical_direction(&p, 1e-300, sel).map_err(model_err)?;
            ensure!(
                rel(dir.value, stable.value) < 1e-3,
                "{sel:?}: {} vs {} for {p:?}",
                dir.value,
                stable.value
            );
            ensure!(
                regime::asymptotic_critical_direction(&p, sel) == stable,
                "{sel:?} asymptote differs"
            );
        }
    }
    Ok(())
}

fn criticality_sweep() -> Check {
    let base = Params::new(1.0, 1.0, 0.499, 0.499, 105.5, 0.0096).map_err(model_err)?;
    let step = 1e-4;
    let spec = SweepSpec::new(
        SweepTarget::Param(ParamName::Alpha),
        0.99,
        1.02,
        301,
        base,
        0.042,
    )
    .map_err(|v| format!("{v:?}"))?;
    let rows = run_sweep(&spec);
    let flip = rows
        .windows(2)
        .find(|w| (w[0].regime == RegimeKind::Stable) != (w[1].regime == RegimeKind::Stable))
        .ok_or("no Stable/unstable flip in the sweep")?;
    let expected = (1.0 - 0.499) / 0.499;
    ensure!(
        (flip[0].value - 1.004008).abs() <= step,
        "flip at {}",
        flip[0].value
    );
    ensure!(
        flip[0].value <= expected && expected <= flip[1].value,
        "flip [{}, {}]",
        flip[0].value,
        flip[1].value
    );
    ensure!(
        rows.iter()
            .all(|r| (r.value < expected) == (r.regime == RegimeKind::Stable)),
        "classification not a single flip"
    );
    Ok(())
}

fn table_one_distances() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let a: f64 = if rng.gen_bool(0.5) {
            rng.gen_range(0.3..0.95)
        } else {
            rng.gen_range(1.05..1.7)
        };
        let share = rng.gen_range(0.1..0.9);
        let alpha = rng.gen_range(0.3..3.0);
        let beta = rng.gen_range(0.3..3.0);
        let p = Params::new(
            alpha,
            beta,
            share * a / alpha,
            (1.0 - share) * a / beta,
            2.0,
            0.5,
        )
        .map_err(model_err)?;
        let a = p.composite_exponent();
        let forms = [
            (CriticalParamSelector::Alpha, (1.0 - a) / p.mu()),
            (CriticalParamSelector::Beta, (1.0 - a) / p.nu()),
            (CriticalParamSelector::Mu, (1.0 - a) / p.alpha()),
            (CriticalParamSelector::Nu, (1.0 - a) / p.beta()),
            (CriticalParamSelector::Delta, 1.0 / a.sqrt() - 1.0),
        ];
        for (sel, expected) in forms {
            let got = stability_distance(&p, sel, DistanceMode::Absolute);
            ensure!(rel(got, expected) < 1e-12, "{sel:?}: {got} vs {expected}");
            let got = stability_distance(&p, sel, DistanceMode::Relative);
            let expected = if sel == CriticalParamSelector::Delta {
                expected
            } else {
                expected / sel.current(&p)
            };
            ensure!(
                rel(got, expected) < 1e-12,
                "{sel:?} relative: {got} vs {expected}"
            );
        }
    }
    Ok(())
}

fn full_cycle_property() -> Check {
    let sc = preset(PresetName::FullCycle);
    let tr = run_scenario(&sc).map_err(|e| e.to_string())?;
    ensure!(tr.is_complete(), "diverged: {:?}", tr.abort);
    let labels: Vec<RegimeKind> = detect_phases(&tr).iter().map(|p| p.label).collect();
    ensure!(
        labels
            == [
                RegimeKind::Stable,
                RegimeKind::Bubble,
                RegimeKind::Crash,
                RegimeKind::Stable
            ],
        "phases {labels:?}"
    );
    let shock = tr
        .records
        .iter()
        .position(|r| r.fired_rules.iter().any(|id| id == rule_ids::BETA_SHOCK))
        .ok_or("beta shock never fired")?;
    ensure!(
        tr.records[..shock].iter().all(|r| r.i > sc.rate_floor),
        "pre-shock rate below the floor"
    );
    ensure!(
        tr.records[shock].i <= sc.rate_floor,
        "shock fired above the floor"
    );
    ensure!(
        tr.records[shock + 1].params.beta() == 1.6,
        "beta after shock = {}",
        tr.records[shock + 1].params.beta()
    );
    let last = tr.records.last().ok_or("empty trajectory")?;
    ensure!(rel(last.i, 0.0419) < 0.01, "terminal rate {}", last.i);
    ensure!(
        last.params.alpha() == 1.0 && last.params.beta() == 1.0,
        "terminal params {:?}",
        last.params
    );
    Ok(())
}

fn alpha_only_variant() -> Check {
    let tr = run_scenario(&preset(PresetName::AlphaOnlyCrash)).map_err(|e| e.to_string())?;
    let labels: Vec<RegimeKind> = detect_phases(&tr).iter().map(|p| p.label).collect();
    ensure!(
        labels == [RegimeKind::Bubble, RegimeKind::Crash],
        "phases {labels:?}"
    );
    ensure!(
        tr.records.iter().all(|r| r.params.beta() == 1.0),
        "beta moved"
    );
    Ok(())
}

fn bifurcation_cases() -> Check {
    let trace = |k: f64, l: f64| -> Result<Vec<f64>, String> {
        let p = Params::new(1.0, 1.0, 0.5, 0.5, k, l).map_err(model_err)?;
        ensure!(p.composite_exponent() == 1.0, "a != 1");
        let mut s = MarketState::at_rate(0, 0.04, &p).map_err(model_err)?;
        let mut rates = vec![s.rate()];
        for _ in 0..100 {
            s = model::step(&s, &p).map_err(model_err)?;
            rates.push(s.rate());
        }
        Ok(rates)
    };
    ensure!(
        trace(1.0, 1.0)?.iter().all(|&i| i == 0.04),
        "k = l = 1 not constant"
    );
    // c = (k l)^(-1/2) here
    ensure!(
        trace(2.0, 1.0)?.windows(2).all(|w| w[1] < w[0]),
        "c < 1 not strictly decreasing"
    );
    ensure!(
        trace(0.5, 1.0)?.windows(2).all(|w| w[1] > w[0]),
        "c > 1 not strictly increasing"
    );
    Ok(())
}

fn determinism() -> Check {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = dir.path().join("c.json");
    fs::write(
        &config,
        r#"{"preset": "full_cycle", "output": {"chart_enabled": false}}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let csv = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_umwe"))
            .arg("simulate")
            .arg("--config")
            .arg(&config)
            .arg("--csv")
            .arg(&csv)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure!(status.success(), "simulate exited with {status}");
        outputs.push(fs::read(&csv).map_err(|e| e.to_string())?);
    }
    ensure!(outputs[0] == outputs[1], "CSV outputs differ");
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "fixed-point reproduction",
            fixed_point_reproduction,
            Duration::from_secs(1),
        ),
        (
            "regime reproduction",
            regime_reproduction,
            Duration::from_secs(1),
        ),
        (
            "closed form vs iteration",
            closed_form_oracle,
            Duration::from_secs(5),
        ),
        (
            "asymptotic equivalence",
            asymptotic_equivalence,
            Duration::from_secs(5),
        ),
        (
            "criticality sweep",
            criticality_sweep,
            Duration::from_secs(1),
        ),
        (
            "stability distance forms",
            table_one_distances,
            Duration::from_secs(1),
        ),
        ("full cycle", full_cycle_property, Duration::from_secs(1)),
        (
            "alpha-only crash",
            alpha_only_variant,
            Duration::from_secs(1),
        ),
        (
            "bifurcation cases",
            bifurcation_cases,
            Duration::from_secs(1),
        ),
        ("determinism", determinism, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (n, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|()| {
            if elapsed <= budget {
                Ok(())
            } else {
                Err(format!("took {elapsed:?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(()) => println!("PASS {:>2} {name} ({:.3}s)", n + 1, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", n + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
