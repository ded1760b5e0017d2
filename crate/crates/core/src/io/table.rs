use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::OutputError;
use crate::regime::CriticalParamSelector;
use crate::risk::RiskReport;
use crate::scenario::Trajectory;

pub const TRAJECTORY_HEADER: &str = "t,i,N,D,alpha,beta,mu,nu,a,i_fix,regime,delta_alpha_crit,delta_beta_crit,delta_mu_crit,delta_nu_crit,delta_Delta_crit,dir_delta_Delta,fired_rules";

/// Scientific notation with `digits` significant digits, e.g. `4.18638029957e-2`.
pub fn format_sig(value: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), value)
}

fn opt(value: Option<f64>, digits: usize) -> String {
    value
        .filter(|v| v.is_finite())
        .map(|v| format_sig(v, digits))
        .unwrap_or_default()
}

fn stability(report: &RiskReport, sel: CriticalParamSelector) -> f64 {
    report.get(sel).stability_distance_abs
}

/// Writes the header and one row per sampled record (`t % sample_every == 0`).
pub fn write_trajectory_csv<W: Write>(
    tr: &Trajectory,
    mut w: W,
    digits: usize,
    sample_every: u64,
) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    let every = sample_every.max(1);
    for r in tr.records.iter().filter(|r| r.t % every == 0) {
        let f = |v: f64| format_sig(v, digits);
        let p = &r.params;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            f(r.i),
            f(r.n_loans),
            f(r.d_defaults),
            f(p.alpha()),
            f(p.beta()),
            f(p.mu()),
            f(p.nu()),
            f(r.a),
            opt(r.i_fix, digits),
            r.regime.kind,
            f(stability(&r.risk, CriticalParamSelector::Alpha)),
            f(stability(&r.risk, CriticalParamSelector::Beta)),
            f(stability(&r.risk, CriticalParamSelector::Mu)),
            f(stability(&r.risk, CriticalParamSelector::Nu)),
            f(stability(&r.risk, CriticalParamSelector::Delta)),
            opt(r.risk.delta.direction_distance_abs, digits),
            r.fired_rules.join(";"),
        )?;
    }
    w.flush()
}

pub fn emit_csv(
    tr: &Trajectory,
    path: &Path,
    digits: usize,
    sample_every: u64,
) -> Result<(), OutputError> {
    let file = File::create(path).map_err(|e| OutputError::new(path, e))?;
    write_trajectory_csv(tr, BufWriter::new(file), digits, sample_every)
        .map_err(|e| OutputError::new(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Params;
    use crate::scenario::{preset, run_scenario, PresetName, Scenario};

    fn csv_for(sc: &Scenario, digits: usize) -> String {
        let tr = run_scenario(sc).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&tr, &mut buf, digits, sc.sample_every).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn row_count_and_header() {
        let mut sc = preset(PresetName::Stable);
        sc.horizon = 3;
        let text = csv_for(&sc, 12);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert!(lines[1].starts_with("0,4.20000000000e-2,"));
        assert!(lines[1].contains(",Stable,"));
        assert_eq!(lines[1].split(',').count(), 18);
    }

    #[test]
    fn bifurcation_rows_leave_i_fix_empty() {
        let mut sc = preset(PresetName::Stable);
        sc.initial_params = Params::new(1.0, 1.0, 0.5, 0.5, 1.0, 1.0).unwrap();
        sc.horizon = 2;
        let text = csv_for(&sc, 8);
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[9], "");
            assert_eq!(cols[10], "BifurcationConstant");
            assert_eq!(cols[11], format_sig(0.0, 8));
        }
    }

    #[test]
    fn sampling_thins_rows() {
        let mut sc = preset(PresetName::Stable);
        sc.horizon = 10;
        sc.sample_every = 4;
        let text = csv_for(&sc, 6);
        let ts: Vec<&str> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert_eq!(ts, ["0", "4", "8"]);
    }

    #[test]
    fn fired_rules_are_joined() {
        let text = csv_for(&preset(PresetName::FullCycle), 6);
        let shock = text
            .lines()
            .find(|l| l.contains("beta_shock"))
            .expect("shock row");
        assert!(
            shock.ends_with("confidence;beta_shock;alpha_cooldown"),
            "{shock}"
        );
    }
}
