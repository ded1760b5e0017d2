use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::table::format_sig;
use super::OutputError;
use crate::model::{ParamName, Params};
use crate::regime::{classify, CriticalParamSelector, RegimeKind};
use crate::risk::{stability_distance, DistanceMode};
use crate::scenario::Violation;

pub const SWEEP_HEADER: &str = "value,a,i_fix,regime,delta_Delta_crit";

/// The quantity varied across a sweep: a model parameter or the initial rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepTarget {
    Param(ParamName),
    InitialRate,
}

impl fmt::Display for SweepTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepTarget::Param(p) => write!(f, "{p}"),
            SweepTarget::InitialRate => f.write_str("i0"),
        }
    }
}

impl FromStr for SweepTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "i0" {
            return Ok(SweepTarget::InitialRate);
        }
        s.parse::<ParamName>().map(SweepTarget::Param).map_err(|_| {
            format!("unknown sweep target `{s}` (expected alpha, beta, mu, nu, k, l or i0)")
        })
    }
}

/// An evenly spaced grid `lo..=hi` of `steps` values for one target, over a fixed base.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub target: SweepTarget,
    pub lo: f64,
    pub hi: f64,
    pub steps: u64,
    pub params: Params,
    pub i0: f64,
}

impl SweepSpec {
    pub fn new(
        target: SweepTarget,
        lo: f64,
        hi: f64,
        steps: u64,
        params: Params,
        i0: f64,
    ) -> Result<Self, Vec<Violation>> {
        let mut out = Vec::new();
        if !(lo.is_finite() && lo > 0.0) {
            out.push(Violation::new("sweep.lo", "must be finite and positive"));
        }
        if !hi.is_finite() {
            out.push(Violation::new("sweep.hi", "must be finite"));
        } else if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            out.push(Violation::new("sweep.hi", "must be greater than sweep.lo"));
        }
        if steps < 2 {
            out.push(Violation::new("sweep.steps", "must be at least 2"));
        }
        if !(i0.is_finite() && i0 > 0.0) {
            out.push(Violation::new(
                "initial_rate",
                "must be finite and positive",
            ));
        }
        if !out.is_empty() {
            return Err(out);
        }
        Ok(SweepSpec {
            target,
            lo,
            hi,
            steps,
            params,
            i0,
        })
    }

    pub fn grid(&self) -> Vec<f64> {
        let last = self.steps - 1;
        (0..self.steps)
            .map(|j| {
                if j == last {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * (j as f64 / last as f64)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub a: f64,
    pub i_fix: Option<f64>,
    pub regime: RegimeKind,
    pub delta_delta_crit: f64,
}

fn evaluate(spec: &SweepSpec, value: f64) -> SweepRow {
    let (p, i0) = match spec.target {
        SweepTarget::Param(name) => (
            spec.params
                .with(name, value)
                .expect("grid values are positive"),
            spec.i0,
        ),
        SweepTarget::InitialRate => (spec.params, value),
    };
    let regime = classify(&p, i0);
    SweepRow {
        value,
        a: p.composite_exponent(),
        i_fix: regime.i_fix,
        regime: regime.kind,
        delta_delta_crit: stability_distance(
            &p,
            CriticalParamSelector::Delta,
            DistanceMode::Absolute,
        ),
    }
}

/// Evaluates the grid in parallel; rows come back in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    spec.grid()
        .into_par_iter()
        .map(|v| evaluate(spec, v))
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W, digits: usize) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        let i_fix = r
            .i_fix
            .filter(|v| v.is_finite())
            .map(|v| format_sig(v, digits))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            format_sig(r.value, digits),
            format_sig(r.a, digits),
            i_fix,
            r.regime,
            format_sig(r.delta_delta_crit, digits),
        )?;
    }
    w.flush()
}

pub fn emit_sweep(rows: &[SweepRow], path: &Path, digits: usize) -> Result<(), OutputError> {
    let file = File::create(path).map_err(|e| OutputError::new(path, e))?;
    write_sweep_csv(rows, BufWriter::new(file), digits).map_err(|e| OutputError::new(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{cycle_params, CYCLE_INITIAL_RATE};

    fn spec(target: SweepTarget, lo: f64, hi: f64, steps: u64) -> SweepSpec {
        SweepSpec::new(target, lo, hi, steps, cycle_params(), CYCLE_INITIAL_RATE).unwrap()
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = spec(SweepTarget::Param(ParamName::Alpha), 0.9, 1.1, 7).grid();
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 0.9);
        assert_eq!(g[6], 1.1);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn parallel_rows_match_sequential_order() {
        let s = spec(SweepTarget::Param(ParamName::Alpha), 0.95, 1.05, 101);
        let rows = run_sweep(&s);
        let seq: Vec<SweepRow> = s.grid().into_iter().map(|v| evaluate(&s, v)).collect();
        assert_eq!(rows, seq);
    }

    #[test]
    fn alpha_sweep_crosses_the_stability_boundary() {
        let rows = run_sweep(&spec(SweepTarget::Param(ParamName::Alpha), 0.99, 1.02, 31));
        assert!(rows.first().unwrap().delta_delta_crit > 0.0);
        assert!(rows.last().unwrap().delta_delta_crit < 0.0);
        assert!(rows.windows(2).all(|w| w[0].a < w[1].a));
        assert_eq!(rows[0].regime, RegimeKind::Stable);
        assert!(matches!(
            rows[30].regime,
            RegimeKind::Bubble | RegimeKind::Crash
        ));
    }

    #[test]
    fn initial_rate_sweep_keeps_params() {
        let rows = run_sweep(&spec(SweepTarget::InitialRate, 0.01, 0.1, 4));
        assert!(rows
            .iter()
            .all(|r| r.a == cycle_params().composite_exponent()));
        assert_eq!(rows[0].value, 0.01);
    }

    #[test]
    fn invalid_specs_list_every_problem() {
        let err = SweepSpec::new(
            SweepTarget::InitialRate,
            -1.0,
            -2.0,
            1,
            cycle_params(),
            0.04,
        )
        .unwrap_err();
        let paths: Vec<&str> = err.iter().map(|v| v.path.as_str()).collect();
        assert_eq!(paths, ["sweep.lo", "sweep.hi", "sweep.steps"]);
    }

    #[test]
    fn csv_shape() {
        let rows = run_sweep(&spec(SweepTarget::Param(ParamName::Nu), 0.4, 0.6, 3));
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf, 8).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("4.0000000e-1,"));
    }
}
