//! Three stacked SVG panels: the rate against its fixed point, alpha and beta
//! on twin axes, and the distance-to-criticality traces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::OutputError;
use crate::regime::CriticalParamSelector;
use crate::scenario::Trajectory;

const WIDTH: f64 = 960.0;
const PANEL_HEIGHT: f64 = 220.0;
const GAP: f64 = 50.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 40.0;
const TICKS: usize = 5;

type Series = Vec<(f64, Option<f64>)>;

#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn fit(values: impl Iterator<Item = f64>, allow_log: bool) -> Scale {
        let finite: Vec<f64> = values.filter(|v| v.is_finite()).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if finite.is_empty() {
            return Scale {
                lo: 0.0,
                hi: 1.0,
                log: false,
            };
        }
        if allow_log && lo > 0.0 && hi / lo > 100.0 {
            return Scale { lo, hi, log: true };
        }
        let pad = if hi > lo {
            0.05 * (hi - lo)
        } else {
            0.05 * lo.abs().max(1e-12)
        };
        Scale {
            lo: lo - pad,
            hi: hi + pad,
            log: false,
        }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        let u = if self.log {
            if v <= 0.0 {
                return None;
            }
            (v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        };
        (u.is_finite() && (-1e-9..=1.0 + 1e-9).contains(&u)).then_some(u)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..TICKS)
            .map(|j| {
                let u = j as f64 / (TICKS - 1) as f64;
                if self.log {
                    (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + u * (self.hi - self.lo)
                }
            })
            .collect()
    }
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-2..1e4).contains(&a) {
        format!("{v:.4}")
    } else {
        format!("{v:.2e}")
    }
}

struct Panel {
    top: f64,
    x: Scale,
}

impl Panel {
    fn px(&self, t: f64) -> f64 {
        LEFT + self.x.unit(t).unwrap_or(0.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, u: f64) -> f64 {
        self.top + (1.0 - u) * PANEL_HEIGHT
    }

    fn frame(&self, svg: &mut String, title: &str) {
        let w = WIDTH - LEFT - RIGHT;
        let _ = writeln!(
            svg,
            r##"<rect x="{LEFT}" y="{:.2}" width="{w:.2}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##,
            self.top
        );
        let _ = writeln!(
            svg,
            r#"<text x="{LEFT}" y="{:.2}" font-size="13" font-weight="bold">{title}</text>"#,
            self.top - 8.0
        );
        for t in self.x.ticks() {
            let x = self.px(t);
            let y = self.top + PANEL_HEIGHT;
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{y:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"##,
                y + 4.0,
                y + 15.0,
                t.round()
            );
        }
    }

    fn axis(&self, svg: &mut String, scale: &Scale, right: bool, color: &str) {
        let (x, anchor, dx) = if right {
            (WIDTH - RIGHT, "start", 6.0)
        } else {
            (LEFT, "end", -6.0)
        };
        for v in scale.ticks() {
            let y = self.py(scale.unit(v).unwrap_or(0.0));
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="{anchor}" fill="{color}">{}</text>"#,
                x + dx,
                y + 3.0,
                label(v)
            );
        }
    }

    /// One polyline per unbroken run of in-range points.
    fn trace(
        &self,
        svg: &mut String,
        id: &str,
        series: &Series,
        scale: &Scale,
        color: &str,
        dashed: bool,
    ) {
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for &(t, v) in series {
            match v.and_then(|v| scale.unit(v)) {
                Some(u) => runs
                    .last_mut()
                    .expect("non-empty")
                    .push((self.px(t), self.py(u))),
                None if !runs.last().expect("non-empty").is_empty() => runs.push(Vec::new()),
                None => {}
            }
        }
        let dash = if dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        for (n, run) in runs.iter().filter(|r| !r.is_empty()).enumerate() {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let suffix = if n == 0 {
                String::new()
            } else {
                format!("-{n}")
            };
            let _ = writeln!(
                svg,
                r#"<polyline id="{id}{suffix}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                pts.join(" ")
            );
        }
    }

    fn legend(&self, svg: &mut String, entries: &[(&str, &str)]) {
        for (n, (name, color)) in entries.iter().enumerate() {
            let y = self.top + 16.0 + 14.0 * n as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{y:.2}" font-size="11" fill="{color}">{name}</text>"#,
                LEFT + 10.0
            );
        }
    }
}

/// Clamps a scale to the 2nd..98th percentile so singular spikes do not flatten the rest.
fn robust(values: &[f64]) -> Scale {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 10 {
        return Scale::fit(v.into_iter(), false);
    }
    v.sort_by(f64::total_cmp);
    let q = |f: f64| v[((v.len() - 1) as f64 * f).round() as usize];
    Scale::fit([q(0.02), q(0.98)].into_iter(), false)
}

pub fn render_chart(tr: &Trajectory) -> String {
    let recs = &tr.records;
    let t0 = recs.first().map_or(0.0, |r| r.t as f64);
    let t1 = recs.last().map_or(1.0, |r| r.t as f64).max(t0 + 1.0);
    let x = Scale {
        lo: t0,
        hi: t1,
        log: false,
    };
    let height = TOP + 3.0 * PANEL_HEIGHT + 2.0 * GAP + 40.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let series = |f: &dyn Fn(&crate::scenario::TrajectoryRecord) -> Option<f64>| -> Series {
        recs.iter().map(|r| (r.t as f64, f(r))).collect()
    };

    let panel = Panel { top: TOP, x };
    let rate = series(&|r| Some(r.i));
    let i_fix = series(&|r| r.i_fix);
    let rate_scale = Scale::fit(recs.iter().map(|r| r.i), true);
    let rate_scale = {
        let near: Vec<f64> = recs
            .iter()
            .filter_map(|r| r.i_fix)
            .filter(|v| *v > rate_scale.lo.abs() / 10.0 && *v < rate_scale.hi * 10.0)
            .chain(recs.iter().map(|r| r.i))
            .collect();
        Scale::fit(near.into_iter(), true)
    };
    panel.frame(&mut svg, "interest rate i(t) and fixed point i_fix");
    panel.axis(&mut svg, &rate_scale, false, "#1f4e9c");
    panel.trace(&mut svg, "i_fix", &i_fix, &rate_scale, "#888888", true);
    panel.trace(&mut svg, "rate", &rate, &rate_scale, "#1f4e9c", false);
    panel.legend(
        &mut svg,
        &[("i(t)", "#1f4e9c"), ("i_fix (dashed)", "#888888")],
    );

    let panel = Panel {
        top: TOP + PANEL_HEIGHT + GAP,
        x,
    };
    let alpha = series(&|r| Some(r.params.alpha()));
    let beta = series(&|r| Some(r.params.beta()));
    let alpha_scale = Scale::fit(recs.iter().map(|r| r.params.alpha()), false);
    let beta_scale = Scale::fit(recs.iter().map(|r| r.params.beta()), false);
    panel.frame(&mut svg, "alpha (left axis) and beta (right axis)");
    panel.axis(&mut svg, &alpha_scale, false, "#c0392b");
    panel.axis(&mut svg, &beta_scale, true, "#27864a");
    panel.trace(&mut svg, "alpha", &alpha, &alpha_scale, "#c0392b", false);
    panel.trace(&mut svg, "beta", &beta, &beta_scale, "#27864a", false);
    panel.legend(&mut svg, &[("alpha", "#c0392b"), ("beta", "#27864a")]);

    let panel = Panel {
        top: TOP + 2.0 * (PANEL_HEIGHT + GAP),
        x,
    };
    let stab =
        |sel: CriticalParamSelector| series(&move |r| Some(r.risk.get(sel).stability_distance_abs));
    let dir = |sel: CriticalParamSelector| series(&move |r| r.risk.get(sel).direction_distance_abs);
    let traces = [
        (
            "delta_alpha_crit",
            stab(CriticalParamSelector::Alpha),
            "#c0392b",
        ),
        (
            "delta_Delta_crit",
            stab(CriticalParamSelector::Delta),
            "#1f4e9c",
        ),
        (
            "dir_delta_beta",
            dir(CriticalParamSelector::Beta),
            "#27864a",
        ),
        (
            "dir_delta_Delta",
            dir(CriticalParamSelector::Delta),
            "#8e44ad",
        ),
    ];
    let all: Vec<f64> = traces
        .iter()
        .flat_map(|(_, s, _)| s.iter().filter_map(|p| p.1))
        .chain([0.0])
        .collect();
    let dist_scale = robust(&all);
    panel.frame(&mut svg, "distance to criticality");
    panel.axis(&mut svg, &dist_scale, false, "#444");
    if let Some(u) = dist_scale.unit(0.0) {
        let y = panel.py(u);
        let _ = writeln!(
            svg,
            r##"<line id="zero" x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#bbb"/>"##,
            WIDTH - RIGHT
        );
    }
    for (id, s, color) in &traces {
        panel.trace(&mut svg, id, s, &dist_scale, color, false);
    }
    let legend: Vec<(&str, &str)> = traces.iter().map(|(id, _, c)| (*id, *c)).collect();
    panel.legend(&mut svg, &legend);

    if let Some(abort) = &tr.abort {
        let _ = writeln!(
            svg,
            r##"<text id="abort" x="{:.2}" y="{:.2}" font-size="12" fill="#c0392b" text-anchor="end">aborted at t = {}: {:?}</text>"##,
            WIDTH - RIGHT,
            TOP - 8.0,
            abort.at_t,
            abort.kind
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_chart(tr: &Trajectory, path: &Path) -> Result<(), OutputError> {
    fs::write(path, render_chart(tr)).map_err(|e| OutputError::new(path, e))
}
