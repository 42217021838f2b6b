//! Deterministic SVG plots of a convergence study.
//!
//! Output contains only values read from the CSV inputs, printed with fixed
//! precision, so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{LabError, Result};
use crate::fit::fit_rate;
use crate::tables::{read_table, write_atomic, AggregateRow, TrialRow, AGGREGATE_FILE, AGGREGATE_SCHEMA, TRIAL_SCHEMA};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn linear(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0, log: false };
        }
        lo = lo.min(0.0);
        if hi <= lo {
            hi = lo + 1.0;
        }
        Axis {
            lo,
            hi: hi + 0.05 * (hi - lo),
            log: false,
        }
    }

    /// Whole decades covering the positive values.
    fn log(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| *v > 0.0) {
            lo = lo.min(v.log10());
            hi = hi.max(v.log10());
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0, log: true };
        }
        let (lo, mut hi) = (lo.floor(), hi.ceil());
        if hi <= lo {
            hi = lo + 1.0;
        }
        Axis { lo, hi, log: true }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let span = (self.hi - self.lo) as i64;
            let step = (span / 8 + 1).max(1);
            (0..=span)
                .step_by(step as usize)
                .map(|k| {
                    let e = self.lo as i64 + k;
                    (10f64.powi(e as i32), format!("1e{e}"))
                })
                .collect()
        } else {
            (0..=5)
                .map(|k| {
                    let v = self.lo + (self.hi - self.lo) * k as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Style {
    Line,
    Dashed,
    Markers,
    LineMarkers,
}

struct Series {
    label: String,
    color: &'static str,
    style: Style,
    points: Vec<(f64, f64)>,
}

struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    x: Axis,
    y: Axis,
    series: Vec<Series>,
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

impl Plot {
    fn map(&self, (x, y): (f64, f64)) -> Option<(f64, f64)> {
        let w = WIDTH - LEFT - RIGHT;
        let h = HEIGHT - TOP - BOTTOM;
        Some((LEFT + self.x.unit(x)? * w, TOP + (1.0 - self.y.unit(y)?) * h))
    }

    fn render(&self) -> String {
        let mut s = String::new();
        let (w, h) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            px(LEFT + w / 2.0),
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            px(w),
            px(h)
        );
        for (v, label) in self.x.ticks() {
            if let Some((x, _)) = self.map((v, self.y_anchor())) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#333"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"##,
                    px(x),
                    px(TOP + h),
                    px(TOP + h + 5.0),
                    px(TOP + h + 18.0),
                    label
                );
            }
        }
        for (v, label) in self.y.ticks() {
            if let Some((_, y)) = self.map((self.x_anchor(), v)) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="#333"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"##,
                    px(LEFT - 5.0),
                    px(LEFT),
                    px(y),
                    px(LEFT - 8.0),
                    px(y + 4.0),
                    label
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(LEFT + w / 2.0),
            px(HEIGHT - 14.0),
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            px(TOP + h / 2.0),
            escape(&self.y_label)
        );

        for (k, series) in self.series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = series.points.iter().filter_map(|&p| self.map(p)).collect();
            if matches!(series.style, Style::Line | Style::Dashed | Style::LineMarkers) && pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", px(*x), px(*y))).collect();
                let dash = if series.style == Style::Dashed {
                    r#" stroke-dasharray="6 4""#
                } else {
                    ""
                };
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                    path.join(" "),
                    series.color
                );
            }
            if matches!(series.style, Style::Markers | Style::LineMarkers) {
                for (x, y) in &pts {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{}" cy="{}" r="2.5" fill="{}"/>"#,
                        px(*x),
                        px(*y),
                        series.color
                    );
                }
            }
            let ly = TOP + 10.0 + 16.0 * k as f64;
            let lx = LEFT + w + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="2"/><text x="{4}" y="{5}">{6}</text>"#,
                px(lx),
                px(ly),
                px(lx + 18.0),
                series.color,
                px(lx + 24.0),
                px(ly + 4.0),
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    fn x_anchor(&self) -> f64 {
        if self.x.log {
            10f64.powf(self.x.lo)
        } else {
            self.x.lo
        }
    }

    fn y_anchor(&self) -> f64 {
        if self.y.log {
            10f64.powf(self.y.lo)
        } else {
            self.y.lo
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Inputs of [`render_report`]: the aggregate table and the per-trial tables keyed by `N`.
#[derive(Debug, Clone)]
pub struct ReportInput {
    pub aggregate: Vec<AggregateRow>,
    pub trials: Vec<(usize, Vec<TrialRow>)>,
}

impl ReportInput {
    /// Reads `aggregate.csv` and every `trials_N<n>.csv` in `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let aggregate = read_table(&dir.join(AGGREGATE_FILE), AGGREGATE_SCHEMA)?;
        let mut trials = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if let Some(n) = name.strip_prefix("trials_N").and_then(|r| r.strip_suffix(".csv")) {
                if let Ok(n) = n.parse::<usize>() {
                    trials.push((n, read_table(&path, TRIAL_SCHEMA)?));
                }
            }
        }
        trials.sort_by_key(|(n, _)| *n);
        Ok(ReportInput { aggregate, trials })
    }
}

pub const REPORT_FILES: [&str; 3] = ["dn_vs_t.svg", "dn_loglog.svg", "tv_vs_dn.svg"];

/// Renders the three plots as `(file name, svg)` pairs.
pub fn render_svgs(input: &ReportInput) -> Result<Vec<(&'static str, String)>> {
    if input.aggregate.is_empty() || input.trials.iter().all(|(_, rows)| rows.is_empty()) {
        return Err(LabError::Insufficient("the report needs a non-empty trial set".into()));
    }
    let mut ns: Vec<usize> = input.aggregate.iter().map(|r| r.n).collect();
    ns.dedup();
    let t_final = input.aggregate.iter().map(|r| r.t).fold(f64::NEG_INFINITY, f64::max);
    let color = |k: usize| PALETTE[k % PALETTE.len()];

    let dn_t = Plot {
        title: "Mean D_N(t)".into(),
        x_label: "t".into(),
        y_label: "mean D_N".into(),
        x: Axis::linear(input.aggregate.iter().map(|r| r.t)),
        y: Axis::linear(input.aggregate.iter().map(|r| r.mean_dn + r.stderr)),
        series: ns
            .iter()
            .enumerate()
            .map(|(k, &n)| Series {
                label: format!("N = {n}"),
                color: color(k),
                style: Style::LineMarkers,
                points: input.aggregate.iter().filter(|r| r.n == n).map(|r| (r.t, r.mean_dn)).collect(),
            })
            .collect(),
    };

    let last: Vec<&AggregateRow> = input.aggregate.iter().filter(|r| r.t == t_final).collect();
    let mut loglog_series = vec![
        Series {
            label: "mean D_N(T)".into(),
            color: PALETTE[0],
            style: Style::LineMarkers,
            points: last.iter().map(|r| ((r.n - 1) as f64, r.mean_dn)).collect(),
        },
        Series {
            label: "theorem bound".into(),
            color: PALETTE[1],
            style: Style::Dashed,
            points: last.iter().map(|r| ((r.n - 1) as f64, r.bound)).collect(),
        },
    ];
    if let Ok(fit) = fit_rate(&input.aggregate, t_final) {
        loglog_series.push(Series {
            label: format!("fit slope {:.3}", fit.slope),
            color: PALETTE[2],
            style: Style::Line,
            points: last.iter().map(|r| ((r.n - 1) as f64, fit.predict(r.n))).collect(),
        });
    }
    let loglog = Plot {
        title: format!("D_N(T) at T = {t_final}"),
        x_label: "N - 1".into(),
        y_label: "D_N(T)".into(),
        x: Axis::log(last.iter().map(|r| (r.n - 1) as f64)),
        y: Axis::log(loglog_series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
        series: loglog_series,
    };

    let scatter_series: Vec<Series> = input
        .trials
        .iter()
        .enumerate()
        .map(|(k, (n, rows))| Series {
            label: format!("N = {n}"),
            color: color(k),
            style: Style::Markers,
            points: rows
                .iter()
                .filter(|r| r.t == t_final)
                .filter_map(|r| r.tv_estimate.map(|tv| (r.d_n, tv)))
                .collect(),
        })
        .collect();
    let tv = Plot {
        title: format!("TV estimate vs D_N at T = {t_final}"),
        x_label: "D_N".into(),
        y_label: "tv_estimate".into(),
        x: Axis::linear(scatter_series.iter().flat_map(|s| s.points.iter().map(|p| p.0))),
        y: Axis::linear(scatter_series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
        series: scatter_series,
    };

    Ok(vec![
        (REPORT_FILES[0], dn_t.render()),
        (REPORT_FILES[1], loglog.render()),
        (REPORT_FILES[2], tv.render()),
    ])
}

/// Renders every plot before writing any, so a failure leaves no partial output.
pub fn render_report(input: &ReportInput, out: &Path) -> Result<Vec<PathBuf>> {
    let svgs = render_svgs(input)?;
    let mut written = Vec::new();
    for (name, svg) in svgs {
        let path = out.join(name);
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input() -> ReportInput {
        let aggregate = [16usize, 32]
            .iter()
            .flat_map(|&n| {
                [0.0, 1.0].into_iter().map(move |t| AggregateRow {
                    n,
                    t,
                    mean_dn: t * 0.4 / (n as f64).sqrt(),
                    stderr: 0.01,
                    bound: (2.0 * t).exp() / ((n - 1) as f64).sqrt(),
                    mean_tv: Some(0.1),
                })
            })
            .collect();
        let trials = vec![(
            16,
            vec![TrialRow {
                trial: 0,
                t: 1.0,
                d_n: 0.1,
                tv_estimate: Some(0.2),
                joint_count: 1,
                z_only_count: 1,
                sigma_only_count: 0,
                lln_diag: 0.0,
                rescale_mag: 0.0,
            }],
        )];
        ReportInput { aggregate, trials }
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render_svgs(&input()).unwrap();
        let b = render_svgs(&input()).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|(_, s)| s.starts_with("<svg") && s.ends_with("</svg>\n")));
    }

    #[test]
    fn empty_input_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut inp = input();
        inp.trials.clear();
        assert!(render_report(&inp, dir.path()).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn log_axis_spans_whole_decades() {
        let a = Axis::log([0.003, 2.0e5].into_iter());
        assert_eq!((a.lo, a.hi), (-3.0, 6.0));
        assert!((a.unit(1.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.unit(0.0), None);
    }
}
