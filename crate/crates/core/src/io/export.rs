//! CSV, JSON and SVG artifacts for simulation runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{ErrorMetrics, LyapunovTrace};
use crate::expr::Expr;
use crate::io::system_file::format_real;
use crate::simulation::{Method, SimConfig, Trajectory};
use crate::synthesis::SystemModel;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn write_file(path: &Path, text: &str) -> Result<(), ExportError> {
    fs::write(path, text).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Header `t,<states>,<control>`, then one row per sample.
pub fn csv_string(traj: &Trajectory, states: &[String], control: &str) -> String {
    let mut out = String::from("t");
    for s in states {
        out.push(',');
        out.push_str(s);
    }
    out.push(',');
    out.push_str(control);
    out.push('\n');
    for ((t, x), u) in traj.times.iter().zip(&traj.states).zip(&traj.controls) {
        out.push_str(&format_real(*t));
        for v in x {
            out.push(',');
            out.push_str(&format_real(*v));
        }
        out.push(',');
        out.push_str(&format_real(*u));
        out.push('\n');
    }
    out
}

pub fn write_csv(
    traj: &Trajectory,
    states: &[String],
    control: &str,
    path: &Path,
) -> Result<(), ExportError> {
    write_file(path, &csv_string(traj, states, control))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub name: String,
    pub states: Vec<String>,
    pub dynamics: Vec<String>,
    pub control: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub t0: f64,
    pub tf: f64,
    pub dt: f64,
    pub method: Method,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

/// One self-contained run: model, law, numeric setup, samples and analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub system: SystemRecord,
    /// `None` for open-loop runs.
    pub law: Option<String>,
    pub gains: BTreeMap<String, f64>,
    pub sim: SimRecord,
    pub trajectory: TrajectoryRecord,
    pub metrics: ErrorMetrics,
    pub lyapunov: Option<LyapunovTrace>,
}

impl RunRecord {
    pub fn new(
        model: &SystemModel,
        law: Option<&Expr>,
        cfg: &SimConfig,
        traj: &Trajectory,
        metrics: ErrorMetrics,
        lyapunov: Option<LyapunovTrace>,
    ) -> RunRecord {
        let mut params = model.param_defaults();
        params.extend(cfg.param_values.iter().map(|(k, v)| (k.clone(), *v)));
        RunRecord {
            system: SystemRecord {
                name: model.name.clone(),
                states: model.states.clone(),
                dynamics: model.dynamics.iter().map(ToString::to_string).collect(),
                control: model.control.clone(),
                params,
            },
            law: law.map(ToString::to_string),
            gains: if law.is_some() {
                cfg.gain_values.clone()
            } else {
                BTreeMap::new()
            },
            sim: SimRecord {
                t0: cfg.t0,
                tf: cfg.tf,
                dt: cfg.dt,
                method: cfg.method,
                x0: cfg.x0.clone(),
            },
            trajectory: TrajectoryRecord {
                t: traj.times.clone(),
                x: traj.states.clone(),
                u: traj.controls.clone(),
            },
            metrics,
            lyapunov,
        }
    }
}

pub fn json_string(run: &RunRecord) -> Result<String, ExportError> {
    let mut s = serde_json::to_string_pretty(run)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json(run: &RunRecord, path: &Path) -> Result<(), ExportError> {
    write_file(path, &json_string(run)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 120.0;
const MARGIN_Y: f64 = 40.0;
/// Polylines are thinned to at most this many points.
pub const MAX_PLOT_POINTS: usize = 2000;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Line chart of every series against `times`.
pub fn svg_string(title: &str, times: &[f64], series: &[Series]) -> String {
    let finite = |v: &&f64| v.is_finite();
    let (t_lo, t_hi) = span(
        times
            .iter()
            .filter(finite)
            .copied()
            .fold(f64::INFINITY, f64::min),
        times
            .iter()
            .filter(finite)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
    );
    let all = || {
        series
            .iter()
            .flat_map(|s| s.values.iter())
            .filter(finite)
            .copied()
    };
    let (y_lo, y_hi) = if all().next().is_some() {
        span(
            all().fold(f64::INFINITY, f64::min),
            all().fold(f64::NEG_INFINITY, f64::max),
        )
    } else {
        (-1.0, 1.0)
    };
    let (t_lo, t_hi) = if t_lo.is_finite() {
        (t_lo, t_hi)
    } else {
        (0.0, 1.0)
    };

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let px = |t: f64| MARGIN_LEFT + (t - t_lo) / (t_hi - t_lo) * plot_w;
    let py = |y: f64| MARGIN_Y + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    if y_lo < 0.0 && y_hi > 0.0 {
        let y0 = py(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#bbbbbb" stroke-dasharray="4 4"/>"##,
            MARGIN_LEFT + plot_w
        );
    }
    let label = |out: &mut String, x: f64, y: f64, anchor: &str, v: f64| {
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{}</text>"#,
            format_label(v)
        );
    };
    label(&mut out, MARGIN_LEFT - 6.0, MARGIN_Y + 4.0, "end", y_hi);
    label(
        &mut out,
        MARGIN_LEFT - 6.0,
        MARGIN_Y + plot_h + 4.0,
        "end",
        y_lo,
    );
    label(
        &mut out,
        MARGIN_LEFT,
        HEIGHT - MARGIN_Y + 18.0,
        "start",
        t_lo,
    );
    label(
        &mut out,
        MARGIN_LEFT + plot_w,
        HEIGHT - MARGIN_Y + 18.0,
        "end",
        t_hi,
    );

    let stride = times.len().div_ceil(MAX_PLOT_POINTS).max(1);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        let last = times.len().min(s.values.len()).saturating_sub(1);
        for k in (0..=last)
            .step_by(stride)
            .chain((last % stride != 0).then_some(last))
        {
            let (t, v) = (times[k], s.values[k]);
            if t.is_finite() && v.is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", px(t), py(v));
            }
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let ly = MARGIN_Y + 16.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn format_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

pub fn emit_svg(
    title: &str,
    times: &[f64],
    series: &[Series],
    path: &Path,
) -> Result<(), ExportError> {
    write_file(path, &svg_string(title, times, series))
}

/// One series per state, named after the state.
pub fn state_series(traj: &Trajectory, states: &[String]) -> Vec<Series> {
    states
        .iter()
        .enumerate()
        .map(|(i, name)| Series {
            name: name.clone(),
            values: traj.states.iter().map(|x| x[i]).collect(),
        })
        .collect()
}
