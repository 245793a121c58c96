//! Line-oriented system-definition files.
//!
//! ```text
//! system "pendulum"
//! state x1 = x2
//! state x2 = (u - b*x2 - m*g*l*sin(x1)) / (m*l^2)
//! control u
//! param m = 1.0
//! gain k1 = 2.0
//! gain k2 = 2.0
//! init 0.5, 0.0
//! sim t0=0 tf=10 dt=0.001 method=rk4
//! ```
//!
//! `#` starts a comment. State order defines `x1..xn`, gain order `k1..kn`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::expr::{parse, Expr};
use crate::simulation::SimConfig;
use crate::synthesis::{is_identifier, GainSet, SystemModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FileError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: undeclared symbol `{name}`")]
    UndeclaredSymbol { line: usize, name: String },
    #[error("line {line}: `{name}` is already declared")]
    DuplicateDeclaration { line: usize, name: String },
}

fn syntax<T>(line: usize, reason: impl Into<String>) -> Result<T, FileError> {
    Err(FileError::Syntax {
        line,
        reason: reason.into(),
    })
}

/// A fully bound system definition.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub model: SystemModel,
    pub gains: GainSet,
    pub sim: SimConfig,
}

fn parse_real(line: usize, s: &str) -> Result<f64, FileError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => syntax(
            line,
            format!("expected a real number, found `{}`", s.trim()),
        ),
    }
}

fn parse_reals(line: usize, s: &str) -> Result<Vec<f64>, FileError> {
    s.split(',').map(|p| parse_real(line, p)).collect()
}

/// `<ident> = <rest>`
fn split_binding(line: usize, rest: &str) -> Result<(String, String), FileError> {
    let Some((name, value)) = rest.split_once('=') else {
        return syntax(line, "expected `<name> = <value>`");
    };
    let name = name.trim();
    if !is_identifier(name) {
        return syntax(line, format!("`{name}` is not a valid identifier"));
    }
    Ok((name.to_string(), value.trim().to_string()))
}

fn strip_comment(raw: &str) -> &str {
    // a quoted system name may contain `#`
    let mut in_quotes = false;
    for (i, c) in raw.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &raw[..i],
            _ => {}
        }
    }
    raw
}

#[derive(Default)]
struct Draft {
    name: Option<String>,
    states: Vec<(usize, String, String)>,
    control: Option<(usize, String)>,
    params: Vec<(usize, String, f64)>,
    gains: Vec<(usize, String, f64)>,
    init: Option<(usize, Vec<f64>)>,
    sim: Option<(usize, String)>,
}

pub fn parse_system_file(text: &str) -> Result<SystemFile, FileError> {
    let mut d = Draft::default();
    let mut last_line = 1;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        last_line = line;
        let (keyword, rest) = content
            .split_once(char::is_whitespace)
            .map(|(k, r)| (k, r.trim()))
            .unwrap_or((content, ""));
        match keyword {
            "system" => {
                if d.name.is_some() {
                    return Err(FileError::DuplicateDeclaration {
                        line,
                        name: "system".into(),
                    });
                }
                let quoted = rest.len() >= 2 && rest.starts_with('"') && rest.ends_with('"');
                if !quoted {
                    return syntax(line, "expected `system \"<name>\"`");
                }
                d.name = Some(rest[1..rest.len() - 1].to_string());
            }
            "state" => {
                let (name, value) = split_binding(line, rest)?;
                d.states.push((line, name, value));
            }
            "control" => {
                if d.control.is_some() {
                    return Err(FileError::DuplicateDeclaration {
                        line,
                        name: "control".into(),
                    });
                }
                if !is_identifier(rest) {
                    return syntax(line, format!("`{rest}` is not a valid identifier"));
                }
                d.control = Some((line, rest.to_string()));
            }
            "param" => {
                let (name, value) = split_binding(line, rest)?;
                d.params.push((line, name, parse_real(line, &value)?));
            }
            "gain" => {
                let (name, value) = split_binding(line, rest)?;
                let v = parse_real(line, &value)?;
                if v <= 0.0 {
                    return syntax(line, format!("gain `{name}` must be positive, got {v}"));
                }
                d.gains.push((line, name, v));
            }
            "init" => {
                if d.init.is_some() {
                    return Err(FileError::DuplicateDeclaration {
                        line,
                        name: "init".into(),
                    });
                }
                d.init = Some((line, parse_reals(line, rest)?));
            }
            "sim" => {
                if d.sim.is_some() {
                    return Err(FileError::DuplicateDeclaration {
                        line,
                        name: "sim".into(),
                    });
                }
                d.sim = Some((line, rest.to_string()));
            }
            other => return syntax(line, format!("unknown directive `{other}`")),
        }
    }
    build(d, last_line)
}

fn build(d: Draft, last_line: usize) -> Result<SystemFile, FileError> {
    if d.states.is_empty() {
        return syntax(1, "no states declared");
    }
    let Some((control_line, control)) = d.control else {
        return syntax(last_line, "no control declared");
    };
    let n = d.states.len();

    let mut declared: BTreeSet<String> = BTreeSet::new();
    let mut declare = |line: usize, name: &str| {
        if declared.insert(name.to_string()) {
            Ok(())
        } else {
            Err(FileError::DuplicateDeclaration {
                line,
                name: name.to_string(),
            })
        }
    };
    for (line, name, _) in &d.states {
        declare(*line, name)?;
    }
    declare(control_line, &control)?;
    for (line, name, _) in &d.params {
        declare(*line, name)?;
    }
    for (line, name, _) in &d.gains {
        declare(*line, name)?;
    }

    let gain_names: BTreeSet<&str> = d.gains.iter().map(|(_, g, _)| g.as_str()).collect();
    let mut dynamics = Vec::with_capacity(n);
    for (line, _, text) in &d.states {
        let e = parse(text).or_else(|err| syntax(*line, err.to_string()))?;
        for s in e.free_symbols() {
            if !declared.contains(&s) || gain_names.contains(s.as_str()) {
                return Err(FileError::UndeclaredSymbol {
                    line: *line,
                    name: s,
                });
            }
        }
        dynamics.push(e);
    }

    if d.gains.len() != n {
        let line = d.gains.first().map_or(last_line, |g| g.0);
        return syntax(
            line,
            format!(
                "expected {n} gains (one per state), found {}",
                d.gains.len()
            ),
        );
    }
    let gains = GainSet::new(
        d.gains.iter().map(|(_, g, _)| g.clone()).collect(),
        d.gains.iter().map(|(_, _, v)| Some(*v)).collect(),
    )
    .or_else(|e| syntax(d.gains[0].0, e.to_string()))?;

    let Some((init_line, x0)) = d.init else {
        return syntax(last_line, "no init declared");
    };
    if x0.len() != n {
        return syntax(
            init_line,
            format!("expected {n} initial values, found {}", x0.len()),
        );
    }

    let model = SystemModel {
        name: d.name.unwrap_or_else(|| "system".to_string()),
        states: d.states.iter().map(|(_, s, _)| s.clone()).collect(),
        dynamics,
        control,
        params: d
            .params
            .iter()
            .map(|(_, p, v)| (p.clone(), Some(*v)))
            .collect(),
    };

    let mut sim = SimConfig::new(x0);
    sim.param_values = d.params.iter().map(|(_, p, v)| (p.clone(), *v)).collect();
    sim.gain_values = gains.bindings();
    if let Some((line, settings)) = d.sim {
        apply_sim_settings(line, &settings, n, &mut sim)?;
    }
    Ok(SystemFile { model, gains, sim })
}

fn apply_sim_settings(
    line: usize,
    settings: &str,
    n: usize,
    sim: &mut SimConfig,
) -> Result<(), FileError> {
    let mut seen = BTreeSet::new();
    for item in settings.split_whitespace() {
        let Some((key, value)) = item.split_once('=') else {
            return syntax(line, format!("expected `key=value`, found `{item}`"));
        };
        if !seen.insert(key) {
            return Err(FileError::DuplicateDeclaration {
                line,
                name: key.to_string(),
            });
        }
        match key {
            "t0" => sim.t0 = parse_real(line, value)?,
            "tf" => sim.tf = parse_real(line, value)?,
            "dt" => sim.dt = parse_real(line, value)?,
            "method" => sim.method = value.parse().or_else(|e: String| syntax(line, e))?,
            "desired" => {
                let v = parse_reals(line, value)?;
                if v.len() != n {
                    return syntax(
                        line,
                        format!("expected {n} desired values, found {}", v.len()),
                    );
                }
                sim.desired = v;
            }
            other => return syntax(line, format!("unknown sim key `{other}`")),
        }
    }
    if let Err(e) = sim.steps() {
        return syntax(line, e.to_string());
    }
    Ok(())
}

/// Shortest round-trip decimal for `v`.
pub fn format_real(v: f64) -> String {
    let s = format!("{v:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn join_reals(v: &[f64], sep: &str) -> String {
    v.iter()
        .map(|x| format_real(*x))
        .collect::<Vec<_>>()
        .join(sep)
}

/// Writes a definition file from its parts, with dynamics given as text.
pub fn render_system_file(
    name: &str,
    states: &[(String, String)],
    control: &str,
    params: &BTreeMap<String, f64>,
    gains: &GainSet,
    sim: &SimConfig,
) -> String {
    let mut out = format!("system \"{name}\"\n");
    for (s, rhs) in states {
        out.push_str(&format!("state {s} = {rhs}\n"));
    }
    out.push_str(&format!("control {control}\n"));
    for (p, v) in params {
        out.push_str(&format!("param {p} = {}\n", format_real(*v)));
    }
    for (k, v) in gains.names().iter().zip(gains.values()) {
        let v = v.expect("rendered gains are bound");
        out.push_str(&format!("gain {k} = {}\n", format_real(v)));
    }
    out.push_str(&format!("init {}\n", join_reals(&sim.x0, ", ")));
    out.push_str(&format!(
        "sim t0={} tf={} dt={} method={}",
        format_real(sim.t0),
        format_real(sim.tf),
        format_real(sim.dt),
        sim.method
    ));
    if !sim.desired.is_empty() {
        out.push_str(&format!(" desired={}", join_reals(&sim.desired, ",")));
    }
    out.push('\n');
    out
}

/// Renders a parsed file back to text (dynamics in canonical-free raw form).
pub fn write_system_file(f: &SystemFile) -> String {
    let states: Vec<(String, String)> = f
        .model
        .states
        .iter()
        .zip(&f.model.dynamics)
        .map(|(s, e): (&String, &Expr)| (s.clone(), e.to_string()))
        .collect();
    render_system_file(
        &f.model.name,
        &states,
        &f.model.control,
        &f.sim.param_values,
        &f.gains,
        &f.sim,
    )
}
