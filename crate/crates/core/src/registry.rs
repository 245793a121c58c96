//! Built-in benchmark systems with their reference control laws.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::io::system_file::{parse_system_file, render_system_file, SystemFile};
use crate::simulation::SimConfig;
use crate::synthesis::{GainSet, SystemModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("unknown example `{0}` (known: {known})", known = EXAMPLE_IDS.join(", "))]
    UnknownExample(String),
}

struct Definition {
    id: &'static str,
    title: &'static str,
    states: &'static [(&'static str, &'static str)],
    params: &'static [(&'static str, f64)],
    gains: &'static [f64],
    x0: &'static [f64],
    law: &'static str,
}

const DEFINITIONS: [Definition; 6] = [
    Definition {
        id: "linear2d",
        title: "2D linear system",
        states: &[("x1", "a*x1 + x2"), ("x2", "u")],
        params: &[("a", 1.0)],
        gains: &[2.0, 2.0],
        x0: &[0.5, -0.5],
        law: "-a*k1*x1 - k1*k2*x1 - k1*x2 - k2*x2",
    },
    Definition {
        id: "linear3d",
        title: "3D linear system",
        states: &[("x1", "a*x1 + x2"), ("x2", "b*x3"), ("x3", "u")],
        params: &[("a", 1.0), ("b", 1.0)],
        gains: &[2.0, 4.0, 2.0],
        x0: &[0.5, -0.5, 0.5],
        law: "-a*k1*k2*x1 - b*k2*x3 - k1*k2*k3*x1 - k1*k2*x2 - k2*k3*x2 - k3*x3",
    },
    Definition {
        id: "nonlinear2d",
        title: "2D nonlinear system",
        states: &[("x1", "a*x1^2 + x1^3 + x2"), ("x2", "u")],
        params: &[("a", 1.0)],
        gains: &[2.0, 2.0],
        x0: &[0.5, -0.5],
        law: "-a*k1*x1^2 - k1*k2*x1 - k1*x1^3 - k1*x2 - k2*x2",
    },
    Definition {
        id: "vaidyanathan_jerk",
        title: "Vaidyanathan jerk system",
        states: &[
            ("x1", "x2"),
            ("x2", "x3"),
            ("x3", "a*x1 - b*x2 - c*x3 - x1^2 - x2^2 + u"),
        ],
        params: &[("a", 1.0), ("b", 1.0), ("c", 1.0)],
        gains: &[1.0, 3.0, 3.0],
        x0: &[0.5, -0.5, 0.5],
        law:
            "-a*x1 + b*x2 + c*x3 - k1*k2*k3*x1 - k1*k2*x2 - k2*k3*x2 - k2*x3 - k3*x3 + x1^2 + x2^2",
    },
    Definition {
        id: "pendulum",
        title: "Simple pendulum",
        states: &[("x1", "x2"), ("x2", "(u - b*x2 - m*g*l*sin(x1)) / (m*l^2)")],
        params: &[("m", 1.0), ("l", 1.0), ("b", 0.5), ("g", 9.81)],
        gains: &[2.0, 2.0],
        x0: &[0.5, -0.5],
        law: "b*x2 + g*l*m*sin(x1) - k1*k2*l^2*m*x1 - k1*l^2*m*x2 - k2*l^2*m*x2",
    },
    Definition {
        id: "vanderpol",
        title: "Van der Pol oscillator",
        states: &[("x1", "x2"), ("x2", "mu*(1 - x1^2)*x2 - x1 + u")],
        params: &[("mu", 1.0)],
        gains: &[2.0, 2.0],
        x0: &[0.5, -0.5],
        law: "-k1*k2*x1 - k1*x2 - k2*x2 + mu*x1^2*x2 - mu*x2 + x1",
    },
];

pub const EXAMPLE_IDS: [&str; 6] = [
    "linear2d",
    "linear3d",
    "nonlinear2d",
    "vaidyanathan_jerk",
    "pendulum",
    "vanderpol",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RegisteredExample {
    pub id: &'static str,
    pub title: &'static str,
    pub model: SystemModel,
    /// Reference control law, in expression syntax.
    pub expected_law: &'static str,
    pub gains: GainSet,
    pub params: BTreeMap<String, f64>,
    pub x0: Vec<f64>,
    pub sim: SimConfig,
    /// The example as a system-definition file.
    pub source: String,
}

pub fn list_examples() -> &'static [&'static str] {
    &EXAMPLE_IDS
}

fn source_of(def: &Definition) -> String {
    let gains = GainSet::with_values(def.gains).expect("registry gains are positive");
    let sim = SimConfig::new(def.x0.to_vec());
    let states: Vec<(String, String)> = def
        .states
        .iter()
        .map(|(s, e)| (s.to_string(), e.to_string()))
        .collect();
    // keep declaration order of params in the file
    let mut text = render_system_file(def.id, &states, "u", &BTreeMap::new(), &gains, &sim);
    let params: String = def
        .params
        .iter()
        .map(|(p, v)| format!("param {p} = {}\n", crate::io::system_file::format_real(*v)))
        .collect();
    let at = text.find("gain ").expect("rendered file has gains");
    text.insert_str(at, &params);
    text
}

pub fn get_example(id: &str) -> Result<RegisteredExample, RegistryError> {
    let def = DEFINITIONS
        .iter()
        .find(|d| d.id == id)
        .ok_or_else(|| RegistryError::UnknownExample(id.to_string()))?;
    let source = source_of(def);
    let SystemFile { model, gains, sim } =
        parse_system_file(&source).expect("registry sources are well formed");
    Ok(RegisteredExample {
        id: def.id,
        title: def.title,
        model,
        expected_law: def.law,
        gains,
        params: sim.param_values.clone(),
        x0: sim.x0.clone(),
        sim,
        source,
    })
}
