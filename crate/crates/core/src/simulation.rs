//! Fixed-step integration of open- and closed-loop dynamics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr, Program, SlotMap};
use crate::synthesis::{validate_model, SynthesisResult, SystemModel, ValidationReport};

/// States beyond this magnitude count as a blow-up.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Upper bound on the number of integration steps in one run.
pub const MAX_STEPS: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            other => Err(format!("unknown integration method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t0: f64,
    pub tf: f64,
    pub dt: f64,
    pub method: Method,
    pub x0: Vec<f64>,
    /// Overrides for model parameter defaults.
    pub param_values: BTreeMap<String, f64>,
    pub gain_values: BTreeMap<String, f64>,
    /// Target state; empty means the origin.
    pub desired: Vec<f64>,
    /// Constant input used when no law is supplied.
    pub open_loop_u: f64,
}

impl SimConfig {
    pub const DEFAULT_DT: f64 = 1e-3;
    pub const DEFAULT_HORIZON: f64 = 10.0;

    pub fn new(x0: Vec<f64>) -> SimConfig {
        SimConfig {
            t0: 0.0,
            tf: Self::DEFAULT_HORIZON,
            dt: Self::DEFAULT_DT,
            method: Method::Rk4,
            x0,
            param_values: BTreeMap::new(),
            gain_values: BTreeMap::new(),
            desired: Vec::new(),
            open_loop_u: 0.0,
        }
    }

    /// Number of integration steps, `floor((tf - t0) / dt)`.
    pub fn steps(&self) -> Result<usize, SimError> {
        let ok = self.t0.is_finite() && self.tf.is_finite() && self.dt.is_finite();
        if !ok || self.tf <= self.t0 || self.dt <= 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "need finite t0 < tf and dt > 0 (t0={}, tf={}, dt={})",
                self.t0, self.tf, self.dt
            )));
        }
        let ratio = (self.tf - self.t0) / self.dt;
        if ratio > MAX_STEPS {
            return Err(SimError::InvalidConfig(format!(
                "{ratio:.0} steps exceeds the limit of {MAX_STEPS:.0}"
            )));
        }
        // absorb representation error such as 10/0.001 = 9999.999...
        Ok((ratio * (1.0 + 1e-12)).floor() as usize)
    }

    /// The desired state, defaulting to the origin.
    pub fn desired_state(&self, n: usize) -> Vec<f64> {
        if self.desired.is_empty() {
            vec![0.0; n]
        } else {
            self.desired.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<f64>,
    pub z_values: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    InvalidModel(ValidationReport),
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("integration step produced a non-finite state")]
    NonFiniteState,
    #[error("simulation diverged at t = {t}")]
    Diverged { t: f64 },
}

impl From<EvalError> for SimError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnboundSymbol(s) => SimError::UnboundSymbol(s),
            EvalError::NonFiniteResult => SimError::NonFiniteState,
        }
    }
}

fn check_finite(x: Vec<f64>) -> Result<Vec<f64>, SimError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(SimError::NonFiniteState)
    }
}

/// Forward Euler: `x + dt * f(t, x)`.
pub fn euler_step<F>(mut deriv: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, SimError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, SimError>,
{
    let k = deriv(t, x)?;
    check_finite(x.iter().zip(&k).map(|(xi, ki)| xi + dt * ki).collect())
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(mut deriv: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, SimError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, SimError>,
{
    let offset =
        |k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + h * ki).collect() };
    let k1 = deriv(t, x)?;
    let k2 = deriv(t + dt / 2.0, &offset(&k1, dt / 2.0))?;
    let k3 = deriv(t + dt / 2.0, &offset(&k2, dt / 2.0))?;
    let k4 = deriv(t + dt, &offset(&k3, dt))?;
    let next = (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    check_finite(next)
}

/// Model, law and coordinates compiled against a shared slot layout
/// `[states.., control, params.., gains..]`.
struct Compiled {
    n: usize,
    values: Vec<f64>,
    stack: Vec<f64>,
    dynamics: Vec<Program>,
    law: Option<Program>,
    coords: Vec<Program>,
    open_loop_u: f64,
}

impl Compiled {
    fn new(
        m: &SystemModel,
        law: Option<&Expr>,
        coords: &[Expr],
        cfg: &SimConfig,
    ) -> Result<Compiled, SimError> {
        let mut slots = SlotMap::new();
        for s in &m.states {
            slots.insert(s);
        }
        slots.insert(&m.control);
        let mut values = vec![0.0; slots.len()];
        let mut bind = |slots: &mut SlotMap, name: &str, v: f64| {
            let i = slots.insert(name);
            if i >= values.len() {
                values.resize(i + 1, 0.0);
            }
            values[i] = v;
        };
        for (name, default) in &m.params {
            let v = cfg
                .param_values
                .get(name)
                .copied()
                .or(*default)
                .ok_or_else(|| SimError::UnboundSymbol(name.clone()))?;
            bind(&mut slots, name, v);
        }
        if law.is_some() {
            for (name, v) in &cfg.gain_values {
                bind(&mut slots, name, *v);
            }
        }
        let dynamics = m
            .dynamics
            .iter()
            .map(|e| Program::compile(e, &slots))
            .collect::<Result<Vec<_>, _>>()?;
        let law = match law {
            Some(e) => {
                if e.contains_symbol(&m.control) {
                    return Err(SimError::InvalidConfig(format!(
                        "feedback law refers to the control `{}`",
                        m.control
                    )));
                }
                Some(Program::compile(e, &slots)?)
            }
            None => None,
        };
        let coords = coords
            .iter()
            .map(|e| Program::compile(e, &slots))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Compiled {
            n: m.n(),
            values,
            stack: Vec::new(),
            dynamics,
            law,
            coords,
            open_loop_u: cfg.open_loop_u,
        })
    }

    fn load(&mut self, x: &[f64]) {
        self.values[..self.n].copy_from_slice(x);
    }

    fn control(&mut self, x: &[f64]) -> Result<f64, SimError> {
        self.load(x);
        match &self.law {
            Some(p) => Ok(p.eval_with(&self.values, &mut self.stack)?),
            None => Ok(self.open_loop_u),
        }
    }

    fn deriv(&mut self, x: &[f64]) -> Result<Vec<f64>, SimError> {
        let u = self.control(x)?;
        self.values[self.n] = u;
        let mut out = Vec::with_capacity(self.n);
        for p in &self.dynamics {
            out.push(p.eval_with(&self.values, &mut self.stack)?);
        }
        Ok(out)
    }

    fn coordinates(&mut self, x: &[f64]) -> Result<Vec<f64>, SimError> {
        self.load(x);
        let mut out = Vec::with_capacity(self.coords.len());
        for p in &self.coords {
            out.push(p.eval_with(&self.values, &mut self.stack)?);
        }
        Ok(out)
    }
}

fn blown_up(x: &[f64]) -> bool {
    x.iter()
        .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
}

fn run(
    m: &SystemModel,
    law: Option<&Expr>,
    coords: &[Expr],
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    let report = validate_model(m);
    if !report.is_valid() {
        return Err(SimError::InvalidModel(report));
    }
    let steps = cfg.steps()?;
    let n = m.n();
    if cfg.x0.len() != n {
        return Err(SimError::InvalidConfig(format!(
            "initial state has {} entries, model has {n} states",
            cfg.x0.len()
        )));
    }
    if !cfg.desired.is_empty() && cfg.desired.len() != n {
        return Err(SimError::InvalidConfig(format!(
            "desired state has {} entries, model has {n} states",
            cfg.desired.len()
        )));
    }
    let mut sys = Compiled::new(m, law, coords, cfg)?;

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps + 1),
        z_values: (!coords.is_empty()).then(|| Vec::with_capacity(steps + 1)),
    };
    let diverged = |t: f64| move |_| SimError::Diverged { t };
    let mut x = cfg.x0.clone();
    for i in 0..=steps {
        let t = cfg.t0 + i as f64 * cfg.dt;
        if blown_up(&x) {
            return Err(SimError::Diverged { t });
        }
        let u = sys.control(&x).map_err(diverged(t))?;
        if let Some(zs) = traj.z_values.as_mut() {
            zs.push(sys.coordinates(&x).map_err(diverged(t))?);
        }
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.controls.push(u);
        if i == steps {
            break;
        }
        let f = |_t: f64, y: &[f64]| sys.deriv(y);
        x = match cfg.method {
            Method::Euler => euler_step(f, &x, t, cfg.dt),
            Method::Rk4 => rk4_step(f, &x, t, cfg.dt),
        }
        .map_err(diverged(t + cfg.dt))?;
    }
    Ok(traj)
}

/// Simulates `m` with `u = law(x)` when a law is given, otherwise with the
/// constant `cfg.open_loop_u`.
pub fn simulate(
    m: &SystemModel,
    law: Option<&Expr>,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    run(m, law, &[], cfg)
}

/// Closed-loop run under a synthesized law; also records the error
/// coordinates `z_1 .. z_n` at every sample.
pub fn simulate_closed_loop(
    m: &SystemModel,
    r: &SynthesisResult,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    run(m, Some(&r.u), &r.z, cfg)
}
