//! Performance metrics and stabilization evidence computed from trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Program, SlotMap};
use crate::simulation::Trajectory;
use crate::synthesis::SynthesisResult;

/// Default half-width of the settling band.
pub const DEFAULT_SETTLING_BAND: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory has no error-coordinate samples")]
    MissingZValues,
    #[error("desired state has {got} entries, trajectory has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("settling band must be positive, got {0}")]
    InvalidBand(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rmse: Vec<f64>,
    /// Integral of squared error (trapezoidal).
    pub ise: Vec<f64>,
    /// Integral of absolute error (trapezoidal).
    pub iae: Vec<f64>,
    pub max_abs: Vec<f64>,
    /// First sample time after which `max_i |x_i - desired_i| < band` holds
    /// through the end of the run.
    pub settling_time: Option<f64>,
}

fn trapezoid(times: &[f64], ys: impl Iterator<Item = f64>) -> f64 {
    let ys: Vec<f64> = ys.collect();
    times
        .windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

pub fn error_metrics(
    traj: &Trajectory,
    desired: &[f64],
    band: f64,
) -> Result<ErrorMetrics, AnalysisError> {
    if traj.is_empty() {
        return Err(AnalysisError::EmptyTrajectory);
    }
    if band.is_nan() || band <= 0.0 {
        return Err(AnalysisError::InvalidBand(band));
    }
    let n = traj.states[0].len();
    if desired.len() != n {
        return Err(AnalysisError::DimensionMismatch {
            expected: n,
            got: desired.len(),
        });
    }
    let err = |k: usize, i: usize| traj.states[k][i] - desired[i];
    let samples = traj.len();
    let mut m = ErrorMetrics {
        rmse: Vec::with_capacity(n),
        ise: Vec::with_capacity(n),
        iae: Vec::with_capacity(n),
        max_abs: Vec::with_capacity(n),
        settling_time: None,
    };
    for i in 0..n {
        let sq = (0..samples).map(|k| err(k, i).powi(2));
        m.rmse
            .push((sq.clone().sum::<f64>() / samples as f64).sqrt());
        m.ise.push(trapezoid(&traj.times, sq));
        m.iae.push(trapezoid(
            &traj.times,
            (0..samples).map(|k| err(k, i).abs()),
        ));
        m.max_abs
            .push((0..samples).map(|k| err(k, i).abs()).fold(0.0, f64::max));
    }
    let inside = |k: usize| (0..n).all(|i| err(k, i).abs() < band);
    let mut first_inside = None;
    for k in (0..samples).rev() {
        if inside(k) {
            first_inside = Some(k);
        } else {
            break;
        }
    }
    m.settling_time = first_inside.map(|k| traj.times[k]);
    Ok(m)
}

/// Composite Lyapunov function sampled along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovTrace {
    #[serde(rename = "v")]
    pub values: Vec<f64>,
    /// Whether every step satisfies `v[i+1] <= v[i] + 1e-9 * max(v)`.
    pub nonincreasing: bool,
}

/// Relative slack allowed between consecutive Lyapunov samples.
pub const LYAPUNOV_SLACK: f64 = 1e-9;

/// Evaluates `r.vc` at every sample. `bindings` supplies parameters and
/// gains; states are taken from the trajectory in the order of `states`.
pub fn lyapunov_trace(
    r: &SynthesisResult,
    states: &[String],
    traj: &Trajectory,
    bindings: &BTreeMap<String, f64>,
) -> Result<LyapunovTrace, AnalysisError> {
    let mut slots = SlotMap::new();
    for s in states {
        slots.insert(s);
    }
    let mut values = vec![0.0; states.len()];
    for (k, v) in bindings {
        let i = slots.insert(k);
        if i >= values.len() {
            values.resize(i + 1, 0.0);
        }
        values[i] = *v;
    }
    let prog = Program::compile(&r.vc, &slots)?;
    let mut stack = Vec::new();
    let mut out = Vec::with_capacity(traj.len());
    for x in &traj.states {
        values[..states.len()].copy_from_slice(x);
        out.push(prog.eval_with(&values, &mut stack)?);
    }
    let nonincreasing = is_nonincreasing(&out);
    Ok(LyapunovTrace {
        values: out,
        nonincreasing,
    })
}

pub fn is_nonincreasing(v: &[f64]) -> bool {
    let peak = v.iter().copied().fold(0.0, f64::max);
    let slack = LYAPUNOV_SLACK * peak;
    v.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Largest deviation of the simulated last error coordinate from
/// `z_n(t0) * exp(-k_n (t - t0))`, relative to `|z_n(t0)|`.
pub fn decay_fit(traj: &Trajectory, k_n: f64) -> Result<f64, AnalysisError> {
    let zs = traj
        .z_values
        .as_ref()
        .ok_or(AnalysisError::MissingZValues)?;
    let first = zs.first().ok_or(AnalysisError::EmptyTrajectory)?;
    let z0 = *first.last().ok_or(AnalysisError::MissingZValues)?;
    let t0 = traj.times[0];
    let scale = z0.abs().max(1e-12);
    let worst = traj
        .times
        .iter()
        .zip(zs)
        .map(|(t, z)| (z[z.len() - 1] - z0 * (-k_n * (t - t0)).exp()).abs() / scale)
        .fold(0.0, f64::max);
    Ok(worst)
}
