//! Backstepping synthesis for single-input chain systems
//! `x_i' = f_i(x)` (i < n), `x_n' = f_n(x) + g_n(x) u`.
//!
//! Error coordinates are built recursively,
//!
//! ```text
//! z_1 = x_1
//! z_i = x_i + k_{i-1} z_{i-1}        (virtual control phi_i = -k_i z_i)
//! ```
//!
//! and the control law makes the last coordinate decay exponentially,
//! `z_n' = -k_n z_n`. Gains stay symbolic; they are bound only when the law
//! is simulated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{
    canonicalize, clear_denominators, differentiate, solve_affine, substitute, AffineError, Expr,
    Func,
};

/// A single-input control-affine system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    /// State names in chain order, `x_1 .. x_n`.
    pub states: Vec<String>,
    /// `dynamics[i]` is the right-hand side of the i-th state equation.
    pub dynamics: Vec<Expr>,
    pub control: String,
    /// Declared parameters with an optional default value.
    pub params: BTreeMap<String, Option<f64>>,
}

impl SystemModel {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    /// Default values of every parameter that has one.
    pub fn param_defaults(&self) -> BTreeMap<String, f64> {
        self.params
            .iter()
            .filter_map(|(k, v)| v.map(|v| (k.clone(), v)))
            .collect()
    }
}

/// Feedback gains `k_1 .. k_n`, symbolic with optional numeric values.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    names: Vec<String>,
    values: Vec<Option<f64>>,
}

impl GainSet {
    /// Unbound gains named `k1 .. kn`.
    pub fn symbolic(n: usize) -> GainSet {
        GainSet {
            names: (1..=n).map(|i| format!("k{i}")).collect(),
            values: vec![None; n],
        }
    }

    /// Gains `k1 .. kn` bound to `values`, each of which must be positive.
    pub fn with_values(values: &[f64]) -> Result<GainSet, SynthesisError> {
        let names = (1..=values.len()).map(|i| format!("k{i}")).collect();
        GainSet::new(names, values.iter().copied().map(Some).collect())
    }

    pub fn new(names: Vec<String>, values: Vec<Option<f64>>) -> Result<GainSet, SynthesisError> {
        if names.len() != values.len() {
            return Err(SynthesisError::GainCount {
                expected: names.len(),
                got: values.len(),
            });
        }
        for (name, v) in names.iter().zip(&values) {
            if let Some(v) = v {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(SynthesisError::NonPositiveGain {
                        name: name.clone(),
                        value: *v,
                    });
                }
            }
        }
        Ok(GainSet { names, values })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// Numeric bindings for the gains that have values.
    pub fn bindings(&self) -> BTreeMap<String, f64> {
        self.names
            .iter()
            .zip(&self.values)
            .filter_map(|(k, v)| v.map(|v| (k.clone(), v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    TooFewStates,
    DynamicsCount { states: usize, dynamics: usize },
    InvalidIdentifier(String),
    NameClash(String),
    UndeclaredSymbol(String),
    ControlInEarlierEquation,
    ControlMissing,
    NotAffine(Expr),
    DegenerateCoefficient,
}

/// One violated admissibility rule; `equation` is 1-based when the rule is
/// tied to a particular state equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub equation: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(i) = self.equation {
            write!(f, "equation {i}: ")?;
        }
        match &self.rule {
            Rule::TooFewStates => write!(f, "at least two states are required"),
            Rule::DynamicsCount { states, dynamics } => {
                write!(f, "{states} states but {dynamics} state equations")
            }
            Rule::InvalidIdentifier(s) => write!(f, "`{s}` is not a valid identifier"),
            Rule::NameClash(s) => write!(f, "`{s}` is declared more than once"),
            Rule::UndeclaredSymbol(s) => {
                write!(f, "symbol `{s}` is not a state, the control or a parameter")
            }
            Rule::ControlInEarlierEquation => {
                write!(f, "control appears before the last state equation")
            }
            Rule::ControlMissing => write!(f, "control does not appear in the last state equation"),
            Rule::NotAffine(c) => write!(f, "not affine in the control (coefficient {c})"),
            Rule::DegenerateCoefficient => write!(f, "control coefficient is identically zero"),
        }
    }
}

/// Outcome of [`validate_model`]. On success also carries the decomposition
/// `x_n' = drift + input_gain * u` of the last equation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub drift: Option<Expr>,
    pub input_gain: Option<Expr>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "model is valid");
        }
        writeln!(f, "model is invalid:")?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && Func::from_name(s).is_none()
}

pub fn validate_model(m: &SystemModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |equation: Option<usize>, rule: Rule| {
        report.violations.push(Violation { equation, rule });
    };
    let n = m.states.len();
    if n < 2 {
        push(None, Rule::TooFewStates);
    }
    if m.dynamics.len() != n {
        push(
            None,
            Rule::DynamicsCount {
                states: n,
                dynamics: m.dynamics.len(),
            },
        );
    }

    let mut seen = BTreeSet::new();
    let names = m
        .states
        .iter()
        .chain(std::iter::once(&m.control))
        .chain(m.params.keys());
    for name in names {
        if !is_identifier(name) {
            push(None, Rule::InvalidIdentifier(name.clone()));
        }
        if !seen.insert(name.clone()) {
            push(None, Rule::NameClash(name.clone()));
        }
    }

    for (i, rhs) in m.dynamics.iter().enumerate() {
        for s in rhs.free_symbols() {
            if !seen.contains(&s) {
                push(Some(i + 1), Rule::UndeclaredSymbol(s));
            }
        }
        let last = i + 1 == m.dynamics.len();
        if !last && rhs.contains_symbol(&m.control) {
            push(Some(i + 1), Rule::ControlInEarlierEquation);
        }
    }

    if let Some(rhs) = m.dynamics.last() {
        let idx = Some(m.dynamics.len());
        if !rhs.contains_symbol(&m.control) {
            push(idx, Rule::ControlMissing);
        } else {
            match solve_affine(rhs, &m.control) {
                Ok((c0, c1)) => {
                    report.drift = Some(c0);
                    report.input_gain = Some(c1);
                }
                Err(AffineError::NotAffine { coefficient, .. }) => {
                    push(idx, Rule::NotAffine(coefficient))
                }
                Err(AffineError::DegenerateCoefficient { .. }) => {
                    push(idx, Rule::DegenerateCoefficient)
                }
            }
        }
    }
    if !report.is_valid() {
        report.drift = None;
        report.input_gain = None;
    }
    report
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("{0}")]
    InvalidModel(ValidationReport),
    #[error("expected {expected} gains, got {got}")]
    GainCount { expected: usize, got: usize },
    #[error("gain `{name}` must be positive, got {value}")]
    NonPositiveGain { name: String, value: f64 },
    #[error("gain name `{0}` collides with a model symbol")]
    GainNameClash(String),
    #[error("control coefficient is identically zero")]
    DegenerateCoefficient,
    #[error("cancellation check left a nonzero residual: {residual}")]
    VerificationFailed { residual: Expr },
}

/// Everything produced by one synthesis run.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    /// Error coordinates `z_1 .. z_n` in state variables.
    pub z: Vec<Expr>,
    /// Virtual controls `phi_1 .. phi_{n-1}`, `phi_i = -k_i z_i`.
    pub phi: Vec<Expr>,
    pub v1: Expr,
    /// Composite Lyapunov function `1/2 * sum z_i^2`.
    pub vc: Expr,
    /// Time derivative of `z_n` along the open-loop dynamics (contains `u`).
    pub zdot_n: Expr,
    pub u_raw: Expr,
    /// Canonical control law.
    pub u: Expr,
    pub gains: Vec<String>,
    pub trace: Vec<(String, Expr)>,
}

impl SynthesisResult {
    pub fn last_gain(&self) -> &str {
        self.gains.last().expect("at least two gains")
    }
}

/// `z_n' = sum_j dz_n/dx_j * x_j'`.
fn time_derivative(z: &Expr, m: &SystemModel) -> Expr {
    let terms = m
        .states
        .iter()
        .zip(&m.dynamics)
        .map(|(x, f)| Expr::mul([differentiate(z, x), f.clone()]));
    canonicalize(&Expr::add(terms))
}

pub fn synthesize(m: &SystemModel, k: &GainSet) -> Result<SynthesisResult, SynthesisError> {
    let report = validate_model(m);
    if !report.is_valid() {
        return Err(SynthesisError::InvalidModel(report));
    }
    let n = m.n();
    if k.len() != n {
        return Err(SynthesisError::GainCount {
            expected: n,
            got: k.len(),
        });
    }
    for g in k.names() {
        let clash = m.states.contains(g) || *g == m.control || m.params.contains_key(g);
        if clash || !is_identifier(g) {
            return Err(SynthesisError::GainNameClash(g.clone()));
        }
    }
    let gain = |i: usize| Expr::sym(k.names()[i].clone());

    let mut trace = Vec::new();
    let mut z = vec![Expr::sym(m.states[0].clone())];
    let mut phi = Vec::new();
    trace.push(("z1".to_string(), z[0].clone()));
    for i in 1..n {
        let p = canonicalize(&Expr::neg(Expr::mul([gain(i - 1), z[i - 1].clone()])));
        trace.push((format!("phi{i}"), p.clone()));
        let zi = canonicalize(&Expr::sub(Expr::sym(m.states[i].clone()), p.clone()));
        trace.push((format!("z{}", i + 1), zi.clone()));
        phi.push(p);
        z.push(zi);
    }

    let z_n = z[n - 1].clone();
    let zdot_n = time_derivative(&z_n, m);
    trace.push((format!("zdot{n}"), zdot_n.clone()));

    let (drift, input_gain) = solve_affine(&zdot_n, &m.control).map_err(|e| match e {
        AffineError::DegenerateCoefficient { .. } => SynthesisError::DegenerateCoefficient,
        AffineError::NotAffine { .. } => SynthesisError::InvalidModel(report.clone()),
    })?;
    trace.push(("g".to_string(), input_gain.clone()));

    // u = (-k_n z_n - drift) / g
    let u_raw = Expr::mul([
        Expr::add([
            Expr::neg(Expr::mul([gain(n - 1), z_n.clone()])),
            Expr::neg(drift),
        ]),
        Expr::pow(input_gain, Expr::int(-1)),
    ]);
    let u = canonicalize(&u_raw);

    let x1 = Expr::sym(m.states[0].clone());
    let half = Expr::rational(1, 2);
    let v1 = canonicalize(&Expr::mul([half.clone(), Expr::pow(x1, Expr::int(2))]));
    let vc = canonicalize(&Expr::mul([
        half,
        Expr::add(z.iter().map(|zi| Expr::pow(zi.clone(), Expr::int(2)))),
    ]));
    trace.push(("V1".to_string(), v1.clone()));
    trace.push(("Vc".to_string(), vc.clone()));
    trace.push(("u".to_string(), u.clone()));

    Ok(SynthesisResult {
        z,
        phi,
        v1,
        vc,
        zdot_n,
        u_raw,
        u,
        gains: k.names().to_vec(),
        trace,
    })
}

/// Substitutes the derived law into `z_n' + k_n z_n` and returns the
/// canonical residual, which must be zero.
pub fn verify_cancellation(m: &SystemModel, r: &SynthesisResult) -> Result<Expr, SynthesisError> {
    let z_n = r.z.last().expect("synthesis produces n >= 2 coordinates");
    let zdot = time_derivative(z_n, m);
    let closed = Expr::add([
        zdot,
        Expr::mul([Expr::sym(r.last_gain().to_string()), z_n.clone()]),
    ]);
    let residual = substitute(&closed, &BTreeMap::from([(m.control.clone(), r.u.clone())]));
    if residual.is_zero() {
        Ok(residual)
    } else if clear_denominators(&residual).is_zero() {
        Ok(Expr::zero())
    } else {
        Err(SynthesisError::VerificationFailed { residual })
    }
}
