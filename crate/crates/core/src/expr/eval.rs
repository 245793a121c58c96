use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use thiserror::Error;

use super::{rational_is_integer, rational_to_f64, Expr, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("evaluation produced a non-finite value")]
    NonFiniteResult,
}

fn finite(x: f64) -> Result<f64, EvalError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(EvalError::NonFiniteResult)
    }
}

fn int_exponent(e: &Expr) -> Option<i32> {
    match e {
        Expr::Number(q) if rational_is_integer(q) => q.to_integer().to_i32(),
        _ => None,
    }
}

/// Double-precision evaluation. Every intermediate value must be finite.
pub fn eval_numeric(e: &Expr, bindings: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Number(q) => rational_to_f64(q),
        Expr::Symbol(s) => *bindings
            .get(s)
            .ok_or_else(|| EvalError::UnboundSymbol(s.clone()))?,
        Expr::Add(xs) => {
            let mut acc = 0.0;
            for x in xs {
                acc += eval_numeric(x, bindings)?;
            }
            acc
        }
        Expr::Mul(xs) => {
            let mut acc = 1.0;
            for x in xs {
                acc *= eval_numeric(x, bindings)?;
            }
            acc
        }
        Expr::Pow(b, x) => {
            let base = eval_numeric(b, bindings)?;
            match int_exponent(x) {
                Some(n) => base.powi(n),
                None => base.powf(eval_numeric(x, bindings)?),
            }
        }
        Expr::Func(f, a) => f.apply(eval_numeric(a, bindings)?),
    };
    finite(v)
}

/// Assignment of symbol names to positions in a flat value vector.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotMap {
    index: BTreeMap<String, usize>,
    names: Vec<String>,
}

impl SlotMap {
    pub fn new() -> SlotMap {
        SlotMap::default()
    }

    /// Returns the slot of `name`, allocating a new one if needed.
    pub fn insert(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.index.insert(name.to_string(), i);
        self.names.push(name.to_string());
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
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
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Load(usize),
    Add(usize),
    Mul(usize),
    PowI(i32),
    Pow,
    Call(Func),
}

/// An expression compiled to postfix form over a [`SlotMap`], for repeated
/// evaluation inside integration loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    max_stack: usize,
}

impl Program {
    pub fn compile(e: &Expr, slots: &SlotMap) -> Result<Program, EvalError> {
        let mut ops = Vec::new();
        emit(e, slots, &mut ops)?;
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Load(_) => depth += 1,
                Op::Add(n) | Op::Mul(n) => depth = depth + 1 - n,
                Op::Pow => depth -= 1,
                Op::PowI(_) | Op::Call(_) => {}
            }
            max_stack = max_stack.max(depth);
        }
        Ok(Program { ops, max_stack })
    }

    /// Evaluates against `values`, using `stack` as scratch space.
    pub fn eval_with(&self, values: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        stack.clear();
        stack.reserve(self.max_stack);
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Load(i) => values[i],
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let s = stack.drain(at..).sum();
                    s
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let p = stack.drain(at..).product();
                    p
                }
                Op::PowI(n) => stack.pop().unwrap().powi(n),
                Op::Pow => {
                    let x = stack.pop().unwrap();
                    let b = stack.pop().unwrap();
                    b.powf(x)
                }
                Op::Call(f) => f.apply(stack.pop().unwrap()),
            };
            stack.push(finite(v)?);
        }
        Ok(stack.pop().expect("program leaves one value"))
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        let mut stack = Vec::new();
        self.eval_with(values, &mut stack)
    }
}

fn emit(e: &Expr, slots: &SlotMap, ops: &mut Vec<Op>) -> Result<(), EvalError> {
    match e {
        Expr::Number(q) => ops.push(Op::Const(rational_to_f64(q))),
        Expr::Symbol(s) => {
            let i = slots
                .get(s)
                .ok_or_else(|| EvalError::UnboundSymbol(s.clone()))?;
            ops.push(Op::Load(i));
        }
        Expr::Add(xs) | Expr::Mul(xs) => {
            for x in xs {
                emit(x, slots, ops)?;
            }
            ops.push(if matches!(e, Expr::Add(_)) {
                Op::Add(xs.len())
            } else {
                Op::Mul(xs.len())
            });
        }
        Expr::Pow(b, x) => {
            emit(b, slots, ops)?;
            match int_exponent(x) {
                Some(n) => ops.push(Op::PowI(n)),
                None => {
                    emit(x, slots, ops)?;
                    ops.push(Op::Pow);
                }
            }
        }
        Expr::Func(f, a) => {
            emit(a, slots, ops)?;
            ops.push(Op::Call(*f));
        }
    }
    Ok(())
}
