use std::collections::BTreeMap;

use thiserror::Error;

use super::{canonicalize, Expr, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AffineError {
    #[error("expression is not affine in `{symbol}` (coefficient {coefficient})")]
    NotAffine { symbol: String, coefficient: Expr },
    #[error("coefficient of `{symbol}` is identically zero")]
    DegenerateCoefficient { symbol: String },
}

/// Exact partial derivative with respect to `var`, canonicalized.
pub fn differentiate(e: &Expr, var: &str) -> Expr {
    canonicalize(&derive(e, var))
}

fn derive(e: &Expr, var: &str) -> Expr {
    if !e.contains_symbol(var) {
        return Expr::zero();
    }
    match e {
        Expr::Number(_) => Expr::zero(),
        Expr::Symbol(s) => {
            if s == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Add(xs) => Expr::add(xs.iter().map(|x| derive(x, var))),
        Expr::Mul(xs) => {
            let mut terms = Vec::new();
            for (i, x) in xs.iter().enumerate() {
                if !x.contains_symbol(var) {
                    continue;
                }
                let mut factors = Vec::with_capacity(xs.len());
                factors.push(derive(x, var));
                factors.extend(
                    xs.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, y)| y.clone()),
                );
                terms.push(Expr::mul(factors));
            }
            Expr::add(terms)
        }
        Expr::Pow(b, x) => {
            let base = (**b).clone();
            let exponent = (**x).clone();
            if !exponent.contains_symbol(var) {
                // d(b^n) = n * b^(n-1) * b'
                Expr::mul([
                    exponent.clone(),
                    Expr::pow(base.clone(), Expr::sub(exponent, Expr::one())),
                    derive(&base, var),
                ])
            } else {
                // d(b^x) = b^x * (x' * log(b) + x * b' / b)
                Expr::mul([
                    e.clone(),
                    Expr::add([
                        Expr::mul([derive(&exponent, var), Expr::func(Func::Log, base.clone())]),
                        Expr::mul([exponent, derive(&base, var), Expr::pow(base, Expr::int(-1))]),
                    ]),
                ])
            }
        }
        Expr::Func(f, a) => {
            let arg = (**a).clone();
            let outer = match f {
                Func::Sin => Expr::func(Func::Cos, arg.clone()),
                Func::Cos => Expr::neg(Expr::func(Func::Sin, arg.clone())),
                Func::Tan => Expr::add([
                    Expr::one(),
                    Expr::pow(Expr::func(Func::Tan, arg.clone()), Expr::int(2)),
                ]),
                Func::Exp => e.clone(),
                Func::Log => Expr::pow(arg.clone(), Expr::int(-1)),
                Func::Sqrt => {
                    Expr::mul([Expr::rational(1, 2), Expr::pow(e.clone(), Expr::int(-1))])
                }
            };
            Expr::mul([outer, derive(&arg, var)])
        }
    }
}

/// Simultaneous substitution of symbols; replacements are not themselves
/// rewritten. The result is canonicalized.
pub fn substitute(e: &Expr, bindings: &BTreeMap<String, Expr>) -> Expr {
    canonicalize(&replace(e, bindings))
}

fn replace(e: &Expr, bindings: &BTreeMap<String, Expr>) -> Expr {
    match e {
        Expr::Number(_) => e.clone(),
        Expr::Symbol(s) => bindings.get(s).cloned().unwrap_or_else(|| e.clone()),
        Expr::Add(xs) => Expr::Add(xs.iter().map(|x| replace(x, bindings)).collect()),
        Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| replace(x, bindings)).collect()),
        Expr::Pow(b, x) => Expr::pow(replace(b, bindings), replace(x, bindings)),
        Expr::Func(f, a) => Expr::func(*f, replace(a, bindings)),
    }
}

/// Decomposes `e` as `c1*s + c0` with `c1 = de/ds` and `c0 = e|_{s=0}`.
pub fn solve_affine(e: &Expr, s: &str) -> Result<(Expr, Expr), AffineError> {
    let c1 = differentiate(e, s);
    if c1.contains_symbol(s) {
        return Err(AffineError::NotAffine {
            symbol: s.to_string(),
            coefficient: c1,
        });
    }
    if c1.is_zero() {
        return Err(AffineError::DegenerateCoefficient {
            symbol: s.to_string(),
        });
    }
    let c0 = substitute(e, &BTreeMap::from([(s.to_string(), Expr::zero())]));
    Ok((c0, c1))
}
