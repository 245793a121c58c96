//! A small computer-algebra layer.
//!
//! Expressions are immutable trees over exact rationals, symbols, sums,
//! products, powers and a fixed set of elementary functions. Division is a
//! product with a `-1` power and subtraction is a sum with a `-1` factor, so
//! the tree only ever has six node kinds.
//!
//! Most operations return expressions in *canonical form* (see
//! [`canonicalize`]): fully expanded, like terms collected, siblings sorted by
//! the total order implemented by `Ord for Expr`. Two expressions are equal
//! in that form iff they are structurally identical.

mod calculus;
mod canon;
mod eval;
mod parse;
mod render;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub use calculus::{differentiate, solve_affine, substitute, AffineError};
pub use canon::{canonicalize, clear_denominators, equals_canonical, MAX_EXPANDED_POWER};
pub use eval::{eval_numeric, EvalError, Program, SlotMap};
pub use parse::{parse, ParseError};

/// Exact rational coefficient.
pub type Rational = BigRational;

/// Elementary functions understood by the parser, the calculus routines and
/// the evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symbolic expression tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Number(Rational),
    Symbol(String),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Number(Rational::from_integer(BigInt::from(n)))
    }

    pub fn rational(numer: i64, denom: i64) -> Expr {
        Expr::Number(Rational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn sym(name: impl Into<String>) -> Expr {
        Expr::Symbol(name.into())
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Box::new(arg))
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        Expr::Pow(Box::new(base), Box::new(exponent))
    }

    /// Sum node; flattens nested sums and unwraps trivial lists. Not canonical.
    pub fn add(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        for t in terms {
            match t {
                Expr::Add(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::Add(out),
        }
    }

    /// Product node; flattens nested products and unwraps trivial lists. Not canonical.
    pub fn mul(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        for f in factors {
            match f {
                Expr::Mul(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Expr::Mul(out),
        }
    }

    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Number(q) => Expr::Number(-q),
            other => Expr::mul([Expr::int(-1), other]),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add([a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::mul([a, Expr::pow(b, Expr::int(-1))])
    }

    pub fn as_number(&self) -> Option<&Rational> {
        match self {
            Expr::Number(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Number(q) if q.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Number(q) if q.is_one())
    }

    /// Every symbol name occurring in the expression.
    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Number(_) => {}
            Expr::Symbol(s) => {
                out.insert(s.clone());
            }
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
            Expr::Pow(b, e) => {
                b.collect_symbols(out);
                e.collect_symbols(out);
            }
            Expr::Func(_, a) => a.collect_symbols(out),
        }
    }

    pub fn contains_symbol(&self, name: &str) -> bool {
        match self {
            Expr::Number(_) => false,
            Expr::Symbol(s) => s == name,
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().any(|x| x.contains_symbol(name)),
            Expr::Pow(b, e) => b.contains_symbol(name) || e.contains_symbol(name),
            Expr::Func(_, a) => a.contains_symbol(name),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Number(_) | Expr::Symbol(_) => 1,
            Expr::Add(xs) | Expr::Mul(xs) => 1 + xs.iter().map(Expr::size).sum::<usize>(),
            Expr::Pow(b, e) => 1 + b.size() + e.size(),
            Expr::Func(_, a) => 1 + a.size(),
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Expr::Number(_) => 0,
            Expr::Symbol(_) => 1,
            Expr::Func(..) => 2,
            Expr::Pow(..) => 3,
            Expr::Mul(_) => 4,
            Expr::Add(_) => 5,
        }
    }

    /// Splits a product into its numeric coefficient and remaining factors.
    /// Non-products are treated as a one-factor product with coefficient 1.
    pub(crate) fn coeff_and_factors(&self) -> (Rational, Vec<&Expr>) {
        match self {
            Expr::Number(q) => (q.clone(), Vec::new()),
            Expr::Mul(xs) => {
                let mut c = Rational::one();
                let mut rest = Vec::new();
                for x in xs {
                    match x {
                        Expr::Number(q) => c *= q,
                        other => rest.push(other),
                    }
                }
                (c, rest)
            }
            other => (Rational::one(), vec![other]),
        }
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

/// Views an expression as `base^exponent` for ordering purposes.
fn split_power(e: &Expr) -> (&Expr, Option<&Expr>) {
    match e {
        Expr::Pow(b, x) => (b, Some(x)),
        other => (other, None),
    }
}

fn cmp_lists<'a>(
    a: impl IntoIterator<Item = &'a Expr>,
    b: impl IntoIterator<Item = &'a Expr>,
    cmp: fn(&Expr, &Expr) -> Ordering,
) -> Ordering {
    let mut a = a.into_iter();
    let mut b = b.into_iter();
    loop {
        match (a.next(), b.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) => match cmp(x, y) {
                Ordering::Equal => {}
                o => return o,
            },
        }
    }
}

/// Ordering of summands: by the non-numeric factor list, then by coefficient.
/// Constants come first, and `2*x1` sorts before `x2`.
pub(crate) fn cmp_terms(a: &Expr, b: &Expr) -> Ordering {
    let (ca, fa) = a.coeff_and_factors();
    let (cb, fb) = b.coeff_and_factors();
    cmp_lists(fa, fb, semantic_cmp).then_with(|| ca.cmp(&cb))
}

fn semantic_cmp(a: &Expr, b: &Expr) -> Ordering {
    match (a, b) {
        (Expr::Number(x), Expr::Number(y)) => return x.cmp(y),
        (Expr::Number(_), _) => return Ordering::Less,
        (_, Expr::Number(_)) => return Ordering::Greater,
        _ => {}
    }
    let (ba, ea) = split_power(a);
    let (bb, eb) = split_power(b);
    if ea.is_some() || eb.is_some() {
        let one = Expr::one();
        return semantic_cmp(ba, bb)
            // higher powers of the same base first: x1^2 + 2*x1*x2 + x2^2
            .then_with(|| semantic_cmp(eb.unwrap_or(&one), ea.unwrap_or(&one)))
            // a bare base sorts before any power of itself
            .then_with(|| ea.is_some().cmp(&eb.is_some()));
    }
    match a.kind_rank().cmp(&b.kind_rank()) {
        Ordering::Equal => {}
        o => return o,
    }
    match (a, b) {
        (Expr::Symbol(x), Expr::Symbol(y)) => x.cmp(y),
        (Expr::Func(f, x), Expr::Func(g, y)) => {
            f.name().cmp(g.name()).then_with(|| semantic_cmp(x, y))
        }
        (Expr::Mul(_), Expr::Mul(_)) => cmp_terms(a, b),
        (Expr::Add(xs), Expr::Add(ys)) => cmp_lists(xs, ys, cmp_terms),
        _ => unreachable!("kind ranks already compared"),
    }
}

/// Plain structural order; only used to break ties between trees that the
/// semantic order considers equivalent (which never happens for canonical
/// trees).
fn structural_cmp(a: &Expr, b: &Expr) -> Ordering {
    match a.kind_rank().cmp(&b.kind_rank()) {
        Ordering::Equal => {}
        o => return o,
    }
    match (a, b) {
        (Expr::Number(x), Expr::Number(y)) => x.cmp(y),
        (Expr::Symbol(x), Expr::Symbol(y)) => x.cmp(y),
        (Expr::Func(f, x), Expr::Func(g, y)) => f.cmp(g).then_with(|| structural_cmp(x, y)),
        (Expr::Pow(b1, e1), Expr::Pow(b2, e2)) => {
            structural_cmp(b1, b2).then_with(|| structural_cmp(e1, e2))
        }
        (Expr::Mul(xs), Expr::Mul(ys)) | (Expr::Add(xs), Expr::Add(ys)) => {
            cmp_lists(xs, ys, structural_cmp)
        }
        _ => unreachable!(),
    }
}

/// Total order: Numbers < Symbols < Func < Pow < Mul < Add, where a power is
/// compared through its base first (so `x1^2` sorts next to `x1`, before
/// `x2`, with higher powers first), products by their non-numeric factors and sums by their terms.
impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        semantic_cmp(self, other).then_with(|| structural_cmp(self, other))
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn rational_is_integer(q: &Rational) -> bool {
    q.denom().is_one()
}

pub(crate) fn rational_to_f64(q: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => q.to_f64().unwrap_or(f64::NAN),
    }
}
