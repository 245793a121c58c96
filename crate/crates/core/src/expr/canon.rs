//! Canonical form: an expression is mapped to a sum of monomials with exact
//! rational coefficients, then rebuilt as a sorted tree.
//!
//! A monomial is a product of *atoms* raised to rational exponents. Atoms are
//! symbols, function applications (keyed by their canonical argument), powers
//! with non-numeric exponents, and whatever could not be expanded: sums under
//! negative, fractional or very large exponents, and numbers or products
//! under fractional exponents.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{cmp_terms, rational_is_integer, Expr, Func, Rational};

/// Sums are expanded under integer powers `2..=MAX_EXPANDED_POWER`; larger
/// powers are kept as an opaque atom.
pub const MAX_EXPANDED_POWER: i64 = 16;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
struct Monomial(BTreeMap<Expr, Rational>);

#[derive(Debug, Clone, Default)]
struct Poly(BTreeMap<Monomial, Rational>);

impl Poly {
    fn constant(q: Rational) -> Poly {
        let mut p = Poly::default();
        p.add_term(Monomial::default(), q);
        p
    }

    fn one() -> Poly {
        Poly::constant(Rational::one())
    }

    fn atom(atom: Expr, exponent: Rational) -> Poly {
        let mut m = BTreeMap::new();
        m.insert(atom, exponent);
        let mut p = Poly::default();
        p.0.insert(Monomial(m), Rational::one());
        p
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn as_constant(&self) -> Option<Rational> {
        match self.0.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.0.iter().next().unwrap();
                m.0.is_empty().then(|| c.clone())
            }
            _ => None,
        }
    }

    fn single_term(&self) -> Option<(&Monomial, &Rational)> {
        if self.0.len() == 1 {
            self.0.iter().next()
        } else {
            None
        }
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.0.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn add_poly(&mut self, other: Poly) {
        for (m, c) in other.0 {
            self.add_term(m, c);
        }
    }

    fn scale(mut self, q: &Rational) -> Poly {
        if q.is_zero() {
            return Poly::default();
        }
        for c in self.0.values_mut() {
            *c *= q;
        }
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                let prod = mul_monomials(ma, mb);
                out.add_poly(prod.scale(&(ca * cb)));
            }
        }
        out
    }
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Poly {
    let mut merged = a.0.clone();
    for (atom, e) in &b.0 {
        let slot = merged.entry(atom.clone()).or_insert_with(Rational::zero);
        *slot += e;
        if slot.is_zero() {
            merged.remove(atom);
        }
    }
    resolve(merged, Rational::one())
}

/// Atoms that are not irreducible (numbers, sums, products, numeric powers)
/// only survive under non-integer exponents; once exponents combine to an
/// integer they are multiplied back out.
fn is_compound(atom: &Expr) -> bool {
    match atom {
        Expr::Number(_) | Expr::Add(_) | Expr::Mul(_) => true,
        Expr::Pow(_, e) => matches!(**e, Expr::Number(_)),
        Expr::Symbol(_) | Expr::Func(..) => false,
    }
}

fn resolve(mut factors: BTreeMap<Expr, Rational>, coeff: Rational) -> Poly {
    let pending: Vec<(Expr, Rational)> = factors
        .iter()
        .filter(|(a, e)| rational_is_integer(e) && is_compound(a) && !stays_atomic(a, e))
        .map(|(a, e)| (a.clone(), e.clone()))
        .collect();
    for (a, _) in &pending {
        factors.remove(a);
    }
    let mut out = Poly::default();
    out.0.insert(Monomial(factors), Rational::one());
    let mut out = out.scale(&coeff);
    for (atom, e) in pending {
        let base = to_poly(&atom);
        out = out.mul(&pow_poly(base, &e));
    }
    out
}

fn stays_atomic(atom: &Expr, e: &Rational) -> bool {
    match atom {
        Expr::Add(_) => !expandable(e),
        Expr::Number(q) => q.is_zero() && e.is_negative(),
        _ => false,
    }
}

fn expandable(e: &Rational) -> bool {
    rational_is_integer(e)
        && e.to_integer() >= BigInt::one()
        && e.to_integer() <= BigInt::from(MAX_EXPANDED_POWER)
}

fn pow_poly(base: Poly, exponent: &Rational) -> Poly {
    if exponent.is_zero() {
        return Poly::one();
    }
    if exponent.is_one() {
        return base;
    }
    if base.is_zero() {
        return if exponent.is_positive() {
            Poly::default()
        } else {
            Poly::atom(Expr::zero(), exponent.clone())
        };
    }
    if rational_is_integer(exponent) {
        pow_poly_int(base, exponent)
    } else {
        pow_poly_frac(base, exponent)
    }
}

fn pow_poly_int(base: Poly, exponent: &Rational) -> Poly {
    if let Some((m, c)) = base.single_term() {
        let n = exponent.to_integer();
        let coeff = pow_rational_int(c, &n);
        let scaled: BTreeMap<Expr, Rational> =
            m.0.iter().map(|(a, e)| (a.clone(), e * exponent)).collect();
        return resolve(scaled, coeff);
    }
    if expandable(exponent) {
        let n = exponent.to_integer().to_u32().unwrap();
        let mut acc = base.clone();
        for _ in 1..n {
            acc = acc.mul(&base);
        }
        return acc;
    }
    Poly::atom(to_expr(&base), exponent.clone())
}

fn pow_rational_int(q: &Rational, n: &BigInt) -> Rational {
    let k = n.abs().to_u32().expect("exponent too large");
    let p = num_traits::pow(q.clone(), k as usize);
    if n.is_negative() {
        p.recip()
    } else {
        p
    }
}

fn pow_poly_frac(base: Poly, exponent: &Rational) -> Poly {
    if let Some(c) = base.as_constant() {
        if c.is_one() {
            return Poly::one();
        }
        if let Some(root) = exact_root(&c, exponent.denom()) {
            return Poly::constant(pow_rational_int(&root, exponent.numer()));
        }
        return Poly::atom(Expr::Number(c), exponent.clone());
    }
    if let Some((m, c)) = base.single_term() {
        if c.is_one() && m.0.len() == 1 {
            let (atom, e) = m.0.iter().next().unwrap();
            if e.is_one() {
                return Poly::atom(atom.clone(), exponent.clone());
            }
        }
    }
    Poly::atom(to_expr(&base), exponent.clone())
}

fn exact_root(q: &Rational, degree: &BigInt) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let d = degree.to_u32()?;
    let rn = q.numer().nth_root(d);
    let rd = q.denom().nth_root(d);
    (num_traits::pow(rn.clone(), d as usize) == *q.numer()
        && num_traits::pow(rd.clone(), d as usize) == *q.denom())
    .then(|| Rational::new(rn, rd))
}

fn special_value(f: Func, arg: &Rational) -> Option<Rational> {
    let zero = arg.is_zero();
    match f {
        Func::Sin | Func::Tan if zero => Some(Rational::zero()),
        Func::Cos | Func::Exp if zero => Some(Rational::one()),
        Func::Log if arg.is_one() => Some(Rational::zero()),
        Func::Sqrt => exact_root(arg, &BigInt::from(2)),
        _ => None,
    }
}

fn to_poly(e: &Expr) -> Poly {
    match e {
        Expr::Number(q) => Poly::constant(q.clone()),
        Expr::Symbol(_) => Poly::atom(e.clone(), Rational::one()),
        Expr::Add(xs) => {
            let mut acc = Poly::default();
            for x in xs {
                acc.add_poly(to_poly(x));
            }
            acc
        }
        Expr::Mul(xs) => {
            let mut acc = Poly::one();
            for x in xs {
                if acc.is_zero() {
                    break;
                }
                acc = acc.mul(&to_poly(x));
            }
            acc
        }
        Expr::Pow(b, x) => {
            let exponent = to_expr(&to_poly(x));
            match exponent {
                // (b^p)^q = b^(p q) and (f g)^q = f^q g^q for integer q, taken
                // before the base is expanded
                Expr::Number(q) if rational_is_integer(&q) => match &**b {
                    Expr::Pow(inner, p) if matches!(**p, Expr::Number(_)) => {
                        let p = p.as_number().expect("checked numeric");
                        to_poly(&Expr::Pow(inner.clone(), Box::new(Expr::Number(p * &q))))
                    }
                    Expr::Mul(fs) => {
                        let mut acc = Poly::one();
                        for f in fs {
                            acc = acc.mul(&to_poly(&Expr::Pow(
                                Box::new(f.clone()),
                                Box::new(Expr::Number(q.clone())),
                            )));
                        }
                        acc
                    }
                    _ => pow_poly(to_poly(b), &q),
                },
                Expr::Number(q) => pow_poly(to_poly(b), &q),
                sym_exp => {
                    let base = to_poly(b);
                    if base.as_constant().is_some_and(|c| c.is_one()) {
                        Poly::one()
                    } else {
                        Poly::atom(Expr::pow(to_expr(&base), sym_exp), Rational::one())
                    }
                }
            }
        }
        Expr::Func(f, a) => {
            let arg = to_expr(&to_poly(a));
            if let Some(v) = arg.as_number().and_then(|q| special_value(*f, q)) {
                return Poly::constant(v);
            }
            Poly::atom(Expr::func(*f, arg), Rational::one())
        }
    }
}

fn monomial_to_expr(m: &Monomial, c: &Rational) -> Expr {
    let mut factors: Vec<Expr> =
        m.0.iter()
            .map(|(atom, e)| {
                if e.is_one() {
                    atom.clone()
                } else {
                    Expr::pow(atom.clone(), Expr::Number(e.clone()))
                }
            })
            .collect();
    factors.sort();
    if factors.is_empty() {
        return Expr::Number(c.clone());
    }
    if c.is_one() {
        if factors.len() == 1 {
            return factors.pop().unwrap();
        }
        return Expr::Mul(factors);
    }
    let mut all = Vec::with_capacity(factors.len() + 1);
    all.push(Expr::Number(c.clone()));
    all.extend(factors);
    Expr::Mul(all)
}

fn to_expr(p: &Poly) -> Expr {
    let mut terms: Vec<Expr> = p.0.iter().map(|(m, c)| monomial_to_expr(m, c)).collect();
    match terms.len() {
        0 => Expr::zero(),
        1 => terms.pop().unwrap(),
        _ => {
            terms.sort_by(|a, b| cmp_terms(a, b).then_with(|| a.cmp(b)));
            Expr::Add(terms)
        }
    }
}

/// Expands products over sums and integer powers of sums, collects like
/// monomials, merges numeric factors and sorts siblings. Idempotent.
///
/// No trigonometric or logarithmic identities are applied, and rational
/// functions are not reduced: `(x + 1)^-1 * (x + 1)` expands to
/// `x*(x + 1)^-1 + (x + 1)^-1`.
pub fn canonicalize(e: &Expr) -> Expr {
    to_expr(&to_poly(e))
}

pub fn equals_canonical(a: &Expr, b: &Expr) -> bool {
    canonicalize(a) == canonicalize(b)
}

/// Canonical form of `e` multiplied through by every sum that appears under
/// a negative integer power. Wherever `e` is defined the result vanishes
/// exactly when `e` does.
pub fn clear_denominators(e: &Expr) -> Expr {
    let mut p = to_poly(e);
    let is_denominator = |a: &Expr, x: &Rational| {
        matches!(a, Expr::Add(_)) && x.is_negative() && rational_is_integer(x)
    };
    while let Some(atom) =
        p.0.keys()
            .flat_map(|m| m.0.iter())
            .find(|(a, x)| is_denominator(a, x))
            .map(|(a, _)| a.clone())
    {
        let k =
            p.0.keys()
                .filter_map(|m| m.0.get(&atom))
                .map(|x| -x)
                .max()
                .expect("atom occurs");
        p = p.mul(&Poly::atom(atom, k));
    }
    to_expr(&p)
}
