//! Infix rendering with minimal parentheses. Output re-parses to an
//! expression with the same canonical form.

use std::fmt;

use num_traits::{One, Signed};

use super::{rational_is_integer, Expr, Rational};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

fn number_prec(q: &Rational) -> u8 {
    if q.is_negative() || !rational_is_integer(q) {
        PREC_MUL
    } else {
        PREC_ATOM
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Number(q) => number_prec(q),
        Expr::Symbol(_) | Expr::Func(..) => PREC_ATOM,
        Expr::Pow(_, x) => match negative_exponent(x) {
            Some(_) => PREC_MUL,
            None => PREC_POW,
        },
        Expr::Mul(_) => PREC_MUL,
        Expr::Add(_) => PREC_ADD,
    }
}

/// `Some(-q)` when the exponent is a negative number.
fn negative_exponent(x: &Expr) -> Option<Rational> {
    match x {
        Expr::Number(q) if q.is_negative() => Some(-q.clone()),
        _ => None,
    }
}

fn write_number(q: &Rational, out: &mut String) {
    if rational_is_integer(q) {
        out.push_str(&q.numer().to_string());
    } else {
        out.push_str(&format!("{}/{}", q.numer(), q.denom()));
    }
}

fn wrap(e: &Expr, min_prec: u8, out: &mut String) {
    if prec(e) < min_prec {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

fn write_exponent(x: &Expr, out: &mut String) {
    match x {
        Expr::Number(q) if rational_is_integer(q) => write_number(q, out),
        Expr::Symbol(_) | Expr::Func(..) => write_expr(x, out),
        _ => {
            out.push('(');
            write_expr(x, out);
            out.push(')');
        }
    }
}

fn write_power(base: &Expr, x: &Expr, out: &mut String) {
    wrap(base, PREC_ATOM, out);
    if !x.is_one() {
        out.push('^');
        write_exponent(x, out);
    }
}

/// Writes `coeff * factors` with negative powers moved under a `/`.
fn write_product(coeff: &Rational, factors: &[&Expr], out: &mut String) {
    let mut coeff = coeff.clone();
    if coeff.is_negative() {
        out.push('-');
        coeff = -coeff;
    }
    let mut numer: Vec<String> = Vec::new();
    let mut denom: Vec<String> = Vec::new();
    if !coeff.numer().is_one() || factors.iter().all(|f| negative_exponent_of(f).is_some()) {
        numer.push(coeff.numer().to_string());
    }
    if !coeff.denom().is_one() {
        denom.push(coeff.denom().to_string());
    }
    for f in factors {
        let mut s = String::new();
        match f {
            Expr::Pow(b, x) if negative_exponent(x).is_some() => {
                let pos = Expr::Number(negative_exponent(x).unwrap());
                write_power(b, &pos, &mut s);
                denom.push(s);
            }
            other => {
                wrap(other, PREC_POW, &mut s);
                numer.push(s);
            }
        }
    }
    out.push_str(&numer.join("*"));
    match denom.len() {
        0 => {}
        1 => {
            out.push('/');
            out.push_str(&denom[0]);
        }
        _ => {
            out.push_str("/(");
            out.push_str(&denom.join("*"));
            out.push(')');
        }
    }
}

fn negative_exponent_of(e: &Expr) -> Option<Rational> {
    match e {
        Expr::Pow(_, x) => negative_exponent(x),
        _ => None,
    }
}

/// Sign-split of a summand: `(is_negative, magnitude written out)`.
fn write_term(t: &Expr, first: bool, out: &mut String) {
    let (coeff, factors) = t.coeff_and_factors();
    let negative = coeff.is_negative();
    if !first {
        out.push_str(if negative { " - " } else { " + " });
    } else if negative {
        out.push('-');
    }
    let magnitude = coeff.abs();
    if factors.is_empty() {
        write_number(&magnitude, out);
        return;
    }
    match (t, factors.as_slice()) {
        (Expr::Add(_), _) => {
            out.push('(');
            write_expr(t, out);
            out.push(')');
        }
        (Expr::Mul(_), _) | (Expr::Pow(..), _) => write_product(&magnitude, &factors, out),
        (_, [single]) if magnitude.is_one() => wrap(single, PREC_MUL, out),
        _ => write_product(&magnitude, &factors, out),
    }
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Number(q) => write_number(q, out),
        Expr::Symbol(s) => out.push_str(s),
        Expr::Func(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(a, out);
            out.push(')');
        }
        Expr::Pow(b, x) => {
            if let Some(pos) = negative_exponent(x) {
                out.push_str("1/");
                let mut s = String::new();
                write_power(b, &Expr::Number(pos), &mut s);
                out.push_str(&s);
            } else {
                write_power(b, x, out);
            }
        }
        Expr::Mul(_) => {
            let (coeff, factors) = e.coeff_and_factors();
            write_product(&coeff, &factors, out);
        }
        Expr::Add(xs) => {
            for (i, t) in xs.iter().enumerate() {
                write_term(t, i == 0, out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(self, &mut s);
        f.write_str(&s)
    }
}
