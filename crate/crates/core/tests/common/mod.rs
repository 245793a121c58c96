#![allow(dead_code)]

use std::collections::BTreeMap;

use backstep::expr::{eval_numeric, Expr, Func};
use proptest::prelude::*;
use proptest::sample::select;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

pub const VARS: [&str; 3] = ["x", "y", "z"];

/// Expressions that are smooth on the whole real line.
pub fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-5i64..=5).prop_map(Expr::int),
        (-5i64..=5, 1i64..=4).prop_map(|(n, d)| Expr::rational(n, d)),
        select(&VARS[..]).prop_map(Expr::sym),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::add),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::mul),
            (inner.clone(), 0i64..=3).prop_map(|(b, k)| Expr::pow(b, Expr::int(k))),
            inner.clone().prop_map(|a| Expr::pow(
                Expr::add([Expr::one(), Expr::pow(a, Expr::int(2))]),
                Expr::int(-1)
            )),
            inner.clone().prop_map(|a| Expr::func(
                Func::Sqrt,
                Expr::add([Expr::int(2), Expr::pow(a, Expr::int(2))])
            )),
            inner.clone().prop_map(|a| Expr::func(
                Func::Log,
                Expr::add([Expr::one(), Expr::pow(a, Expr::int(2))])
            )),
            (select(vec![Func::Sin, Func::Cos, Func::Exp]), inner)
                .prop_map(|(f, a)| Expr::func(f, a)),
        ]
    })
}

/// Deterministic samples of a strategy, for fixed-size sweeps.
pub fn samples<S: Strategy>(s: S, count: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..count)
        .map(|_| {
            s.new_tree(&mut runner)
                .expect("strategy produces values")
                .current()
        })
        .collect()
}

pub fn point(x: f64, y: f64, z: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([("x".into(), x), ("y".into(), y), ("z".into(), z)])
}

/// Richardson-extrapolated central difference of `e` in `var` at `at`.
pub fn numeric_derivative(e: &Expr, var: &str, at: &BTreeMap<String, f64>) -> Option<f64> {
    let x = at[var];
    let f = |h: f64| {
        let mut p = at.clone();
        p.insert(var.to_string(), x + h);
        eval_numeric(e, &p).ok()
    };
    let central = |h: f64| Some((f(h)? - f(-h)?) / (2.0 * h));
    let h = 1e-3 * x.abs().max(1.0);
    let (d1, d2) = (central(h)?, central(h / 2.0)?);
    Some((4.0 * d2 - d1) / 3.0)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
