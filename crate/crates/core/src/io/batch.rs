//! Seeded generation of random chain systems paired with their laws.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{canonicalize, Expr};
use crate::io::export::SystemRecord;
use crate::synthesis::{synthesize, verify_cancellation, GainSet, SynthesisError, SystemModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BatchError {
    #[error("state range {lo}..={hi} is empty or below 2")]
    InvalidRange { lo: usize, hi: usize },
    #[error("system {index}: {source}")]
    Synthesis {
        index: usize,
        source: SynthesisError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub system: SystemRecord,
    pub gains: Vec<String>,
    pub law: String,
    pub residual_check: String,
}

const MAX_DEGREE: u32 = 3;
const MAX_TERMS: usize = 3;
const COEFFICIENTS: [i64; 4] = [-2, -1, 1, 2];

/// Random polynomial in `vars` with total degree at most 3.
fn random_polynomial(rng: &mut ChaCha8Rng, vars: &[String]) -> Expr {
    let terms = rng.gen_range(0..=MAX_TERMS);
    Expr::add((0..terms).map(|_| {
        let degree = rng.gen_range(0..=MAX_DEGREE);
        let mut exps = vec![0i64; vars.len()];
        for _ in 0..degree {
            exps[rng.gen_range(0..vars.len())] += 1;
        }
        let c = *COEFFICIENTS.choose(rng).expect("nonempty");
        Expr::mul(
            std::iter::once(Expr::int(c)).chain(
                vars.iter()
                    .zip(&exps)
                    .filter(|(_, e)| **e > 0)
                    .map(|(v, e)| Expr::pow(Expr::sym(v.clone()), Expr::int(*e))),
            ),
        )
    }))
}

/// `x_i' = f_i(x_1..x_i) + x_{i+1}` and `x_n' = f_n(x) + g u` with `g` either
/// 1 or a parameter `b`.
pub fn random_chain(rng: &mut ChaCha8Rng, n: usize, name: String) -> SystemModel {
    let states: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut params = BTreeMap::new();
    let mut dynamics = Vec::with_capacity(n);
    for i in 0..n {
        let f = random_polynomial(rng, &states[..=i]);
        let next = if i + 1 < n {
            Expr::sym(states[i + 1].clone())
        } else if rng.gen_bool(0.5) {
            params.insert(
                "b".to_string(),
                Some(*[0.5, 2.0].choose(rng).expect("nonempty")),
            );
            Expr::mul([Expr::sym("b"), Expr::sym("u")])
        } else {
            Expr::sym("u")
        };
        dynamics.push(canonicalize(&Expr::add([f, next])));
    }
    SystemModel {
        name,
        states,
        dynamics,
        control: "u".into(),
        params,
    }
}

/// Generates `count` systems with state counts drawn from `n_range`.
pub fn generate_batch(
    count: usize,
    n_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<Vec<BatchEntry>, BatchError> {
    let (lo, hi) = (*n_range.start(), *n_range.end());
    if lo < 2 || lo > hi {
        return Err(BatchError::InvalidRange { lo, hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|index| {
            let n = rng.gen_range(lo..=hi);
            let m = random_chain(&mut rng, n, format!("chain{index}"));
            let gains = GainSet::symbolic(n);
            let fail = |source| BatchError::Synthesis { index, source };
            let r = synthesize(&m, &gains).map_err(fail)?;
            let residual = verify_cancellation(&m, &r).map_err(fail)?;
            Ok(BatchEntry {
                system: SystemRecord {
                    name: m.name.clone(),
                    states: m.states.clone(),
                    dynamics: m.dynamics.iter().map(ToString::to_string).collect(),
                    control: m.control.clone(),
                    params: m.param_defaults(),
                },
                gains: gains.names().to_vec(),
                law: r.u.to_string(),
                residual_check: residual.to_string(),
            })
        })
        .collect()
}

/// One compact JSON object per line.
pub fn batch_jsonl(entries: &[BatchEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("batch entries are plain data"));
        out.push('\n');
    }
    out
}
