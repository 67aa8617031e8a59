// SPDX-License-Identifier: Apache-2.0

//! Oracles: exhaustive product checks, e-class consistency, and the
//! triangle-adder / P-adder fixtures.

use std::collections::HashMap;

use serde::Serialize;

use crate::arrays::ArraySpec;
use crate::egraph::{EGraph, Id};
use crate::netlist::{lower, Netlist, NetlistError};
use crate::sexp::parse;
use crate::term::{eval, Env, Term};

/// A failing input. `input` packs `q` above `p`: `(q << n) | p`, in hex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub input: String,
    pub p: u64,
    pub q: u64,
    pub expected: u128,
    pub actual: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub cases_checked: u64,
    pub counterexample: Option<Mismatch>,
}

impl Verdict {
    fn pass(cases: u64) -> Verdict {
        Verdict {
            pass: true,
            cases_checked: cases,
            counterexample: None,
        }
    }
}

/// Most operand bits exhaustive checks accept (2^16 cases).
pub const MAX_EXHAUSTIVE_BITS: u32 = 16;

/// Checks output bits (LSB first) against the exact product.
pub fn exhaustive_check(bits: &[Term], spec: &ArraySpec) -> Result<Verdict, NetlistError> {
    Ok(exhaustive_check_netlist(&lower(bits, spec)?, spec, 1))
}

/// Checks a netlist over every input, 64 assignments per simulation pass.
///
/// With `jobs > 1` the input space is split across threads; the reported
/// counterexample is still the first in input order.
pub fn exhaustive_check_netlist(nl: &Netlist, spec: &ArraySpec, jobs: usize) -> Verdict {
    let n = spec.width();
    let in_bits = if spec.square() { n } else { 2 * n };
    assert!(
        in_bits <= MAX_EXHAUSTIVE_BITS,
        "{in_bits} input bits is too many to enumerate"
    );
    let total: u64 = 1 << in_bits;
    let blocks = total.div_ceil(64);
    let jobs = jobs.clamp(1, blocks as usize) as u64;
    let per = blocks.div_ceil(jobs);
    let check = |lo: u64, hi: u64| -> Option<Mismatch> {
        (lo..hi).find_map(|b| check_block(nl, spec, b * 64, total))
    };
    let first = if jobs == 1 {
        check(0, blocks)
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..jobs)
                .map(|j| {
                    let (lo, hi) = (j * per, ((j + 1) * per).min(blocks));
                    s.spawn(move || check(lo, hi))
                })
                .collect();
            handles
                .into_iter()
                .filter_map(|h| h.join().expect("worker"))
                .next()
        })
    };
    match first {
        None => Verdict::pass(total),
        Some(m) => Verdict {
            pass: false,
            cases_checked: total,
            counterexample: Some(m),
        },
    }
}

fn check_block(nl: &Netlist, spec: &ArraySpec, start: u64, total: u64) -> Option<Mismatch> {
    let n = spec.width() as usize;
    let lanes = (total - start).min(64);
    let mut p = vec![0u64; n];
    let mut q = vec![0u64; n];
    for lane in 0..lanes {
        let x = start + lane;
        for i in 0..n {
            p[i] |= (x >> i & 1) << lane;
            if !spec.square() {
                q[i] |= (x >> (n + i) & 1) << lane;
            }
        }
    }
    let out = nl.simulate(&p, &q);
    for lane in 0..lanes {
        let x = start + lane;
        let actual: u128 = out
            .iter()
            .enumerate()
            .map(|(i, w)| u128::from(w >> lane & 1) << i)
            .sum();
        let mask = (1u64 << n) - 1;
        let (pv, qv) = (x & mask, if spec.square() { x & mask } else { x >> n });
        let expected = spec.expected(pv, qv);
        if actual != expected {
            return Some(Mismatch {
                input: format!("{x:#x}"),
                p: pv,
                q: qv,
                expected,
                actual,
            });
        }
    }
    None
}

/// Result of one formula fixture over the 64 operand pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FixtureVerdict {
    pub name: String,
    pub pass: bool,
    pub cases_checked: u64,
    /// First failing `(p, q)` pair or free-bit assignment, with both sides.
    pub counterexample: Option<(u64, u64, u128, u128)>,
}

fn t(s: &str) -> Term {
    parse(s).expect("fixture term")
}

fn fixture(name: &str, lhs: &[(u128, Term)], rhs: &Term, free_bits: Option<u32>) -> FixtureVerdict {
    let value = |env: &Env| -> (u128, u128) {
        let l = lhs.iter().map(|(w, t)| w * eval(t, env).unwrap()).sum();
        (l, eval(rhs, env).unwrap())
    };
    let mut cases = 0;
    let mut first = None;
    match free_bits {
        Some(k) => {
            for x in 0..1u64 << k {
                // First listed bit is the most significant.
                let env = Env::new().with_p(x.reverse_bits() >> (64 - k), k);
                cases += 1;
                let (l, r) = value(&env);
                if l != r && first.is_none() {
                    first = Some((x, 0, l, r));
                }
            }
        }
        None => {
            for p in 0..8 {
                for q in 0..8 {
                    let env = Env::new().with_p(p, 3).with_q(q, 3);
                    cases += 1;
                    let (l, r) = value(&env);
                    if l != r && first.is_none() {
                        first = Some((p, q, l, r));
                    }
                }
            }
        }
    }
    FixtureVerdict {
        name: name.into(),
        pass: first.is_none(),
        cases_checked: cases,
        counterexample: first,
    }
}

/// Triangle adder under partial-product correlation:
/// `4 TA[2] + 2 TA[1] + TA[0] = 2 p2q2 + p2q1 + p1q2`.
pub fn triangle_adder_correlated() -> FixtureVerdict {
    let lhs = [
        (4, t("(and (and p2 q1) (and p1 q2))")),
        (2, t("(and (and p2 q2) (not (and p1 q1)))")),
        (1, t("(xor (and p2 q1) (and p1 q2))")),
    ];
    let rhs = t("(add (add (add (and p2 q2) (and p2 q2)) (and p2 q1)) (and p1 q2))");
    fixture("triangle-adder", &lhs, &rhs, None)
}

/// The same identity over three free bits `a = p0, b = p1, c = p2` standing
/// for `p2q1, p1q2, p2q2`; the `p1q1` factor becomes `a b`, its value
/// whenever `c` holds. Expected to fail.
pub fn triangle_adder_free_bits() -> FixtureVerdict {
    let lhs = [
        (4, t("(and p0 p1)")),
        (2, t("(and p2 (not (and p0 p1)))")),
        (1, t("(xor p0 p1)")),
    ];
    let rhs = t("(add (add (add p2 p2) p0) p1)");
    fixture("triangle-adder-free-bits", &lhs, &rhs, Some(3))
}

fn p_adder_rhs() -> Term {
    t("(sum (shl2 (row (and p2 q1))) \
            (shl1 (row (and p2 q0))) (shl1 (row (and p1 q1))) (shl1 (row (and p0 q2))) \
            (and p1 q0) (and p0 q1))")
}

fn p_adder_low_bits() -> [(u128, Term); 3] {
    let k = "(and (xor p2 (and (and (and (xor (xor (and p2 q0) p1) (and p0 q2)) p0) p1) q0)) q1)";
    let fac = "(fac (and p2 q0) (and p1 q1) (and p0 q2))";
    [
        (4, t(&format!("(xor {k} {fac})"))),
        (
            2,
            t("(xor (and (and p1 q1) (not (and p0 q0))) (xor (and p2 q0) (and p0 q2)))"),
        ),
        (1, t("(xor (and p1 q0) (and p0 q1))")),
    ]
}

/// P-adder with `PA[0..2]` as printed and the hand-derived `PA[3]`.
pub fn p_adder() -> FixtureVerdict {
    let mut lhs = p_adder_low_bits().to_vec();
    lhs.push((
        8,
        t("(and (and p2 q1) (or (and (and p0 q0) q2) (and p1 (xor q0 (and p0 q2)))))"),
    ));
    fixture("p-adder", &lhs, &p_adder_rhs(), None)
}

/// P-adder with `PA[3] = K FAc(..)` as printed.
pub fn p_adder_printed_msb() -> FixtureVerdict {
    let k = "(and (xor p2 (and (and (and (xor (xor (and p2 q0) p1) (and p0 q2)) p0) p1) q0)) q1)";
    let mut lhs = p_adder_low_bits().to_vec();
    lhs.push((
        8,
        t(&format!(
            "(and {k} (fac (and p2 q0) (and p1 q1) (and p0 q2)))"
        )),
    ));
    fixture("p-adder-printed-msb", &lhs, &p_adder_rhs(), None)
}

/// All formula fixtures.
pub fn check_ta_pa_fixtures() -> Vec<FixtureVerdict> {
    vec![
        triangle_adder_correlated(),
        triangle_adder_free_bits(),
        p_adder(),
        p_adder_printed_msb(),
    ]
}

/// A class whose members disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassMismatch {
    pub class: String,
    pub node: String,
    pub expected: u128,
    pub actual: u128,
    pub sample: usize,
}

/// Evaluates every node of every class under each sample and checks that
/// members agree (modulo `2^output_width` for modular classes).
pub fn eclass_consistency(
    g: &EGraph,
    samples: &[Env],
    output_width: u32,
) -> Result<(), ClassMismatch> {
    for (si, env) in samples.iter().enumerate() {
        let values = class_values(g, env);
        let mask = if output_width >= 128 {
            u128::MAX
        } else {
            (1u128 << output_width) - 1
        };
        for class in g.classes() {
            let v = values[&class.id];
            for node in class.iter() {
                let kids: Option<Vec<u128>> = node
                    .children
                    .iter()
                    .map(|&c| values.get(&g.find(c)).copied())
                    .collect();
                let Some(kids) = kids else { continue };
                let actual = match node.kind {
                    crate::term::NodeKind::Var(x) => env.get(x).map_or(u128::MAX, u128::from),
                    k => k.apply(&kids),
                };
                let agree = if class.data.modular {
                    actual & mask == v & mask
                } else {
                    actual == v
                };
                if !agree {
                    return Err(ClassMismatch {
                        class: class.id.to_string(),
                        node: node.kind.token(),
                        expected: v,
                        actual,
                        sample: si,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Value of each class via its smallest realization.
fn class_values(g: &EGraph, env: &Env) -> HashMap<Id, u128> {
    crate::rules::smallest_terms(g)
        .into_iter()
        .map(|(id, t)| (id, eval(&t, env).unwrap_or(u128::MAX)))
        .collect()
}
