// SPDX-License-Identifier: Apache-2.0

//! Gate-level rewrites: lower compressor cells, then reshape Boolean logic.

use crate::egraph::{Phase, Rewrite};

const RULES: &[(&str, &str, &str)] = &[
    // Compressor lowering.
    ("half-adder-sum", "(has ?a ?b)", "(xor ?a ?b)"),
    ("half-adder-carry", "(hac ?a ?b)", "(and ?a ?b)"),
    ("full-adder-sum", "(fas ?a ?b ?c)", "(xor (xor ?a ?b) ?c)"),
    (
        "full-adder-carry",
        "(fac ?a ?b ?c)",
        "(or (and ?a ?b) (and ?c (xor ?a ?b)))",
    ),
    // Named Boolean rewrites.
    (
        "sop-xor",
        "(xor ?a ?b)",
        "(or (and ?a (not ?b)) (and (not ?a) ?b))",
    ),
    (
        "demorgan-and",
        "(not (and ?a ?b))",
        "(or (not ?a) (not ?b))",
    ),
    ("demorgan-or", "(not (or ?a ?b))", "(and (not ?a) (not ?b))"),
    (
        "distrib-and-or",
        "(and ?a (or ?b ?c))",
        "(or (and ?a ?b) (and ?a ?c))",
    ),
    (
        "distrib-and-xor",
        "(and ?a (xor ?b ?c))",
        "(xor (and ?a ?b) (and ?a ?c))",
    ),
    ("xor-and", "(xor ?a (and ?a ?b))", "(and ?a (not ?b))"),
    (
        "or-not-and",
        "(or (not ?a) (and ?a ?b))",
        "(or (not ?a) ?b)",
    ),
    // Commutativity and associativity.
    ("and-comm", "(and ?a ?b)", "(and ?b ?a)"),
    ("or-comm", "(or ?a ?b)", "(or ?b ?a)"),
    ("xor-comm", "(xor ?a ?b)", "(xor ?b ?a)"),
    (
        "and-assoc-l",
        "(and ?a (and ?b ?c))",
        "(and (and ?a ?b) ?c)",
    ),
    (
        "and-assoc-r",
        "(and (and ?a ?b) ?c)",
        "(and ?a (and ?b ?c))",
    ),
    ("or-assoc-l", "(or ?a (or ?b ?c))", "(or (or ?a ?b) ?c)"),
    ("or-assoc-r", "(or (or ?a ?b) ?c)", "(or ?a (or ?b ?c))"),
    (
        "xor-assoc-l",
        "(xor ?a (xor ?b ?c))",
        "(xor (xor ?a ?b) ?c)",
    ),
    (
        "xor-assoc-r",
        "(xor (xor ?a ?b) ?c)",
        "(xor ?a (xor ?b ?c))",
    ),
    // Idempotence, involution, constants.
    ("and-idem", "(and ?a ?a)", "?a"),
    ("or-idem", "(or ?a ?a)", "?a"),
    ("not-not", "(not (not ?a))", "?a"),
    ("and-0", "(and ?a 0)", "0"),
    ("and-1", "(and ?a 1)", "?a"),
    ("or-0", "(or ?a 0)", "?a"),
    ("or-1", "(or ?a 1)", "1"),
    ("xor-0", "(xor ?a 0)", "?a"),
    ("xor-1", "(xor ?a 1)", "(not ?a)"),
    // Extras found useful on generated expressions.
    ("and-compl", "(and ?a (not ?a))", "0"),
    ("or-compl", "(or ?a (not ?a))", "1"),
    ("xor-self", "(xor ?a ?a)", "0"),
    ("xor-compl", "(xor ?a (not ?a))", "1"),
    ("absorb-or", "(or ?a (and ?a ?b))", "?a"),
    ("absorb-and", "(and ?a (or ?a ?b))", "?a"),
    (
        "factor-and-or",
        "(or (and ?a ?b) (and ?a ?c))",
        "(and ?a (or ?b ?c))",
    ),
    (
        "factor-and-xor",
        "(xor (and ?a ?b) (and ?a ?c))",
        "(and ?a (xor ?b ?c))",
    ),
    ("xor-not", "(xor (not ?a) ?b)", "(not (xor ?a ?b))"),
];

/// The phase-two rule set.
pub fn phase2_rules() -> Vec<Rewrite> {
    RULES
        .iter()
        .map(|(name, lhs, rhs)| {
            Rewrite::static_rule(name, Phase::Two, lhs, rhs).expect("well-formed rule")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexp::parse;
    use crate::term::{eval, Env, Var};

    #[test]
    fn full_adder_carry_truth_table() {
        let fac = parse("(fac p0 p1 p2)").unwrap();
        let gates = parse("(or (and p0 p1) (and p2 (xor p0 p1)))").unwrap();
        for bits in 0..8u64 {
            let env = Env::new().with_p(bits, 3);
            let ones = bits.count_ones() as u128;
            assert_eq!(eval(&fac, &env).unwrap(), ones / 2);
            assert_eq!(eval(&gates, &env).unwrap(), ones / 2);
        }
    }

    #[test]
    fn xor_and_at_ones() {
        let env = Env::from_bits([(Var::p(0), true), (Var::p(1), true)]);
        let lhs = parse("(xor p0 (and p0 p1))").unwrap();
        let rhs = parse("(and p0 (not p1))").unwrap();
        assert_eq!(eval(&lhs, &env).unwrap(), 0);
        assert_eq!(eval(&rhs, &env).unwrap(), 0);
    }

    #[test]
    fn names_are_unique() {
        let rules = phase2_rules();
        let mut names: Vec<&str> = rules.iter().map(|r| r.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), rules.len());
    }
}
