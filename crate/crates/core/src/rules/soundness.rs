// SPDX-License-Identifier: Apache-2.0

//! Exhaustive soundness check for rewrites.
//!
//! Each rule is instantiated on small left-hand sides; every right-hand side
//! it produces is compared with the left over all assignments of the free
//! bits (exactly, or modulo 2^W for modular rules).

use serde::Serialize;

use crate::egraph::{EGraph, Pattern, Rewrite, RuleBody, RuleContext, RuleSample, Soundness};
use crate::sexp::serialize;
use crate::term::{eval, free_vars, Env, Op, Term, Var};

use super::realize;

/// Most free bits a sample may have.
pub const MAX_FREE_BITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub lhs: String,
    pub rhs: String,
    /// Assignment of each free variable, in variable order.
    pub assignment: Vec<(String, bool)>,
    pub lhs_value: u128,
    pub rhs_value: u128,
    /// Modulus used for the comparison, if any.
    pub modulus_bits: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SoundnessReport {
    pub rule: String,
    pub pass: bool,
    pub samples: usize,
    pub instances: usize,
    pub cases: u64,
    pub counterexample: Option<Counterexample>,
    /// Why the rule could not be checked, if it could not.
    pub note: Option<String>,
}

fn fresh_rows(pattern: &Pattern, width: usize) -> Term {
    let holes = pattern.holes();
    let lookup = |n: &str| {
        let i = holes.iter().position(|(m, _)| m == n).expect("known hole");
        let bits: Vec<Term> = (0..width)
            .map(|j| Term::var(Var::p((i * width + j) as u16)))
            .collect();
        if holes[i].1 {
            bits
        } else if width == 1 {
            bits.into_iter().take(1).collect()
        } else {
            vec![Term::row(bits)]
        }
    };
    pattern.to_term(&lookup)
}

fn samples_for(rule: &Rewrite) -> Vec<RuleSample> {
    match &rule.body {
        RuleBody::Dynamic(d) => d.samples(),
        RuleBody::Static { lhs, bits_only, .. } => {
            let mut out = vec![RuleSample::new(lhs.with_fresh_bits())];
            let arithmetic = matches!(
                rule.root_op(),
                Some(Op::Add | Op::Sum | Op::Row | Op::Shl | Op::Mul)
            );
            if arithmetic && !*bits_only && 2 * lhs.holes().len() <= MAX_FREE_BITS {
                out.push(RuleSample::new(fresh_rows(lhs, 2)));
            }
            out
        }
    }
}

/// Checks one rule on all its samples.
pub fn soundness_check(rule: &Rewrite) -> SoundnessReport {
    let mut report = SoundnessReport {
        rule: rule.name.clone(),
        pass: true,
        samples: 0,
        instances: 0,
        cases: 0,
        counterexample: None,
        note: None,
    };
    for sample in samples_for(rule) {
        report.samples += 1;
        let vars: Vec<Var> = free_vars(&sample.lhs).into_iter().collect();
        if vars.len() > MAX_FREE_BITS {
            report.pass = false;
            report.note = Some(format!(
                "sample {} has {} free bits",
                serialize(&sample.lhs),
                vars.len()
            ));
            return report;
        }
        let (g, root) = EGraph::from_term(&sample.lhs);
        let ctx = RuleContext {
            root: (sample.output_width > 0).then_some(root),
            output_width: sample.output_width,
        };
        let mut rhss = Vec::new();
        rule.search_class(&g, root, &ctx, &mut rhss);
        let modulus = match rule.soundness {
            Soundness::Exact => None,
            Soundness::Modulo2W => Some(sample.output_width),
        };
        for recipe in &rhss {
            report.instances += 1;
            let rhs = realize(&g, &sample.lhs, recipe);
            if let Some(cx) = compare(&sample.lhs, &rhs, &vars, modulus, &mut report.cases) {
                report.pass = false;
                report.counterexample = Some(cx);
                return report;
            }
        }
    }
    if report.instances == 0 {
        report.pass = false;
        report.note = Some("no sample produced a match".into());
    }
    report
}

/// First assignment, counting with the first variable as the most
/// significant bit, where `lhs` and `rhs` disagree.
fn compare(
    lhs: &Term,
    rhs: &Term,
    vars: &[Var],
    modulus_bits: Option<u32>,
    cases: &mut u64,
) -> Option<Counterexample> {
    let k = vars.len();
    let reduce = |v: u128| match modulus_bits {
        Some(w) if w < 128 => v & ((1u128 << w) - 1),
        _ => v,
    };
    for code in 0..1u64 << k {
        let bits: Vec<(Var, bool)> = vars
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, code >> (k - 1 - i) & 1 == 1))
            .collect();
        let env = Env::from_bits(bits.iter().copied());
        *cases += 1;
        let l = eval(lhs, &env).expect("lhs vars bound");
        let r = eval(rhs, &env).unwrap_or(u128::MAX);
        if reduce(l) != reduce(r) {
            return Some(Counterexample {
                lhs: serialize(lhs),
                rhs: serialize(rhs),
                assignment: bits.iter().map(|(v, b)| (v.to_string(), *b)).collect(),
                lhs_value: l,
                rhs_value: r,
                modulus_bits,
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egraph::Phase;
    use crate::rules::all_rules;

    #[test]
    fn every_shipped_rule_is_sound() {
        for rule in all_rules() {
            let r = soundness_check(&rule);
            assert!(r.pass, "{}: {:?}", rule.name, r);
        }
    }

    #[test]
    fn corrupted_full_adder_carry_fails() {
        let bad = Rewrite::static_rule(
            "bad-fac",
            Phase::Two,
            "(fac ?a ?b ?c)",
            "(and (and ?a ?b) (and ?c (xor ?a ?b)))",
        )
        .unwrap();
        let r = soundness_check(&bad);
        assert!(!r.pass);
        let cx = r.counterexample.unwrap();
        assert_eq!(cx.lhs_value, 1);
        assert_eq!(cx.rhs_value, 0);
    }
}
