// SPDX-License-Identifier: Apache-2.0

//! Pre-pass rewrites: split a wide product into four half-width products,
//! and turn shifts into zero-padded rows.

use crate::arrays::ArraySpec;
use crate::egraph::{DynamicRule, EGraph, Id, Phase, Rewrite, RuleContext, RuleSample, Soundness};
use crate::recipe::Recipe;
use crate::sexp::parse;
use crate::term::{Op, Operand, Term};

use super::{all_bits, row_nodes};

/// `Mul(A, B)` over `width`-slot rows to a weighted sum of half-width products.
pub(crate) struct DivideAndConquer {
    width: usize,
}

impl DynamicRule for DivideAndConquer {
    fn root_op(&self) -> Op {
        Op::Mul
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        let n = self.width;
        if n < 2 || !n.is_multiple_of(2) {
            return;
        }
        let h = n / 2;
        for node in g.class(class).nodes_of(Op::Mul) {
            let row = |id: Id| {
                row_nodes(g, id)
                    .find(|r| r.children.len() == n && all_bits(g, &r.children))
                    .map(|r| r.children.clone())
            };
            let (Some(a), Some(b)) = (row(node.children[0]), row(node.children[1])) else {
                continue;
            };
            let half = |xs: &[Id]| Recipe::row(xs.iter().map(|&x| Recipe::Leaf(x)).collect());
            let (ah, al) = (half(&a[..h]), half(&a[h..]));
            let (bh, bl) = (half(&b[..h]), half(&b[h..]));
            let h = h as u32;
            out.push(Recipe::sum(vec![
                Recipe::shl(Recipe::mul(ah.clone(), bh.clone()), 2 * h),
                Recipe::shl(Recipe::mul(ah, bl.clone()), h),
                Recipe::shl(Recipe::mul(al.clone(), bh), h),
                Recipe::mul(al, bl),
            ]));
        }
    }

    fn lhs_text(&self) -> String {
        "(mul (row ?ah... ?al...) (row ?bh... ?bl...))".into()
    }

    fn rhs_text(&self) -> String {
        "(sum (shl<n> (mul ?ah ?bh)) (shl<n/2> (mul ?ah ?bl)) (shl<n/2> (mul ?al ?bh)) (mul ?al ?bl))"
            .into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        let spec = |square| ArraySpec::new(self.width as u32, square).ok();
        [spec(false), spec(true)]
            .into_iter()
            .flatten()
            .filter(|s| s.width() * if s.square() { 1 } else { 2 } <= 12)
            .map(|s| RuleSample::new(s.product_term()))
            .collect()
    }
}

/// `Shl(Row(e..), k)` to `Row(e.., 0 x k)`.
pub(crate) struct ShlNormalize;

impl DynamicRule for ShlNormalize {
    fn root_op(&self) -> Op {
        Op::Shl
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        for node in g.class(class).nodes_of(Op::Shl) {
            let crate::term::NodeKind::Shl(k) = node.kind else {
                continue;
            };
            for row in row_nodes(g, node.children[0]) {
                let mut slots: Vec<Recipe<Id>> =
                    row.children.iter().map(|&c| Recipe::Leaf(c)).collect();
                slots.extend((0..k).map(|_| Recipe::zero()));
                out.push(Recipe::row(slots));
            }
        }
    }

    fn lhs_text(&self) -> String {
        "(shl<k> (row ?e...))".into()
    }

    fn rhs_text(&self) -> String {
        "(row ?e... 0...)".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(shl2 (row p0))",
            "(shl1 (row p0 p1 p2))",
            "(shl3 (row (and p0 p1) (xor p2 p3)))",
        ]
        .iter()
        .map(|s| RuleSample::new(parse(s).expect("sample term")))
        .collect()
    }
}

/// Pre-pass rules for products of `width`-bit operands.
pub fn prepass_rules(width: u32) -> Vec<Rewrite> {
    vec![
        Rewrite::dynamic(
            "divide-and-conquer",
            Phase::Pre,
            Soundness::Exact,
            DivideAndConquer {
                width: width as usize,
            },
        ),
        Rewrite::dynamic("shl-normalize", Phase::Pre, Soundness::Exact, ShlNormalize),
    ]
}

/// One half-width product of a divide-and-conquer split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPart {
    /// The sub-product to synthesize.
    pub spec: ArraySpec,
    /// Left shift of the sub-product's result.
    pub shift: u32,
    /// Operand bits feeding the sub-product's `p` inputs: `(operand, first index)`.
    pub p_source: (Operand, u16),
    /// Operand bits feeding the sub-product's `q` inputs.
    pub q_source: (Operand, u16),
}

impl SplitPart {
    /// Maps a variable of the sub-product onto the parent's inputs.
    /// Indices at or beyond `parent_width` are zero-extension bits.
    pub fn rename(&self, t: &Term, parent_width: u32) -> Term {
        t.substitute(&|v| {
            let (operand, base) = match v.operand {
                Operand::P => self.p_source,
                Operand::Q => self.q_source,
            };
            let index = base + v.index;
            if u32::from(index) >= parent_width {
                Term::zero()
            } else {
                Term::var(crate::term::Var { operand, index })
            }
        })
    }
}

/// The sub-products of a divide-and-conquer split of `spec`.
///
/// Odd widths are zero-extended by one bit. Squarers reuse the two diagonal
/// squares and count the cross product once at double weight.
pub fn split_product(spec: &ArraySpec) -> Vec<SplitPart> {
    let n = spec.width() + spec.width() % 2;
    let h = n / 2;
    let hi = h as u16;
    let part = |square: bool, shift, p: (Operand, u16), q: (Operand, u16)| SplitPart {
        spec: ArraySpec::new(h, square).expect("half width is valid"),
        shift,
        p_source: p,
        q_source: q,
    };
    use Operand::{P, Q};
    if spec.square() {
        vec![
            part(true, n, (P, hi), (P, hi)),
            part(false, h + 1, (P, hi), (P, 0)),
            part(true, 0, (P, 0), (P, 0)),
        ]
    } else {
        vec![
            part(false, n, (P, hi), (Q, hi)),
            part(false, h, (P, hi), (Q, 0)),
            part(false, h, (P, 0), (Q, hi)),
            part(false, 0, (P, 0), (Q, 0)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::realize;
    use crate::term::{eval, Env};

    #[test]
    fn four_bit_split_at_five_times_three() {
        let spec = ArraySpec::multiplier(4).unwrap();
        let lhs = spec.product_term();
        let (g, root) = EGraph::from_term(&lhs);
        let mut out = Vec::new();
        DivideAndConquer { width: 4 }.search(&g, root, &RuleContext::default(), &mut out);
        assert_eq!(out.len(), 1);
        let rhs = realize(&g, &lhs, &out[0]);
        let env = Env::new().with_p(5, 4).with_q(3, 4);
        assert_eq!(eval(&rhs, &env).unwrap(), 15);
        assert_eq!(eval(&lhs, &env).unwrap(), 15);
    }

    #[test]
    fn two_bit_split_is_exact() {
        let spec = ArraySpec::multiplier(2).unwrap();
        let lhs = spec.product_term();
        let (g, root) = EGraph::from_term(&lhs);
        let mut out = Vec::new();
        DivideAndConquer { width: 2 }.search(&g, root, &RuleContext::default(), &mut out);
        let rhs = realize(&g, &lhs, &out[0]);
        for p in 0..4 {
            for q in 0..4 {
                let env = Env::new().with_p(p, 2).with_q(q, 2);
                assert_eq!(eval(&rhs, &env).unwrap(), (p * q) as u128);
            }
        }
    }

    #[test]
    fn shl_pads_with_zeros() {
        let lhs = parse("(shl2 (row p0))").unwrap();
        let (g, root) = EGraph::from_term(&lhs);
        let mut out = Vec::new();
        ShlNormalize.search(&g, root, &RuleContext::default(), &mut out);
        let rhs = realize(&g, &lhs, &out[0]);
        assert_eq!(crate::sexp::serialize(&rhs), "(row p0 0 0)");
        let env = Env::new().with_p(1, 1);
        assert_eq!(eval(&rhs, &env).unwrap(), 4);
    }

    #[test]
    fn split_parts_recombine() {
        for (w, square) in [(4, false), (5, false), (4, true), (7, true)] {
            let spec = ArraySpec::new(w, square).unwrap();
            let parts = split_product(&spec);
            let terms: Vec<(Term, u32)> = parts
                .iter()
                .map(|part| (part.rename(&part.spec.product_term(), w), part.shift))
                .collect();
            let limit = 1u64 << w;
            for p in 0..limit {
                for q in 0..if square { 1 } else { limit } {
                    let env = Env::new().with_p(p, w).with_q(q, w);
                    let total: u128 = terms.iter().map(|(t, s)| eval(t, &env).unwrap() << s).sum();
                    assert_eq!(total, spec.expected(p, q), "w={w} p={p} q={q}");
                }
            }
        }
    }
}
