// SPDX-License-Identifier: Apache-2.0

//! Compressor-level rewrites: reduce an AND array to one row of bits.

use crate::arrays::and_array;
use crate::egraph::{
    DynamicRule, EGraph, ENode, Id, Phase, Rewrite, RuleContext, RuleSample, Soundness,
};
use crate::recipe::Recipe;
use crate::sexp::parse;
use crate::term::{Op, Term};

use super::{all_bits, is_zero, row_nodes};

fn t(s: &str) -> Term {
    parse(s).expect("sample term")
}

/// `Mul(Row a, Row b)` to its partial-product array.
pub(crate) struct AndArray;

impl DynamicRule for AndArray {
    fn root_op(&self) -> Op {
        Op::Mul
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        for node in g.class(class).nodes_of(Op::Mul) {
            let (a, b) = (node.children[0], node.children[1]);
            let bit_row = |id: Id| {
                row_nodes(g, id)
                    .find(|r| all_bits(g, &r.children))
                    .map(|r| r.children.clone())
            };
            let (Some(ra), Some(rb)) = (bit_row(a), bit_row(b)) else {
                continue;
            };
            let square = g.find(a) == g.find(b);
            out.push(and_array(&ra, &rb, square));
        }
    }

    fn lhs_text(&self) -> String {
        "(mul (row ?a...) (row ?b...))".into()
    }

    fn rhs_text(&self) -> String {
        "(sum (row (and ?a_i ?b_0)...) ... (row (and ?a_i ?b_n-1)... 0...))".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(mul (row p1 p0) (row q1 q0))",
            "(mul (row p2 p1 p0) (row q2 q1 q0))",
            "(mul (row p1 p0) (row p1 p0))",
            "(mul (row p3 p2 p1 p0) (row p3 p2 p1 p0))",
            "(mul (row 0 p1 p0) (row q2 q1 q0))",
        ]
        .iter()
        .map(|s| RuleSample::new(t(s)))
        .collect()
    }
}

/// `a + Row(b_{n-1}..b_0)` to `Row(b_{n-1}..b_1, a + b_0)`, either operand order.
pub(crate) struct RowAdd;

impl DynamicRule for RowAdd {
    fn root_op(&self) -> Op {
        Op::Add
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        for node in g.class(class).nodes_of(Op::Add) {
            let (x, y) = (node.children[0], node.children[1]);
            for (other, row_class) in [(x, y), (y, x)] {
                for row in row_nodes(g, row_class) {
                    let n = row.children.len();
                    if n < 2 {
                        continue;
                    }
                    let mut slots: Vec<Recipe<Id>> = row.children[..n - 1]
                        .iter()
                        .map(|&c| Recipe::Leaf(c))
                        .collect();
                    slots.push(Recipe::add(
                        Recipe::Leaf(other),
                        Recipe::Leaf(row.children[n - 1]),
                    ));
                    out.push(Recipe::row(slots));
                }
            }
        }
    }

    fn lhs_text(&self) -> String {
        "(add ?a (row ?b... ?b0))".into()
    }

    fn rhs_text(&self) -> String {
        "(row ?b... (add ?a ?b0))".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(add p0 (row p1 p2))",
            "(add (row p1 p2 p3) p0)",
            "(add (row p0 p1) (row p2 p3 p4 p5))",
            "(add (and p0 p1) (row p2 0 p3 p4))",
        ]
        .iter()
        .map(|s| RuleSample::new(t(s)))
        .collect()
    }
}

/// Slots of the row a sum operand contributes: its first `Row` node, or the
/// class itself when single-bit valued.
fn operand_slots(g: &EGraph, id: Id) -> Option<Vec<Id>> {
    if let Some(r) = row_nodes(g, id).next() {
        return Some(r.children.clone());
    }
    g.data(id).bit.then(|| vec![id])
}

/// `Sum` of rows to a row of column sums, operands zero-padded at the MSB end.
pub(crate) struct SumOfRows;

impl DynamicRule for SumOfRows {
    fn root_op(&self) -> Op {
        Op::Sum
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        for node in g.class(class).nodes_of(Op::Sum) {
            let rows: Option<Vec<Vec<Id>>> =
                node.children.iter().map(|&c| operand_slots(g, c)).collect();
            let Some(rows) = rows else { continue };
            // Only worth it when some operand is a genuine multi-slot row.
            if rows.iter().all(|r| r.len() == 1) {
                continue;
            }
            let width = rows.iter().map(Vec::len).max().unwrap_or(0);
            let mut columns = Vec::with_capacity(width);
            for slot in (0..width).rev() {
                let col: Vec<Recipe<Id>> = rows
                    .iter()
                    .map(|r| {
                        if slot < r.len() {
                            Recipe::Leaf(r[r.len() - 1 - slot])
                        } else {
                            Recipe::zero()
                        }
                    })
                    .collect();
                columns.push(Recipe::sum(col));
            }
            out.push(Recipe::row(columns));
        }
    }

    fn lhs_text(&self) -> String {
        "(sum (row ?a...) (row ?b...) ...)".into()
    }

    fn rhs_text(&self) -> String {
        "(row (sum ?a_n-1 ?b_n-1 ...) ... (sum ?a_0 ?b_0 ...))".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(sum (row (and p1 q0) (and p0 q0)) (row (and p1 q1) (and p0 q1) 0))",
            "(sum (row p0 p1) (row p2 p3))",
            "(sum (row p0) (row p1 p2 p3) (row p4 p5))",
            "(sum (row p0 p1 p2) (row p3 p4 p5) (row p6 p7 p8) (row p9 p10 p11))",
            "(sum (row p0 p1) p2)",
        ]
        .iter()
        .map(|s| RuleSample::new(t(s)))
        .collect()
    }
}

/// `Sum` of single-bit operands to a left-associated `Add` chain, zeros dropped.
pub(crate) struct SumOfBits;

impl DynamicRule for SumOfBits {
    fn root_op(&self) -> Op {
        Op::Sum
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        // One chain per class; the add rules explore the other orders.
        if let Some(node) = g
            .class(class)
            .nodes_of(Op::Sum)
            .find(|n| all_bits(g, &n.children))
        {
            let items: Vec<Recipe<Id>> = node
                .children
                .iter()
                .filter(|&&c| !is_zero(g, c))
                .map(|&c| Recipe::Leaf(c))
                .collect();
            out.push(Recipe::add_chain(items).unwrap_or_else(Recipe::zero));
        }
    }

    fn lhs_text(&self) -> String {
        "(sum ?a ?b ?c ...)".into()
    }

    fn rhs_text(&self) -> String {
        "(add (add ?a ?b) ?c) ...".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(sum p0 p1 p2)",
            "(sum p0 0 p1)",
            "(sum 0 0 p0)",
            "(sum 0 0)",
            "(sum (and p0 p1) (fas p2 p3 p4) (not p5) 1)",
        ]
        .iter()
        .map(|s| RuleSample::new(t(s)))
        .collect()
    }
}

/// `Row(Row(a1,a0), Row(b1,b0))` to `Row(a1, Sum(Row(a0), Row(b1)), b0)`.
///
/// Only the two-slot form: with longer inner rows the printed generalization
/// does not preserve value under slot weighting.
pub(crate) struct RowOfRows;

impl DynamicRule for RowOfRows {
    fn root_op(&self) -> Op {
        Op::Row
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        for node in g.class(class).nodes_of(Op::Row) {
            if node.children.len() != 2 {
                continue;
            }
            let pairs = |id: Id| {
                row_nodes(g, id)
                    .filter(|r| r.children.len() == 2)
                    .map(|r| (r.children[0], r.children[1]))
                    .collect::<Vec<_>>()
            };
            for (a1, a0) in pairs(node.children[0]) {
                for (b1, b0) in pairs(node.children[1]) {
                    let leaf = Recipe::Leaf;
                    out.push(Recipe::row(vec![
                        leaf(a1),
                        Recipe::sum(vec![
                            Recipe::row(vec![leaf(a0)]),
                            Recipe::row(vec![leaf(b1)]),
                        ]),
                        leaf(b0),
                    ]));
                }
            }
        }
    }

    fn lhs_text(&self) -> String {
        "(row (row ?a1 ?a0) (row ?b1 ?b0))".into()
    }

    fn rhs_text(&self) -> String {
        "(row ?a1 (sum (row ?a0) (row ?b1)) ?b0)".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(row (row p0 p1) (row p2 p3))",
            "(row (row (hac p0 p1) (has p0 p1)) (row p2 p3))",
        ]
        .iter()
        .map(|s| RuleSample::new(t(s)))
        .collect()
    }
}

/// First row alternative of `id` whose slots are all single bits.
fn bit_row(g: &EGraph, id: Id) -> Option<&ENode> {
    row_nodes(g, id).find(|r| r.children.len() >= 2 && all_bits(g, &r.children))
}

/// Carry merge: every multi-bit slot that has a row-of-bits alternative is
/// spread over the slots above it.
///
/// `Row(.., e_{i+1}, Row(c, s), ..)` becomes `Row(.., e_{i+1} + c, s, ..)`;
/// longer inner rows spread further, and bits beyond the top extend the row.
/// Fires only once every multi-bit slot has such an alternative, so one row
/// yields at most one successor.
pub(crate) struct CarryMerge;

impl DynamicRule for CarryMerge {
    fn root_op(&self) -> Op {
        Op::Row
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        'rows: for node in g.class(class).nodes_of(Op::Row) {
            let n = node.children.len();
            // contributions[i] collects the bits landing in slot i (LSB = 0).
            let mut contributions: Vec<Vec<Id>> = vec![Vec::new(); n];
            let mut merged = false;
            for (pos, &slot) in node.children.iter().rev().enumerate() {
                if g.data(slot).bit {
                    contributions[pos].insert(0, slot);
                    continue;
                }
                let Some(inner) = bit_row(g, slot) else {
                    continue 'rows;
                };
                merged = true;
                for (j, &bit) in inner.children.iter().rev().enumerate() {
                    if contributions.len() <= pos + j {
                        contributions.resize(pos + j + 1, Vec::new());
                    }
                    contributions[pos + j].push(bit);
                }
            }
            if !merged {
                continue;
            }
            let slots: Vec<Recipe<Id>> = contributions
                .into_iter()
                .rev()
                .map(|bits| {
                    let items: Vec<Recipe<Id>> = bits
                        .into_iter()
                        .filter(|&b| !is_zero(g, b))
                        .map(Recipe::Leaf)
                        .collect();
                    Recipe::add_chain(items).unwrap_or_else(Recipe::zero)
                })
                .collect();
            out.push(Recipe::row(slots));
        }
    }

    fn lhs_text(&self) -> String {
        "(row ... ?e1 (row ?c ?s) ...)".into()
    }

    fn rhs_text(&self) -> String {
        "(row ... (add ?e1 ?c) ?s ...)".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(row p0 (row p1 p2) p3)",
            "(row (row p0 p1) p2)",
            "(row p4 p3 (row p0 p1 p2) p5)",
            "(row (row p0 p1) (row p2 p3))",
            "(row p0 (add p1 p2) p3)",
            "(row (add (add p0 p1) p2) (add p3 p4) (sum p5 p6 0))",
            "(row (row 0 p1) (row p2 p3 p4 p5))",
        ]
        .iter()
        .map(|s| RuleSample::new(t(s)))
        .collect()
    }
}

/// Repeated MSB bits: `Row(a,..,a, rest)` to `Sum(Row(1,..,1,0..), Row(0..,!a,0..), Row(0..,rest))`.
///
/// `a(2^k - 1) = (2^k - 1) + (1 - a)` holds only modulo `2^k`, so the rule
/// fires only on the design root with the run touching the output MSB.
pub(crate) struct RepeatedBit;

impl DynamicRule for RepeatedBit {
    fn root_op(&self) -> Op {
        Op::Row
    }

    fn search(&self, g: &EGraph, class: Id, ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        let Some(root) = ctx.root else { return };
        if g.find(class) != g.find(root) {
            return;
        }
        let w = ctx.output_width as usize;
        for node in g.class(class).nodes_of(Op::Row) {
            if node.children.len() != w || w < 2 {
                continue;
            }
            let a = g.find(node.children[0]);
            if g.data(a).constant.is_some() || !g.data(a).bit {
                continue;
            }
            let k = node
                .children
                .iter()
                .take_while(|&&c| g.find(c) == a)
                .count();
            if k < 2 {
                continue;
            }
            let ones: Vec<Recipe<Id>> = (0..w).map(|i| Recipe::constant(i < k)).collect();
            let correction: Vec<Recipe<Id>> = (0..w)
                .map(|i| {
                    if i == k - 1 {
                        Recipe::not(Recipe::Leaf(a))
                    } else {
                        Recipe::zero()
                    }
                })
                .collect();
            let mut ops = vec![Recipe::row(ones), Recipe::row(correction)];
            if k < w {
                let rest: Vec<Recipe<Id>> = (0..w)
                    .map(|i| {
                        if i < k {
                            Recipe::zero()
                        } else {
                            Recipe::Leaf(node.children[i])
                        }
                    })
                    .collect();
                ops.push(Recipe::row(rest));
            }
            out.push(Recipe::sum(ops));
        }
    }

    fn lhs_text(&self) -> String {
        "(row ?a ?a ... ?a ?rest...)  ; at the output root".into()
    }

    fn rhs_text(&self) -> String {
        "(sum (row 1 ... 1 0...) (row 0... (not ?a) 0...) (row 0... ?rest...))".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        vec![
            RuleSample::rooted(t("(row p0 p0 p0)"), 3),
            RuleSample::rooted(t("(row p0 p0)"), 2),
            RuleSample::rooted(t("(row p0 p0 p1 p2)"), 4),
            RuleSample::rooted(t("(row (and p0 p1) (and p0 p1) (and p0 p1) p2 0)"), 5),
        ]
    }
}

/// Folds a constant row into another operand of the same sum where the
/// constant's ones land on the other row's zero slots.
pub(crate) struct ConstantMerge;

fn const_row(g: &EGraph, id: Id) -> Option<Vec<bool>> {
    row_nodes(g, id).find_map(|r| {
        let bits: Option<Vec<bool>> = r.children.iter().map(|&c| g.data(c).constant).collect();
        bits.filter(|b| b.iter().any(|x| *x))
    })
}

impl DynamicRule for ConstantMerge {
    fn root_op(&self) -> Op {
        Op::Sum
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        for node in g.class(class).nodes_of(Op::Sum) {
            let ops = &node.children;
            for (ci, &c) in ops.iter().enumerate() {
                let Some(consts) = const_row(g, c) else {
                    continue;
                };
                for (ri, &r) in ops.iter().enumerate() {
                    if ri == ci {
                        continue;
                    }
                    let Some(row) = row_nodes(g, r).find(|row| {
                        row.children.len() == consts.len()
                            && row
                                .children
                                .iter()
                                .zip(&consts)
                                .all(|(&s, &one)| !one || is_zero(g, s))
                    }) else {
                        continue;
                    };
                    let merged: Vec<Recipe<Id>> = row
                        .children
                        .iter()
                        .zip(&consts)
                        .map(|(&s, &one)| if one { Recipe::one() } else { Recipe::Leaf(s) })
                        .collect();
                    let mut rest: Vec<Recipe<Id>> = ops
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != ci && *i != ri)
                        .map(|(_, &o)| Recipe::Leaf(o))
                        .collect();
                    rest.push(Recipe::row(merged));
                    let rhs = if rest.len() == 1 {
                        rest.pop().unwrap()
                    } else {
                        Recipe::sum(rest)
                    };
                    out.push(rhs);
                    break;
                }
            }
        }
    }

    fn lhs_text(&self) -> String {
        "(sum (row 1 0 ...) (row 0 ?b ...) ...)".into()
    }

    fn rhs_text(&self) -> String {
        "(sum (row 1 ?b ...) ...)".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(sum (row 1 1 0 0) (row 0 0 p0 p1))",
            "(sum (row 1 0 0) (row 0 p0 p1) (row p2 p3 0))",
            "(sum (row 0 p0 p1) (row 1 0 1))",
        ]
        .iter()
        .map(|s| RuleSample::new(t(s)))
        .collect()
    }
}

/// Inlines a nested sum operand.
/// Widest sum a flatten may produce.
pub const MAX_SUM_ARITY: usize = 64;

pub(crate) struct SumFlatten;

impl DynamicRule for SumFlatten {
    fn root_op(&self) -> Op {
        Op::Sum
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        let class = g.find(class);
        for node in g.class(class).nodes_of(Op::Sum) {
            for (i, &c) in node.children.iter().enumerate() {
                let c = g.find(c);
                if c == class {
                    continue;
                }
                // Cyclic sums would grow without bound.
                let Some(inner) = g.class(c).nodes_of(Op::Sum).find(|n| {
                    n.children
                        .iter()
                        .all(|&k| g.find(k) != c && g.find(k) != class)
                }) else {
                    continue;
                };
                if node.children.len() + inner.children.len() > MAX_SUM_ARITY {
                    continue;
                }
                let mut ops: Vec<Recipe<Id>> = Vec::new();
                ops.extend(node.children[..i].iter().map(|&x| Recipe::Leaf(x)));
                ops.extend(inner.children.iter().map(|&x| Recipe::Leaf(x)));
                ops.extend(node.children[i + 1..].iter().map(|&x| Recipe::Leaf(x)));
                out.push(Recipe::sum(ops));
                break;
            }
        }
    }

    fn lhs_text(&self) -> String {
        "(sum ?a... (sum ?b...) ?c...)".into()
    }

    fn rhs_text(&self) -> String {
        "(sum ?a... ?b... ?c...)".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        [
            "(sum (row p0 p1) (sum p2 p3))",
            "(sum (sum (row p0 p1) (row p2 p3)) (row p4 p5) p6)",
        ]
        .iter()
        .map(|s| RuleSample::new(t(s)))
        .collect()
    }
}

/// Rotates the operands of a sum that holds a wider operand; repeated
/// application visits every rotation.
pub(crate) struct SumRotate;

impl DynamicRule for SumRotate {
    fn root_op(&self) -> Op {
        Op::Sum
    }

    fn search(&self, g: &EGraph, class: Id, _ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        for node in g.class(class).nodes_of(Op::Sum) {
            if all_bits(g, &node.children) {
                continue;
            }
            let mut ops: Vec<Recipe<Id>> = node.children[1..]
                .iter()
                .map(|&x| Recipe::Leaf(x))
                .collect();
            ops.push(Recipe::Leaf(node.children[0]));
            out.push(Recipe::sum(ops));
        }
    }

    fn lhs_text(&self) -> String {
        "(sum ?a ?b...)  ; some operand wider than a bit".into()
    }

    fn rhs_text(&self) -> String {
        "(sum ?b... ?a)".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        ["(sum (row p0 p1) (row p2 p3 p4) p5)", "(sum p0 p1)"]
            .iter()
            .map(|s| RuleSample::new(t(s)))
            .collect()
    }
}

/// Drops output-row slots above the output width (root only).
pub(crate) struct TruncateMsb;

impl DynamicRule for TruncateMsb {
    fn root_op(&self) -> Op {
        Op::Row
    }

    fn search(&self, g: &EGraph, class: Id, ctx: &RuleContext, out: &mut Vec<Recipe<Id>>) {
        let Some(root) = ctx.root else { return };
        let w = ctx.output_width as usize;
        if w == 0 || g.find(class) != g.find(root) {
            return;
        }
        for node in g.class(class).nodes_of(Op::Row) {
            let n = node.children.len();
            if n > w {
                let slots = node.children[n - w..]
                    .iter()
                    .map(|&c| Recipe::Leaf(c))
                    .collect();
                out.push(Recipe::row(slots));
            }
        }
    }

    fn lhs_text(&self) -> String {
        "(row ?hi... ?lo...)  ; at the output root, |lo| = W".into()
    }

    fn rhs_text(&self) -> String {
        "(row ?lo...)".into()
    }

    fn samples(&self) -> Vec<RuleSample> {
        vec![
            RuleSample::rooted(t("(row p0 p1 p2)"), 2),
            RuleSample::rooted(t("(row (and p0 p1) (xor p2 p3) p4 p5)"), 3),
        ]
    }
}

/// The phase-one rule set.
pub fn phase1_rules() -> Vec<Rewrite> {
    let st = |name: &str, lhs: &str, rhs: &str| {
        Rewrite::static_rule(name, Phase::One, lhs, rhs).expect("well-formed rule")
    };
    vec![
        Rewrite::dynamic("and-array", Phase::One, Soundness::Exact, AndArray),
        st(
            "place-half-adder",
            "(add ?a ?b)",
            "(row (hac ?a ?b) (has ?a ?b))",
        )
        .bits_only(),
        st(
            "place-full-adder",
            "(add (add ?a ?b) ?c)",
            "(row (fac ?a ?b ?c) (fas ?a ?b ?c))",
        )
        .bits_only(),
        st("add-same", "(add ?a ?a)", "(row ?a 0)"),
        Rewrite::dynamic("row-add", Phase::One, Soundness::Exact, RowAdd),
        Rewrite::dynamic("sum-of-rows", Phase::One, Soundness::Exact, SumOfRows),
        Rewrite::dynamic("sum-of-bits", Phase::One, Soundness::Exact, SumOfBits),
        Rewrite::dynamic("row-of-rows", Phase::One, Soundness::Exact, RowOfRows),
        Rewrite::dynamic("carry-merge", Phase::One, Soundness::Exact, CarryMerge),
        Rewrite::dynamic("repeated-bit", Phase::One, Soundness::Modulo2W, RepeatedBit),
        Rewrite::dynamic(
            "constant-merge",
            Phase::One,
            Soundness::Exact,
            ConstantMerge,
        ),
        st("add-comm", "(add ?a ?b)", "(add ?b ?a)"),
        st(
            "add-assoc-l",
            "(add ?a (add ?b ?c))",
            "(add (add ?a ?b) ?c)",
        ),
        st(
            "add-assoc-r",
            "(add (add ?a ?b) ?c)",
            "(add ?a (add ?b ?c))",
        ),
        st("add-zero", "(add ?a 0)", "?a"),
        Rewrite::dynamic("sum-flatten", Phase::One, Soundness::Exact, SumFlatten),
        Rewrite::dynamic("sum-rotate", Phase::One, Soundness::Exact, SumRotate),
        Rewrite::dynamic("truncate-msb", Phase::One, Soundness::Modulo2W, TruncateMsb),
    ]
}
