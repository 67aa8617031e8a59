// SPDX-License-Identifier: Apache-2.0

//! The rewrite catalogue: compressor placement, gate-level rewriting,
//! the divide-and-conquer pre-pass, and a soundness checker for all of them.

mod phase1;
mod phase2;
mod prepass;
mod soundness;

pub use phase1::phase1_rules;
pub use phase2::phase2_rules;
pub use prepass::{prepass_rules, split_product, SplitPart};
pub use soundness::{soundness_check, Counterexample, SoundnessReport};

use std::collections::HashMap;

use crate::egraph::{EGraph, ENode, Id};
use crate::recipe::Recipe;
use crate::term::{Op, Term};

/// Every shipped rule: pre-pass, phase one, phase two.
pub fn all_rules() -> Vec<crate::egraph::Rewrite> {
    let mut rules = prepass_rules(4);
    rules.extend(phase1_rules());
    rules.extend(phase2_rules());
    rules
}

pub(crate) fn row_nodes(g: &EGraph, id: Id) -> impl Iterator<Item = &ENode> {
    g.class(id).nodes_of(Op::Row)
}

pub(crate) fn all_bits(g: &EGraph, ids: &[Id]) -> bool {
    ids.iter().all(|&c| g.data(c).bit)
}

pub(crate) fn is_zero(g: &EGraph, id: Id) -> bool {
    g.data(id).constant == Some(false)
}

/// Smallest tree realization of every class, by node count.
pub(crate) fn smallest_terms(g: &EGraph) -> HashMap<Id, Term> {
    let mut size: HashMap<Id, (u64, ENode)> = HashMap::new();
    loop {
        let mut changed = false;
        for class in g.classes() {
            for node in class.iter() {
                let kids: Option<u64> = node
                    .children
                    .iter()
                    .map(|&c| size.get(&g.find(c)).map(|(s, _)| *s))
                    .sum();
                let Some(kids) = kids else { continue };
                let s = kids.saturating_add(1);
                let better = size.get(&class.id).is_none_or(|(old, _)| s < *old);
                if better {
                    size.insert(class.id, (s, node.clone()));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: HashMap<Id, Term> = HashMap::new();
    fn build(
        g: &EGraph,
        id: Id,
        size: &HashMap<Id, (u64, ENode)>,
        out: &mut HashMap<Id, Term>,
    ) -> Term {
        let id = g.find(id);
        if let Some(t) = out.get(&id) {
            return t.clone();
        }
        let node = &size[&id].1;
        let kids = node
            .children
            .iter()
            .map(|&c| build(g, c, size, out))
            .collect();
        let t = Term::new(node.kind, kids);
        out.insert(id, t.clone());
        t
    }
    let ids: Vec<Id> = size.keys().copied().collect();
    for id in ids {
        build(g, id, &size, &mut out);
    }
    out
}

/// Turns a right-hand side over classes of a graph built from `lhs` into a
/// term: each leaf class becomes the first subterm of `lhs` found in it.
pub fn realize(g: &EGraph, lhs: &Term, rhs: &Recipe<Id>) -> Term {
    let mut by_class: HashMap<Id, Term> = HashMap::new();
    let mut ids: HashMap<usize, Id> = HashMap::new();
    lhs.visit_post_order(|n| {
        let children: Vec<Id> = n.children().iter().map(|c| ids[&c.node_id()]).collect();
        if let Some(id) = g.lookup(&ENode::new(n.kind(), children)) {
            ids.insert(n.node_id(), id);
            by_class.entry(id).or_insert_with(|| n.clone());
        }
    });
    let mut fallback: Option<HashMap<Id, Term>> = None;
    let mut leaf = |id: Id| -> Term {
        let id = g.find(id);
        if let Some(t) = by_class.get(&id) {
            return t.clone();
        }
        fallback.get_or_insert_with(|| smallest_terms(g))[&id].clone()
    };
    rhs.clone().map_leaves(&mut leaf).into_term()
}
