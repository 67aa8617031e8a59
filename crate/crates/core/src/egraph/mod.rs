// SPDX-License-Identifier: Apache-2.0

//! Congruence-closed e-graph over [`NodeKind`].
//!
//! Insertion hash-conses nodes; [`EGraph::union`] defers congruence repair
//! to [`EGraph::rebuild`], in the style of `egg`. Each class carries a
//! small analysis: whether it is single-bit valued, its constant value if
//! known, and whether it was merged by a modulo-2^W rewrite.

mod pattern;
mod run;

pub use pattern::{Binding, Compiled, Pattern, PatternError, RhsTemplate, Subst};
pub use run::{
    run, run_observed, DynamicRule, Phase, Rewrite, RuleBody, RuleContext, RuleSample, RunLimits,
    RunOutcome, Soundness, StopReason,
};

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::recipe::Recipe;
use crate::term::{NodeKind, Op, Term};

/// Dense e-class identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Id(u32);

impl Id {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// An operator applied to e-classes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ENode {
    pub kind: NodeKind,
    pub children: Vec<Id>,
}

impl ENode {
    pub fn new(kind: NodeKind, children: Vec<Id>) -> Self {
        ENode { kind, children }
    }

    pub fn leaf(kind: NodeKind) -> Self {
        ENode {
            kind,
            children: vec![],
        }
    }
}

/// Per-class analysis facts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassData {
    /// Every member evaluates to 0 or 1.
    pub bit: bool,
    /// Known constant bit value.
    pub constant: Option<bool>,
    /// Joined by a rewrite that is only sound modulo 2^W.
    pub modular: bool,
}

impl ClassData {
    fn merge(&mut self, other: ClassData) -> bool {
        let before = *self;
        self.bit |= other.bit;
        if self.constant.is_none() {
            self.constant = other.constant;
        }
        self.modular |= other.modular;
        *self != before
    }
}

#[derive(Clone, Debug)]
pub struct EClass {
    pub id: Id,
    pub nodes: Vec<ENode>,
    pub data: ClassData,
    parents: Vec<(ENode, Id)>,
}

impl EClass {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ENode> {
        self.nodes.iter()
    }

    /// Nodes of the given operator.
    pub fn nodes_of(&self, op: Op) -> impl Iterator<Item = &ENode> {
        self.nodes.iter().filter(move |n| n.kind.op() == op)
    }
}

#[derive(Clone, Debug, Default)]
pub struct EGraph {
    uf: Vec<u32>,
    memo: HashMap<ENode, Id>,
    classes: Vec<Option<EClass>>,
    pending: Vec<(ENode, Id)>,
    analysis_pending: Vec<(ENode, Id)>,
    to_modify: Vec<Id>,
    nodes_added: usize,
    clean: bool,
}

impl EGraph {
    pub fn new() -> Self {
        EGraph {
            clean: true,
            ..Default::default()
        }
    }

    /// Builds a graph holding `t`; returns it with the root class.
    pub fn from_term(t: &Term) -> (EGraph, Id) {
        let mut g = EGraph::new();
        let root = g.add_term(t);
        g.rebuild();
        (g, root)
    }

    pub fn find(&self, mut id: Id) -> Id {
        while self.uf[id.index()] != id.0 {
            id = Id(self.uf[id.index()]);
        }
        id
    }

    fn find_mut(&mut self, id: Id) -> Id {
        let root = self.find(id);
        let mut cur = id;
        while cur != root {
            let next = Id(self.uf[cur.index()]);
            self.uf[cur.index()] = root.0;
            cur = next;
        }
        root
    }

    /// Number of e-nodes ever inserted; never decreases.
    pub fn node_count(&self) -> usize {
        self.nodes_added
    }

    /// Number of live e-classes.
    pub fn class_count(&self) -> usize {
        self.classes.iter().filter(|c| c.is_some()).count()
    }

    /// Number of distinct canonical nodes currently held by classes.
    pub fn total_size(&self) -> usize {
        self.classes().map(|c| c.nodes.len()).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.clean
    }

    /// Live classes in ascending id order.
    pub fn classes(&self) -> impl Iterator<Item = &EClass> {
        self.classes.iter().filter_map(|c| c.as_ref())
    }

    pub fn class_ids(&self) -> Vec<Id> {
        self.classes().map(|c| c.id).collect()
    }

    pub fn class(&self, id: Id) -> &EClass {
        let id = self.find(id);
        self.classes[id.index()]
            .as_ref()
            .expect("canonical id has a class")
    }

    pub fn data(&self, id: Id) -> ClassData {
        self.class(id).data
    }

    pub fn canonicalize(&self, node: &ENode) -> ENode {
        ENode {
            kind: node.kind,
            children: node.children.iter().map(|&c| self.find(c)).collect(),
        }
    }

    /// Class holding `node`, if present.
    pub fn lookup(&self, node: &ENode) -> Option<Id> {
        self.memo
            .get(&self.canonicalize(node))
            .map(|&id| self.find(id))
    }

    fn make_data(&self, node: &ENode) -> ClassData {
        let consts: Option<Vec<bool>> = node
            .children
            .iter()
            .map(|&c| self.data(c).constant)
            .collect();
        let is_zero = |c: Id| self.data(c).constant == Some(false);
        let mut data = ClassData {
            bit: node.kind.is_bit_valued(),
            constant: None,
            modular: false,
        };
        match node.kind {
            NodeKind::Const(b) => data.constant = Some(b),
            NodeKind::Var(_) => {}
            NodeKind::And => {
                if node.children.iter().any(|&c| is_zero(c)) {
                    data.constant = Some(false);
                }
            }
            NodeKind::Or => {
                if node
                    .children
                    .iter()
                    .any(|&c| self.data(c).constant == Some(true))
                {
                    data.constant = Some(true);
                }
            }
            NodeKind::Mul => {
                if node.children.iter().any(|&c| is_zero(c)) {
                    data.constant = Some(false);
                }
            }
            NodeKind::Row | NodeKind::Sum | NodeKind::Add => {
                let n = node.children.len();
                let (rest, last) = match node.kind {
                    NodeKind::Row => (&node.children[..n - 1], Some(node.children[n - 1])),
                    _ => {
                        // Any single non-zero operand.
                        let nonzero: Vec<Id> = node
                            .children
                            .iter()
                            .copied()
                            .filter(|&c| !is_zero(c))
                            .collect();
                        if nonzero.len() <= 1 {
                            data.bit = nonzero.first().is_none_or(|&c| self.data(c).bit);
                        }
                        (&node.children[..0], None)
                    }
                };
                if let Some(last) = last {
                    if rest.iter().all(|&c| is_zero(c)) && self.data(last).bit {
                        data.bit = true;
                    }
                }
            }
            NodeKind::Shl(_) if is_zero(node.children[0]) => {
                data.constant = Some(false);
            }
            _ => {}
        }
        if data.constant.is_none() {
            if let Some(cs) = consts {
                if !matches!(node.kind, NodeKind::Var(_)) {
                    let vals: Vec<u128> = cs.iter().map(|&b| b as u128).collect();
                    let v = node.kind.apply(&vals);
                    if v <= 1 {
                        data.constant = Some(v == 1);
                    }
                }
            }
        }
        if data.constant.is_some() {
            data.bit = true;
        }
        data
    }

    /// Inserts a node; returns the class containing it.
    pub fn add(&mut self, node: ENode) -> Id {
        let node = self.canonicalize(&node);
        if let Some(&id) = self.memo.get(&node) {
            return self.find(id);
        }
        let id = Id(self.uf.len() as u32);
        self.uf.push(id.0);
        let data = self.make_data(&node);
        for &child in &node.children {
            let child = self.find(child);
            self.classes[child.index()]
                .as_mut()
                .expect("child class")
                .parents
                .push((node.clone(), id));
        }
        self.classes.push(Some(EClass {
            id,
            nodes: vec![node.clone()],
            data,
            parents: Vec::new(),
        }));
        self.memo.insert(node.clone(), id);
        self.nodes_added += 1;
        if data.constant.is_some() && !matches!(node.kind, NodeKind::Const(_)) {
            self.to_modify.push(id);
            self.clean = false;
        }
        id
    }

    /// Inserts a term, sharing repeated subterms.
    pub fn add_term(&mut self, t: &Term) -> Id {
        let mut ids: HashMap<usize, Id> = HashMap::new();
        t.visit_post_order(|n| {
            let children = n.children().iter().map(|c| ids[&c.node_id()]).collect();
            let id = self.add(ENode::new(n.kind(), children));
            ids.insert(n.node_id(), id);
        });
        ids[&t.node_id()]
    }

    /// Inserts a recipe whose leaves are existing classes.
    pub fn add_recipe(&mut self, r: &Recipe<Id>) -> Id {
        match r {
            Recipe::Leaf(id) => self.find(*id),
            Recipe::Node(kind, kids) => {
                let children = kids.iter().map(|k| self.add_recipe(k)).collect();
                self.add(ENode::new(*kind, children))
            }
        }
    }

    /// Merges two classes. Returns whether anything changed.
    pub fn union(&mut self, a: Id, b: Id) -> bool {
        let mut a = self.find_mut(a);
        let mut b = self.find_mut(b);
        if a == b {
            return false;
        }
        self.clean = false;
        let size = |g: &EGraph, x: Id| {
            let c = g.classes[x.index()].as_ref().unwrap();
            c.nodes.len() + c.parents.len()
        };
        // Keep the larger class as root; ties go to the older id.
        if size(self, a) < size(self, b) || (size(self, a) == size(self, b) && b < a) {
            std::mem::swap(&mut a, &mut b);
        }
        self.uf[b.index()] = a.0;
        let loser = self.classes[b.index()].take().expect("class b");
        let winner = self.classes[a.index()].as_mut().expect("class a");
        let before_b = loser.data;
        let changed_a = winner.data.merge(loser.data);
        let changed_b = winner.data != before_b;
        if changed_a {
            self.analysis_pending.extend(winner.parents.iter().cloned());
        }
        if changed_b {
            self.analysis_pending.extend(loser.parents.iter().cloned());
        }
        self.pending.extend(loser.parents.iter().cloned());
        winner.nodes.extend(loser.nodes);
        winner.parents.extend(loser.parents);
        if winner.data.constant.is_some() {
            self.to_modify.push(a);
        }
        true
    }

    /// Marks a class as joined modulo 2^W.
    pub fn mark_modular(&mut self, id: Id) {
        let id = self.find(id);
        if let Some(c) = self.classes[id.index()].as_mut() {
            c.data.modular = true;
        }
    }

    /// Restores congruence and analysis invariants. Returns the number of unions performed.
    pub fn rebuild(&mut self) -> usize {
        let mut unions = 0;
        loop {
            while let Some((node, class)) = self.pending.pop() {
                let canon = self.canonicalize(&node);
                let class = self.find_mut(class);
                if let Some(old) = self.memo.insert(canon, class) {
                    if self.union(old, class) {
                        unions += 1;
                    }
                }
            }
            while let Some((node, class)) = self.analysis_pending.pop() {
                let canon = self.canonicalize(&node);
                let class = self.find_mut(class);
                let data = self.make_data(&canon);
                let c = self.classes[class.index()].as_mut().expect("class");
                if c.data.merge(data) {
                    let parents = c.parents.clone();
                    self.analysis_pending.extend(parents);
                    if c.data.constant.is_some() {
                        self.to_modify.push(class);
                    }
                }
            }
            if let Some(id) = self.to_modify.pop() {
                let id = self.find_mut(id);
                if let Some(b) = self.data(id).constant {
                    let k = self.add(ENode::leaf(NodeKind::Const(b)));
                    if self.union(id, k) {
                        unions += 1;
                    }
                }
                continue;
            }
            if self.pending.is_empty() && self.analysis_pending.is_empty() {
                break;
            }
        }
        self.rebuild_classes();
        self.clean = true;
        unions
    }

    fn rebuild_classes(&mut self) {
        let uf = &self.uf;
        let find = |mut id: Id| {
            while uf[id.index()] != id.0 {
                id = Id(uf[id.index()]);
            }
            id
        };
        for class in self.classes.iter_mut().flatten() {
            for n in class.nodes.iter_mut() {
                for c in n.children.iter_mut() {
                    *c = find(*c);
                }
            }
            class.nodes.sort_unstable();
            class.nodes.dedup();
            for (n, p) in class.parents.iter_mut() {
                for c in n.children.iter_mut() {
                    *c = find(*c);
                }
                *p = find(*p);
            }
            class.parents.sort_unstable();
            class.parents.dedup_by(|x, y| x.0 == y.0);
        }
    }

    /// Classes that contain at least one node of `op`, ascending.
    pub fn classes_with(&self, op: Op) -> Vec<Id> {
        self.classes()
            .filter(|c| c.nodes.iter().any(|n| n.kind.op() == op))
            .map(|c| c.id)
            .collect()
    }

    /// First node of `op` in the class, if any.
    pub fn first_of(&self, id: Id, op: Op) -> Option<&ENode> {
        self.class(id).nodes.iter().find(|n| n.kind.op() == op)
    }

    /// Structured dump for debugging: class id → nodes.
    pub fn dump(&self) -> serde_json::Value {
        let classes: Vec<serde_json::Value> = self
            .classes()
            .map(|c| {
                let nodes: Vec<String> = c
                    .nodes
                    .iter()
                    .map(|n| {
                        let mut s = n.kind.token();
                        for ch in &n.children {
                            s.push_str(&format!(" {ch}"));
                        }
                        s
                    })
                    .collect();
                serde_json::json!({
                    "id": c.id.0,
                    "bit": c.data.bit,
                    "constant": c.data.constant,
                    "modular": c.data.modular,
                    "nodes": nodes,
                })
            })
            .collect();
        serde_json::json!({ "nodes_added": self.nodes_added, "classes": classes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::{build_and_array, ArraySpec};

    fn var(g: &mut EGraph, name: &str) -> Id {
        g.add(ENode::leaf(crate::sexp::parse_atom(name, 0).unwrap()))
    }

    #[test]
    fn add_is_idempotent() {
        let mut g = EGraph::new();
        let a = var(&mut g, "p0");
        let b = var(&mut g, "q0");
        let x = g.add(ENode::new(NodeKind::And, vec![a, b]));
        let y = g.add(ENode::new(NodeKind::And, vec![a, b]));
        assert_eq!(x, y);
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn union_then_rebuild_restores_congruence() {
        let mut g = EGraph::new();
        let a = var(&mut g, "p0");
        let b = var(&mut g, "p1");
        let c = var(&mut g, "p2");
        let ab = g.add(ENode::new(NodeKind::And, vec![a, b]));
        let cb = g.add(ENode::new(NodeKind::And, vec![c, b]));
        assert_ne!(g.find(ab), g.find(cb));
        g.union(a, c);
        g.rebuild();
        assert_eq!(g.find(ab), g.find(cb));
        assert_eq!(g.class(ab).len(), 1);
    }

    #[test]
    fn rebuild_is_idempotent() {
        let t = build_and_array(&ArraySpec::multiplier(3).unwrap());
        let (mut g, _) = EGraph::from_term(&t);
        let ids = g.class_ids();
        g.union(ids[0], ids[1]);
        g.rebuild();
        let snapshot = format!("{}", g.dump());
        g.rebuild();
        assert_eq!(snapshot, format!("{}", g.dump()));
    }

    #[test]
    fn node_count_matches_distinct_subterms() {
        let t = build_and_array(&ArraySpec::multiplier(2).unwrap());
        let (g, _) = EGraph::from_term(&t);
        // p0 p1 q0 q1 0, four products, three rows/sum nodes.
        let mut distinct = std::collections::HashSet::new();
        t.visit_post_order(|n| {
            distinct.insert(crate::sexp::serialize(n));
        });
        assert_eq!(g.node_count(), distinct.len());
        assert_eq!(g.node_count(), 12);
    }

    #[test]
    fn constant_folding_merges_with_zero() {
        let mut g = EGraph::new();
        let a = var(&mut g, "p0");
        let z = g.add(ENode::leaf(NodeKind::Const(false)));
        let x = g.add(ENode::new(NodeKind::And, vec![a, z]));
        g.rebuild();
        assert_eq!(g.find(x), g.find(z));
    }

    #[test]
    fn bit_analysis() {
        let mut g = EGraph::new();
        let a = var(&mut g, "p0");
        let z = g.add(ENode::leaf(NodeKind::Const(false)));
        let r = g.add(ENode::new(NodeKind::Row, vec![z, a]));
        let r2 = g.add(ENode::new(NodeKind::Row, vec![a, z]));
        let s = g.add(ENode::new(NodeKind::Add, vec![a, z]));
        let s2 = g.add(ENode::new(NodeKind::Add, vec![a, a]));
        g.rebuild();
        assert!(g.data(r).bit);
        assert!(!g.data(r2).bit);
        assert!(g.data(s).bit);
        assert!(!g.data(s2).bit);
    }
}
