// SPDX-License-Identifier: Apache-2.0

//! Per-phase delay cost models and extraction.
//!
//! Delay composes max-plus: a node costs its own gate delay plus the
//! slowest child. Shapes a phase must eliminate cost `penalty + max(children)`,
//! so every penalized node on a path adds one penalty. Area counts gates
//! with fan-out one and only breaks delay ties.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::egraph::{EGraph, Id, Phase};
use crate::term::{NodeKind, Op, Term};

/// Default penalty for shapes a phase must remove.
pub const PENALTY: u64 = 1 << 32;

/// Delay first, then area.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cost {
    pub delay: u64,
    pub area: u64,
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(delay {}, area {})", self.delay, self.area)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("no delay assigned to `{0:?}`")]
    UnknownKind(Op),
    #[error("phase {phase}: target shape unreachable (best cost {cost})")]
    Unreachable { phase: Phase, cost: Cost },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostModel {
    pub phase: Phase,
    /// Gate delay and area per operator; operators absent here are errors.
    pub table: BTreeMap<Op, (u64, u64)>,
    pub penalty: u64,
}

impl CostModel {
    pub fn new(phase: Phase) -> CostModel {
        use Op::*;
        let table = [
            (Var, (0, 0)),
            (Const, (0, 0)),
            (And, (1, 1)),
            (Or, (1, 1)),
            (Xor, (1, 1)),
            (Not, (1, 1)),
            (Has, (1, 1)),
            (Hac, (1, 1)),
            (Fas, (2, 2)),
            (Fac, (2, 4)),
            (Add, (0, 0)),
            (Row, (0, 0)),
            (Sum, (0, 0)),
            (Shl, (0, 0)),
            (Mul, (0, 0)),
        ]
        .into_iter()
        .collect();
        CostModel {
            phase,
            table,
            penalty: PENALTY,
        }
    }

    pub fn phase_one() -> CostModel {
        CostModel::new(Phase::One)
    }

    pub fn phase_two() -> CostModel {
        CostModel::new(Phase::Two)
    }

    fn penalized(&self, kind: NodeKind, bit_children: bool, top: bool) -> bool {
        match kind.op() {
            Op::Add | Op::Sum | Op::Mul | Op::Shl => true,
            Op::Row => match self.phase {
                Phase::Two => !top,
                _ => !bit_children,
            },
            Op::Fas | Op::Fac | Op::Has | Op::Hac => self.phase == Phase::Two,
            _ => false,
        }
    }

    /// Cost of `kind` over children of the given costs.
    ///
    /// `bit_children` says whether every child is single-bit valued; `top`
    /// marks the design's output row.
    pub fn node_cost(
        &self,
        kind: NodeKind,
        children: &[Cost],
        bit_children: bool,
        top: bool,
    ) -> Result<Cost, CostError> {
        let &(delay, area) = self
            .table
            .get(&kind.op())
            .ok_or(CostError::UnknownKind(kind.op()))?;
        let max = children.iter().map(|c| c.delay).max().unwrap_or(0);
        let area = children
            .iter()
            .fold(area, |acc, c| acc.saturating_add(c.area));
        let own = if self.penalized(kind, bit_children, top) {
            self.penalty
        } else {
            delay
        };
        Ok(Cost {
            delay: max.saturating_add(own),
            area,
        })
    }

    /// Tree cost of a term; a root `Row` is the output row.
    pub fn term_cost(&self, t: &Term) -> Result<Cost, CostError> {
        let root = t.node_id();
        t.fold(|n, kids: &[Result<Cost, CostError>]| {
            let kids: Vec<Cost> = kids.iter().cloned().collect::<Result<_, _>>()?;
            let bits = n.children().iter().all(|c| c.kind().is_bit_valued());
            self.node_cost(n.kind(), &kids, bits, n.node_id() == root)
        })
    }

    pub fn is_penalized(&self, c: Cost) -> bool {
        c.delay >= self.penalty
    }

    /// Delay table as reported: operator token to (delay, area).
    pub fn describe(&self) -> BTreeMap<String, (u64, u64)> {
        self.table
            .iter()
            .map(|(op, v)| (format!("{op:?}").to_lowercase(), *v))
            .collect()
    }
}

/// Best node per class under a model.
pub struct Extraction {
    best: HashMap<Id, (Cost, usize)>,
    root: Id,
    root_choice: (Cost, usize),
}

impl Extraction {
    /// Relaxes class costs to a fixed point. Ties keep the earlier node.
    pub fn compute(g: &EGraph, root: Id, model: &CostModel) -> Result<Extraction, CostError> {
        let root = g.find(root);
        let mut best: HashMap<Id, (Cost, usize)> = HashMap::new();
        let mut kid_costs = Vec::new();
        loop {
            let mut changed = false;
            for class in g.classes() {
                for (i, node) in class.iter().enumerate() {
                    kid_costs.clear();
                    let mut ready = true;
                    for &c in &node.children {
                        match best.get(&g.find(c)) {
                            Some((cost, _)) => kid_costs.push(*cost),
                            None => {
                                ready = false;
                                break;
                            }
                        }
                    }
                    if !ready {
                        continue;
                    }
                    let bits = node.children.iter().all(|&c| g.data(c).bit);
                    let cost = model.node_cost(node.kind, &kid_costs, bits, false)?;
                    if best.get(&class.id).is_none_or(|(old, _)| cost < *old) {
                        best.insert(class.id, (cost, i));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let class = g.class(root);
        let mut root_choice: Option<(Cost, usize)> = None;
        for (i, node) in class.iter().enumerate() {
            let kids: Option<Vec<Cost>> = node
                .children
                .iter()
                .map(|&c| best.get(&g.find(c)).map(|(k, _)| *k))
                .collect();
            let Some(kids) = kids else { continue };
            let bits = node.children.iter().all(|&c| g.data(c).bit);
            let cost = model.node_cost(node.kind, &kids, bits, true)?;
            if root_choice.is_none_or(|(old, _)| cost < old) {
                root_choice = Some((cost, i));
            }
        }
        let root_choice = root_choice.expect("root class has a finite realization");
        Ok(Extraction {
            best,
            root,
            root_choice,
        })
    }

    pub fn root_cost(&self) -> Cost {
        self.root_choice.0
    }

    pub fn cost_of(&self, g: &EGraph, id: Id) -> Option<Cost> {
        self.best.get(&g.find(id)).map(|(c, _)| *c)
    }

    /// The chosen tree. Repeated classes share one `Term`.
    pub fn term(&self, g: &EGraph) -> Term {
        let mut memo: HashMap<Id, Term> = HashMap::new();
        let root_node = &g.class(self.root).nodes[self.root_choice.1];
        let kids = root_node
            .children
            .iter()
            .map(|&c| self.build(g, c, &mut memo))
            .collect();
        Term::new(root_node.kind, kids)
    }

    fn build(&self, g: &EGraph, id: Id, memo: &mut HashMap<Id, Term>) -> Term {
        // Explicit stack: extracted designs can be deep.
        let mut stack = vec![(g.find(id), false)];
        while let Some((c, expanded)) = stack.pop() {
            if memo.contains_key(&c) {
                continue;
            }
            let node = &g.class(c).nodes[self.best[&c].1];
            if expanded {
                let kids = node
                    .children
                    .iter()
                    .map(|&k| memo[&g.find(k)].clone())
                    .collect();
                memo.insert(c, Term::new(node.kind, kids));
            } else {
                stack.push((c, true));
                for &k in &node.children {
                    let k = g.find(k);
                    if !memo.contains_key(&k) {
                        stack.push((k, false));
                    }
                }
            }
        }
        memo[&g.find(id)].clone()
    }
}

/// Best term for `root`; fails if its cost carries the penalty.
pub fn extract(g: &EGraph, root: Id, model: &CostModel) -> Result<(Term, Cost), CostError> {
    let (t, c) = extract_unchecked(g, root, model)?;
    if model.is_penalized(c) {
        return Err(CostError::Unreachable {
            phase: model.phase,
            cost: c,
        });
    }
    Ok((t, c))
}

/// Best term for `root`, penalized or not.
pub fn extract_unchecked(
    g: &EGraph,
    root: Id,
    model: &CostModel,
) -> Result<(Term, Cost), CostError> {
    let ex = Extraction::compute(g, root, model)?;
    Ok((ex.term(g), ex.root_cost()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexp::parse;

    #[test]
    fn half_adder_chain_msb_is_three_gates() {
        let m = CostModel::phase_one();
        let t = parse("(hac (hac (and p2 q1) (and p1 q2)) (and p2 q2))").unwrap();
        assert_eq!(m.term_cost(&t).unwrap().delay, 3);
    }

    #[test]
    fn triangle_low_bit_is_two_gates() {
        let m = CostModel::phase_two();
        let t = parse("(xor (and p2 q1) (and p1 q2))").unwrap();
        assert_eq!(m.term_cost(&t).unwrap().delay, 2);
    }

    #[test]
    fn compressors_are_penalized_in_phase_two() {
        let m = CostModel::phase_two();
        let t = parse("(fas p0 p1 p2)").unwrap();
        assert!(m.term_cost(&t).unwrap().delay >= PENALTY);
    }

    #[test]
    fn unknown_kind_is_an_error() {
        let mut m = CostModel::phase_one();
        m.table.remove(&Op::Xor);
        let t = parse("(xor p0 p1)").unwrap();
        assert_eq!(m.term_cost(&t), Err(CostError::UnknownKind(Op::Xor)));
    }

    #[test]
    fn extraction_of_a_fresh_term_is_its_cost() {
        let t = parse("(row (or (and p0 q0) (not (xor p1 q1))) (and p1 q1))").unwrap();
        let (g, root) = EGraph::from_term(&t);
        for m in [CostModel::phase_one(), CostModel::phase_two()] {
            let (got, cost) = extract(&g, root, &m).unwrap();
            assert_eq!(got, t);
            assert_eq!(cost, m.term_cost(&t).unwrap());
            assert_eq!(cost.delay, 3);
        }
    }

    #[test]
    fn extraction_picks_the_faster_form() {
        let slow = parse("(hac (hac (and p2 q1) (and p1 q2)) (and p2 q2))").unwrap();
        let fast = parse("(and (and p2 q1) (and p1 q2))").unwrap();
        let mut g = EGraph::new();
        let a = g.add_term(&slow);
        let b = g.add_term(&fast);
        g.union(a, b);
        g.rebuild();
        let (t, c) = extract(&g, a, &CostModel::phase_one()).unwrap();
        assert_eq!(t, fast);
        assert_eq!(c.delay, 2);
    }

    #[test]
    fn penalized_root_is_unreachable() {
        let t = parse("(sum (row p0 p1) (row p1 p0))").unwrap();
        let (g, root) = EGraph::from_term(&t);
        let e = extract(&g, root, &CostModel::phase_one()).unwrap_err();
        assert!(matches!(
            e,
            CostError::Unreachable {
                phase: Phase::One,
                ..
            }
        ));
        assert!(e.to_string().contains("target shape unreachable"));
    }
}
