// SPDX-License-Identifier: Apache-2.0

//! Partially built expressions whose leaves are existing values.
//!
//! Dynamic rewrites describe their right-hand sides as a [`Recipe`] over
//! e-class ids; the same builders run over [`Term`] leaves to construct
//! plain terms (the initial AND array, the divide-and-conquer split).

use crate::term::{NodeKind, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recipe<L> {
    Leaf(L),
    Node(NodeKind, Vec<Recipe<L>>),
}

impl<L> Recipe<L> {
    pub fn leaf(l: L) -> Self {
        Recipe::Leaf(l)
    }

    pub fn node(kind: NodeKind, children: Vec<Recipe<L>>) -> Self {
        Recipe::Node(kind, children)
    }

    pub fn zero() -> Self {
        Recipe::Node(NodeKind::Const(false), vec![])
    }

    pub fn one() -> Self {
        Recipe::Node(NodeKind::Const(true), vec![])
    }

    pub fn constant(b: bool) -> Self {
        Recipe::Node(NodeKind::Const(b), vec![])
    }

    pub fn row(slots: Vec<Recipe<L>>) -> Self {
        Recipe::Node(NodeKind::Row, slots)
    }

    pub fn sum(ops: Vec<Recipe<L>>) -> Self {
        Recipe::Node(NodeKind::Sum, ops)
    }

    pub fn add(a: Recipe<L>, b: Recipe<L>) -> Self {
        Recipe::Node(NodeKind::Add, vec![a, b])
    }

    pub fn and(a: Recipe<L>, b: Recipe<L>) -> Self {
        Recipe::Node(NodeKind::And, vec![a, b])
    }

    pub fn not(a: Recipe<L>) -> Self {
        Recipe::Node(NodeKind::Not, vec![a])
    }

    pub fn mul(a: Recipe<L>, b: Recipe<L>) -> Self {
        Recipe::Node(NodeKind::Mul, vec![a, b])
    }

    pub fn shl(a: Recipe<L>, k: u32) -> Self {
        Recipe::Node(NodeKind::Shl(k), vec![a])
    }

    /// Left-associated addition chain; `None` for an empty list.
    pub fn add_chain(items: Vec<Recipe<L>>) -> Option<Self> {
        let mut it = items.into_iter();
        let first = it.next()?;
        Some(it.fold(first, Recipe::add))
    }

    pub fn as_leaf(&self) -> Option<&L> {
        match self {
            Recipe::Leaf(l) => Some(l),
            Recipe::Node(..) => None,
        }
    }

    /// Replaces leaves.
    pub fn map_leaves<M>(self, f: &mut impl FnMut(L) -> M) -> Recipe<M> {
        match self {
            Recipe::Leaf(l) => Recipe::Leaf(f(l)),
            Recipe::Node(k, kids) => {
                Recipe::Node(k, kids.into_iter().map(|c| c.map_leaves(f)).collect())
            }
        }
    }
}

impl Recipe<Term> {
    /// Materializes a term. Panics on arity violations (builders never emit them).
    pub fn into_term(self) -> Term {
        match self {
            Recipe::Leaf(t) => t,
            Recipe::Node(k, kids) => {
                Term::new(k, kids.into_iter().map(Recipe::into_term).collect())
            }
        }
    }
}
