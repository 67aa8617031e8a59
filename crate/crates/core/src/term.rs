// SPDX-License-Identifier: Apache-2.0

//! The arithmetic-logic term language.
//!
//! A [`Term`] is an immutable tree over [`NodeKind`]. Children are reference
//! counted, so a term that reuses a subtree many times (the usual outcome of
//! fan-out-one extraction) stays small in memory while keeping tree semantics.
//!
//! Every kind has an integer valuation ([`eval`]); all rewrites are judged
//! against it. `Row` uses slot-positional weighting: the child in slot `i`
//! (counting from the least-significant end) is weighted by `2^i` no matter
//! how large its own value is.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which operand an input bit belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operand {
    P,
    Q,
}

impl Operand {
    pub fn letter(self) -> char {
        match self {
            Operand::P => 'p',
            Operand::Q => 'q',
        }
    }
}

/// A single input bit such as `p2` or `q0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var {
    pub operand: Operand,
    pub index: u16,
}

impl Var {
    pub const fn p(index: u16) -> Var {
        Var {
            operand: Operand::P,
            index,
        }
    }

    pub const fn q(index: u16) -> Var {
        Var {
            operand: Operand::Q,
            index,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.operand.letter(), self.index)
    }
}

/// Operator of a term node. Arity lives in the node's child list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Var(Var),
    Const(bool),
    And,
    Or,
    Xor,
    Not,
    /// Binary integer addition.
    Add,
    /// Positional container, children MSB-first.
    Row,
    /// Integer addition of two or more operands.
    Sum,
    /// Left shift by a fixed number of bit positions.
    Shl(u32),
    /// Unoptimized product of two rows.
    Mul,
    FaSum,
    FaCarry,
    HaSum,
    HaCarry,
}

/// The operator name without payload; used for indexing and cost tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Var,
    Const,
    And,
    Or,
    Xor,
    Not,
    Add,
    Row,
    Sum,
    Shl,
    Mul,
    Fas,
    Fac,
    Has,
    Hac,
}

impl Op {
    pub const ALL: [Op; 15] = [
        Op::Var,
        Op::Const,
        Op::And,
        Op::Or,
        Op::Xor,
        Op::Not,
        Op::Add,
        Op::Row,
        Op::Sum,
        Op::Shl,
        Op::Mul,
        Op::Fas,
        Op::Fac,
        Op::Has,
        Op::Hac,
    ];
}

/// Allowed child counts for a kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn admits(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl NodeKind {
    pub fn op(&self) -> Op {
        match self {
            NodeKind::Var(_) => Op::Var,
            NodeKind::Const(_) => Op::Const,
            NodeKind::And => Op::And,
            NodeKind::Or => Op::Or,
            NodeKind::Xor => Op::Xor,
            NodeKind::Not => Op::Not,
            NodeKind::Add => Op::Add,
            NodeKind::Row => Op::Row,
            NodeKind::Sum => Op::Sum,
            NodeKind::Shl(_) => Op::Shl,
            NodeKind::Mul => Op::Mul,
            NodeKind::FaSum => Op::Fas,
            NodeKind::FaCarry => Op::Fac,
            NodeKind::HaSum => Op::Has,
            NodeKind::HaCarry => Op::Hac,
        }
    }

    pub fn arity(&self) -> Arity {
        match self {
            NodeKind::Var(_) | NodeKind::Const(_) => Arity::Exactly(0),
            NodeKind::Not | NodeKind::Shl(_) => Arity::Exactly(1),
            NodeKind::And
            | NodeKind::Or
            | NodeKind::Xor
            | NodeKind::Add
            | NodeKind::Mul
            | NodeKind::HaSum
            | NodeKind::HaCarry => Arity::Exactly(2),
            NodeKind::FaSum | NodeKind::FaCarry => Arity::Exactly(3),
            NodeKind::Row => Arity::AtLeast(1),
            NodeKind::Sum => Arity::AtLeast(2),
        }
    }

    /// Kinds whose value is always 0 or 1.
    pub fn is_bit_valued(&self) -> bool {
        matches!(
            self,
            NodeKind::Var(_)
                | NodeKind::Const(_)
                | NodeKind::And
                | NodeKind::Or
                | NodeKind::Xor
                | NodeKind::Not
                | NodeKind::FaSum
                | NodeKind::FaCarry
                | NodeKind::HaSum
                | NodeKind::HaCarry
        )
    }

    /// Kinds allowed in a finished gate-level design.
    pub fn is_gate_level(&self) -> bool {
        matches!(
            self,
            NodeKind::Var(_)
                | NodeKind::Const(_)
                | NodeKind::And
                | NodeKind::Or
                | NodeKind::Xor
                | NodeKind::Not
        )
    }

    pub fn is_compressor(&self) -> bool {
        matches!(
            self,
            NodeKind::FaSum | NodeKind::FaCarry | NodeKind::HaSum | NodeKind::HaCarry
        )
    }

    /// Whether children must evaluate in {0,1}.
    pub fn needs_bit_children(&self) -> bool {
        self.is_bit_valued() && !matches!(self, NodeKind::Var(_) | NodeKind::Const(_))
    }

    /// Operator token used by the s-expression syntax.
    pub fn token(&self) -> String {
        match self {
            NodeKind::Var(v) => v.to_string(),
            NodeKind::Const(false) => "0".into(),
            NodeKind::Const(true) => "1".into(),
            NodeKind::And => "and".into(),
            NodeKind::Or => "or".into(),
            NodeKind::Xor => "xor".into(),
            NodeKind::Not => "not".into(),
            NodeKind::Add => "add".into(),
            NodeKind::Row => "row".into(),
            NodeKind::Sum => "sum".into(),
            NodeKind::Shl(k) => format!("shl{k}"),
            NodeKind::Mul => "mul".into(),
            NodeKind::FaSum => "fas".into(),
            NodeKind::FaCarry => "fac".into(),
            NodeKind::HaSum => "has".into(),
            NodeKind::HaCarry => "hac".into(),
        }
    }

    /// Value of the node given its child values.
    pub fn apply(&self, args: &[u128]) -> u128 {
        let bit = |i: usize| args[i] & 1;
        match self {
            NodeKind::Var(_) => unreachable!("variables are looked up, not applied"),
            NodeKind::Const(c) => *c as u128,
            NodeKind::And => bit(0) & bit(1),
            NodeKind::Or => bit(0) | bit(1),
            NodeKind::Xor => bit(0) ^ bit(1),
            NodeKind::Not => 1 - bit(0),
            NodeKind::Add | NodeKind::Sum => args.iter().sum(),
            NodeKind::Row => args
                .iter()
                .rev()
                .enumerate()
                .map(|(slot, v)| v << slot)
                .sum(),
            NodeKind::Shl(k) => args[0] << k,
            NodeKind::Mul => args[0] * args[1],
            NodeKind::FaSum => (bit(0) + bit(1) + bit(2)) & 1,
            NodeKind::FaCarry => (bit(0) + bit(1) + bit(2)) >> 1,
            NodeKind::HaSum => (bit(0) + bit(1)) & 1,
            NodeKind::HaCarry => (bit(0) + bit(1)) >> 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("`{op}` takes {expected} children, got {got}")]
    Arity {
        op: String,
        expected: String,
        got: usize,
    },
    #[error("unbound variable {0}")]
    Unbound(Var),
    #[error("child of `{op}` evaluated to {value}, expected a single bit")]
    NotABit { op: String, value: u128 },
}

#[derive(PartialEq, Eq)]
struct TermNode {
    kind: NodeKind,
    children: Vec<Term>,
}

/// Immutable expression tree; cloning is cheap.
#[derive(Clone, PartialEq, Eq)]
pub struct Term(Arc<TermNode>);

impl Term {
    /// Builds a node, checking arity.
    pub fn try_new(kind: NodeKind, children: Vec<Term>) -> Result<Term, TermError> {
        let arity = kind.arity();
        if !arity.admits(children.len()) {
            let expected = match arity {
                Arity::Exactly(k) => format!("exactly {k}"),
                Arity::AtLeast(k) => format!("at least {k}"),
            };
            return Err(TermError::Arity {
                op: kind.token(),
                expected,
                got: children.len(),
            });
        }
        Ok(Term(Arc::new(TermNode { kind, children })))
    }

    /// Builds a node. Panics on an arity violation.
    pub fn new(kind: NodeKind, children: Vec<Term>) -> Term {
        match Term::try_new(kind, children) {
            Ok(t) => t,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn var(v: Var) -> Term {
        Term::new(NodeKind::Var(v), vec![])
    }

    pub fn p(index: u16) -> Term {
        Term::var(Var::p(index))
    }

    pub fn q(index: u16) -> Term {
        Term::var(Var::q(index))
    }

    pub fn constant(bit: bool) -> Term {
        Term::new(NodeKind::Const(bit), vec![])
    }

    pub fn zero() -> Term {
        Term::constant(false)
    }

    pub fn one() -> Term {
        Term::constant(true)
    }

    pub fn and(a: Term, b: Term) -> Term {
        Term::new(NodeKind::And, vec![a, b])
    }

    pub fn or(a: Term, b: Term) -> Term {
        Term::new(NodeKind::Or, vec![a, b])
    }

    pub fn xor(a: Term, b: Term) -> Term {
        Term::new(NodeKind::Xor, vec![a, b])
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Term) -> Term {
        Term::new(NodeKind::Not, vec![a])
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Term, b: Term) -> Term {
        Term::new(NodeKind::Add, vec![a, b])
    }

    pub fn row(slots: Vec<Term>) -> Term {
        Term::new(NodeKind::Row, slots)
    }

    pub fn sum(operands: Vec<Term>) -> Term {
        Term::new(NodeKind::Sum, operands)
    }

    pub fn shl(a: Term, k: u32) -> Term {
        Term::new(NodeKind::Shl(k), vec![a])
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Term, b: Term) -> Term {
        Term::new(NodeKind::Mul, vec![a, b])
    }

    pub fn kind(&self) -> NodeKind {
        self.0.kind
    }

    pub fn children(&self) -> &[Term] {
        &self.0.children
    }

    /// Pointer identity of the shared node; stable for the lifetime of the term.
    pub fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn is_zero(&self) -> bool {
        self.kind() == NodeKind::Const(false)
    }

    /// Visits every distinct shared node once, children before parents.
    pub fn visit_post_order(&self, mut f: impl FnMut(&Term)) {
        let mut seen = std::collections::HashSet::new();
        let mut stack: Vec<(Term, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                f(&t);
                continue;
            }
            if !seen.insert(t.node_id()) {
                continue;
            }
            stack.push((t.clone(), true));
            for c in t.children().iter().rev() {
                if !seen.contains(&c.node_id()) {
                    stack.push((c.clone(), false));
                }
            }
        }
    }

    /// Bottom-up fold over the shared structure; each shared node is computed once.
    pub fn fold<T: Clone>(&self, mut f: impl FnMut(&Term, &[T]) -> T) -> T {
        let mut memo: HashMap<usize, T> = HashMap::new();
        self.visit_post_order(|t| {
            let args: Vec<T> = t
                .children()
                .iter()
                .map(|c| memo[&c.node_id()].clone())
                .collect();
            let v = f(t, &args);
            memo.insert(t.node_id(), v);
        });
        memo.remove(&self.node_id()).expect("root visited")
    }

    /// Longest path counted in gate-level operators (And, Or, Xor, Not).
    pub fn gate_depth(&self) -> u32 {
        self.fold(|t, ds: &[u32]| {
            let below = ds.iter().copied().max().unwrap_or(0);
            match t.kind() {
                NodeKind::And | NodeKind::Or | NodeKind::Xor | NodeKind::Not => below + 1,
                _ => below,
            }
        })
    }

    /// Number of nodes in the tree reading (shared subtrees counted per use).
    pub fn tree_size(&self) -> u128 {
        self.fold(|_, sizes: &[u128]| 1 + sizes.iter().sum::<u128>())
    }

    /// True if every node is a gate, input bit, or constant.
    pub fn is_gate_level(&self) -> bool {
        self.fold(|t, ok: &[bool]| t.kind().is_gate_level() && ok.iter().all(|b| *b))
    }

    /// Replaces variables according to `f`; shared structure is preserved.
    pub fn substitute(&self, f: &impl Fn(Var) -> Term) -> Term {
        self.fold(|t, kids: &[Term]| match t.kind() {
            NodeKind::Var(v) => f(v),
            k if kids.is_empty() => Term::new(k, vec![]),
            k => Term::new(k, kids.to_vec()),
        })
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::sexp::serialize(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::sexp::serialize(self))
    }
}

/// Assignment of input bits. Bits are packed per operand, bit `i` is index `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Env {
    values: [u64; 2],
    bound: [u64; 2],
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    /// Binds `p0..p{width-1}` to the bits of `value`.
    pub fn with_p(self, value: u64, width: u32) -> Env {
        self.with(Operand::P, value, width)
    }

    /// Binds `q0..q{width-1}` to the bits of `value`.
    pub fn with_q(self, value: u64, width: u32) -> Env {
        self.with(Operand::Q, value, width)
    }

    fn with(mut self, operand: Operand, value: u64, width: u32) -> Env {
        let slot = operand as usize;
        let mask = if width >= 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        };
        self.values[slot] = value & mask;
        self.bound[slot] = mask;
        self
    }

    pub fn set(&mut self, var: Var, bit: bool) {
        let slot = var.operand as usize;
        let m = 1u64 << var.index;
        self.bound[slot] |= m;
        if bit {
            self.values[slot] |= m;
        } else {
            self.values[slot] &= !m;
        }
    }

    pub fn from_bits(bits: impl IntoIterator<Item = (Var, bool)>) -> Env {
        let mut env = Env::new();
        for (v, b) in bits {
            env.set(v, b);
        }
        env
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        let slot = var.operand as usize;
        if var.index >= 64 || self.bound[slot] >> var.index & 1 == 0 {
            return None;
        }
        Some(self.values[slot] >> var.index & 1 == 1)
    }
}

/// Integer value of `t` under `env`.
pub fn eval(t: &Term, env: &Env) -> Result<u128, TermError> {
    t.fold(|node, args: &[Result<u128, TermError>]| {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(a.clone()?);
        }
        match node.kind() {
            NodeKind::Var(v) => env.get(v).map(u128::from).ok_or(TermError::Unbound(v)),
            k => Ok(k.apply(&vals)),
        }
    })
}

/// Like [`eval`], but also rejects non-bit values fed to Boolean or compressor inputs.
pub fn eval_strict(t: &Term, env: &Env) -> Result<u128, TermError> {
    t.fold(|node, args: &[Result<u128, TermError>]| {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(a.clone()?);
        }
        let kind = node.kind();
        if kind.needs_bit_children() {
            if let Some(&bad) = vals.iter().find(|v| **v > 1) {
                return Err(TermError::NotABit {
                    op: kind.token(),
                    value: bad,
                });
            }
        }
        match kind {
            NodeKind::Var(v) => env.get(v).map(u128::from).ok_or(TermError::Unbound(v)),
            k => Ok(k.apply(&vals)),
        }
    })
}

/// Input bits mentioned by `t`, in (operand, index) order.
pub fn free_vars(t: &Term) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    t.visit_post_order(|n| {
        if let NodeKind::Var(v) = n.kind() {
            out.insert(v);
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pq(p: u64, q: u64, n: u32) -> Env {
        Env::new().with_p(p, n).with_q(q, n)
    }

    #[test]
    fn row_weights_slots_positionally() {
        let t = Term::row(vec![Term::one(), Term::zero()]);
        assert_eq!(eval(&t, &Env::new()).unwrap(), 2);
    }

    #[test]
    fn two_bit_sum_of_rows_is_the_product() {
        let pp = |i, j| Term::and(Term::p(i), Term::q(j));
        let t = Term::sum(vec![
            Term::row(vec![pp(1, 0), pp(0, 0)]),
            Term::row(vec![pp(1, 1), pp(0, 1), Term::zero()]),
        ]);
        assert_eq!(eval(&t, &pq(3, 3, 2)).unwrap(), 9);
        for p in 0..4 {
            for q in 0..4 {
                assert_eq!(eval(&t, &pq(p, q, 2)).unwrap(), (p * q) as u128);
            }
        }
    }

    #[test]
    fn nested_row_in_middle_slot() {
        let (e2, c, s, e0) = (Term::p(0), Term::p(1), Term::p(2), Term::p(3));
        let t = Term::row(vec![
            e2.clone(),
            Term::row(vec![c.clone(), s.clone()]),
            e0.clone(),
        ]);
        for bits in 0..16u64 {
            let env = Env::new().with_p(bits, 4);
            let v = |x: &Term| eval(x, &env).unwrap();
            assert_eq!(
                eval(&t, &env).unwrap(),
                4 * v(&e2) + 2 * (2 * v(&c) + v(&s)) + v(&e0)
            );
        }
    }

    #[test]
    fn compressor_identities_exhaustive() {
        for bits in 0..8u128 {
            let (a, b, c) = (bits >> 2 & 1, bits >> 1 & 1, bits & 1);
            let fc = NodeKind::FaCarry.apply(&[a, b, c]);
            let fs = NodeKind::FaSum.apply(&[a, b, c]);
            assert_eq!(2 * fc + fs, a + b + c);
            if bits < 4 {
                let (a, b) = (bits >> 1 & 1, bits & 1);
                let hc = NodeKind::HaCarry.apply(&[a, b]);
                let hs = NodeKind::HaSum.apply(&[a, b]);
                assert_eq!(2 * hc + hs, a + b);
            }
        }
    }

    #[test]
    fn unbound_variable_is_named() {
        let t = Term::and(Term::p(0), Term::q(3));
        let err = eval(&t, &Env::new().with_p(1, 1)).unwrap_err();
        assert_eq!(err, TermError::Unbound(Var::q(3)));
        assert!(err.to_string().contains("q3"));
    }

    #[test]
    fn free_vars_cases() {
        assert!(free_vars(&Term::zero()).is_empty());
        let fv = free_vars(&Term::and(Term::p(0), Term::q(0)));
        assert_eq!(
            fv.into_iter().collect::<Vec<_>>(),
            vec![Var::p(0), Var::q(0)]
        );
    }

    #[test]
    fn arity_is_checked() {
        assert!(Term::try_new(NodeKind::Row, vec![]).is_err());
        assert!(Term::try_new(NodeKind::Sum, vec![Term::zero()]).is_err());
        assert!(Term::try_new(NodeKind::FaSum, vec![Term::zero(); 2]).is_err());
    }

    #[test]
    fn strict_eval_flags_multibit_gate_inputs() {
        let t = Term::and(Term::row(vec![Term::one(), Term::one()]), Term::one());
        assert!(eval_strict(&t, &Env::new()).is_err());
    }

    #[test]
    fn depth_counts_gates_only() {
        let t = Term::and(Term::or(Term::p(0), Term::not(Term::p(1))), Term::p(2));
        assert_eq!(t.gate_depth(), 3);
        assert_eq!(Term::p(0).gate_depth(), 0);
    }
}
