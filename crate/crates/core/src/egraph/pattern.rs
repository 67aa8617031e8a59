// SPDX-License-Identifier: Apache-2.0

//! Patterns with holes (`?a`) and trailing rest binders (`?xs...`).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{EGraph, ENode, Id};
use crate::recipe::Recipe;
use crate::sexp::{self, ParseError, Sexp};
use crate::term::{NodeKind, Term, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("rest binder `{0}` must be the last child of a row or sum")]
    MisplacedRest(String),
    #[error("hole `{0}` on the right-hand side is not bound by the left")]
    Unbound(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    Hole(String),
    Rest(String),
    Node(NodeKind, Vec<Pattern>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    One(Id),
    Many(Vec<Id>),
}

/// Hole bindings from one match.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subst {
    names: Arc<[String]>,
    vals: Vec<Option<Binding>>,
}

impl Subst {
    fn empty(names: Arc<[String]>) -> Subst {
        let vals = vec![None; names.len()];
        Subst { names, vals }
    }

    pub fn get(&self, name: &str) -> Option<&Binding> {
        let i = self.names.iter().position(|n| n == name)?;
        self.vals[i].as_ref()
    }

    pub fn one(&self, name: &str) -> Option<Id> {
        match self.get(name)? {
            Binding::One(id) => Some(*id),
            Binding::Many(_) => None,
        }
    }

    /// Bound holes with their names.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Binding)> {
        self.names
            .iter()
            .zip(&self.vals)
            .filter_map(|(n, v)| v.as_ref().map(|b| (n.as_str(), b)))
    }
}

/// Hole-indexed form of a pattern used for matching.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Node {
    Hole(usize),
    Rest(usize),
    Op(NodeKind, Vec<Node>),
}

/// A pattern prepared for repeated matching.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: Node,
    names: Arc<[String]>,
}

impl Compiled {
    /// Calls `f` once per substitution under which the pattern matches `id`.
    pub fn for_each_match(&self, g: &EGraph, id: Id, f: &mut dyn FnMut(&Subst)) {
        let mut s = Subst::empty(self.names.clone());
        match_node(&self.root, g, id, &mut s, &mut |s: &mut Subst| f(s));
    }

    /// Compiles `rhs` against this pattern's hole numbering.
    pub fn index(&self, p: &Pattern) -> RhsTemplate {
        fn go(p: &Pattern, names: &[String]) -> Node {
            let pos = |n: &String| names.iter().position(|m| m == n).expect("bound hole");
            match p {
                Pattern::Hole(n) => Node::Hole(pos(n)),
                Pattern::Rest(n) => Node::Rest(pos(n)),
                Pattern::Node(k, kids) => Node::Op(*k, kids.iter().map(|c| go(c, names)).collect()),
            }
        }
        RhsTemplate(go(p, &self.names))
    }
}

/// A right-hand side numbered against a [`Compiled`] left-hand side.
#[derive(Clone, Debug)]
pub struct RhsTemplate(Node);

impl RhsTemplate {
    pub fn instantiate(&self, s: &Subst) -> Recipe<Id> {
        build(&self.0, s)
    }
}

fn build(node: &Node, s: &Subst) -> Recipe<Id> {
    match node {
        Node::Hole(i) => match &s.vals[*i] {
            Some(Binding::One(id)) => Recipe::Leaf(*id),
            _ => panic!("hole {i} unbound"),
        },
        Node::Rest(_) => unreachable!("rests are expanded by the parent"),
        Node::Op(kind, kids) => {
            let mut children = Vec::with_capacity(kids.len());
            for k in kids {
                match k {
                    Node::Rest(i) => match &s.vals[*i] {
                        Some(Binding::Many(ids)) => {
                            children.extend(ids.iter().map(|&x| Recipe::Leaf(x)))
                        }
                        _ => panic!("rest {i} unbound"),
                    },
                    _ => children.push(build(k, s)),
                }
            }
            Recipe::Node(*kind, children)
        }
    }
}

fn same(g: &EGraph, a: &Binding, b: &Binding) -> bool {
    match (a, b) {
        (Binding::One(x), Binding::One(y)) => g.find(*x) == g.find(*y),
        (Binding::Many(xs), Binding::Many(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| g.find(*x) == g.find(*y))
        }
        _ => false,
    }
}

fn bind(i: usize, b: Binding, g: &EGraph, s: &mut Subst, k: &mut dyn FnMut(&mut Subst)) {
    match &s.vals[i] {
        Some(existing) => {
            if same(g, existing, &b) {
                k(s);
            }
        }
        None => {
            s.vals[i] = Some(b);
            k(s);
            s.vals[i] = None;
        }
    }
}

fn match_node(p: &Node, g: &EGraph, id: Id, s: &mut Subst, k: &mut dyn FnMut(&mut Subst)) {
    match p {
        Node::Hole(i) => bind(*i, Binding::One(id), g, s, k),
        Node::Rest(_) => unreachable!("rest binders are handled by the parent"),
        Node::Op(kind, kids) => {
            for node in g.class(id).iter() {
                if node.kind != *kind {
                    continue;
                }
                let has_rest = matches!(kids.last(), Some(Node::Rest(_)));
                let fixed = if has_rest { kids.len() - 1 } else { kids.len() };
                let n = node.children.len();
                if (has_rest && n < fixed) || (!has_rest && n != fixed) {
                    continue;
                }
                match_children(kids, &node.children, 0, fixed, g, s, k);
            }
        }
    }
}

fn match_children(
    kids: &[Node],
    children: &[Id],
    i: usize,
    fixed: usize,
    g: &EGraph,
    s: &mut Subst,
    k: &mut dyn FnMut(&mut Subst),
) {
    if i == fixed {
        match kids.get(fixed) {
            Some(Node::Rest(r)) => bind(*r, Binding::Many(children[fixed..].to_vec()), g, s, k),
            _ => k(s),
        }
        return;
    }
    match_node(&kids[i], g, children[i], s, &mut |s: &mut Subst| {
        match_children(kids, children, i + 1, fixed, g, s, k)
    });
}

impl Pattern {
    /// Parses `(op child*)` with holes `?x`, rest binders `?xs...`, and term atoms.
    pub fn parse(text: &str) -> Result<Pattern, PatternError> {
        let sexp = sexp::read(text)?;
        let p = Pattern::from_sexp(&sexp)?;
        p.check_rest()?;
        Ok(p)
    }

    fn from_sexp(s: &Sexp) -> Result<Pattern, PatternError> {
        match s {
            Sexp::Atom(a, pos) => {
                if let Some(name) = a.strip_prefix('?') {
                    if let Some(base) = name.strip_suffix("...") {
                        Ok(Pattern::Rest(base.to_string()))
                    } else {
                        Ok(Pattern::Hole(name.to_string()))
                    }
                } else {
                    Ok(Pattern::Node(sexp::parse_atom(a, *pos)?, vec![]))
                }
            }
            Sexp::List(items, pos) => {
                let Some((Sexp::Atom(op, op_pos), rest)) = items.split_first() else {
                    return Err(ParseError {
                        pos: *pos,
                        msg: "expected `(op ...)`".into(),
                    }
                    .into());
                };
                let kind = sexp::parse_op(op, *op_pos)?;
                let kids = rest
                    .iter()
                    .map(Pattern::from_sexp)
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Pattern::Node(kind, kids))
            }
        }
    }

    fn check_rest(&self) -> Result<(), PatternError> {
        match self {
            Pattern::Hole(_) => Ok(()),
            Pattern::Rest(n) => Err(PatternError::MisplacedRest(n.clone())),
            Pattern::Node(kind, kids) => {
                for (i, k) in kids.iter().enumerate() {
                    if let Pattern::Rest(n) = k {
                        let last = i + 1 == kids.len();
                        if !last || !matches!(kind, NodeKind::Row | NodeKind::Sum) {
                            return Err(PatternError::MisplacedRest(n.clone()));
                        }
                    } else {
                        k.check_rest()?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Hole names in first-occurrence order.
    pub fn holes(&self) -> Vec<(String, bool)> {
        let mut out: Vec<(String, bool)> = Vec::new();
        self.collect_holes(&mut out);
        out
    }

    fn collect_holes(&self, out: &mut Vec<(String, bool)>) {
        match self {
            Pattern::Hole(n) => {
                if !out.iter().any(|(m, _)| m == n) {
                    out.push((n.clone(), false));
                }
            }
            Pattern::Rest(n) => {
                if !out.iter().any(|(m, _)| m == n) {
                    out.push((n.clone(), true));
                }
            }
            Pattern::Node(_, kids) => kids.iter().for_each(|k| k.collect_holes(out)),
        }
    }

    pub fn root_kind(&self) -> Option<NodeKind> {
        match self {
            Pattern::Node(k, _) => Some(*k),
            _ => None,
        }
    }

    /// Numbers the holes for matching.
    pub fn compile(&self) -> Compiled {
        fn go(p: &Pattern, names: &[String]) -> Node {
            let pos = |n: &String| names.iter().position(|m| m == n).expect("collected hole");
            match p {
                Pattern::Hole(n) => Node::Hole(pos(n)),
                Pattern::Rest(n) => Node::Rest(pos(n)),
                Pattern::Node(k, kids) => Node::Op(*k, kids.iter().map(|c| go(c, names)).collect()),
            }
        }
        let names: Vec<String> = self.holes().into_iter().map(|(n, _)| n).collect();
        Compiled {
            root: go(self, &names),
            names: names.into(),
        }
    }

    /// All substitutions under which the pattern matches class `id`.
    pub fn match_class(&self, g: &EGraph, id: Id) -> Vec<Subst> {
        let mut out = Vec::new();
        self.compile()
            .for_each_match(g, id, &mut |s| out.push(s.clone()));
        out
    }

    /// Adds the instantiated pattern to the graph.
    pub fn instantiate(&self, g: &mut EGraph, subst: &Subst) -> Id {
        match self {
            Pattern::Hole(name) => match subst.get(name) {
                Some(Binding::One(id)) => g.find(*id),
                _ => panic!("hole `{name}` unbound"),
            },
            Pattern::Rest(name) => panic!("rest `{name}` outside a row or sum"),
            Pattern::Node(kind, kids) => {
                let mut children = Vec::new();
                for k in kids {
                    match k {
                        Pattern::Rest(name) => match subst.get(name) {
                            Some(Binding::Many(ids)) => children.extend(ids.iter().copied()),
                            _ => panic!("rest `{name}` unbound"),
                        },
                        _ => children.push(k.instantiate(g, subst)),
                    }
                }
                g.add(ENode::new(*kind, children))
            }
        }
    }

    /// Builds a term by replacing holes with terms; rests expand to term lists.
    pub fn to_term(&self, holes: &dyn Fn(&str) -> Vec<Term>) -> Term {
        match self {
            Pattern::Hole(n) => holes(n).into_iter().next().expect("hole term"),
            Pattern::Rest(_) => unreachable!(),
            Pattern::Node(kind, kids) => {
                let mut children = Vec::new();
                for k in kids {
                    match k {
                        Pattern::Rest(n) => children.extend(holes(n)),
                        _ => children.push(k.to_term(holes)),
                    }
                }
                Term::new(*kind, children)
            }
        }
    }

    /// Term with every hole replaced by a fresh input bit (`p0`, `p1`, ...).
    pub fn with_fresh_bits(&self) -> Term {
        let holes = self.holes();
        let lookup = |n: &str| {
            let i = holes.iter().position(|(m, _)| m == n).unwrap();
            vec![Term::var(Var::p(i as u16))]
        };
        self.to_term(&lookup)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Hole(n) => write!(f, "?{n}"),
            Pattern::Rest(n) => write!(f, "?{n}..."),
            Pattern::Node(k, kids) if kids.is_empty() => write!(f, "{}", k.token()),
            Pattern::Node(k, kids) => {
                write!(f, "({}", k.token())?;
                for c in kids {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::{build_and_array, ArraySpec};

    #[test]
    fn add_same_matches_once() {
        let x = crate::sexp::parse("(add (and p0 q0) (and p0 q0))").unwrap();
        let (g, root) = EGraph::from_term(&x);
        let pat = Pattern::parse("(add ?a ?a)").unwrap();
        let ms = pat.match_class(&g, root);
        assert_eq!(ms.len(), 1);
        let a = ms[0].one("a").unwrap();
        assert_eq!(g.class(a).nodes[0].kind, NodeKind::And);
    }

    #[test]
    fn variadic_rows_bind_whole_lists() {
        let t = build_and_array(&ArraySpec::multiplier(2).unwrap());
        let (g, root) = EGraph::from_term(&t);
        let pat = Pattern::parse("(sum (row ?a...) (row ?b...))").unwrap();
        let ms = pat.match_class(&g, root);
        assert_eq!(ms.len(), 1);
        match (ms[0].get("a"), ms[0].get("b")) {
            (Some(Binding::Many(a)), Some(Binding::Many(b))) => {
                assert_eq!(a.len(), 2);
                assert_eq!(b.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_graph_has_no_matches() {
        let g = EGraph::new();
        let pat = Pattern::parse("(add ?a ?a)").unwrap();
        let total: usize = g
            .class_ids()
            .iter()
            .map(|&c| pat.match_class(&g, c).len())
            .sum();
        assert_eq!(total, 0);
    }

    #[test]
    fn rest_must_be_last() {
        assert!(Pattern::parse("(row ?a... ?b)").is_err());
        assert!(Pattern::parse("(and ?a...)").is_err());
    }

    #[test]
    fn display_round_trips() {
        let s = "(or (and ?a ?b) (and ?c (xor ?a ?b)))";
        assert_eq!(Pattern::parse(s).unwrap().to_string(), s);
    }
}
