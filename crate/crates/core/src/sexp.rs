// SPDX-License-Identifier: Apache-2.0

//! S-expression syntax for terms.
//!
//! ```text
//! term := atom | "(" op term* ")"
//! atom := p<i> | q<i> | 0 | 1
//! op   := and | or | xor | not | add | row | sum | shl<k> | mul
//!       | fas | fac | has | hac
//! ```
//!
//! Rows list their slots MSB-first. Whitespace is free-form.

use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use crate::term::{NodeKind, Term, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl ParseError {
    fn new(pos: usize, msg: impl Into<String>) -> Self {
        ParseError {
            pos,
            msg: msg.into(),
        }
    }
}

/// Untyped s-expression with source offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    pub fn pos(&self) -> usize {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

/// Reads exactly one s-expression from `text`.
pub fn read(text: &str) -> Result<Sexp, ParseError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let sexp = read_one(bytes, &mut pos)?;
    skip_ws(bytes, &mut pos);
    if pos != bytes.len() {
        return Err(ParseError::new(pos, "trailing input after expression"));
    }
    Ok(sexp)
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b';' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn read_one(bytes: &[u8], pos: &mut usize) -> Result<Sexp, ParseError> {
    // Iterative to survive deeply nested designs.
    let mut stack: Vec<(Vec<Sexp>, usize)> = Vec::new();
    loop {
        skip_ws(bytes, pos);
        if *pos >= bytes.len() {
            return Err(ParseError::new(*pos, "unexpected end of input"));
        }
        let start = *pos;
        let item = match bytes[start] {
            b'(' => {
                *pos += 1;
                stack.push((Vec::new(), start));
                continue;
            }
            b')' => {
                *pos += 1;
                match stack.pop() {
                    Some((items, open)) => Sexp::List(items, open),
                    None => return Err(ParseError::new(start, "unbalanced `)`")),
                }
            }
            _ => {
                while *pos < bytes.len()
                    && !bytes[*pos].is_ascii_whitespace()
                    && bytes[*pos] != b'('
                    && bytes[*pos] != b')'
                {
                    *pos += 1;
                }
                let s = std::str::from_utf8(&bytes[start..*pos])
                    .map_err(|_| ParseError::new(start, "invalid utf-8"))?;
                Sexp::Atom(s.to_string(), start)
            }
        };
        match stack.last_mut() {
            Some((items, _)) => items.push(item),
            None => return Ok(item),
        }
    }
}

fn parse_index(s: &str, pos: usize) -> Result<u16, ParseError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseError::new(pos, format!("bad index `{s}`")));
    }
    let idx: u16 = s
        .parse()
        .map_err(|_| ParseError::new(pos, format!("index `{s}` out of range")))?;
    if idx >= 64 {
        return Err(ParseError::new(pos, format!("index `{s}` out of range")));
    }
    Ok(idx)
}

/// Parses an atom token (`p3`, `q0`, `0`, `1`).
pub fn parse_atom(s: &str, pos: usize) -> Result<NodeKind, ParseError> {
    match s {
        "0" => Ok(NodeKind::Const(false)),
        "1" => Ok(NodeKind::Const(true)),
        _ if s.starts_with('p') => Ok(NodeKind::Var(Var::p(parse_index(&s[1..], pos)?))),
        _ if s.starts_with('q') => Ok(NodeKind::Var(Var::q(parse_index(&s[1..], pos)?))),
        _ => Err(ParseError::new(pos, format!("unknown atom `{s}`"))),
    }
}

/// Parses an operator token at the head of a list.
pub fn parse_op(s: &str, pos: usize) -> Result<NodeKind, ParseError> {
    Ok(match s {
        "and" => NodeKind::And,
        "or" => NodeKind::Or,
        "xor" => NodeKind::Xor,
        "not" => NodeKind::Not,
        "add" => NodeKind::Add,
        "row" => NodeKind::Row,
        "sum" => NodeKind::Sum,
        "mul" => NodeKind::Mul,
        "fas" => NodeKind::FaSum,
        "fac" => NodeKind::FaCarry,
        "has" => NodeKind::HaSum,
        "hac" => NodeKind::HaCarry,
        _ if s.starts_with("shl") => {
            let k = &s[3..];
            if k.is_empty() || !k.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ParseError::new(pos, format!("bad shift `{s}`")));
            }
            NodeKind::Shl(
                k.parse()
                    .map_err(|_| ParseError::new(pos, format!("bad shift `{s}`")))?,
            )
        }
        _ => return Err(ParseError::new(pos, format!("unknown operator `{s}`"))),
    })
}

/// Parses a term. Structurally equal subterms share one node.
pub fn parse(text: &str) -> Result<Term, ParseError> {
    let sexp = read(text)?;
    let mut interner: HashMap<(NodeKind, Vec<usize>), Term> = HashMap::new();
    build(&sexp, &mut interner)
}

fn build(
    root: &Sexp,
    interner: &mut HashMap<(NodeKind, Vec<usize>), Term>,
) -> Result<Term, ParseError> {
    // Explicit post-order to avoid recursion depth limits.
    enum Frame<'a> {
        Enter(&'a Sexp),
        Exit(NodeKind, usize),
    }
    let mut out: Vec<Term> = Vec::new();
    let mut stack = vec![Frame::Enter(root)];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(Sexp::Atom(s, pos)) => {
                let kind = parse_atom(s, *pos)?;
                out.push(intern(interner, kind, vec![]));
            }
            Frame::Enter(Sexp::List(items, pos)) => {
                let Some((head, args)) = items.split_first() else {
                    return Err(ParseError::new(*pos, "empty list"));
                };
                let Sexp::Atom(op, op_pos) = head else {
                    return Err(ParseError::new(head.pos(), "operator must be an atom"));
                };
                let kind = parse_op(op, *op_pos)?;
                if !kind.arity().admits(args.len()) {
                    let what = if args.is_empty() && kind == NodeKind::Row {
                        "empty row".to_string()
                    } else {
                        format!("`{op}` cannot take {} operands", args.len())
                    };
                    return Err(ParseError::new(*pos, what));
                }
                stack.push(Frame::Exit(kind, args.len()));
                for a in args.iter().rev() {
                    stack.push(Frame::Enter(a));
                }
            }
            Frame::Exit(kind, n) => {
                let children = out.split_off(out.len() - n);
                out.push(intern(interner, kind, children));
            }
        }
    }
    Ok(out.pop().expect("one term"))
}

fn intern(
    interner: &mut HashMap<(NodeKind, Vec<usize>), Term>,
    kind: NodeKind,
    children: Vec<Term>,
) -> Term {
    let key = (kind, children.iter().map(Term::node_id).collect::<Vec<_>>());
    interner
        .entry(key)
        .or_insert_with(|| Term::new(kind, children))
        .clone()
}

/// Canonical single-line rendering.
pub fn serialize(t: &Term) -> String {
    let mut out = String::new();
    write_term(t, &mut out);
    out
}

fn write_term(root: &Term, out: &mut String) {
    enum Step {
        Open(Term),
        Close,
    }
    let mut stack = vec![Step::Open(root.clone())];
    let mut need_space = false;
    while let Some(step) = stack.pop() {
        match step {
            Step::Open(t) => {
                if need_space {
                    out.push(' ');
                }
                if t.children().is_empty() {
                    let _ = write!(out, "{}", t.kind().token());
                    need_space = true;
                } else {
                    let _ = write!(out, "({}", t.kind().token());
                    need_space = true;
                    stack.push(Step::Close);
                    for c in t.children().iter().rev() {
                        stack.push(Step::Open(c.clone()));
                    }
                }
            }
            Step::Close => {
                out.push(')');
                need_space = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_figure_row() {
        let t = parse("(row (and p1 q1) (and p0 q1) 0)").unwrap();
        let expect = Term::row(vec![
            Term::and(Term::p(1), Term::q(1)),
            Term::and(Term::p(0), Term::q(1)),
            Term::zero(),
        ]);
        assert_eq!(t, expect);
    }

    #[test]
    fn canonical_round_trip() {
        for s in [
            "(row (and p1 q1) (and p0 q1) 0)",
            "(sum (row p1 p0) (shl2 (row q0)))",
            "(fac (has p0 q0) (hac p1 q1) (not (xor p2 1)))",
            "p5",
        ] {
            assert_eq!(serialize(&parse(s).unwrap()), s);
        }
    }

    #[test]
    fn whitespace_is_free() {
        let t = parse("  (and\n\tp0   ; comment\n q0 ) ").unwrap();
        assert_eq!(serialize(&t), "(and p0 q0)");
    }

    #[test]
    fn empty_row_is_rejected() {
        let e = parse("(row)").unwrap_err();
        assert!(e.msg.contains("empty row"), "{e}");
        assert_eq!(e.pos, 0);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("(and p0 (frob q1))").unwrap_err();
        assert_eq!(e.pos, 9);
        assert!(parse("(and p0 q1").is_err());
        assert!(parse("(and p0 q1))").is_err());
        assert!(parse("(not p0 q0)").is_err());
        assert!(parse("px").is_err());
    }

    #[test]
    fn parse_shares_equal_subterms() {
        let t = parse("(xor (and p0 q0) (and p0 q0))").unwrap();
        assert_eq!(t.children()[0].node_id(), t.children()[1].node_id());
    }
}
