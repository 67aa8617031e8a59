// SPDX-License-Identifier: Apache-2.0

//! Initial AND-array construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recipe::Recipe;
use crate::term::{NodeKind, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArrayError {
    #[error("operand width must be at least 2, got {0}")]
    WidthTooSmall(u32),
    #[error("operand width {0} is above the supported maximum of 32")]
    WidthTooLarge(u32),
    #[error("operand {0} of the sum is not a row")]
    NotARow(usize),
    #[error("row of length {len} does not fit in {target} slots")]
    RowTooLong { len: usize, target: usize },
}

/// An unsigned `width x width` multiplier, or a squarer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArraySpec {
    width: u32,
    square: bool,
}

impl ArraySpec {
    pub fn new(width: u32, square: bool) -> Result<ArraySpec, ArrayError> {
        if width < 2 {
            return Err(ArrayError::WidthTooSmall(width));
        }
        if width > 32 {
            return Err(ArrayError::WidthTooLarge(width));
        }
        Ok(ArraySpec { width, square })
    }

    pub fn multiplier(width: u32) -> Result<ArraySpec, ArrayError> {
        ArraySpec::new(width, false)
    }

    pub fn squarer(width: u32) -> Result<ArraySpec, ArrayError> {
        ArraySpec::new(width, true)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn square(&self) -> bool {
        self.square
    }

    pub fn output_width(&self) -> u32 {
        2 * self.width
    }

    /// Operand `p` as a row of input bits, MSB-first.
    pub fn p_row(&self) -> Vec<Term> {
        (0..self.width as u16).rev().map(Term::p).collect()
    }

    /// Operand `q` as a row, MSB-first (`p` again for a squarer).
    pub fn q_row(&self) -> Vec<Term> {
        if self.square {
            self.p_row()
        } else {
            (0..self.width as u16).rev().map(Term::q).collect()
        }
    }

    /// The unoptimized `Mul` term.
    pub fn product_term(&self) -> Term {
        Term::mul(Term::row(self.p_row()), Term::row(self.q_row()))
    }

    /// Exact product for given operands.
    pub fn expected(&self, p: u64, q: u64) -> u128 {
        if self.square {
            p as u128 * p as u128
        } else {
            p as u128 * q as u128
        }
    }

    /// Short identifier, `m<width><s|m>`.
    pub fn key(&self) -> String {
        format!("m{}{}", self.width, if self.square { 's' } else { 'm' })
    }
}

/// Partial-product array for `a * b` with `a`, `b` given MSB-first.
///
/// Row `j` multiplies `a` by `b[j]` (counted from the LSB) and carries `j`
/// trailing zero slots. With `square`, `b` must equal `a`: diagonal products
/// fold to the bit itself and symmetric products are emitted with the
/// more-significant bit first so that they coincide structurally.
pub fn and_array<L: Clone>(a: &[L], b: &[L], square: bool) -> Recipe<L> {
    let na = a.len();
    let nb = b.len();
    let bit_a = |i: usize| Recipe::Leaf(a[na - 1 - i].clone());
    let bit_b = |j: usize| Recipe::Leaf(b[nb - 1 - j].clone());
    let mut rows = Vec::with_capacity(nb);
    for j in 0..nb {
        let mut slots = Vec::with_capacity(na + j);
        for i in (0..na).rev() {
            let pp = if square {
                match i.cmp(&j) {
                    std::cmp::Ordering::Equal => bit_a(i),
                    std::cmp::Ordering::Greater => Recipe::and(bit_a(i), bit_a(j)),
                    std::cmp::Ordering::Less => Recipe::and(bit_a(j), bit_a(i)),
                }
            } else {
                Recipe::and(bit_a(i), bit_b(j))
            };
            slots.push(pp);
        }
        slots.extend((0..j).map(|_| Recipe::zero()));
        rows.push(Recipe::row(slots));
    }
    if rows.len() == 1 {
        rows.pop().expect("one row")
    } else {
        Recipe::sum(rows)
    }
}

/// `Sum` of rows of partial products for `spec`.
pub fn build_and_array(spec: &ArraySpec) -> Term {
    and_array(&spec.p_row(), &spec.q_row(), spec.square()).into_term()
}

/// Left-pads every row with zero slots up to `target_len`.
pub fn pad_rows(rows: &[Term], target_len: usize) -> Result<Vec<Term>, ArrayError> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            if r.kind() != NodeKind::Row {
                return Err(ArrayError::NotARow(i));
            }
            let len = r.children().len();
            if len > target_len {
                return Err(ArrayError::RowTooLong {
                    len,
                    target: target_len,
                });
            }
            let mut slots = vec![Term::zero(); target_len - len];
            slots.extend(r.children().iter().cloned());
            Ok(Term::row(slots))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexp::serialize;
    use crate::term::{eval, Env};

    #[test]
    fn two_bit_multiplier_layout() {
        let t = build_and_array(&ArraySpec::multiplier(2).unwrap());
        assert_eq!(
            serialize(&t),
            "(sum (row (and p1 q0) (and p0 q0)) (row (and p1 q1) (and p0 q1) 0))"
        );
    }

    #[test]
    fn two_bit_squarer_folds_diagonal() {
        let t = build_and_array(&ArraySpec::squarer(2).unwrap());
        assert_eq!(
            serialize(&t),
            "(sum (row (and p1 p0) p0) (row p1 (and p1 p0) 0))"
        );
    }

    #[test]
    fn squarer_symmetric_products_are_shared() {
        let t = build_and_array(&ArraySpec::squarer(3).unwrap());
        let s = serialize(&t);
        assert!(!s.contains("(and p0 p1)"));
        assert!(!s.contains("(and p0 p2)"));
    }

    #[test]
    fn width_one_is_rejected() {
        assert_eq!(ArraySpec::multiplier(1), Err(ArrayError::WidthTooSmall(1)));
    }

    #[test]
    fn pad_examples() {
        let a = Term::p(0);
        let padded = pad_rows(&[Term::row(vec![a.clone()])], 2).unwrap();
        assert_eq!(padded[0], Term::row(vec![Term::zero(), a]));

        let t = build_and_array(&ArraySpec::multiplier(2).unwrap());
        let padded = pad_rows(t.children(), 3).unwrap();
        assert_eq!(serialize(&padded[0]), "(row 0 (and p1 q0) (and p0 q0))");
        assert!(pad_rows(&[Term::p(0)], 2).is_err());
        assert!(pad_rows(t.children(), 2).is_err());
    }

    #[test]
    fn arrays_multiply_exhaustively() {
        for n in 2..=8u32 {
            for square in [false, true] {
                let spec = ArraySpec::new(n, square).unwrap();
                let t = build_and_array(&spec);
                let qs = if square { 1 } else { 1u64 << n };
                for p in 0..1u64 << n {
                    for q in 0..qs {
                        let env = Env::new().with_p(p, n).with_q(q, n);
                        assert_eq!(eval(&t, &env).unwrap(), spec.expected(p, q));
                    }
                }
            }
        }
    }
}
