// SPDX-License-Identifier: Apache-2.0

//! Multiplier and squarer synthesis by phased e-graph rewriting.
//!
//! An `n`-bit product is lowered to an AND array, reduced to a single row of
//! bit expressions by compressor-level rewriting (phase one), lowered to
//! gates and optimized for delay by Boolean rewriting (phase two), and
//! emitted as a Verilog netlist. Every stage is checked against the exact
//! integer semantics in [`term`].

// Node constructors are named after the operators they build.
#![allow(clippy::should_implement_trait)]

pub mod arrays;
pub mod cost;
pub mod egraph;
pub mod netlist;
pub mod pipeline;
pub mod recipe;
pub mod rules;
pub mod sexp;
pub mod term;
pub mod verify;

pub use arrays::{build_and_array, pad_rows, ArraySpec};
pub use egraph::{EGraph, Id};
pub use term::{eval, free_vars, Env, NodeKind, Term, Var};
