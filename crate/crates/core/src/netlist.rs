// SPDX-License-Identifier: Apache-2.0

//! Shared-wire gate netlists and Verilog emission.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use crate::arrays::ArraySpec;
use crate::term::{NodeKind, Operand, Term, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("`{0}` is not a gate-level operator")]
    NotAGate(String),
    #[error("expected {expected} output bits, got {got}")]
    OutputCount { expected: usize, got: usize },
    #[error("input `{0}` is outside the operand width")]
    InputOutOfRange(Var),
    #[error("invalid module name `{0}`")]
    BadModuleName(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum GateKind {
    And,
    Or,
    Xor,
    Not,
}

impl GateKind {
    fn from_kind(k: NodeKind) -> Option<GateKind> {
        Some(match k {
            NodeKind::And => GateKind::And,
            NodeKind::Or => GateKind::Or,
            NodeKind::Xor => GateKind::Xor,
            NodeKind::Not => GateKind::Not,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "and",
            GateKind::Or => "or",
            GateKind::Xor => "xor",
            GateKind::Not => "not",
        }
    }
}

/// A value in the netlist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Signal {
    Input(Var),
    Const(bool),
    Wire(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<Signal>,
}

/// Gates in topological order; wire `i` is the output of `gates[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Netlist {
    pub width: u32,
    pub square: bool,
    pub gates: Vec<Gate>,
    /// Output bits, LSB first.
    pub outputs: Vec<Signal>,
}

/// Lowers output bits (LSB first) to a netlist, sharing equal gates.
pub fn lower(bits: &[Term], spec: &ArraySpec) -> Result<Netlist, NetlistError> {
    let expected = spec.output_width() as usize;
    if bits.len() != expected {
        return Err(NetlistError::OutputCount {
            expected,
            got: bits.len(),
        });
    }
    let mut gates: Vec<Gate> = Vec::new();
    let mut hashcons: HashMap<Gate, usize> = HashMap::new();
    let mut by_node: HashMap<usize, Signal> = HashMap::new();
    let mut outputs = Vec::with_capacity(bits.len());
    for bit in bits {
        let mut err = None;
        bit.visit_post_order(|n| {
            if err.is_some() || by_node.contains_key(&n.node_id()) {
                return;
            }
            let sig = match n.kind() {
                NodeKind::Var(v) => {
                    let in_range = u32::from(v.index) < spec.width()
                        && !(spec.square() && v.operand == Operand::Q);
                    if !in_range {
                        err = Some(NetlistError::InputOutOfRange(v));
                        return;
                    }
                    Signal::Input(v)
                }
                NodeKind::Const(b) => Signal::Const(b),
                k => {
                    let Some(kind) = GateKind::from_kind(k) else {
                        err = Some(NetlistError::NotAGate(k.token()));
                        return;
                    };
                    let inputs = n.children().iter().map(|c| by_node[&c.node_id()]).collect();
                    let gate = Gate { kind, inputs };
                    let id = *hashcons.entry(gate.clone()).or_insert_with(|| {
                        gates.push(gate);
                        gates.len() - 1
                    });
                    Signal::Wire(id)
                }
            };
            by_node.insert(n.node_id(), sig);
        });
        if let Some(e) = err {
            return Err(e);
        }
        outputs.push(by_node[&bit.node_id()]);
    }
    Ok(Netlist {
        width: spec.width(),
        square: spec.square(),
        gates,
        outputs,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetlistStats {
    pub gates: BTreeMap<String, usize>,
    pub total_gates: usize,
    pub depth: u32,
    /// Logic depth of each output bit, LSB first.
    pub output_depths: Vec<u32>,
}

impl Netlist {
    fn depths(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            d[i] = 1 + g
                .inputs
                .iter()
                .map(|s| self.signal_depth(&d, *s))
                .max()
                .unwrap_or(0);
        }
        d
    }

    fn signal_depth(&self, d: &[u32], s: Signal) -> u32 {
        match s {
            Signal::Wire(w) => d[w],
            _ => 0,
        }
    }

    pub fn stats(&self) -> NetlistStats {
        let mut gates = BTreeMap::new();
        for g in &self.gates {
            *gates.entry(g.kind.name().to_string()).or_insert(0) += 1;
        }
        let d = self.depths();
        let output_depths: Vec<u32> = self
            .outputs
            .iter()
            .map(|&s| self.signal_depth(&d, s))
            .collect();
        NetlistStats {
            gates,
            total_gates: self.gates.len(),
            depth: output_depths.iter().copied().max().unwrap_or(0),
            output_depths,
        }
    }

    /// Bit-parallel simulation: one lane per bit of the input words.
    /// `p[i]`/`q[i]` hold 64 values of input bit `i`. Returns one word per output.
    pub fn simulate(&self, p: &[u64], q: &[u64]) -> Vec<u64> {
        let mut w = vec![0u64; self.gates.len()];
        let read = |w: &[u64], s: Signal| match s {
            Signal::Input(v) => {
                let src = match v.operand {
                    Operand::P => p,
                    Operand::Q if self.square => p,
                    Operand::Q => q,
                };
                src[v.index as usize]
            }
            Signal::Const(b) => {
                if b {
                    u64::MAX
                } else {
                    0
                }
            }
            Signal::Wire(i) => w[i],
        };
        for (i, g) in self.gates.iter().enumerate() {
            let a = read(&w, g.inputs[0]);
            w[i] = match g.kind {
                GateKind::Not => !a,
                GateKind::And => a & read(&w, g.inputs[1]),
                GateKind::Or => a | read(&w, g.inputs[1]),
                GateKind::Xor => a ^ read(&w, g.inputs[1]),
            };
        }
        self.outputs.iter().map(|&s| read(&w, s)).collect()
    }

    /// Verilog-2001 module with `p`, `q` (multipliers only) and `r` ports.
    pub fn to_verilog(&self, module: &str) -> Result<String, NetlistError> {
        check_module_name(module)?;
        let n = self.width;
        let mut out = String::new();
        let ports = if self.square { "p, r" } else { "p, q, r" };
        let _ = writeln!(out, "module {module} ({ports});");
        if self.square {
            let _ = writeln!(out, "  input [{}:0] p;", n - 1);
        } else {
            let _ = writeln!(out, "  input [{}:0] p, q;", n - 1);
        }
        let _ = writeln!(out, "  output [{}:0] r;", self.outputs.len() - 1);
        let sig = |s: Signal| match s {
            Signal::Input(v) => {
                let letter = if self.square { 'p' } else { v.operand.letter() };
                format!("{letter}[{}]", v.index)
            }
            Signal::Const(b) => format!("1'b{}", b as u8),
            Signal::Wire(i) => format!("w{i}"),
        };
        for (i, g) in self.gates.iter().enumerate() {
            let expr = match g.kind {
                GateKind::Not => format!("~{}", sig(g.inputs[0])),
                k => {
                    let op = match k {
                        GateKind::And => "&",
                        GateKind::Or => "|",
                        _ => "^",
                    };
                    format!("{} {op} {}", sig(g.inputs[0]), sig(g.inputs[1]))
                }
            };
            let _ = writeln!(out, "  wire w{i};");
            let _ = writeln!(out, "  assign w{i} = {expr};");
        }
        for (i, &s) in self.outputs.iter().enumerate() {
            let _ = writeln!(out, "  assign r[{i}] = {};", sig(s));
        }
        out.push_str("endmodule\n");
        Ok(out)
    }
}

const RESERVED: &[&str] = &[
    "always",
    "and",
    "assign",
    "automatic",
    "begin",
    "buf",
    "bufif0",
    "bufif1",
    "case",
    "casex",
    "casez",
    "cell",
    "cmos",
    "config",
    "deassign",
    "default",
    "defparam",
    "design",
    "disable",
    "edge",
    "else",
    "end",
    "endcase",
    "endconfig",
    "endfunction",
    "endgenerate",
    "endmodule",
    "endprimitive",
    "endspecify",
    "endtable",
    "endtask",
    "event",
    "for",
    "force",
    "forever",
    "fork",
    "function",
    "generate",
    "genvar",
    "highz0",
    "highz1",
    "if",
    "ifnone",
    "incdir",
    "include",
    "initial",
    "inout",
    "input",
    "instance",
    "integer",
    "join",
    "large",
    "liblist",
    "library",
    "localparam",
    "macromodule",
    "medium",
    "module",
    "nand",
    "negedge",
    "nmos",
    "nor",
    "noshowcancelled",
    "not",
    "notif0",
    "notif1",
    "or",
    "output",
    "parameter",
    "pmos",
    "posedge",
    "primitive",
    "pull0",
    "pull1",
    "pulldown",
    "pullup",
    "pulsestyle_ondetect",
    "pulsestyle_onevent",
    "rcmos",
    "real",
    "realtime",
    "reg",
    "release",
    "repeat",
    "rnmos",
    "rpmos",
    "rtran",
    "rtranif0",
    "rtranif1",
    "scalared",
    "showcancelled",
    "signed",
    "small",
    "specify",
    "specparam",
    "strong0",
    "strong1",
    "supply0",
    "supply1",
    "table",
    "task",
    "time",
    "tran",
    "tranif0",
    "tranif1",
    "tri",
    "tri0",
    "tri1",
    "triand",
    "trior",
    "trireg",
    "unsigned",
    "use",
    "uwire",
    "vectored",
    "wait",
    "wand",
    "weak0",
    "weak1",
    "while",
    "wire",
    "wor",
    "xnor",
    "xor",
];

fn check_module_name(name: &str) -> Result<(), NetlistError> {
    let mut chars = name.chars();
    let ok_start = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    let ok_rest = name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$');
    if !ok_start || !ok_rest || RESERVED.contains(&name) {
        return Err(NetlistError::BadModuleName(name.to_string()));
    }
    Ok(())
}
