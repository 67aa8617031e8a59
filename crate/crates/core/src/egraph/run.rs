// SPDX-License-Identifier: Apache-2.0

//! Rewrites and the equality-saturation loop.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::pattern::{Compiled, RhsTemplate};
use super::{EGraph, Id, Pattern, PatternError, Subst};
use crate::recipe::Recipe;
use crate::term::{Op, Term};

/// Optimization stage a rewrite belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    One,
    Two,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pre => "pre",
            Phase::One => "1",
            Phase::Two => "2",
        })
    }
}

/// What a rewrite preserves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Soundness {
    /// Integer value, exactly.
    Exact,
    /// Value modulo 2^W, where W is the output width; only at the output root.
    Modulo2W,
}

impl fmt::Display for Soundness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Soundness::Exact => "exact",
            Soundness::Modulo2W => "mod-2^W",
        })
    }
}

/// Facts about the design a rewrite may consult.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleContext {
    /// Class of the design output, if the graph holds a whole design.
    pub root: Option<Id>,
    /// Output width W in bits.
    pub output_width: u32,
}

/// A left-hand-side instance used to machine-check a rewrite.
#[derive(Clone, Debug)]
pub struct RuleSample {
    pub lhs: Term,
    /// Output width to assume; the sample's root plays the design root.
    pub output_width: u32,
}

impl RuleSample {
    pub fn new(lhs: Term) -> Self {
        RuleSample {
            lhs,
            output_width: 0,
        }
    }

    pub fn rooted(lhs: Term, output_width: u32) -> Self {
        RuleSample { lhs, output_width }
    }
}

/// A rewrite whose right-hand side is computed at match time.
pub trait DynamicRule: Send + Sync {
    /// Operator the matched class must contain.
    fn root_op(&self) -> Op;
    /// Pushes one right-hand side per match in `class`.
    fn search(&self, g: &EGraph, class: Id, ctx: &RuleContext, out: &mut Vec<Recipe<Id>>);
    /// Human-readable left-hand side.
    fn lhs_text(&self) -> String;
    /// Human-readable right-hand side.
    fn rhs_text(&self) -> String;
    /// Instances the soundness checker evaluates.
    fn samples(&self) -> Vec<RuleSample>;
}

#[derive(Clone)]
pub enum RuleBody {
    Static {
        lhs: Pattern,
        rhs: Pattern,
        /// Only match when every hole is bound to a single-bit class.
        bits_only: bool,
        matcher: Arc<(Compiled, RhsTemplate)>,
    },
    Dynamic(Arc<dyn DynamicRule>),
}

#[derive(Clone)]
pub struct Rewrite {
    pub name: String,
    pub phase: Phase,
    pub soundness: Soundness,
    pub body: RuleBody,
}

impl fmt::Debug for Rewrite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}]: {} => {}",
            self.name,
            self.phase,
            self.lhs_text(),
            self.rhs_text()
        )
    }
}

impl Rewrite {
    pub fn static_rule(
        name: &str,
        phase: Phase,
        lhs: &str,
        rhs: &str,
    ) -> Result<Rewrite, PatternError> {
        let lhs = Pattern::parse(lhs)?;
        let rhs = Pattern::parse(rhs)?;
        let bound = lhs.holes();
        for (h, _) in rhs.holes() {
            if !bound.iter().any(|(b, _)| *b == h) {
                return Err(PatternError::Unbound(h));
            }
        }
        let compiled = lhs.compile();
        let template = compiled.index(&rhs);
        Ok(Rewrite {
            name: name.to_string(),
            phase,
            soundness: Soundness::Exact,
            body: RuleBody::Static {
                lhs,
                rhs,
                bits_only: false,
                matcher: Arc::new((compiled, template)),
            },
        })
    }

    pub fn dynamic(
        name: &str,
        phase: Phase,
        soundness: Soundness,
        rule: impl DynamicRule + 'static,
    ) -> Rewrite {
        Rewrite {
            name: name.to_string(),
            phase,
            soundness,
            body: RuleBody::Dynamic(Arc::new(rule)),
        }
    }

    /// Restricts a static rule to single-bit operands.
    pub fn bits_only(mut self) -> Rewrite {
        if let RuleBody::Static { bits_only, .. } = &mut self.body {
            *bits_only = true;
        }
        self
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self.body, RuleBody::Dynamic(_))
    }

    pub fn lhs_text(&self) -> String {
        match &self.body {
            RuleBody::Static { lhs, .. } => lhs.to_string(),
            RuleBody::Dynamic(d) => d.lhs_text(),
        }
    }

    pub fn rhs_text(&self) -> String {
        match &self.body {
            RuleBody::Static { rhs, .. } => rhs.to_string(),
            RuleBody::Dynamic(d) => d.rhs_text(),
        }
    }

    pub fn root_op(&self) -> Option<Op> {
        match &self.body {
            RuleBody::Static { lhs, .. } => lhs.root_kind().map(|k| k.op()),
            RuleBody::Dynamic(d) => Some(d.root_op()),
        }
    }

    /// Right-hand sides of every match rooted at `class`.
    pub fn search_class(
        &self,
        g: &EGraph,
        class: Id,
        ctx: &RuleContext,
        out: &mut Vec<Recipe<Id>>,
    ) {
        match &self.body {
            RuleBody::Static {
                bits_only, matcher, ..
            } => {
                let (lhs, rhs) = &**matcher;
                lhs.for_each_match(g, class, &mut |subst| {
                    if !*bits_only || all_bits(g, subst) {
                        out.push(rhs.instantiate(subst));
                    }
                });
            }
            RuleBody::Dynamic(d) => d.search(g, class, ctx, out),
        }
    }
}

fn all_bits(g: &EGraph, subst: &Subst) -> bool {
    subst.iter().all(|(_, b)| match b {
        super::Binding::One(id) => g.data(*id).bit,
        super::Binding::Many(ids) => ids.iter().all(|id| g.data(*id).bit),
    })
}

/// Growth limits for one saturation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLimits {
    pub max_iterations: usize,
    pub max_nodes: usize,
    /// Per-rule match budget per iteration. A rule over budget has its
    /// matches dropped and sits out `ban_length` iterations; budget and ban
    /// double with each offence.
    pub match_limit: usize,
    pub ban_length: usize,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            max_iterations: 16,
            max_nodes: 100_000,
            match_limit: 100_000,
            ban_length: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopReason {
    Saturated,
    IterationLimit,
    NodeLimit,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Saturated => "saturated",
            StopReason::IterationLimit => "iteration-limit",
            StopReason::NodeLimit => "node-limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub nodes: usize,
    pub classes: usize,
}

#[derive(Clone, Copy, Default)]
struct RuleState {
    times_banned: u32,
    banned_until: usize,
}

/// Grows `g` by applying `rules` until saturation or a limit trips.
///
/// Each iteration searches every rule against the frozen graph, then applies
/// all right-hand sides (add + union), then rebuilds. Nodes are never removed.
pub fn run(g: &mut EGraph, rules: &[Rewrite], limits: &RunLimits, ctx: &RuleContext) -> RunOutcome {
    run_observed(g, rules, limits, ctx, &mut |_| {})
}

/// As [`run`], calling `observe` on the rebuilt graph after every iteration.
pub fn run_observed(
    g: &mut EGraph,
    rules: &[Rewrite],
    limits: &RunLimits,
    ctx: &RuleContext,
    observe: &mut dyn FnMut(&EGraph),
) -> RunOutcome {
    if !g.is_clean() {
        g.rebuild();
    }
    let mut state = vec![RuleState::default(); rules.len()];
    let mut iterations = 0;
    let outcome = |g: &EGraph, stop_reason, iterations| RunOutcome {
        stop_reason,
        iterations,
        nodes: g.node_count(),
        classes: g.class_count(),
    };
    loop {
        if iterations >= limits.max_iterations {
            return outcome(g, StopReason::IterationLimit, iterations);
        }
        if g.node_count() >= limits.max_nodes {
            return outcome(g, StopReason::NodeLimit, iterations);
        }
        let ctx = RuleContext {
            root: ctx.root.map(|r| g.find(r)),
            ..*ctx
        };
        let mut index: Vec<Vec<Id>> = vec![Vec::new(); Op::ALL.len()];
        for class in g.classes() {
            let mut seen = [false; Op::ALL.len()];
            for n in class.iter() {
                let op = n.kind.op() as usize;
                if !seen[op] {
                    seen[op] = true;
                    index[op].push(class.id);
                }
            }
        }

        let mut matches: Vec<(usize, Id, Recipe<Id>)> = Vec::new();
        let mut any_banned = false;
        for (ri, rule) in rules.iter().enumerate() {
            let st = &mut state[ri];
            if st.banned_until > iterations {
                any_banned = true;
                continue;
            }
            let threshold = limits
                .match_limit
                .saturating_mul(1 << st.times_banned.min(20));
            let classes: &[Id] = match rule.root_op() {
                Some(op) => &index[op as usize],
                None => &[],
            };
            let mut found: Vec<(usize, Id, Recipe<Id>)> = Vec::new();
            let mut buf = Vec::new();
            let mut over = false;
            for &c in classes {
                buf.clear();
                rule.search_class(g, c, &ctx, &mut buf);
                found.extend(buf.drain(..).map(|r| (ri, c, r)));
                if found.len() > threshold {
                    over = true;
                    break;
                }
            }
            if over {
                let ban = limits
                    .ban_length
                    .saturating_mul(1 << st.times_banned.min(20));
                st.banned_until = iterations + 1 + ban;
                st.times_banned += 1;
                any_banned = true;
                continue;
            }
            matches.extend(found);
        }

        let nodes_before = g.node_count();
        let mut changed = false;
        let mut hit_node_limit = false;
        for (ri, class, recipe) in &matches {
            let id = g.add_recipe(recipe);
            if g.union(*class, id) {
                changed = true;
                if rules[*ri].soundness == super::Soundness::Modulo2W {
                    g.mark_modular(*class);
                }
            }
            if g.node_count() > limits.max_nodes {
                hit_node_limit = true;
                break;
            }
        }
        changed |= g.node_count() != nodes_before;
        g.rebuild();
        iterations += 1;
        observe(g);
        if hit_node_limit {
            return outcome(g, StopReason::NodeLimit, iterations);
        }
        if !changed {
            if any_banned {
                for st in state.iter_mut() {
                    st.banned_until = 0;
                }
                continue;
            }
            return outcome(g, StopReason::Saturated, iterations);
        }
    }
}
