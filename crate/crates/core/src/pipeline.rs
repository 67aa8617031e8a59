// SPDX-License-Identifier: Apache-2.0

//! The phased optimization driver.
//!
//! Each phase repeatedly grows a fresh e-graph from the current design,
//! extracts under the phase's cost model, and keeps the result while the
//! cost strictly decreases. Wide products are first split into half-width
//! products whose optimized results are spliced back in.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::arrays::{build_and_array, ArraySpec};
use crate::cost::{extract_unchecked, Cost, CostError, CostModel, Extraction};
use crate::egraph::{run_observed, EGraph, Phase, Rewrite, RuleContext, RunLimits, StopReason};
use crate::netlist::lower;
use crate::rules::{phase1_rules, phase2_rules, split_product};
use crate::sexp::{parse, serialize};
use crate::term::Term;
use crate::verify::exhaustive_check_netlist;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("phase {phase}: target shape unreachable after {rounds} round(s), {iterations} iteration(s); last stop: {stop_reason}; best cost {cost}")]
    Unreachable {
        phase: Phase,
        rounds: usize,
        iterations: usize,
        stop_reason: StopReason,
        cost: Cost,
    },
    #[error("design is not gate-level: {0}")]
    NotGateLevel(String),
    #[error("sub-design {key} failed verification")]
    SubDesign { key: String },
    #[error("cache: {0}")]
    Cache(String),
}

/// Which rules and model a phase loop uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    One,
    Two,
    /// Both rule sets at once under the phase-two model.
    Merged,
}

impl PhaseKind {
    fn phase(self) -> Phase {
        match self {
            PhaseKind::One => Phase::One,
            PhaseKind::Two | PhaseKind::Merged => Phase::Two,
        }
    }

    fn rules(self) -> Vec<Rewrite> {
        match self {
            PhaseKind::One => phase1_rules(),
            PhaseKind::Two => phase2_rules(),
            PhaseKind::Merged => {
                let mut r = phase1_rules();
                r.extend(phase2_rules());
                r
            }
        }
    }
}

#[derive(Debug)]
pub struct PipelineConfig {
    pub phase1: RunLimits,
    pub phase2: RunLimits,
    /// Divide and conquer fires above these widths.
    pub dnc_threshold_mul: u32,
    pub dnc_threshold_square: u32,
    pub dnc: bool,
    /// Upper bound on rounds per phase.
    pub max_rounds: usize,
    /// Directory of `m<width><s|m>.sexp` sub-designs.
    pub cache_dir: Option<PathBuf>,
    /// Threads for independent sub-designs.
    pub jobs: usize,
    cache: Mutex<HashMap<(u32, bool), Vec<Term>>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            phase1: RunLimits {
                max_iterations: 64,
                max_nodes: 100_000,
                match_limit: 1_000,
                ..RunLimits::default()
            },
            phase2: RunLimits {
                max_iterations: 16,
                max_nodes: 200_000,
                ..RunLimits::default()
            },
            dnc_threshold_mul: 6,
            dnc_threshold_square: 7,
            dnc: true,
            max_rounds: 64,
            cache_dir: None,
            jobs: 1,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl PipelineConfig {
    fn limits(&self, kind: PhaseKind) -> RunLimits {
        match kind {
            PhaseKind::One => self.phase1,
            PhaseKind::Two | PhaseKind::Merged => self.phase2,
        }
    }

    fn dnc_threshold(&self, spec: &ArraySpec) -> u32 {
        if spec.square() {
            self.dnc_threshold_square
        } else {
            self.dnc_threshold_mul
        }
    }
}

/// One grow-and-extract round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundTrace {
    pub iterations: usize,
    pub nodes: usize,
    pub classes: usize,
    pub stop_reason: StopReason,
    pub cost: Cost,
    /// First iteration whose graph already held a design of `cost`.
    pub converged_at: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseReport {
    pub phase: PhaseKind,
    pub rounds: Vec<RoundTrace>,
    pub iterations: usize,
    /// Iterations until the final design was first extractable: all
    /// accepted rounds but the last, plus that round's `converged_at`.
    pub iterations_to_converge: usize,
    pub nodes: usize,
    pub stop_reason: StopReason,
    /// Cost of the input, then of each accepted round.
    pub cost_trajectory: Vec<Cost>,
    pub cost_table: BTreeMap<String, (u64, u64)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubDesignReport {
    pub key: String,
    pub shift: u32,
    pub from_cache: bool,
    pub report: Option<Box<RunReport>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub width: u32,
    pub square: bool,
    pub divide_and_conquer: bool,
    pub sub_designs: Vec<SubDesignReport>,
    pub phases: Vec<PhaseReport>,
    pub iterations: usize,
    pub iterations_to_converge: usize,
    pub nodes: usize,
    pub stop_reason: Option<StopReason>,
    pub delay: u32,
    pub gates: usize,
    pub wall_ms: u64,
}

/// Runs one phase loop on `expr` for an output of `output_width` bits.
///
/// Returns the best design and its cost even when that cost is still
/// penalized; callers decide whether that is an error.
pub fn run_phase(
    expr: &Term,
    kind: PhaseKind,
    output_width: u32,
    config: &PipelineConfig,
) -> Result<(Term, Cost, PhaseReport), PipelineError> {
    let model = CostModel::new(kind.phase());
    let rules = kind.rules();
    let limits = config.limits(kind);
    let mut best = expr.clone();
    let mut best_cost = model.term_cost(expr)?;
    let mut report = PhaseReport {
        phase: kind,
        rounds: Vec::new(),
        iterations: 0,
        iterations_to_converge: 0,
        nodes: 0,
        stop_reason: StopReason::Saturated,
        cost_trajectory: vec![best_cost],
        cost_table: model.describe(),
    };
    for _ in 0..config.max_rounds.max(1) {
        let (mut g, root) = EGraph::from_term(&best);
        let ctx = RuleContext {
            root: Some(root),
            output_width,
        };
        let mut seen: Vec<Cost> = Vec::new();
        let mut failure = None;
        let outcome = run_observed(
            &mut g,
            &rules,
            &limits,
            &ctx,
            &mut |g| match Extraction::compute(g, root, &model) {
                Ok(ex) => seen.push(ex.root_cost()),
                Err(e) => failure = Some(e),
            },
        );
        if let Some(e) = failure {
            return Err(e.into());
        }
        let (candidate, cost) = extract_unchecked(&g, root, &model)?;
        let converged_at = seen.iter().position(|c| *c <= cost).map_or(0, |i| i + 1);
        let accepted = cost < best_cost;
        report.iterations += outcome.iterations;
        report.nodes = report.nodes.max(outcome.nodes);
        report.stop_reason = outcome.stop_reason;
        report.rounds.push(RoundTrace {
            iterations: outcome.iterations,
            nodes: outcome.nodes,
            classes: outcome.classes,
            stop_reason: outcome.stop_reason,
            cost,
            converged_at,
            accepted,
        });
        if !accepted {
            break;
        }
        best = candidate;
        best_cost = cost;
        report.cost_trajectory.push(cost);
    }
    let accepted: Vec<&RoundTrace> = report.rounds.iter().filter(|r| r.accepted).collect();
    if let Some((last, rest)) = accepted.split_last() {
        report.iterations_to_converge =
            rest.iter().map(|r| r.iterations).sum::<usize>() + last.converged_at;
    }
    Ok((best, best_cost, report))
}

fn unreachable(kind: PhaseKind, cost: Cost, report: &PhaseReport) -> PipelineError {
    PipelineError::Unreachable {
        phase: kind.phase(),
        rounds: report.rounds.len(),
        iterations: report.iterations,
        stop_reason: report.stop_reason,
        cost,
    }
}

/// Unpacks an output row into exactly `width` bits, LSB first.
pub fn unpack(row: &Term, width: u32) -> Vec<Term> {
    let slots: Vec<Term> = match row.kind() {
        crate::term::NodeKind::Row => row.children().iter().rev().cloned().collect(),
        _ => vec![row.clone()],
    };
    (0..width as usize)
        .map(|i| slots.get(i).cloned().unwrap_or_else(Term::zero))
        .collect()
}

/// Packs output bits (LSB first) into the output row.
pub fn pack(bits: &[Term]) -> Term {
    Term::row(bits.iter().rev().cloned().collect())
}

/// Optimizes a product; returns `2n` gate-level output bits, LSB first.
pub fn optimize(
    spec: &ArraySpec,
    config: &PipelineConfig,
) -> Result<(Vec<Term>, RunReport), PipelineError> {
    let start = Instant::now();
    let w = spec.output_width();
    let mut report = RunReport {
        width: spec.width(),
        square: spec.square(),
        divide_and_conquer: false,
        sub_designs: Vec::new(),
        phases: Vec::new(),
        iterations: 0,
        iterations_to_converge: 0,
        nodes: 0,
        stop_reason: None,
        delay: 0,
        gates: 0,
        wall_ms: 0,
    };
    let initial = if config.dnc && spec.width() > config.dnc_threshold(spec) {
        report.divide_and_conquer = true;
        let (t, subs) = split_and_splice(spec, config)?;
        report.sub_designs = subs;
        t
    } else {
        build_and_array(spec)
    };
    let mut design = initial;
    for kind in [PhaseKind::One, PhaseKind::Two] {
        let (t, cost, phase) = run_phase(&design, kind, w, config)?;
        report.iterations += phase.iterations;
        report.iterations_to_converge += phase.iterations_to_converge;
        report.nodes = report.nodes.max(phase.nodes);
        report.stop_reason = Some(phase.stop_reason);
        let penalized = cost.delay >= crate::cost::PENALTY;
        if penalized {
            return Err(unreachable(kind, cost, &phase));
        }
        report.phases.push(phase);
        design = t;
    }
    let bits = unpack(&design, w);
    if let Some(b) = bits.iter().find(|b| !b.is_gate_level()) {
        return Err(PipelineError::NotGateLevel(serialize(b)));
    }
    let nl = lower(&bits, spec).map_err(|e| PipelineError::NotGateLevel(e.to_string()))?;
    let stats = nl.stats();
    report.delay = stats.depth;
    report.gates = stats.total_gates;
    report.wall_ms = start.elapsed().as_millis() as u64;
    Ok((bits, report))
}

/// Optimizes the product without the phase split, for comparison.
pub fn optimize_merged(
    spec: &ArraySpec,
    config: &PipelineConfig,
) -> Result<(Term, Cost, PhaseReport), PipelineError> {
    let (t, cost, report) = run_phase(
        &build_and_array(spec),
        PhaseKind::Merged,
        spec.output_width(),
        config,
    )?;
    if cost.delay >= crate::cost::PENALTY {
        return Err(unreachable(PhaseKind::Merged, cost, &report));
    }
    Ok((t, cost, report))
}

/// Output bits of a sub-design and, unless cached, its run report.
type Solved = Result<(Vec<Term>, Option<RunReport>), PipelineError>;

/// Half-width sub-designs placed as shifted rows of one sum.
fn split_and_splice(
    spec: &ArraySpec,
    config: &PipelineConfig,
) -> Result<(Term, Vec<SubDesignReport>), PipelineError> {
    let parts = split_product(spec);
    let mut unique: Vec<ArraySpec> = Vec::new();
    for p in &parts {
        if !unique.contains(&p.spec) {
            unique.push(p.spec);
        }
    }
    let solve = |s: &ArraySpec| sub_design(s, config);
    let results: Vec<Solved> = if config.jobs > 1 && unique.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = unique
                .iter()
                .map(|s| scope.spawn(move || solve(s)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker"))
                .collect()
        })
    } else {
        unique.iter().map(solve).collect()
    };
    let mut solved: HashMap<ArraySpec, (Vec<Term>, Option<RunReport>)> = HashMap::new();
    for (s, r) in unique.iter().zip(results) {
        solved.insert(*s, r?);
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for part in &parts {
        let (bits, sub_report) = &solved[&part.spec];
        let mut slots: Vec<Term> = bits
            .iter()
            .rev()
            .map(|b| part.rename(b, spec.width()))
            .collect();
        slots.extend((0..part.shift).map(|_| Term::zero()));
        rows.push(Term::row(slots));
        reports.push(SubDesignReport {
            key: part.spec.key(),
            shift: part.shift,
            from_cache: sub_report.is_none(),
            report: sub_report.clone().map(Box::new),
        });
    }
    Ok((Term::sum(rows), reports))
}

fn cache_path(config: &PipelineConfig, spec: &ArraySpec) -> Option<PathBuf> {
    config
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("{}.sexp", spec.key())))
}

fn verified(bits: &[Term], spec: &ArraySpec) -> bool {
    lower(bits, spec)
        .map(|nl| exhaustive_check_netlist(&nl, spec, 1).pass)
        .unwrap_or(false)
}

/// Output bits of a sub-product, from cache or freshly optimized.
/// The report is `None` for cache hits.
fn sub_design(
    spec: &ArraySpec,
    config: &PipelineConfig,
) -> Result<(Vec<Term>, Option<RunReport>), PipelineError> {
    let key = (spec.width(), spec.square());
    if let Some(bits) = config.cache.lock().expect("cache lock").get(&key) {
        return Ok((bits.clone(), None));
    }
    if let Some(path) = cache_path(config, spec) {
        if let Ok(text) = std::fs::read_to_string(&path) {
            let loaded = parse(&text)
                .ok()
                .map(|row| unpack(&row, spec.output_width()))
                .filter(|bits| verified(bits, spec));
            if let Some(bits) = loaded {
                config
                    .cache
                    .lock()
                    .expect("cache lock")
                    .insert(key, bits.clone());
                return Ok((bits, None));
            }
        }
    }
    let (bits, report) = optimize(spec, config)?;
    if !verified(&bits, spec) {
        return Err(PipelineError::SubDesign { key: spec.key() });
    }
    if let Some(path) = cache_path(config, spec) {
        let row = pack(&bits);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::Cache(e.to_string()))?;
        }
        std::fs::write(&path, serialize(&row) + "\n")
            .map_err(|e| PipelineError::Cache(format!("{}: {e}", path.display())))?;
    }
    config
        .cache
        .lock()
        .expect("cache lock")
        .insert(key, bits.clone());
    Ok((bits, Some(report)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::exhaustive_check;

    #[test]
    fn two_bit_multiplier_end_to_end() {
        let spec = ArraySpec::multiplier(2).unwrap();
        let (bits, report) = optimize(&spec, &PipelineConfig::default()).unwrap();
        assert_eq!(bits.len(), 4);
        assert!(exhaustive_check(&bits, &spec).unwrap().pass);
        assert_eq!(report.phases.len(), 2);
    }

    #[test]
    fn trajectories_strictly_decrease() {
        let spec = ArraySpec::squarer(3).unwrap();
        let (_, report) = optimize(&spec, &PipelineConfig::default()).unwrap();
        for p in &report.phases {
            assert!(p.cost_trajectory.windows(2).all(|w| w[1] < w[0]), "{p:?}");
        }
    }
}
