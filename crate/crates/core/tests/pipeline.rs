// SPDX-License-Identifier: Apache-2.0

use mulsynth::arrays::{build_and_array, ArraySpec};
use mulsynth::cost::PENALTY;
use mulsynth::egraph::{run, EGraph, Phase, Rewrite, RuleContext, RunLimits};
use mulsynth::netlist::lower;
use mulsynth::pipeline::{optimize, pack, run_phase, PhaseKind, PipelineConfig};
use mulsynth::rules::phase1_rules;
use mulsynth::sexp::{parse, serialize};
use mulsynth::term::{eval, Env, NodeKind, Term};
use mulsynth::verify::{eclass_consistency, exhaustive_check_netlist};

fn two_bit_envs() -> Vec<Env> {
    (0..16)
        .map(|x| Env::new().with_p(x & 3, 2).with_q(x >> 2, 2))
        .collect()
}

fn product(env: &Env, n: u32) -> u128 {
    let word = |v: fn(u16) -> mulsynth::term::Var| {
        (0..n)
            .map(|i| u128::from(env.get(v(i as u16)).unwrap()) << i)
            .sum::<u128>()
    };
    word(mulsynth::term::Var::p) * word(mulsynth::term::Var::q)
}

#[test]
fn phase_one_on_two_bit_array_yields_four_bit_slots() {
    let spec = ArraySpec::multiplier(2).unwrap();
    let config = PipelineConfig::default();
    let (t, cost, _) = run_phase(&build_and_array(&spec), PhaseKind::One, 4, &config).unwrap();
    assert_eq!(t.kind(), NodeKind::Row);
    assert!(t.children().len() <= 4);
    assert!(t.children().iter().all(|c| c.kind().is_bit_valued()));
    assert!(cost.delay < PENALTY);
    for env in two_bit_envs() {
        assert_eq!(eval(&t, &env).unwrap() % 16, product(&env, 2));
    }
}

#[test]
fn optimal_input_stops_after_one_round() {
    let spec = ArraySpec::multiplier(2).unwrap();
    let config = PipelineConfig::default();
    let (bits, _) = optimize(&spec, &config).unwrap();
    let (_, _, report) = run_phase(&pack(&bits), PhaseKind::Two, 4, &config).unwrap();
    assert_eq!(report.rounds.len(), 1);
    assert!(!report.rounds[0].accepted);
    assert_eq!(report.cost_trajectory.len(), 1);
}

#[test]
fn phase_one_graph_is_consistent() {
    let spec = ArraySpec::multiplier(2).unwrap();
    let (mut g, root) = EGraph::from_term(&build_and_array(&spec));
    let ctx = RuleContext {
        root: Some(root),
        output_width: 4,
    };
    run(&mut g, &phase1_rules(), &RunLimits::default(), &ctx);
    assert!(eclass_consistency(&g, &two_bit_envs(), 4).is_ok());
}

#[test]
fn unsound_rule_breaks_consistency() {
    let bad = Rewrite::static_rule("bad-add", Phase::One, "(add ?a ?b)", "(row ?a ?b)").unwrap();
    let t = parse("(add (and p0 q0) (and p1 q1))").unwrap();
    let (mut g, _) = EGraph::from_term(&t);
    run(
        &mut g,
        &[bad],
        &RunLimits::default(),
        &RuleContext::default(),
    );
    assert!(eclass_consistency(&g, &two_bit_envs(), 128).is_err());
}

#[test]
fn four_bit_multiplier_passes_all_inputs() {
    let spec = ArraySpec::multiplier(4).unwrap();
    let (bits, report) = optimize(&spec, &PipelineConfig::default()).unwrap();
    let verdict = exhaustive_check_netlist(&lower(&bits, &spec).unwrap(), &spec, 2);
    assert!(verdict.pass);
    assert_eq!(verdict.cases_checked, 256);
    assert_eq!(
        u64::from(report.delay),
        lower(&bits, &spec).unwrap().stats().depth as u64
    );
}

#[test]
fn sub_designs_are_cached_and_rechecked() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ArraySpec::multiplier(4).unwrap();
    let config = || {
        let mut c = PipelineConfig::default();
        c.dnc_threshold_mul = 2;
        c.cache_dir = Some(dir.path().to_path_buf());
        c
    };
    let (_, first) = optimize(&spec, &config()).unwrap();
    assert!(first.divide_and_conquer);
    assert!(!first.sub_designs[0].from_cache);
    let file = dir.path().join("m2m.sexp");
    let stored = std::fs::read_to_string(&file).unwrap();
    assert_eq!(parse(&stored).unwrap().kind(), NodeKind::Row);

    let (bits, second) = optimize(&spec, &config()).unwrap();
    assert!(second.sub_designs.iter().all(|s| s.from_cache));
    assert!(exhaustive_check_netlist(&lower(&bits, &spec).unwrap(), &spec, 1).pass);

    // A wrong cached design is discarded and re-derived.
    let wrong = Term::row(vec![Term::zero(), Term::zero(), Term::zero(), Term::p(0)]);
    std::fs::write(&file, serialize(&wrong)).unwrap();
    let (bits, third) = optimize(&spec, &config()).unwrap();
    assert!(!third.sub_designs[0].from_cache);
    assert!(exhaustive_check_netlist(&lower(&bits, &spec).unwrap(), &spec, 1).pass);
    assert_ne!(
        std::fs::read_to_string(&file).unwrap().trim(),
        serialize(&wrong)
    );
}

#[test]
fn report_serializes_with_stable_keys() {
    let spec = ArraySpec::squarer(2).unwrap();
    let (_, report) = optimize(&spec, &PipelineConfig::default()).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    for key in [
        "phases",
        "iterations",
        "nodes",
        "stop_reason",
        "delay",
        "gates",
        "wall_ms",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}
