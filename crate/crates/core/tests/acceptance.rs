// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p mulsynth --test acceptance -- --nocapture` to see
//! the lines. Tolerances are pinned below; every criterion is exact.

use std::time::Instant;

use mulsynth::arrays::ArraySpec;
use mulsynth::cost::{Cost, CostModel};
use mulsynth::netlist::lower;
use mulsynth::pipeline::{optimize, optimize_merged, PipelineConfig, PipelineError, RunReport};
use mulsynth::rules::{all_rules, soundness_check};
use mulsynth::term::{eval, Env, NodeKind, Term};
use mulsynth::verify::{check_ta_pa_fixtures, exhaustive_check_netlist};

/// Depth of the printed 3-bit squarer formulas: o4 = (p0 | ~p1) & p2.
const PRINTED_SQUARE3_DEPTH: u32 = 3;
/// Rule soundness suite time budget, seconds.
const SOUNDNESS_BUDGET_S: f64 = 60.0;
/// HA-chain MSB and TA low-bit delays, unit-delay gates.
const HA_CHAIN_DELAY: u64 = 3;
const TA_LOW_DELAY: u64 = 2;

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(lines: &[Line]) {
    println!();
    for l in lines {
        println!(
            "[{}] {}: {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    println!();
}

/// Integer product oracle over every input; `None` means the design agrees.
fn first_wrong_product(bits: &[Term], spec: &ArraySpec) -> Option<(u64, u64)> {
    let n = spec.width();
    let qs = if spec.square() { 1 } else { 1u64 << n };
    for q in 0..qs {
        for p in 0..1u64 << n {
            let (env, want) = if spec.square() {
                (Env::new().with_p(p, n), p as u128 * p as u128)
            } else {
                (Env::new().with_p(p, n).with_q(q, n), p as u128 * q as u128)
            };
            let got: u128 = bits
                .iter()
                .enumerate()
                .map(|(i, b)| eval(b, &env).expect("bound") << i)
                .sum();
            if got != want {
                return Some((p, q));
            }
        }
    }
    None
}

fn gate_level(t: &Term) -> bool {
    matches!(
        t.kind(),
        NodeKind::And
            | NodeKind::Or
            | NodeKind::Xor
            | NodeKind::Not
            | NodeKind::Var(_)
            | NodeKind::Const(_)
    ) && t.children().iter().all(gate_level)
}

fn trajectories_decrease(r: &RunReport) -> bool {
    let own = r
        .phases
        .iter()
        .all(|p| p.cost_trajectory.windows(2).all(|w| w[1] < w[0]));
    own && r
        .sub_designs
        .iter()
        .filter_map(|s| s.report.as_deref())
        .all(trajectories_decrease)
}

/// Printed 3-bit squarer output bits, LSB first.
fn printed_square3(p: [bool; 3]) -> [bool; 6] {
    let [p0, p1, p2] = p;
    [
        p0,
        false,
        p1 && !p0,
        p0 && (p2 ^ p1),
        (p0 || !p1) && p2,
        p2 && p1,
    ]
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    let mut reports: Vec<(String, RunReport)> = Vec::new();

    // Functional correctness: 2..5 multipliers, 2..6 squarers.
    let mut designs: Vec<ArraySpec> = (2..=5).map(|n| ArraySpec::multiplier(n).unwrap()).collect();
    designs.extend((2..=6).map(|n| ArraySpec::squarer(n).unwrap()));
    let mut failures = Vec::new();
    let mut square3 = None;
    let start = Instant::now();
    for spec in &designs {
        let config = PipelineConfig::default();
        match optimize(spec, &config) {
            Ok((bits, r)) => {
                let pure =
                    bits.len() == spec.output_width() as usize && bits.iter().all(gate_level);
                let oracle = first_wrong_product(&bits, spec);
                let checked = lower(&bits, spec)
                    .map(|nl| exhaustive_check_netlist(&nl, spec, 1).pass)
                    .unwrap_or(false);
                if !pure || oracle.is_some() || !checked {
                    failures.push(format!("{} wrong at {oracle:?}", spec.key()));
                }
                if spec.width() == 3 && spec.square() {
                    square3 = Some(bits);
                }
                reports.push((spec.key(), r));
            }
            Err(e) => failures.push(format!("{}: {e}", spec.key())),
        }
    }
    lines.push(Line {
        name: "functional correctness (2-5 mult, 2-6 square, exact)",
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "{} designs exhaustively equal to the product in {:.1}s",
                designs.len(),
                start.elapsed().as_secs_f64()
            )
        } else {
            failures.join("; ")
        },
    });

    // Divide-and-conquer reach on the 8-bit squarer.
    let spec8 = ArraySpec::squarer(8).unwrap();
    let with = optimize(&spec8, &PipelineConfig::default());
    let with_ok = match &with {
        Ok((bits, r)) => {
            reports.push((format!("{} (dnc)", spec8.key()), r.clone()));
            r.divide_and_conquer && first_wrong_product(bits, &spec8).is_none()
        }
        Err(_) => false,
    };
    let mut no_dnc = PipelineConfig::default();
    no_dnc.dnc = false;
    let without = optimize(&spec8, &no_dnc);
    let without_unreachable = matches!(&without, Err(e @ PipelineError::Unreachable { .. }) if e.to_string().contains("target shape unreachable"));
    lines.push(Line {
        name: "divide-and-conquer reach (8-bit square)",
        pass: with_ok && without_unreachable,
        detail: format!(
            "with dnc: {}; without: {}",
            match &with {
                Ok((_, r)) => format!("256/256 correct, delay {}, {} gates", r.delay, r.gates),
                Err(e) => e.to_string(),
            },
            match &without {
                Ok(_) => "reached the target shape".to_string(),
                Err(e) => e.to_string(),
            }
        ),
    });

    // 3-bit squarer against the printed formulas.
    let (sq3_pass, sq3_detail) = match &square3 {
        Some(bits) => {
            let spec = ArraySpec::squarer(3).unwrap();
            let mut wrong = Vec::new();
            for x in 0..8u64 {
                let env = Env::new().with_p(x, 3);
                let want = printed_square3([x & 1 == 1, x >> 1 & 1 == 1, x >> 2 & 1 == 1]);
                for (i, b) in bits.iter().enumerate() {
                    if (eval(b, &env).unwrap() == 1) != want[i] && !wrong.contains(&i) {
                        wrong.push(i);
                    }
                }
            }
            let depth = lower(bits, &spec)
                .map(|nl| nl.stats().depth)
                .unwrap_or(u32::MAX);
            (
                wrong.is_empty() && depth <= PRINTED_SQUARE3_DEPTH,
                format!("differing bits {wrong:?}, depth {depth} (bound {PRINTED_SQUARE3_DEPTH})"),
            )
        }
        None => (false, "no 3-bit squarer design".to_string()),
    };
    lines.push(Line {
        name: "3-bit squarer fixture",
        pass: sq3_pass,
        detail: sq3_detail,
    });

    // TA/PA formulas over the 64 operand pairs.
    let fixtures = check_ta_pa_fixtures();
    let verdict = |name: &str| fixtures.iter().find(|f| f.name == name).expect("fixture");
    let ta = verdict("triangle-adder");
    let ta_free = verdict("triangle-adder-free-bits");
    let pa = verdict("p-adder");
    let pa_fac = verdict("p-adder-printed-msb");
    lines.push(Line {
        name: "TA/PA fixtures",
        pass: ta.pass && pa.pass && !ta_free.pass && ta.cases_checked == 64 && pa.cases_checked == 64,
        detail: format!(
            "TA correlated {} ({} cases), PA {} ({} cases), TA free bits {} at {:?}; PA[3] as K*FAc {} at {:?}",
            ta.pass,
            ta.cases_checked,
            pa.pass,
            pa.cases_checked,
            ta_free.pass,
            ta_free.counterexample,
            pa_fac.pass,
            pa_fac.counterexample
        ),
    });

    // Rule soundness.
    let start = Instant::now();
    let results: Vec<_> = all_rules().iter().map(soundness_check).collect();
    let secs = start.elapsed().as_secs_f64();
    let unsound: Vec<&str> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.rule.as_str())
        .collect();
    lines.push(Line {
        name: "rewrite soundness suite",
        pass: unsound.is_empty() && secs < SOUNDNESS_BUDGET_S,
        detail: format!(
            "{} rules, {} cases, {:.2}s (budget {SOUNDNESS_BUDGET_S}s), unsound {unsound:?}",
            results.len(),
            results.iter().map(|r| r.cases).sum::<u64>(),
            secs
        ),
    });

    // Unit-delay calibration.
    let zero = Cost::default();
    let mut calibration = Vec::new();
    for model in [CostModel::phase_one(), CostModel::phase_two()] {
        let pp = model
            .node_cost(NodeKind::And, &[zero, zero], true, false)
            .unwrap();
        let xor = model
            .node_cost(NodeKind::Xor, &[pp, pp], true, false)
            .unwrap();
        calibration.push(("ta-low", model.phase, xor.delay, TA_LOW_DELAY));
    }
    let m1 = CostModel::phase_one();
    let pp = m1
        .node_cost(NodeKind::And, &[zero, zero], true, false)
        .unwrap();
    let hac1 = m1
        .node_cost(NodeKind::HaCarry, &[pp, pp], true, false)
        .unwrap();
    let hac2 = m1
        .node_cost(NodeKind::HaCarry, &[hac1, pp], true, false)
        .unwrap();
    calibration.push(("ha-chain", m1.phase, hac2.delay, HA_CHAIN_DELAY));
    lines.push(Line {
        name: "cost-model calibration",
        pass: calibration.iter().all(|(_, _, got, want)| got == want),
        detail: calibration
            .iter()
            .map(|(n, ph, got, want)| format!("{n} phase {ph}: {got} (want {want})"))
            .collect::<Vec<_>>()
            .join(", "),
    });

    // Phase loop: decreasing trajectories; phased vs merged convergence.
    let decreasing: Vec<&str> = reports
        .iter()
        .filter(|(_, r)| !trajectories_decrease(r))
        .map(|(k, _)| k.as_str())
        .collect();
    let spec3 = ArraySpec::squarer(3).unwrap();
    let mut same = PipelineConfig::default();
    same.phase2 = same.phase1;
    let phased = optimize(&spec3, &same);
    let merged = optimize_merged(&spec3, &same);
    let (loop_pass, loop_detail) = match (&phased, &merged) {
        (Ok((_, p)), Ok((_, _, m))) => (
            decreasing.is_empty() && p.iterations_to_converge < m.iterations_to_converge,
            format!(
                "non-decreasing runs {decreasing:?}; 3-bit square iterations to converge: two-phase {}, merged {} (totals incl. non-improving rounds: {}, {})",
                p.iterations_to_converge, m.iterations_to_converge, p.iterations, m.iterations
            ),
        ),
        (p, m) => (
            false,
            format!("two-phase {:?}, merged {:?}", p.as_ref().err(), m.as_ref().err().map(|e| e.to_string())),
        ),
    };
    lines.push(Line {
        name: "phase-loop property",
        pass: loop_pass,
        detail: loop_detail,
    });

    report(&lines);
    let failed: Vec<&str> = lines.iter().filter(|l| !l.pass).map(|l| l.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
