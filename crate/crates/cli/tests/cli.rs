// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use mulsynth::sexp::parse;
use mulsynth::term::{eval, Env};

fn mulsynth(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mulsynth"))
        .args(args)
        .current_dir(dir)
        .env_remove("OPTIMULT_CACHE")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Printed 3-bit squarer bits o5..o0 as one row.
const PRINTED_SQUARE3: &str =
    "(row (and p2 p1) (and (or p0 (not p1)) p2) (and p0 (xor p2 p1)) (and p1 (not p0)) 0 p0)";

#[test]
fn synth_square3_matches_the_printed_formulas() {
    let dir = tempfile::tempdir().unwrap();
    let o = mulsynth(
        &[
            "synth", "--width", "3", "--square", "--out", "s3.v", "--sexp", "s3.sexp", "--report",
            "s3.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let verilog = std::fs::read_to_string(dir.path().join("s3.v")).unwrap();
    assert!(verilog.starts_with("module m3s (p, r);"));
    assert!(verilog.contains("assign r[1] = 1'b0;"));
    assert!(verilog.contains("assign r[0] = p[0];"));

    let got = parse(&std::fs::read_to_string(dir.path().join("s3.sexp")).unwrap()).unwrap();
    let want = parse(PRINTED_SQUARE3).unwrap();
    for x in 0..8 {
        let env = Env::new().with_p(x, 3);
        for (g, w) in got.children().iter().zip(want.children()) {
            assert_eq!(eval(g, &env).unwrap(), eval(w, &env).unwrap(), "p = {x}");
        }
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s3.json")).unwrap())
            .unwrap();
    assert_eq!(report["verification"]["pass"], true);
    assert_eq!(report["report"]["delay"], 3);
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for tag in ["a", "b"] {
        let o = mulsynth(
            &[
                "synth",
                "--width",
                "2",
                "--out",
                &format!("{tag}.v"),
                "--report",
                &format!("{tag}.json"),
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
    }
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
    assert_eq!(read("a.v"), read("b.v"));
    let strip = |f: &str| {
        let mut v: serde_json::Value = serde_json::from_str(&read(f)).unwrap();
        v["report"]["wall_ms"] = 0.into();
        v
    };
    assert_eq!(strip("a.json"), strip("b.json"));
}

#[test]
fn width_one_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&mulsynth(
            &["synth", "--width", "1", "--out", "x.v"],
            dir.path()
        )),
        2
    );
    assert_eq!(code(&mulsynth(&["synth"], dir.path())), 2);
    assert_eq!(code(&mulsynth(&[], dir.path())), 2);
}

#[test]
fn eight_bit_square_without_dnc_is_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let o = mulsynth(
        &[
            "synth", "--width", "8", "--square", "--no-dnc", "--out", "s8.v",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("target shape unreachable"));
    assert!(!dir.path().join("s8.v").exists());
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("good.sexp"), PRINTED_SQUARE3).unwrap();
    let ok = mulsynth(
        &[
            "verify",
            "--width",
            "3",
            "--square",
            "--design",
            "good.sexp",
        ],
        dir.path(),
    );
    assert_eq!(code(&ok), 0);

    // o3 with its And replaced by Or.
    let bad = PRINTED_SQUARE3.replace("(and p0 (xor p2 p1))", "(or p0 (xor p2 p1))");
    std::fs::write(dir.path().join("bad.sexp"), bad).unwrap();
    let o = mulsynth(
        &["verify", "--width", "3", "--square", "--design", "bad.sexp"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], false);
    assert_eq!(v["counterexample"]["p"], 1);
    assert_eq!(v["counterexample"]["expected"], 1);
    assert_eq!(v["counterexample"]["actual"], 9);

    let missing = mulsynth(
        &[
            "verify",
            "--width",
            "3",
            "--square",
            "--design",
            "nope.sexp",
        ],
        dir.path(),
    );
    assert_eq!(code(&missing), 2);
}

#[test]
fn rules_listing_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let list = mulsynth(&["rules"], dir.path());
    assert_eq!(code(&list), 0);
    let text = String::from_utf8_lossy(&list.stdout);
    assert!(!text.contains("sound:"));
    let names: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    for table in [
        "place-half-adder",
        "place-full-adder",
        "add-same",
        "row-add",
        "sum-of-rows",
        "sum-of-bits",
        "row-of-rows",
        "repeated-bit",
        "divide-and-conquer",
        "half-adder-sum",
        "half-adder-carry",
        "full-adder-sum",
        "full-adder-carry",
        "sop-xor",
        "demorgan-and",
        "demorgan-or",
        "distrib-and-or",
        "distrib-and-xor",
        "xor-and",
        "or-not-and",
    ] {
        assert!(names.contains(&table), "missing {table}");
    }
    let check = mulsynth(&["rules", "--check"], dir.path());
    assert_eq!(code(&check), 0);
    assert!(!String::from_utf8_lossy(&check.stdout).contains("UNSOUND"));
}
