// SPDX-License-Identifier: Apache-2.0

//! `mulsynth`: synthesize, verify and inspect multiplier designs.
//!
//! Exit codes: 0 verified success, 1 verification or soundness failure,
//! 2 usage or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mulsynth::arrays::ArraySpec;
use mulsynth::netlist::lower;
use mulsynth::pipeline::{optimize, pack, unpack, PipelineConfig, PipelineError};
use mulsynth::rules::{all_rules, soundness_check};
use mulsynth::sexp::{parse, serialize};
use mulsynth::term::NodeKind;
use mulsynth::verify::{exhaustive_check_netlist, MAX_EXHAUSTIVE_BITS};

const VERIFIED: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mulsynth",
    version,
    about = "Multiplier and squarer synthesis by phased e-graph rewriting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a product and write it as a Verilog netlist.
    Synth(SynthArgs),
    /// Exhaustively check a serialized design against the exact product.
    Verify(VerifyArgs),
    /// List the rewrite rules, optionally checking each for soundness.
    Rules(RulesArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Operand width in bits (2 to 64).
    #[arg(long)]
    width: u32,
    /// Square a single operand instead of multiplying two.
    #[arg(long)]
    square: bool,
    /// Iteration limit per phase-one round.
    #[arg(long)]
    phase1_iters: Option<usize>,
    /// Iteration limit per phase-two round.
    #[arg(long)]
    phase2_iters: Option<usize>,
    /// Node limit per round, both phases.
    #[arg(long)]
    node_limit: Option<usize>,
    /// Never split the product into half-width sub-designs.
    #[arg(long)]
    no_dnc: bool,
    /// Directory caching optimized sub-designs.
    #[arg(long, env = "OPTIMULT_CACHE")]
    cache: Option<PathBuf>,
    /// Verilog output file.
    #[arg(long)]
    out: PathBuf,
    /// JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write the design as an s-expression output row.
    #[arg(long)]
    sexp: Option<PathBuf>,
    /// Verilog module name; defaults to `m<width><s|m>`.
    #[arg(long)]
    module: Option<String>,
    /// Skip the exhaustive check.
    #[arg(long)]
    skip_verify: bool,
    /// Worker threads for sub-designs and verification.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    width: u32,
    #[arg(long)]
    square: bool,
    /// Design file holding the output row `(row r[2n-1] ... r[0])`.
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct RulesArgs {
    /// Run the soundness check on every rule.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { VERIFIED });
        }
    };
    ExitCode::from(match cli.command {
        Command::Synth(a) => synth(a),
        Command::Verify(a) => verify(a),
        Command::Rules(a) => rules(a),
    })
}

fn usage(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    USAGE
}

fn spec_of(width: u32, square: bool) -> Result<ArraySpec, u8> {
    ArraySpec::new(width, square).map_err(usage)
}

fn checkable(spec: &ArraySpec) -> bool {
    let bits = if spec.square() {
        spec.width()
    } else {
        2 * spec.width()
    };
    bits <= MAX_EXHAUSTIVE_BITS
}

fn write(path: &Path, text: &str) -> Result<(), u8> {
    std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn synth(a: SynthArgs) -> u8 {
    match synth_inner(a) {
        Ok(code) | Err(code) => code,
    }
}

fn synth_inner(a: SynthArgs) -> Result<u8, u8> {
    let spec = spec_of(a.width, a.square)?;
    let module = a.module.clone().unwrap_or_else(|| spec.key());
    let mut config = PipelineConfig::default();
    if let Some(i) = a.phase1_iters {
        config.phase1.max_iterations = i;
    }
    if let Some(i) = a.phase2_iters {
        config.phase2.max_iterations = i;
    }
    if let Some(k) = a.node_limit {
        config.phase1.max_nodes = k;
        config.phase2.max_nodes = k;
    }
    config.dnc = !a.no_dnc;
    config.cache_dir = a.cache.clone();
    config.jobs = a.jobs.max(1);

    let (bits, report) = match optimize(&spec, &config) {
        Ok(r) => r,
        Err(e @ PipelineError::Cache(_)) => return Err(usage(e)),
        Err(e) => {
            eprintln!("error: {e}");
            return Err(FAILED);
        }
    };
    let nl = match lower(&bits, &spec) {
        Ok(nl) => nl,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(FAILED);
        }
    };
    let verilog = nl.to_verilog(&module).map_err(usage)?;
    let verdict = if a.skip_verify || !checkable(&spec) {
        None
    } else {
        Some(exhaustive_check_netlist(&nl, &spec, config.jobs))
    };

    write(&a.out, &verilog)?;
    if let Some(path) = &a.sexp {
        write(path, &(serialize(&pack(&bits)) + "\n"))?;
    }
    if let Some(path) = &a.report {
        let doc = json!({
            "report": report,
            "netlist": nl.stats(),
            "verification": verdict,
        });
        write(
            path,
            &(serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"),
        )?;
    }

    let status = match &verdict {
        Some(v) if v.pass => format!("verified over {} inputs", v.cases_checked),
        Some(_) => "VERIFICATION FAILED".to_string(),
        None => "not verified".to_string(),
    };
    eprintln!(
        "{}: delay {}, {} gates, {} iterations; {status}",
        spec.key(),
        report.delay,
        report.gates,
        report.iterations
    );
    match verdict {
        Some(v) if !v.pass => {
            println!("{}", serde_json::to_string(&v).expect("verdict serializes"));
            Ok(FAILED)
        }
        _ => Ok(VERIFIED),
    }
}

fn verify(a: VerifyArgs) -> u8 {
    let spec = match spec_of(a.width, a.square) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if !checkable(&spec) {
        return usage(format!("{} is too wide to check exhaustively", spec.key()));
    }
    let text = match std::fs::read_to_string(&a.design) {
        Ok(t) => t,
        Err(e) => return usage(format!("{}: {e}", a.design.display())),
    };
    let row = match parse(&text) {
        Ok(t) => t,
        Err(e) => return usage(format!("{}: {e}", a.design.display())),
    };
    let w = spec.output_width();
    if row.kind() == NodeKind::Row && row.children().len() > w as usize {
        eprintln!(
            "error: design has {} output bits, expected at most {w}",
            row.children().len()
        );
        return FAILED;
    }
    let nl = match lower(&unpack(&row, w), &spec) {
        Ok(nl) => nl,
        Err(e) => {
            eprintln!("error: {e}");
            return FAILED;
        }
    };
    let verdict = exhaustive_check_netlist(&nl, &spec, a.jobs.max(1));
    println!(
        "{}",
        serde_json::to_string(&verdict).expect("verdict serializes")
    );
    if verdict.pass {
        VERIFIED
    } else {
        FAILED
    }
}

fn rules(a: RulesArgs) -> u8 {
    let mut failed = 0;
    for rule in all_rules() {
        println!(
            "{:<20} {:<4} {:<9} {} => {}",
            rule.name,
            rule.phase.to_string(),
            format!("{:?}", rule.soundness).to_lowercase(),
            rule.lhs_text(),
            rule.rhs_text()
        );
        if a.check {
            let r = soundness_check(&rule);
            if r.pass {
                println!("  sound: {} instances, {} cases", r.instances, r.cases);
            } else {
                failed += 1;
                println!(
                    "  UNSOUND: {}",
                    serde_json::to_string(&r).expect("report serializes")
                );
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} rule(s) failed the soundness check");
        FAILED
    } else {
        VERIFIED
    }
}
