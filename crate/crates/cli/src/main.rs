//! `mpj`: run pointer-jumping protocols and produce or check fooling certificates.
//!
//! Exit codes: 0 success or valid, 1 the protocol errs or the certificate is
//! invalid, 2 usage error, violated precondition or malformed input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpj_core::adversary::{
    attack_uniform_with_trace, attack_with_trace, certify, verify_certificate_with, AdversaryError,
    FoolingCertificate, Verdict,
};
use mpj_core::oracle::{
    brute_force_fooling_search, correctness_report, decision_tree_correctness, EnumerationCap, OracleError,
    DEFAULT_ENUMERATION_CAP,
};
use mpj_core::protocols::ProtocolSpec;
use mpj_core::{evaluate, max_cost, run, total_cost, Instance, ProtocolDef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "mpj", version, about = "Pointer jumping in the number-on-the-forehead model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a protocol on one instance or on all of them
    Run(RunArgs),
    /// Build a fooling certificate against a cheap collapsing protocol
    Attack(AttackArgs),
    /// Check a fooling certificate against a protocol
    Verify(VerifyArgs),
    /// Search every instance for a fooling pair
    Brute(BruteArgs),
    /// Print a table of costs and verdicts for the built-in protocols
    Bench(BenchArgs),
}

#[derive(Args)]
struct Target {
    /// Protocol name with colon-separated parameters, e.g. truncated-trivial:7
    #[arg(long)]
    protocol: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RunMode {
    /// JSON instance file
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Sample one instance from the protocol's domain with this seed
    #[arg(long)]
    random: Option<u64>,
    /// Run on every instance
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    mode: RunMode,
    /// Maximum number of instances to enumerate
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u128,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    target: Target,
    /// Use the per-player (max-cost) variant
    #[arg(long)]
    uniform: bool,
    /// Certificate output path
    #[arg(long)]
    out: PathBuf,
    /// Print every intermediate fooling state as a JSON line
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Protocol the certificate is checked against
    #[arg(long)]
    protocol: String,
    /// Certificate file
    certificate: PathBuf,
}

#[derive(Args)]
struct BruteArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u128,
    /// Also write the certificate here when one is found
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Theorems,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::Theorems)]
    suite: Suite,
}

/// Failure that maps to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

type CmdResult = Result<ExitCode, UsageError>;

fn build(protocol: &str, n: usize, k: usize) -> Result<ProtocolDef, UsageError> {
    let spec: ProtocolSpec = protocol.parse().map_err(UsageError)?;
    Ok(spec.build(n, k)?)
}

fn verdict_code(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn write_json(path: &Path, json: &str) -> Result<(), UsageError> {
    fs::write(path, format!("{json}\n")).map_err(|e| UsageError(format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let t = &args.target;
    let protocol = build(&t.protocol, t.n, t.k)?;
    let costs = format!("C_total={}, C_max={}", total_cost(&protocol), max_cost(&protocol));
    if args.mode.exhaustive {
        let report = correctness_report(&protocol, EnumerationCap(args.cap))?;
        println!("{}/{} correct, C_total={}", report.correct, report.total, total_cost(&protocol));
        if let Some(bad) = &report.first_failure {
            println!("first failure: {}", serde_json::to_string(bad)?);
        }
        return Ok(verdict_code(report.all_correct()));
    }
    let inst = if let Some(path) = &args.mode.instance {
        let text = fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str::<Instance>(&text)?
    } else {
        let seed = args.mode.random.expect("clap requires one mode");
        println!("seed={seed}");
        protocol.domain().sample(t.n, t.k, &mut ChaCha8Rng::seed_from_u64(seed))
    };
    if !protocol.domain().admits(&inst) {
        return Err(UsageError("instance lies outside the protocol's domain".into()));
    }
    let transcript = run(&protocol, &inst)?;
    let expected = evaluate(&inst);
    println!("instance: {}", serde_json::to_string(&inst)?);
    println!("transcript: {}", serde_json::to_string(&transcript)?);
    println!(
        "output={} expected={} {}, {costs}",
        transcript.output as u8,
        expected as u8,
        if transcript.output == expected { "correct" } else { "WRONG" }
    );
    Ok(verdict_code(transcript.output == expected))
}

fn cmd_attack(args: AttackArgs) -> CmdResult {
    let t = &args.target;
    let protocol = build(&t.protocol, t.n, t.k)?;
    let states = if args.uniform { attack_uniform_with_trace(&protocol) } else { attack_with_trace(&protocol) };
    let cert = match states.and_then(|states| {
        if args.trace {
            for s in &states {
                println!("{}", serde_json::to_string(s).expect("state serialises"));
            }
        }
        certify(&protocol, states.last().expect("at least one stage"))
    }) {
        Ok(cert) => cert,
        Err(AdversaryError::ConstructionFailed(e)) => {
            eprintln!("error: construction failed: {e}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&args.out, &cert.to_json())?;
    println!(
        "certificate written to {} (outputs {} vs {}, protocol answers {})",
        args.out.display(),
        cert.outputs[0] as u8,
        cert.outputs[1] as u8,
        run(&protocol, &cert.instances()?.0)?.output as u8
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let path = &args.certificate;
    let text = fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    let cert: FoolingCertificate =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("malformed certificate: {e}")))?;
    let protocol = build(&args.protocol, cert.n, cert.k)?;
    match verify_certificate_with(&cert, &protocol)? {
        Verdict::Valid => {
            println!("valid: {} errs on one of the two instances", protocol.id());
            Ok(ExitCode::SUCCESS)
        }
        Verdict::Invalid(reason) => {
            println!("invalid: {reason}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_brute(args: BruteArgs) -> CmdResult {
    let t = &args.target;
    let protocol = build(&t.protocol, t.n, t.k)?;
    match brute_force_fooling_search(&protocol, EnumerationCap(args.cap))? {
        Some(cert) => {
            let json = cert.to_json();
            println!("{json}");
            if let Some(out) = &args.out {
                write_json(out, &json)?;
            }
            println!("fooling pair found: {} errs", protocol.id());
            Ok(ExitCode::from(1))
        }
        None => {
            println!("no fooling pair: every transcript determines the answer");
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Exact verdict over the whole domain via the lazy decision tree.
fn correctness_verdict(protocol: &ProtocolDef) -> Result<String, OracleError> {
    let report = decision_tree_correctness(protocol, EnumerationCap::default())?;
    Ok(if report.all_correct() {
        format!("correct ({} instances)", report.total)
    } else {
        format!("incorrect ({}/{} correct)", report.correct, report.total)
    })
}

fn cmd_bench(_args: BenchArgs) -> CmdResult {
    let exact: &[(&str, usize, usize)] = &[
        ("trivial", 4, 3),
        ("trivial", 8, 3),
        ("trivial", 8, 4),
        ("reordered:3:2", 8, 3),
        ("reordered:3:2", 16, 3),
        ("reordered:4:2", 8, 4),
        ("tpj:2", 4, 3),
        ("tpj:3", 9, 3),
        ("tpj:2", 8, 4),
        ("silent", 4, 3),
    ];
    let attacked: &[(&str, usize, usize, bool)] = &[
        ("truncated-trivial:5", 8, 3, false),
        ("truncated-trivial:11", 14, 6, false),
        ("first-player:9", 12, 4, false),
        ("silent", 8, 5, true),
        ("truncated:11:7:7", 12, 4, true),
    ];
    println!("protocol,view,n,k,c_total,c_max,verdict");
    let row = |name: &str, p: &ProtocolDef, verdict: &str| {
        println!(
            "{name},{},{},{},{},{},{verdict}",
            p.view_model().name(),
            p.n(),
            p.k(),
            total_cost(p),
            max_cost(p)
        );
    };
    for &(name, n, k) in exact {
        let p = build(name, n, k)?;
        row(name, &p, &correctness_verdict(&p)?);
    }
    for &(name, n, k, uniform) in attacked {
        let p = build(name, n, k)?;
        let states = if uniform { attack_uniform_with_trace(&p) } else { attack_with_trace(&p) };
        let verdict = match states.and_then(|s| certify(&p, s.last().expect("stage 1"))) {
            Ok(cert) if verify_certificate_with(&cert, &p)?.is_valid() => {
                if uniform { "fooled (uniform attack, certificate verified)" } else { "fooled (certificate verified)" }
            }
            _ => "attack failed",
        };
        row(name, &p, verdict);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Brute(a) => cmd_brute(a),
        Command::Bench(a) => cmd_bench(a),
    };
    result.unwrap_or_else(|UsageError(msg)| {
        eprintln!("error: {msg}");
        ExitCode::from(2)
    })
}
