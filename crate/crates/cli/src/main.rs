//! Batch front-end: load diagrams and targets, run the construction
//! pipelines, emit JSON reports and CSV tables.
//!
//! Exit codes: 0 when every diagnostic and verification assertion passes,
//! 1 on usage, I/O or validation errors, 2 on a failed construction or
//! verification.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use sadic::bratteli::{read_morphisms, BratteliDiagram};
use sadic::construct::{
    build_main1, build_toeplitz, verify_construction, ConstructionResult, Mode, Status,
    VerificationOptions, VerificationReport,
};
use sadic::language::{
    complexity_profile_with, BoundTable, ComplexityProfile, ProfileOptions, ToeplitzReport,
};
use sadic::morphism::DirectiveSequence;
use sadic::target::ComplexityTarget;

#[derive(Parser)]
#[command(
    name = "sadic",
    version,
    about = "Exact Bratteli / S-adic construction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a construction pipeline and verify the result.
    Construct(ConstructArgs),
    /// Tabulate factor complexity of a directive sequence or ordered diagram.
    Complexity(ComplexityArgs),
    /// Re-verify a stored construction result.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ConstructArgs {
    /// Pipeline to run.
    #[arg(long, value_parser = parse_mode)]
    mode: Mode,
    /// Input diagram JSON.
    #[arg(long)]
    diagram: PathBuf,
    /// Target expression (n^RATIONAL, n*log2(n)^INT) or @table.csv.
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    /// Verification horizon for the complexity profile.
    #[arg(long = "N", default_value_t = 10_000)]
    n: usize,
    #[arg(long = "scan-limit", default_value_t = 100_000)]
    scan_limit: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Toeplitz window length scanned during verification.
    #[arg(long = "toeplitz-window", default_value_t = 10_000)]
    toeplitz_window: usize,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Directive-sequence JSON ({"morphisms": ...}) or ordered diagram JSON.
    #[arg(long)]
    diagram: PathBuf,
    /// Optional target for the target/ratio columns.
    #[arg(long)]
    target: Option<String>,
    #[arg(long = "N", default_value_t = 100)]
    n: usize,
    /// Output directory; the table always goes to stdout as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Construction result JSON produced by `construct`.
    #[arg(long)]
    result: PathBuf,
    /// Target override (needed when the result used a table target).
    #[arg(long)]
    target: Option<String>,
    #[arg(long = "N", default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "toeplitz-window", default_value_t = 10_000)]
    toeplitz_window: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "main1" => Ok(Mode::Main1),
        "toeplitz" => Ok(Mode::Toeplitz),
        other => Err(format!(
            "unknown mode {other:?}, expected main1 or toeplitz"
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Construct(args) => cmd_construct(args),
        Command::Complexity(args) => cmd_complexity(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_target(expr: &str) -> anyhow::Result<ComplexityTarget> {
    if let Some(path) = expr.strip_prefix('@') {
        let text = fs::read_to_string(path).with_context(|| format!("reading table {path}"))?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.eq_ignore_ascii_case("n,p") {
                continue;
            }
            let value = match line.split_once(',') {
                Some((n, p)) => {
                    let n: usize = n
                        .trim()
                        .parse()
                        .with_context(|| format!("table line {}: bad index", lineno + 1))?;
                    if n != values.len() + 1 {
                        bail!(
                            "table line {}: expected n = {}",
                            lineno + 1,
                            values.len() + 1
                        );
                    }
                    p.trim()
                }
                None => line,
            };
            values.push(
                value
                    .parse()
                    .map_err(|_| anyhow!("table line {}: bad value {value:?}", lineno + 1))?,
            );
        }
        Ok(ComplexityTarget::from_table(values, 1)?)
    } else {
        Ok(ComplexityTarget::parse(expr)?)
    }
}

fn load_directive(path: &Path) -> anyhow::Result<DirectiveSequence> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("morphisms").is_some() {
        Ok(serde_json::from_value::<DirectiveSequence>(value)?)
    } else {
        let diagram: BratteliDiagram = serde_json::from_value(value)?;
        Ok(read_morphisms(&diagram)?)
    }
}

fn cmd_construct(args: ConstructArgs) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&args.diagram)
        .with_context(|| format!("reading {}", args.diagram.display()))?;
    let diagram: BratteliDiagram = serde_json::from_str(&text).context("parsing diagram JSON")?;
    let target = parse_target(&args.target)?;
    let result = match args.mode {
        Mode::Main1 => build_main1(&diagram, &target, args.depth, args.scan_limit)?,
        Mode::Toeplitz => build_toeplitz(&diagram, &target, args.depth, args.scan_limit)?,
    };
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("result.json"), &result)?;

    if let Status::Failed { level, condition } = &result.status {
        println!("FAILED at level {level}: {condition}");
        return Ok(2);
    }

    let opts = VerificationOptions {
        horizon: args.n,
        toeplitz_window: args.toeplitz_window,
        seed: args.seed,
        profile: ProfileOptions::default(),
    };
    let outcome = verify_construction(&result, &target, &opts)?;
    write_json(&args.out.join("verify.json"), &outcome.report)?;
    if let Some(profile) = &outcome.profile {
        let ds = result.directive_sequence()?;
        let table = BoundTable::new(&ds)?;
        let csv = complexity_csv(profile, Some(&target), Some(&table));
        fs::write(args.out.join("complexity.csv"), csv)?;
    }
    if let Some(toep) = &outcome.report.toeplitz_window {
        fs::write(args.out.join("toeplitz.csv"), toeplitz_csv(toep))?;
    }
    print_report(&result, &outcome.report);
    if result.all_diagnostics_pass() && outcome.report.passed() {
        Ok(0)
    } else {
        Ok(2)
    }
}

fn cmd_complexity(args: ComplexityArgs) -> anyhow::Result<u8> {
    let ds = load_directive(&args.diagram)?;
    let target = args.target.as_deref().map(parse_target).transpose()?;
    let profile = complexity_profile_with(&ds, args.n, ProfileOptions::default())?;
    let table = BoundTable::new(&ds)?;
    let csv = complexity_csv(&profile, target.as_ref(), Some(&table));
    print!("{csv}");
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("complexity.csv"), &csv)?;
    }
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&args.result)
        .with_context(|| format!("reading {}", args.result.display()))?;
    let result: ConstructionResult =
        serde_json::from_str(&text).context("parsing construction result")?;
    let target = match &args.target {
        Some(expr) => parse_target(expr)?,
        None => ComplexityTarget::parse(&result.target_expr).map_err(|_| {
            anyhow!(
                "result was built against target {:?}; pass --target to supply it",
                result.target_expr
            )
        })?,
    };
    let opts = VerificationOptions {
        horizon: args.n,
        toeplitz_window: args.toeplitz_window,
        seed: args.seed,
        profile: ProfileOptions::default(),
    };
    let outcome = verify_construction(&result, &target, &opts)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("verify.json"), &outcome.report)?;
    }
    if outcome.report.skipped {
        println!("skipped: construction result is marked FAILED");
        return Ok(2);
    }
    print_report(&result, &outcome.report);
    Ok(if outcome.report.passed() { 0 } else { 2 })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn complexity_csv(
    profile: &ComplexityProfile,
    target: Option<&ComplexityTarget>,
    bounds: Option<&BoundTable>,
) -> String {
    let mut out = String::from("n,p,target,bound,ratio\n");
    for n in 1..=profile.max_len {
        let p = profile.count(n);
        let target_col = target
            .map(|t| format!("{:.6e}", t.value_f64(n as u64)))
            .unwrap_or_default();
        let bound_col = bounds
            .and_then(|b| b.bound(n as u64).ok())
            .map(|b| b.bound.to_string())
            .unwrap_or_default();
        let ratio_col = target
            .map(|t| format!("{:.6e}", p as f64 / t.value_f64(n as u64)))
            .unwrap_or_default();
        let _ = writeln!(out, "{n},{p},{target_col},{bound_col},{ratio_col}");
    }
    out
}

fn toeplitz_csv(report: &ToeplitzReport) -> String {
    let mut out = String::from("position,period\n");
    for (p, period) in report.periods.iter().enumerate() {
        match period {
            Some(q) => {
                let _ = writeln!(out, "{p},{q}");
            }
            None => {
                let _ = writeln!(out, "{p},unverified");
            }
        }
    }
    out
}

fn print_report(result: &ConstructionResult, report: &VerificationReport) {
    let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "construction: {} ({} diagnostics, {} observations)",
        flag(result.all_diagnostics_pass()),
        result.diagnostics.len(),
        result.observations.len()
    );
    println!(
        "complexity bounds: {} ({} checked, {} out of stored range, {} violations)",
        flag(report.bound_violations.is_empty() && report.coarse_violations.is_empty()),
        report.bounds_checked,
        report.bounds_out_of_range,
        report.bound_violations.len() + report.coarse_violations.len()
    );
    println!(
        "ratio decay per decade: {}",
        flag(report.decades_strictly_decreasing)
    );
    for d in &report.ratio_decades {
        println!(
            "  decade {:>8}: max p(n)/p_n = {:.6e} at n = {}",
            d.decade_start, d.max_ratio, d.max_at_n
        );
    }
    let inter_ok = report.intertwinings.iter().all(|c| c.pass);
    println!(
        "finite-stage intertwinings: {} ({} checks)",
        flag(inter_ok),
        report.intertwinings.len()
    );
    for c in report.intertwinings.iter().filter(|c| !c.pass) {
        println!("  FAIL level {}: {}", c.level, c.name);
    }
    if let Some(adapted) = &report.adapted {
        println!(
            "adapted-sequence facts: operational = {} (integrality + clearing products)",
            adapted.operational()
        );
    }
    for r in &report.recognizability {
        if r.codomain >= 3 {
            println!(
                "recognizability (alphabet {}): marker {}",
                r.codomain,
                flag(r.marker_holds())
            );
        } else {
            println!(
                "recognizability (alphabet 2): decoding {} (marker exception logged)",
                flag(!r.letter_injective || r.decoding_unique)
            );
        }
    }
    if let Some(ers) = &report.ers_checks {
        let ok = ers
            .iter()
            .all(|c| c.ers && c.row_sum_matches_k && c.divisible && c.entries_exceed_size);
        println!("equal row sums / divisibility / growth: {}", flag(ok));
    }
    if let Some(t) = &report.toeplitz_window {
        println!(
            "toeplitz window: {} ({} verified, {} undecided, {} refuted of {})",
            flag(t.flag),
            t.verified,
            t.undecided(),
            t.refuted,
            t.window_len
        );
    }
    if let Some(b) = &report.boshernitzan {
        println!(
            "ergodic-measure bound: at most {} (alpha estimate {})",
            b.measure_bound, b.alpha_estimate
        );
    }
    println!("overall: {}", flag(report.passed()));
}
