//! Command-line scenario runner.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use outstab::scenario::{certify_builtin, default_out_dir, list_scenarios, load_scenario, run};
use outstab::Error;

#[derive(Parser)]
#[command(name = "outstab", version, about = "Output finite-/fixed-time stability scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in scenario.
    Run {
        /// Path to a JSON scenario document, or a built-in name.
        scenario: String,
        /// Output root (default: $OUTSTAB_OUT_DIR or ./outstab-out).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Seed for randomized gain synthesis.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List built-in scenarios.
    List,
    /// Audit the stability certificate of a built-in system.
    Certify {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Usage(_) | Error::InvalidArgument(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::List => {
            let mut out = std::io::stdout().lock();
            for (name, desc) in list_scenarios() {
                // a closed pipe (e.g. `| head`) is not an error
                if writeln!(out, "{name:<24} {desc}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, out, dt, horizon, seed } => {
            let sc = match load_scenario(&scenario).and_then(|s| s.with_overrides(dt, horizon, seed)) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let root = out.or_else(|| sc.output_dir.clone()).unwrap_or_else(default_out_dir);
            match run(&sc, &root) {
                Ok((summary, dir)) => {
                    for r in &summary.runs {
                        let status = match (r.diverged_at, r.settled) {
                            (Some(t), _) => format!("diverged at t = {t}"),
                            (None, true) => format!("settled at t = {}", r.t_settle.unwrap_or(0.0)),
                            (None, false) => "not settled".to_string(),
                        };
                        println!("run {} x0 = {:?}: {status}", r.index, r.x0);
                    }
                    println!("wrote {}", dir.display());
                    if summary.any_diverged() {
                        eprintln!("error: at least one run diverged");
                        return ExitCode::from(1);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Certify { name, out } => {
            let root = out.unwrap_or_else(default_out_dir);
            match certify_builtin(&name, &root) {
                Ok((report, dir)) => {
                    for c in &report.conditions {
                        println!("{:<24} worst margin {:>12.4e}  violations {}", c.name, c.worst_margin, c.violations);
                    }
                    for b in &report.bounds {
                        println!("{:<24} {:.6}", b.name, b.value);
                    }
                    println!("verdict: {:?} ({} samples)", report.verdict, report.samples_used);
                    println!("wrote {}", dir.join("certification.json").display());
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
