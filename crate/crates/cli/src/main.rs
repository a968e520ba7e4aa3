//! `stubscrub` — finds stubbing definitions that lead to unnecessary
//! stubbings in a test suite, rewrites the suite to remove them, and reports
//! the changes.
//!
//! Exit status: 0 on success, 1 on resolution errors (including a failing
//! pristine suite), 2 when `--validate` finds the updated suite failing (the
//! edits are rolled back from the output in that case).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use stubscrub_core::pipeline::{run_pipeline, RunConfig};
use stubscrub_core::report::EntryStatus;

#[derive(Parser, Debug)]
#[command(
    name = "stubscrub",
    about = "Remove unnecessary stubbings from a test suite",
    version
)]
struct Args {
    /// Test suite root directory (*.tst files).
    #[arg(long, value_name = "DIR")]
    suite: PathBuf,

    /// Write the updated suite into this directory (mirrors the input
    /// layout). Mutually exclusive with --in-place.
    #[arg(long, value_name = "DIR", conflicts_with = "in_place")]
    out: Option<PathBuf>,

    /// Rewrite the suite files where they are.
    #[arg(long)]
    in_place: bool,

    /// Leave setup-defined stubbings in place (skip class duplication).
    #[arg(long)]
    keep_setup_stubbings: bool,

    /// Analyze and report only; never write source files.
    #[arg(long)]
    detect_only: bool,

    /// Re-run the updated suite and roll the edits back if any test fails.
    #[arg(long)]
    validate: bool,

    /// Repeat the pristine run N times and abort on nondeterminism.
    #[arg(long, value_name = "N", default_value_t = 1)]
    runs: u32,

    /// Execution-info file path (defaults next to the other artifacts; the
    /// STUBSCRUB_TRACE_PATH environment variable is honored as a fallback).
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,

    /// Report path (JSON; a .txt rendering is written beside it).
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = RunConfig {
        suite_root: args.suite,
        out_dir: args.out,
        in_place: args.in_place,
        keep_setup_stubbings: args.keep_setup_stubbings,
        detect_only: args.detect_only,
        validate: args.validate,
        runs: args.runs,
        trace_path: args.trace,
        report_path: args.report,
    };

    match run_pipeline(&config) {
        Ok(artifacts) => {
            let summary = &artifacts.report.summary;
            if config.detect_only {
                let detected = artifacts.report.entries.len();
                println!(
                    "detected {detected} stubbing definition(s) leading to unnecessary stubbings \
                     ({} TU, {} UUH, {} UUS, {} skipped)",
                    summary.tu, summary.uuh, summary.uus, summary.skipped
                );
            } else {
                println!(
                    "resolved {} TU, {} UUH, {} UUS; skipped {}",
                    summary.tu, summary.uuh, summary.uus, summary.skipped
                );
                for entry in &artifacts.report.entries {
                    if entry.status == EntryStatus::Error {
                        eprintln!(
                            "error: {} ({}): {}",
                            entry.location,
                            entry.kind,
                            entry.reason.as_deref().unwrap_or("unresolved")
                        );
                    }
                }
            }
            println!("trace:  {}", artifacts.trace_path.display());
            println!("report: {}", artifacts.report_path.display());
            match (&artifacts.validation, artifacts.exit_code) {
                (Some(run), 2) => {
                    eprintln!(
                        "validation failed ({} test(s) red); edits rolled back",
                        run.failures().len()
                    );
                }
                (Some(_), _) => println!("validation: updated suite passes"),
                (None, _) => {}
            }
            ExitCode::from(artifacts.exit_code as u8)
        }
        Err(err) => {
            // Exit 2 is reserved for validation failures; every other
            // problem, configuration included, is an ordinary error.
            eprintln!("stubscrub: {err}");
            ExitCode::from(1)
        }
    }
}
