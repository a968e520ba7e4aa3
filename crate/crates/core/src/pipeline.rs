//! End-to-end orchestration: run the suite under the harness, collect the
//! execution-info file, classify, resolve, optionally validate by re-running
//! the updated suite, and emit the report and metrics.
//!
//! The pipeline refuses to analyze a suite whose pristine run fails: the
//! whole notion of "unnecessary" assumes green tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::classify::{classification_dump, classify_full, AnalyzeError, Classification};
use crate::lang::LangError;
use crate::metrics::{snapshot, ComplexitySnapshot};
use crate::refactor::{resolve, RefactorError, ResolveOutcome};
use crate::report::{
    EntryStatus, FileSummary, MetricsBlock, MovedTest, ReportEntry, ResolutionReport, Summary,
};
use crate::runner::{run_suite, SuiteRun, TestOutcome};
use crate::shim::{ShimError, TraceSink, TRACE_PATH_ENV};
use crate::suite::{SuiteError, TestSuiteModel};
use crate::trace::{parse_trace, serialize_trace, ExecutionTrace, TraceError};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub suite_root: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub in_place: bool,
    pub keep_setup_stubbings: bool,
    pub detect_only: bool,
    pub validate: bool,
    /// Pristine runs to compare before analyzing (flaky-suite guard).
    pub runs: u32,
    pub trace_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(suite_root: impl Into<PathBuf>) -> Self {
        RunConfig {
            suite_root: suite_root.into(),
            out_dir: None,
            in_place: false,
            keep_setup_stubbings: false,
            detect_only: false,
            validate: false,
            runs: 1,
            trace_path: None,
            report_path: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Shim(#[from] ShimError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error(transparent)]
    Refactor(#[from] RefactorError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("the pristine suite fails; fix the tests before resolving stubbings:\n{}",
        format_failures(.0))]
    PristineFailure(Vec<TestOutcome>),
    #[error("the suite is nondeterministic across {0} runs; aborting")]
    Nondeterministic(u32),
}

fn format_failures(failures: &[TestOutcome]) -> String {
    failures
        .iter()
        .filter(|o| !o.passed())
        .map(|o| {
            format!(
                "  {}#{}: {}",
                o.test_class,
                o.test_name,
                o.failure.as_deref().unwrap_or("failed")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Everything a pipeline run produced, for callers that want more than the
/// exit code.
#[derive(Debug)]
pub struct PipelineArtifacts {
    pub exit_code: i32,
    pub report: ResolutionReport,
    pub classification: Classification,
    /// Updated suite texts; `None` in detect-only mode.
    pub updated: Option<BTreeMap<String, String>>,
    pub pristine: SuiteRun,
    pub validation: Option<SuiteRun>,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
}

/// Run the whole pipeline against a suite directory.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineArtifacts, PipelineError> {
    if config.in_place && config.out_dir.is_some() {
        return Err(PipelineError::Config(
            "--in-place and --out are mutually exclusive".to_string(),
        ));
    }
    if !config.detect_only && !config.in_place && config.out_dir.is_none() {
        return Err(PipelineError::Config(
            "an output directory (--out) or --in-place is required unless --detect-only".to_string(),
        ));
    }
    if config.runs == 0 {
        return Err(PipelineError::Config("--runs must be at least 1".to_string()));
    }

    let model = TestSuiteModel::from_dir(&config.suite_root)?;
    let artifacts_dir = config
        .out_dir
        .clone()
        .unwrap_or_else(|| config.suite_root.clone());
    std::fs::create_dir_all(&artifacts_dir).map_err(|source| PipelineError::Io {
        path: artifacts_dir.clone(),
        source,
    })?;
    let trace_path = config
        .trace_path
        .clone()
        .or_else(|| std::env::var(TRACE_PATH_ENV).ok().map(PathBuf::from))
        .unwrap_or_else(|| artifacts_dir.join("stubscrub-trace.txt"));
    let report_path = config
        .report_path
        .clone()
        .unwrap_or_else(|| artifacts_dir.join("report.json"));

    // Pristine run(s). The first run writes the execution-info file; repeats
    // confirm the suite is deterministic before any analysis.
    let pristine = run_suite(&model, TraceSink::File(trace_path.clone()))?;
    for _ in 1..config.runs {
        let again = run_suite(&model, TraceSink::Memory)?;
        if again.outcomes != pristine.outcomes
            || serialize_trace(&again.trace) != serialize_trace(&pristine.trace)
        {
            return Err(PipelineError::Nondeterministic(config.runs));
        }
    }
    if !pristine.all_passed() {
        return Err(PipelineError::PristineFailure(pristine.outcomes.clone()));
    }

    // Analysis reads the file back: the textual trace is the interface.
    let trace_text =
        std::fs::read_to_string(&trace_path).map_err(|source| PipelineError::Io {
            path: trace_path.clone(),
            source,
        })?;
    let trace = parse_trace(&trace_text)?;
    debug_assert_eq!(trace, pristine.trace);

    let classification = classify_full(&trace, &model)?;
    write_text(
        &artifacts_dir.join("classification.tsv"),
        &classification_dump(&classification.cus_set),
    )?;

    let original_texts: BTreeMap<String, String> = model
        .files
        .iter()
        .map(|f| (f.rel_path.clone(), f.text.clone()))
        .collect();
    let before = snapshot(&original_texts)?;

    if config.detect_only {
        let report = detection_report(&classification, &model, &trace, &before);
        write_text(&report_path, &report.to_json())?;
        write_text(&report_path.with_extension("txt"), &report.render_text())?;
        return Ok(PipelineArtifacts {
            exit_code: 0,
            report,
            classification,
            updated: None,
            pristine,
            validation: None,
            trace_path,
            report_path,
        });
    }

    let outcome = resolve(&model, &classification.cus_set, config.keep_setup_stubbings)?;
    let after = snapshot(&outcome.updated)?;
    let report = resolution_report(&classification, &outcome, &model, &trace, &before, &after);
    write_text(&report_path, &report.to_json())?;
    write_text(&report_path.with_extension("txt"), &report.render_text())?;

    // Write the updated suite, mirroring the input layout.
    let target_root = if config.in_place {
        config.suite_root.clone()
    } else {
        config.out_dir.clone().unwrap()
    };
    let mut written: Vec<PathBuf> = Vec::new();
    for (rel_path, text) in &outcome.updated {
        let path = target_root.join(rel_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| PipelineError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        write_text(&path, text)?;
        written.push(path);
    }

    let mut validation = None;
    let mut exit_code = if outcome.error_count > 0 { 1 } else { 0 };
    if config.validate {
        let updated_model = TestSuiteModel::from_dir(&target_root)?;
        let updated_run = run_suite(
            &updated_model,
            TraceSink::File(artifacts_dir.join("validation-trace.txt")),
        )?;
        if !updated_run.all_passed() {
            // Roll the edits back out of the output.
            if config.in_place {
                for file in &model.files {
                    write_text(&config.suite_root.join(&file.rel_path), &file.text)?;
                }
                for path in &written {
                    let rel = path.strip_prefix(&config.suite_root).ok();
                    let is_original = rel
                        .map(|r| {
                            model
                                .files
                                .iter()
                                .any(|f| Path::new(&f.rel_path) == r)
                        })
                        .unwrap_or(false);
                    if !is_original {
                        let _ = std::fs::remove_file(path);
                    }
                }
            } else {
                for path in &written {
                    let _ = std::fs::remove_file(path);
                }
            }
            exit_code = 2;
        }
        validation = Some(updated_run);
    }

    Ok(PipelineArtifacts {
        exit_code,
        report,
        classification,
        updated: Some(outcome.updated),
        pristine,
        validation,
        trace_path,
        report_path,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn excluded_entries(classification: &Classification) -> Vec<ReportEntry> {
    classification
        .excluded
        .iter()
        .map(|e| ReportEntry {
            location: e.group.location.to_string(),
            kind: e.kind.code().to_string(),
            status: EntryStatus::Skipped,
            strategy: None,
            reason: Some(format!("excluded: {}", e.reason.describe())),
            edits: Vec::new(),
            affected_tests: e
                .group
                .tusd_list
                .iter()
                .map(|(c, t)| format!("{c}#{t}"))
                .collect(),
            new_classes: Vec::new(),
            moved_tests: Vec::new(),
        })
        .collect()
}

/// Entries sorted by (file, line, occurrence); location strings sort
/// numerically through the original location values.
fn sort_entries(
    classification: &Classification,
    mut entries: Vec<ReportEntry>,
) -> Vec<ReportEntry> {
    let mut order: BTreeMap<String, (String, u32, u32)> = BTreeMap::new();
    for cus in &classification.cus_set {
        let l = &cus.group.location;
        order.insert(
            l.to_string(),
            (l.file_path.clone(), l.line, l.occurrence_index),
        );
    }
    for excluded in &classification.excluded {
        let l = &excluded.group.location;
        order.insert(
            l.to_string(),
            (l.file_path.clone(), l.line, l.occurrence_index),
        );
    }
    entries.sort_by_key(|e| order.get(&e.location).cloned());
    entries
}

fn skipped_test_notes(model: &TestSuiteModel, trace: &ExecutionTrace) -> Vec<String> {
    let mut notes = Vec::new();
    for (class, test) in model.all_test_names() {
        let covered = trace.records.iter().any(|r| {
            r.test_class == class
                && (r.test_name == test
                    || (r.test_name.starts_with(&test)
                        && r.test_name[test.len()..].starts_with('[')))
        });
        if !covered {
            notes.push(format!(
                "test {class}#{test} appears in the suite but not in the trace (skipped?)"
            ));
        }
    }
    notes
}

fn detection_report(
    classification: &Classification,
    model: &TestSuiteModel,
    trace: &ExecutionTrace,
    before: &ComplexitySnapshot,
) -> ResolutionReport {
    let mut entries: Vec<ReportEntry> = classification
        .cus_set
        .iter()
        .map(|cus| ReportEntry {
            location: cus.group.location.to_string(),
            kind: cus.kind.code().to_string(),
            status: EntryStatus::Detected,
            strategy: None,
            reason: None,
            edits: Vec::new(),
            affected_tests: cus
                .group
                .tusd_list
                .iter()
                .map(|(c, t)| format!("{c}#{t}"))
                .collect(),
            new_classes: Vec::new(),
            moved_tests: Vec::new(),
        })
        .collect();
    entries.extend(excluded_entries(classification));
    let entries = sort_entries(classification, entries);
    let mut summary = Summary::default();
    for cus in &classification.cus_set {
        match cus.kind.code() {
            "TU" => summary.tu += 1,
            "UUH" => summary.uuh += 1,
            _ => summary.uus += 1,
        }
    }
    summary.skipped = classification.excluded.len();
    ResolutionReport {
        summary,
        entries,
        files: Vec::new(),
        notes: skipped_test_notes(model, trace),
        metrics: Some(MetricsBlock::from_snapshots(before, before)),
    }
}

fn resolution_report(
    classification: &Classification,
    outcome: &ResolveOutcome,
    model: &TestSuiteModel,
    trace: &ExecutionTrace,
    before: &ComplexitySnapshot,
    after: &ComplexitySnapshot,
) -> ResolutionReport {
    let mut entries = outcome.entries.clone();
    entries.extend(excluded_entries(classification));
    let entries = sort_entries(classification, entries);

    let mut summary = Summary::default();
    for entry in &entries {
        match entry.status {
            EntryStatus::Resolved => match entry.kind.as_str() {
                "TU" => summary.tu += 1,
                "UUH" => summary.uuh += 1,
                _ => summary.uus += 1,
            },
            EntryStatus::Skipped | EntryStatus::Error => summary.skipped += 1,
            EntryStatus::Detected => {}
        }
    }

    let files = outcome
        .file_edits
        .iter()
        .map(|(path, edits)| FileSummary {
            path: path.clone(),
            edits: *edits,
        })
        .collect();

    let mut notes = outcome.notes.clone();
    notes.extend(skipped_test_notes(model, trace));

    ResolutionReport {
        summary,
        entries,
        files,
        notes,
        metrics: Some(MetricsBlock::from_snapshots(before, after)),
    }
}

/// Per-test multiset of invoked (class, method) pairs, the behavioral
/// content the edits must preserve for used stubbings.
pub fn invocation_multisets(
    trace: &ExecutionTrace,
) -> BTreeMap<(String, String), BTreeMap<(String, String), usize>> {
    let mut out = BTreeMap::new();
    for record in &trace.records {
        let per_test: &mut BTreeMap<(String, String), usize> = out
            .entry((record.test_class.clone(), record.test_name.clone()))
            .or_default();
        for invocation in &record.invocations {
            *per_test
                .entry((
                    invocation.invoked_class.clone(),
                    invocation.invoked_method.clone(),
                ))
                .or_default() += 1;
        }
    }
    out
}

/// Rename moved tests back to their original class so updated-suite
/// multisets can be compared against the originals.
pub fn remap_moved_tests(
    multisets: BTreeMap<(String, String), BTreeMap<(String, String), usize>>,
    moved: &[MovedTest],
) -> BTreeMap<(String, String), BTreeMap<(String, String), usize>> {
    let back: BTreeMap<&str, &str> = moved
        .iter()
        .map(|m| (m.to_class.as_str(), m.from_class.as_str()))
        .collect();
    multisets
        .into_iter()
        .map(|((class, test), counts)| {
            let class = back
                .get(class.as_str())
                .map(|c| c.to_string())
                .unwrap_or(class);
            ((class, test), counts)
        })
        .collect()
}
