//! Shared test support: a playground suite for synthetic traces, a
//! suite-consistent random trace generator, and an independent brute-force
//! classifier used as the oracle for the real one.


use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use stubscrub_core::lang::ast::{walk_stmts, Block, ElseBranch, MemberKind, StmtKind};
use stubscrub_core::lang::parser::parse_file;
use stubscrub_core::suite::{MethodRole, TestSuiteModel};
use stubscrub_core::trace::{
    compute_unnecessary, CodeLocation, ExecutionTrace, StackFrame, StubbingDefinitionEvent,
    StubbingId, StubbingInvocationEvent, TestExecutionRecord,
};

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn corpus_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpora")
        .join(name)
}

pub fn playground_model() -> TestSuiteModel {
    TestSuiteModel::from_dir(&fixture_dir("playground")).unwrap()
}

/// One statically-derived way a stubbing definition can be reached: the
/// frames from the defining statement up to a test or setup entry method.
#[derive(Debug, Clone)]
pub struct SitePath {
    pub location: CodeLocation,
    pub stubbed_method: String,
    pub frames: Vec<StackFrame>,
    pub entry_class: String,
    pub entry_method: String,
    pub entry_is_setup: bool,
}

/// Enumerate every (definition site, call path) pair in the suite.
pub fn site_paths(model: &TestSuiteModel) -> Vec<SitePath> {
    let mut out = Vec::new();
    for ((file_path, line, occ), site) in model.when_sites() {
        let member = model.member(site.member);
        let class = model.class_decl(site.member.class_ref());
        let method = member.as_method().unwrap();
        let stubbed_method = when_method_name(&method.body, *line, *occ)
            .expect("site indexes a when statement");
        let start = StackFrame {
            file_path: file_path.clone(),
            declaring_class: class.name.clone(),
            method_name: method.name.clone(),
            line: *line,
        };
        let location = CodeLocation::new(file_path.clone(), *line, *occ);
        extend_paths(
            model,
            &class.name,
            file_path,
            vec![start],
            &location,
            &stubbed_method,
            &mut out,
            0,
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn extend_paths(
    model: &TestSuiteModel,
    class_name: &str,
    file_path: &str,
    frames: Vec<StackFrame>,
    location: &CodeLocation,
    stubbed_method: &str,
    out: &mut Vec<SitePath>,
    depth: usize,
) {
    if depth > 6 {
        return;
    }
    let current = frames.last().unwrap().method_name.clone();
    let member_ref = model.find_method(class_name, &current).unwrap();
    let role = model.role_of(model.member(member_ref));
    if matches!(role, MethodRole::Test | MethodRole::Setup) {
        out.push(SitePath {
            location: location.clone(),
            stubbed_method: stubbed_method.to_string(),
            frames,
            entry_class: class_name.to_string(),
            entry_method: current,
            entry_is_setup: role == MethodRole::Setup,
        });
        return;
    }
    // Helper: fan out over every caller in the class.
    let class_ref = model.class_ref(class_name).unwrap();
    let class = model.class_decl(class_ref);
    for (idx, member) in class.members.iter().enumerate() {
        if member.as_method().is_none() {
            continue;
        }
        let caller_ref = stubscrub_core::suite::MemberRef {
            file: class_ref.file,
            class: class_ref.class,
            member: idx,
        };
        for (callee, call_line) in model.local_calls(caller_ref) {
            if callee == current {
                let mut next = frames.clone();
                next.push(StackFrame {
                    file_path: file_path.to_string(),
                    declaring_class: class_name.to_string(),
                    method_name: member.name().to_string(),
                    line: call_line,
                });
                extend_paths(
                    model,
                    class_name,
                    file_path,
                    next,
                    location,
                    stubbed_method,
                    out,
                    depth + 1,
                );
            }
        }
    }
}

fn when_method_name(block: &Block, line: u32, occ: u32) -> Option<String> {
    let mut found = None;
    walk_stmts(block, &mut |stmt| {
        if let StmtKind::When(w) = &stmt.kind {
            if stmt.line == line && w.occurrence_index == occ {
                found = Some(w.method.clone());
            }
        }
    });
    found
}

/// Decorated test identities the runner would produce: parameterized tests
/// appear once per value with an index suffix.
pub fn decorated_tests(model: &TestSuiteModel) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for (class_ref, test_ref) in model.test_plan() {
        let class = model.class_decl(class_ref).name.clone();
        let method = model.member(test_ref).name().to_string();
        let params = model.params_of(class_ref);
        if params.is_empty() {
            out.push((class.clone(), method.clone(), method.clone()));
        } else {
            for idx in 0..params.len() {
                out.push((class.clone(), format!("{method}[{idx}]"), method.clone()));
            }
        }
    }
    out
}

/// Generate a random but structurally consistent trace over the suite: up to
/// `max_tests` records, up to `max_defs` definitions overall, stacks taken
/// from real static call paths, and a random used/unused flag per
/// definition.
pub fn gen_trace(model: &TestSuiteModel, rng: &mut impl Rng, max_tests: usize, max_defs: usize) -> ExecutionTrace {
    let paths = site_paths(model);
    let mut tests = decorated_tests(model);
    tests.shuffle(rng);
    let record_count = rng.gen_range(0..=max_tests.min(tests.len()));
    let mut serial = 0u64;
    let mut total_defs = 0usize;
    let mut records = Vec::new();
    for (class, decorated, method) in tests.into_iter().take(record_count) {
        let candidates: Vec<&SitePath> = paths
            .iter()
            .filter(|p| {
                p.entry_class == class && (p.entry_is_setup || p.entry_method == method)
            })
            .collect();
        let mut definitions: Vec<StubbingDefinitionEvent> = Vec::new();
        let mut invocations: Vec<StubbingInvocationEvent> = Vec::new();
        if !candidates.is_empty() {
            for _ in 0..rng.gen_range(0..=4) {
                if total_defs >= max_defs {
                    break;
                }
                let path = candidates[rng.gen_range(0..candidates.len())];
                serial += 1;
                total_defs += 1;
                let id = StubbingId {
                    double_class: "Widget".to_string(),
                    method_name: path.stubbed_method.clone(),
                    serial,
                };
                definitions.push(StubbingDefinitionEvent {
                    id: id.clone(),
                    stubbed_class: "Widget".to_string(),
                    stubbed_method: path.stubbed_method.clone(),
                    location: path.location.clone(),
                    stack: path.frames.clone(),
                });
                if rng.gen_bool(0.5) {
                    let entry = path.frames.last().unwrap();
                    invocations.push(StubbingInvocationEvent {
                        id,
                        invoked_class: "Widget".to_string(),
                        invoked_method: path.stubbed_method.clone(),
                        call_site: CodeLocation::new(entry.file_path.clone(), entry.line, 0),
                        definition_location: path.location.clone(),
                    });
                }
            }
        }
        let unnecessary = compute_unnecessary(&definitions, &invocations).unwrap();
        records.push(TestExecutionRecord {
            test_class: class,
            test_name: decorated,
            definitions,
            invocations,
            unnecessary,
        });
    }
    ExecutionTrace { records }
}

// --- independent brute-force classifier ---------------------------------------

/// Flattened view of one classified location, used for exact comparison.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlatCus {
    pub location: (String, u32, u32),
    pub kind: &'static str,
    pub usd_serials: Vec<u64>,
    pub isd_serials: Vec<u64>,
    pub tusd: Vec<(String, String)>,
    pub tisd: Vec<(String, String)>,
    /// None when resolvable, Some(reason tag) when excluded.
    pub excluded: Option<&'static str>,
}

/// Brute-force classification: per test, per definition event, scan the
/// record's invocations; search every stack frame for a setup method; walk
/// the freshly reparsed file for loop ancestry and class parameterization.
/// Shares only the parser with the implementation under test.
pub fn oracle_classify(trace: &ExecutionTrace, model: &TestSuiteModel) -> Vec<FlatCus> {
    let mut locations: Vec<CodeLocation> = Vec::new();
    for record in &trace.records {
        for def in &record.definitions {
            if !locations.contains(&def.location) {
                locations.push(def.location.clone());
            }
        }
    }
    locations.sort();

    let mut out = Vec::new();
    for location in locations {
        let mut usd_serials = Vec::new();
        let mut isd_serials = Vec::new();
        let mut tusd = Vec::new();
        let mut tisd = Vec::new();
        let mut any_setup_frame = false;
        for record in &trace.records {
            let test = (record.test_class.clone(), record.test_name.clone());
            for def in &record.definitions {
                if def.location != location {
                    continue;
                }
                for frame in &def.stack {
                    if model.is_setup_method(&frame.declaring_class, &frame.method_name) {
                        any_setup_frame = true;
                    }
                }
                let mut used = false;
                for invocation in &record.invocations {
                    if invocation.id == def.id {
                        used = true;
                    }
                }
                if used {
                    isd_serials.push(def.id.serial);
                    if !tisd.contains(&test) {
                        tisd.push(test.clone());
                    }
                } else {
                    usd_serials.push(def.id.serial);
                    if !tusd.contains(&test) {
                        tusd.push(test.clone());
                    }
                }
            }
        }
        if usd_serials.is_empty() {
            continue;
        }
        let kind = if isd_serials.is_empty() {
            "TU"
        } else if any_setup_frame {
            "UUS"
        } else {
            "UUH"
        };
        out.push(FlatCus {
            location: (
                location.file_path.clone(),
                location.line,
                location.occurrence_index,
            ),
            kind,
            usd_serials,
            isd_serials,
            tusd,
            tisd,
            excluded: oracle_exclusion(model, &location),
        });
    }
    out
}

/// Fresh parse + explicit loop-depth walk, independent of the suite's index.
fn oracle_exclusion(model: &TestSuiteModel, location: &CodeLocation) -> Option<&'static str> {
    let file = model
        .files
        .iter()
        .find(|f| f.rel_path == location.file_path)?;
    let reparsed = parse_file(&file.rel_path, &file.text).unwrap();
    for class in &reparsed.classes {
        for member in &class.members {
            if let MemberKind::Method(method) = &member.kind {
                if let Some(in_loop) =
                    find_when_loopiness(&method.body, location.line, location.occurrence_index, 0)
                {
                    let parameterized = class
                        .annotations
                        .iter()
                        .any(|a| a.name == "Params" && !a.args.is_empty());
                    if in_loop {
                        return Some("loop");
                    }
                    if parameterized {
                        return Some("parameterized");
                    }
                    return None;
                }
            }
        }
    }
    None
}

fn find_when_loopiness(block: &Block, line: u32, occ: u32, loop_depth: usize) -> Option<bool> {
    for stmt in &block.stmts {
        match &stmt.kind {
            StmtKind::When(w) => {
                if stmt.line == line && w.occurrence_index == occ {
                    return Some(loop_depth > 0);
                }
            }
            StmtKind::If {
                then_block,
                else_branch,
                ..
            } => {
                if let Some(found) = find_when_loopiness(then_block, line, occ, loop_depth) {
                    return Some(found);
                }
                if let Some(found) = else_loopiness(else_branch.as_ref(), line, occ, loop_depth) {
                    return Some(found);
                }
            }
            StmtKind::While { body, .. }
            | StmtKind::DoWhile { body, .. }
            | StmtKind::ForEach { body, .. } => {
                if let Some(found) = find_when_loopiness(body, line, occ, loop_depth + 1) {
                    return Some(found);
                }
            }
            _ => {}
        }
    }
    None
}

fn else_loopiness(
    branch: Option<&ElseBranch>,
    line: u32,
    occ: u32,
    loop_depth: usize,
) -> Option<bool> {
    match branch? {
        ElseBranch::Else(block) => find_when_loopiness(block, line, occ, loop_depth),
        ElseBranch::ElseIf(stmt) => {
            if let StmtKind::If {
                then_block,
                else_branch,
                ..
            } = &stmt.kind
            {
                if let Some(found) = find_when_loopiness(then_block, line, occ, loop_depth) {
                    return Some(found);
                }
                return else_loopiness(else_branch.as_ref(), line, occ, loop_depth);
            }
            None
        }
    }
}
