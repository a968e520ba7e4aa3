//! Groups stubbing-definition occurrences by code location and classifies
//! every group that produced at least one unnecessary stubbing:
//!
//! - `TU` (totally unnecessary): no test ever invoked the stubbing.
//! - `UUS` (used-unnecessary, setup): the definition is reached from a setup
//!   method, directly or through helpers, and is used by some tests but not
//!   others.
//! - `UUH` (used-unnecessary, helper): the definition sits in a helper chain
//!   reached only from tests, used in some occurrences and not others.
//!
//! Definitions inside loops or parameterized test classes are excluded from
//! resolution (the dynamic information is not sufficient to edit them
//! soundly) and surface as skipped entries instead.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::suite::{MethodRole, TestSuiteModel};
use crate::trace::{CodeLocation, ExecutionTrace, StackFrame, StubbingDefinitionEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StubbingKind {
    TotallyUnnecessary,
    UsedUnnecessarySetup,
    UsedUnnecessaryHelper,
}

impl StubbingKind {
    pub fn code(&self) -> &'static str {
        match self {
            StubbingKind::TotallyUnnecessary => "TU",
            StubbingKind::UsedUnnecessarySetup => "UUS",
            StubbingKind::UsedUnnecessaryHelper => "UUH",
        }
    }
}

/// All stubbing-definition occurrences sharing one code location, split into
/// the occurrences whose stubbing went unused (`usd_list`) and those whose
/// stubbing was invoked (`isd_list`), with the tests that produced each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedStubbing {
    pub location: CodeLocation,
    pub usd_list: Vec<StubbingDefinitionEvent>,
    pub tusd_list: Vec<(String, String)>,
    pub isd_list: Vec<StubbingDefinitionEvent>,
    pub tisd_list: Vec<(String, String)>,
}

impl GroupedStubbing {
    fn new(location: CodeLocation) -> Self {
        Self {
            location,
            usd_list: Vec::new(),
            tusd_list: Vec::new(),
            isd_list: Vec::new(),
            tisd_list: Vec::new(),
        }
    }

    pub fn occurrences(&self) -> impl Iterator<Item = &StubbingDefinitionEvent> {
        self.usd_list.iter().chain(self.isd_list.iter())
    }
}

/// A grouped stubbing plus its label; the unit of resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedUnnecessaryStubbing {
    pub kind: StubbingKind,
    pub group: GroupedStubbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionReason {
    InsideLoop,
    ParameterizedTestClass,
}

impl ExclusionReason {
    pub fn describe(&self) -> &'static str {
        match self {
            ExclusionReason::InsideLoop => "defined inside a loop",
            ExclusionReason::ParameterizedTestClass => "defined in a parameterized test class",
        }
    }
}

/// A group that would have been classified but is excluded from resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcludedStubbing {
    pub kind: StubbingKind,
    pub reason: ExclusionReason,
    pub group: GroupedStubbing,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Classification {
    /// Sorted by (file, line, occurrence).
    pub cus_set: Vec<ClassifiedUnnecessaryStubbing>,
    pub excluded: Vec<ExcludedStubbing>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyzeError {
    #[error("stack frame {class}.{method} ({file}:{line}) does not resolve against the suite")]
    UnresolvableFrame {
        class: String,
        method: String,
        file: String,
        line: u32,
    },
    #[error("frame {class}.{method} has unexpected role {role:?} in a definition stack")]
    BadFrameRole {
        class: String,
        method: String,
        role: MethodRole,
    },
    #[error("location {0} does not resolve to a stubbing definition statement")]
    LocationNotFound(CodeLocation),
}

/// Partition all definition occurrences in the trace by code location.
/// Groups come out sorted by location; test lists are deduplicated in order
/// of first appearance.
pub fn group_stubbings(trace: &ExecutionTrace) -> Vec<GroupedStubbing> {
    let mut groups: BTreeMap<CodeLocation, GroupedStubbing> = BTreeMap::new();
    for record in &trace.records {
        for def in &record.definitions {
            let group = groups
                .entry(def.location.clone())
                .or_insert_with(|| GroupedStubbing::new(def.location.clone()));
            let test = (record.test_class.clone(), record.test_name.clone());
            let unused = record.unnecessary.iter().any(|u| u.id == def.id);
            if unused {
                group.usd_list.push(def.clone());
                if !group.tusd_list.contains(&test) {
                    group.tusd_list.push(test);
                }
            } else {
                group.isd_list.push(def.clone());
                if !group.tisd_list.contains(&test) {
                    group.tisd_list.push(test);
                }
            }
        }
    }
    groups.into_values().collect()
}

fn resolve_frame(frame: &StackFrame, suite: &TestSuiteModel) -> Result<MethodRole, AnalyzeError> {
    let member_ref = suite
        .find_method(&frame.declaring_class, &frame.method_name)
        .ok_or_else(|| AnalyzeError::UnresolvableFrame {
            class: frame.declaring_class.clone(),
            method: frame.method_name.clone(),
            file: frame.file_path.clone(),
            line: frame.line,
        })?;
    Ok(suite.role_of(suite.member(member_ref)))
}

/// True when any occurrence of the group was created through a setup method,
/// directly or via helper calls.
pub fn through_setup(
    group: &GroupedStubbing,
    suite: &TestSuiteModel,
) -> Result<bool, AnalyzeError> {
    let mut found = false;
    for occurrence in group.occurrences() {
        for (idx, frame) in occurrence.stack.iter().enumerate() {
            let role = resolve_frame(frame, suite)?;
            let is_entry = idx + 1 == occurrence.stack.len();
            if is_entry && !matches!(role, MethodRole::Test | MethodRole::Setup) {
                return Err(AnalyzeError::BadFrameRole {
                    class: frame.declaring_class.clone(),
                    method: frame.method_name.clone(),
                    role,
                });
            }
            if !is_entry && role != MethodRole::Helper {
                return Err(AnalyzeError::BadFrameRole {
                    class: frame.declaring_class.clone(),
                    method: frame.method_name.clone(),
                    role,
                });
            }
            if suite.is_setup_method(&frame.declaring_class, &frame.method_name) {
                found = true;
            }
        }
    }
    Ok(found)
}

/// Reason the location cannot be resolved automatically, if any.
pub fn exclusion_reason(
    location: &CodeLocation,
    suite: &TestSuiteModel,
) -> Result<Option<ExclusionReason>, AnalyzeError> {
    let site = suite
        .resolve_when(location)
        .ok_or_else(|| AnalyzeError::LocationNotFound(location.clone()))?;
    if site.in_loop {
        return Ok(Some(ExclusionReason::InsideLoop));
    }
    if suite.is_parameterized(site.member.class_ref()) {
        return Ok(Some(ExclusionReason::ParameterizedTestClass));
    }
    Ok(None)
}

/// True when the defining statement sits under a loop or inside a
/// parameterized test class.
pub fn is_excluded(location: &CodeLocation, suite: &TestSuiteModel) -> Result<bool, AnalyzeError> {
    Ok(exclusion_reason(location, suite)?.is_some())
}

/// Run the full classification over a trace: label every group with
/// unnecessary occurrences and separate out the excluded ones.
pub fn classify_full(
    trace: &ExecutionTrace,
    suite: &TestSuiteModel,
) -> Result<Classification, AnalyzeError> {
    let mut classification = Classification::default();
    for group in group_stubbings(trace) {
        if group.usd_list.is_empty() {
            // No unnecessary stubbings in the group.
            continue;
        }
        let kind = if group.tisd_list.is_empty() {
            StubbingKind::TotallyUnnecessary
        } else if through_setup(&group, suite)? {
            StubbingKind::UsedUnnecessarySetup
        } else {
            StubbingKind::UsedUnnecessaryHelper
        };
        match exclusion_reason(&group.location, suite)? {
            Some(reason) => classification.excluded.push(ExcludedStubbing {
                kind,
                reason,
                group,
            }),
            None => classification
                .cus_set
                .push(ClassifiedUnnecessaryStubbing { kind, group }),
        }
    }
    Ok(classification)
}

/// The classified set alone, sorted by location.
pub fn classify(
    trace: &ExecutionTrace,
    suite: &TestSuiteModel,
) -> Result<Vec<ClassifiedUnnecessaryStubbing>, AnalyzeError> {
    Ok(classify_full(trace, suite)?.cus_set)
}

/// One line per classified stubbing:
/// `kind<TAB>file:line:occ<TAB>tusd size<TAB>tisd size`.
pub fn classification_dump(cus_set: &[ClassifiedUnnecessaryStubbing]) -> String {
    let mut out = String::new();
    for cus in cus_set {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            cus.kind.code(),
            cus.group.location,
            cus.group.tusd_list.len(),
            cus.group.tisd_list.len()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{run_suite, SuiteRun};
    use crate::shim::TraceSink;
    use std::path::PathBuf;

    fn build(sources: &[(&str, &str)]) -> (TestSuiteModel, SuiteRun) {
        let model = TestSuiteModel::from_sources(
            PathBuf::from("."),
            sources
                .iter()
                .map(|(p, s)| (p.to_string(), s.to_string()))
                .collect(),
        )
        .unwrap();
        let run = run_suite(&model, TraceSink::Memory).unwrap();
        assert!(run.all_passed(), "{:?}", run.failures());
        (model, run)
    }

    const MACRO_TEST: &str = "class MacroTest {\n\
        \x20 @Test\n\
        \x20 void testReverse() {\n\
        \x20   Build fail = createBuild(\"FAILURE\", 41, \"failed\");\n\
        \x20   Build curr = createBuild(\"SUCCESS\", 42, \"ok\");\n\
        \x20   when(fail.getNextBuild()).thenReturn(curr);\n\
        \x20   assertEq(fail.getResult(), \"FAILURE\");\n\
        \x20   assertEq(curr.getChangeSets(), list(\"c: ok\"));\n\
        \x20   assertEq(fail.getChangeSets(), list(\"c: failed\"));\n\
        \x20   assertEq(curr.getNumber(), 42);\n\
        \x20   assertEq(fail.getNumber(), 41);\n\
        \x20 }\n\
        \x20 @Test\n\
        \x20 void testPlain() {\n\
        \x20   Build b = createBuild(\"SUCCESS\", 7, \"plain\");\n\
        \x20   assertEq(b.getResult(), \"SUCCESS\");\n\
        \x20   assertEq(b.getChangeSets(), list(\"c: plain\"));\n\
        \x20   assertEq(b.getNumber(), 7);\n\
        \x20 }\n\
        \x20 Build createBuild(String result, int number, String message) {\n\
        \x20   Build b = mock(Build);\n\
        \x20   when(b.getResult()).thenReturn(result);\n\
        \x20   String changes = \"c: \" + message;\n\
        \x20   when(b.getChangeSet()).thenReturn(changes);\n\
        \x20   when(b.getChangeSets()).thenReturn(list(changes));\n\
        \x20   when(b.getNumber()).thenReturn(number);\n\
        \x20   return b;\n\
        \x20 }\n\
        }\n";

    #[test]
    fn empty_trace_groups_to_nothing() {
        assert!(group_stubbings(&ExecutionTrace::default()).is_empty());
    }

    #[test]
    fn motivating_test_alone_groups_get_result_one_used_one_unused() {
        let (_, run) = build(&[("MacroTest.tst", MACRO_TEST)]);
        let single = ExecutionTrace {
            records: vec![run.trace.records[0].clone()],
        };
        let groups = group_stubbings(&single);
        let get_result = groups
            .iter()
            .find(|g| g.usd_list.first().map(|d| d.stubbed_method.as_str()) == Some("getResult"))
            .unwrap();
        assert_eq!(get_result.usd_list.len(), 1);
        assert_eq!(get_result.isd_list.len(), 1);
        assert_eq!(get_result.tusd_list, get_result.tisd_list);
        assert_eq!(get_result.tusd_list.len(), 1);
    }

    #[test]
    fn partition_invariant_holds() {
        let (_, run) = build(&[("MacroTest.tst", MACRO_TEST)]);
        let total_defs: usize = run.trace.records.iter().map(|r| r.definitions.len()).sum();
        let groups = group_stubbings(&run.trace);
        let grouped: usize = groups.iter().map(|g| g.usd_list.len() + g.isd_list.len()).sum();
        assert_eq!(total_defs, grouped);
    }

    #[test]
    fn motivating_corpus_classifies_tu_tu_uuh() {
        let (model, run) = build(&[("MacroTest.tst", MACRO_TEST)]);
        let cus_set = classify(&run.trace, &model).unwrap();
        let labels: Vec<(&str, &str)> = cus_set
            .iter()
            .map(|c| {
                (
                    c.group.usd_list[0].stubbed_method.as_str(),
                    c.kind.code(),
                )
            })
            .collect();
        assert_eq!(
            labels,
            vec![
                ("getNextBuild", "TU"),
                ("getResult", "UUH"),
                ("getChangeSet", "TU")
            ]
        );
        // getChangeSet is unnecessary for every test that runs the helper.
        let change_set = &cus_set[2];
        assert!(change_set.group.isd_list.is_empty());
        assert_eq!(change_set.group.tusd_list.len(), 2);
    }

    #[test]
    fn fully_used_suite_has_empty_cus_set() {
        let (model, run) = build(&[(
            "CleanTest.tst",
            "class CleanTest {\n\
             \x20 @Test\n\
             \x20 void testA() {\n\
             \x20   Widget w = mock(Widget);\n\
             \x20   when(w.spin()).thenReturn(1);\n\
             \x20   assertEq(w.spin(), 1);\n\
             \x20 }\n\
             }\n",
        )]);
        assert!(classify(&run.trace, &model).unwrap().is_empty());
    }

    #[test]
    fn setup_defined_partially_used_is_uus() {
        let (model, run) = build(&[(
            "SetupTest.tst",
            "class SetupTest {\n\
             \x20 Widget shared;\n\
             \x20 @Setup\n\
             \x20 void init() {\n\
             \x20   shared = mock(Widget);\n\
             \x20   when(shared.speed()).thenReturn(5);\n\
             \x20 }\n\
             \x20 @Test\n\
             \x20 void testUses() {\n\
             \x20   assertEq(shared.speed(), 5);\n\
             \x20 }\n\
             \x20 @Test\n\
             \x20 void testIgnores() {\n\
             \x20   assertEq(shared.name(), null);\n\
             \x20 }\n\
             }\n",
        )]);
        let cus_set = classify(&run.trace, &model).unwrap();
        assert_eq!(cus_set.len(), 1);
        assert_eq!(cus_set[0].kind, StubbingKind::UsedUnnecessarySetup);
        assert_eq!(
            cus_set[0].group.tusd_list,
            vec![("SetupTest".to_string(), "testIgnores".to_string())]
        );
    }

    #[test]
    fn setup_stubbing_used_by_three_of_five_tests_is_uus() {
        // Brute force on this table: speed used by t1/t2/t3, wasted by
        // t4/t5; name used everywhere.
        let src = "class FiveTest {\n\
            \x20 Widget shared;\n\
            \x20 @Setup\n\
            \x20 void init() {\n\
            \x20   shared = mock(Widget);\n\
            \x20   when(shared.speed()).thenReturn(5);\n\
            \x20   when(shared.name()).thenReturn(\"w\");\n\
            \x20 }\n\
            \x20 @Test\n\
            \x20 void t1() {\n\
            \x20   assertEq(shared.speed(), 5);\n\
            \x20   assertEq(shared.name(), \"w\");\n\
            \x20 }\n\
            \x20 @Test\n\
            \x20 void t2() {\n\
            \x20   assertEq(shared.speed(), 5);\n\
            \x20   assertEq(shared.name(), \"w\");\n\
            \x20 }\n\
            \x20 @Test\n\
            \x20 void t3() {\n\
            \x20   assertEq(shared.speed(), 5);\n\
            \x20   assertEq(shared.name(), \"w\");\n\
            \x20 }\n\
            \x20 @Test\n\
            \x20 void t4() {\n\
            \x20   assertEq(shared.name(), \"w\");\n\
            \x20 }\n\
            \x20 @Test\n\
            \x20 void t5() {\n\
            \x20   assertEq(shared.name(), \"w\");\n\
            \x20 }\n\
            }\n";
        let (model, run) = build(&[("FiveTest.tst", src)]);
        let cus_set = classify(&run.trace, &model).unwrap();
        assert_eq!(cus_set.len(), 1);
        assert_eq!(cus_set[0].kind, StubbingKind::UsedUnnecessarySetup);
        assert_eq!(cus_set[0].group.tusd_list.len(), 2);
        assert_eq!(cus_set[0].group.tisd_list.len(), 3);
    }

    #[test]
    fn setup_involvement_anywhere_wins_over_helper() {
        let src = "class ChainTest {\n\
            \x20 Widget fromSetup;\n\
            \x20 @Setup\n\
            \x20 void init() {\n\
            \x20   fromSetup = build(8);\n\
            \x20 }\n\
            \x20 @Test\n\
            \x20 void testSetupSide() {\n\
            \x20   assertEq(fromSetup.speed(), 8);\n\
            \x20   Widget own = build(3);\n\
            \x20   assertEq(own.speed(), 3);\n\
            \x20   assertEq(own.label(), \"w\");\n\
            \x20 }\n\
            \x20 @Test\n\
            \x20 void testOther() {\n\
            \x20   assertEq(fromSetup.speed(), 8);\n\
            \x20   assertEq(fromSetup.label(), \"w\");\n\
            \x20 }\n\
            \x20 Widget build(int speed) {\n\
            \x20   Widget w = mock(Widget);\n\
            \x20   when(w.speed()).thenReturn(speed);\n\
            \x20   when(w.label()).thenReturn(\"w\");\n\
            \x20   return w;\n\
            \x20 }\n\
            }\n";
        let (model, run) = build(&[("ChainTest.tst", src)]);
        let cus_set = classify(&run.trace, &model).unwrap();
        // label(): used via the setup path in testOther and via the in-test
        // path in testSetupSide's own widget, unnecessary for the setup
        // widget of testSetupSide. Any setup involvement makes it UUS.
        assert_eq!(cus_set.len(), 1);
        assert_eq!(cus_set[0].kind, StubbingKind::UsedUnnecessarySetup);
        let group = &cus_set[0].group;
        assert!(through_setup(group, &model).unwrap());
    }

    #[test]
    fn helper_only_stack_is_not_through_setup() {
        let (model, run) = build(&[("MacroTest.tst", MACRO_TEST)]);
        let cus_set = classify(&run.trace, &model).unwrap();
        let uuh = cus_set
            .iter()
            .find(|c| c.kind == StubbingKind::UsedUnnecessaryHelper)
            .unwrap();
        assert!(!through_setup(&uuh.group, &model).unwrap());
    }

    #[test]
    fn loop_and_parameterized_locations_are_excluded() {
        let loop_src = "class LoopTest {\n\
            \x20 @Test\n\
            \x20 void testLoop() {\n\
            \x20   Widget w = mock(Widget);\n\
            \x20   for (int i : range(0, 2)) {\n\
            \x20     when(w.poll()).thenReturn(i);\n\
            \x20   }\n\
            \x20   assertEq(w.poll(), 1);\n\
            \x20 }\n\
            \x20 @Test\n\
            \x20 void testStraight() {\n\
            \x20   Widget w = mock(Widget);\n\
            \x20   when(w.id()).thenReturn(9);\n\
            \x20   assertEq(w.name(), null);\n\
            \x20 }\n\
            }\n";
        let param_src = "@Params(1, 2)\n\
            class ParamTest {\n\
            \x20 @Test\n\
            \x20 void testScale() {\n\
            \x20   Widget w = mock(Widget);\n\
            \x20   when(w.factor()).thenReturn(param);\n\
            \x20   if (param > 1) {\n\
            \x20     assertEq(w.factor(), 2);\n\
            \x20   }\n\
            \x20 }\n\
            }\n";
        let (model, run) = build(&[("LoopTest.tst", loop_src), ("ParamTest.tst", param_src)]);
        let classification = classify_full(&run.trace, &model).unwrap();
        // Only the straight-line TU stays classified.
        assert_eq!(classification.cus_set.len(), 1);
        assert_eq!(
            classification.cus_set[0].kind,
            StubbingKind::TotallyUnnecessary
        );
        let excluded: Vec<(&str, ExclusionReason)> = classification
            .excluded
            .iter()
            .map(|e| (e.group.usd_list[0].stubbed_method.as_str(), e.reason))
            .collect();
        assert_eq!(
            excluded,
            vec![
                ("poll", ExclusionReason::InsideLoop),
                ("factor", ExclusionReason::ParameterizedTestClass)
            ]
        );
        assert!(is_excluded(&classification.excluded[0].group.location, &model).unwrap());
    }

    #[test]
    fn unresolvable_frame_is_an_error() {
        let (model, run) = build(&[("MacroTest.tst", MACRO_TEST)]);
        let mut trace = run.trace.clone();
        trace.records[0].definitions[0].stack[0].method_name = "ghost".to_string();
        let bad_id = trace.records[0].definitions[0].id.clone();
        for u in &mut trace.records[0].unnecessary {
            if u.id == bad_id {
                u.stack[0].method_name = "ghost".to_string();
            }
        }
        let err = classify(&trace, &model).unwrap_err();
        assert!(matches!(err, AnalyzeError::UnresolvableFrame { .. }), "{err}");
    }

    #[test]
    fn dump_format_is_tab_separated() {
        let (model, run) = build(&[("MacroTest.tst", MACRO_TEST)]);
        let cus_set = classify(&run.trace, &model).unwrap();
        let dump = classification_dump(&cus_set);
        let first = dump.lines().next().unwrap();
        let fields: Vec<&str> = first.split('\t').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0], "TU");
        assert!(fields[1].starts_with("MacroTest.tst:"));
    }
}
