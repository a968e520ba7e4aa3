//! End-to-end behavior of the three resolution strategies over in-memory
//! suites: run, classify, resolve, re-run, and check both the edited text
//! and the re-detected state.

use std::collections::BTreeMap;
use std::path::PathBuf;

use stubscrub_core::classify::{classify, classify_full, ClassifiedUnnecessaryStubbing};
use stubscrub_core::lang::lexer::code_lines;
use stubscrub_core::pipeline::{invocation_multisets, remap_moved_tests};
use stubscrub_core::refactor::{resolve, ResolveOutcome};
use stubscrub_core::report::EntryStatus;
use stubscrub_core::runner::{run_suite, SuiteRun};
use stubscrub_core::shim::TraceSink;
use stubscrub_core::suite::TestSuiteModel;

fn model_of(sources: &[(&str, &str)]) -> TestSuiteModel {
    TestSuiteModel::from_sources(
        PathBuf::from("."),
        sources
            .iter()
            .map(|(p, s)| (p.to_string(), s.to_string()))
            .collect(),
    )
    .unwrap()
}

fn model_of_map(map: &BTreeMap<String, String>) -> TestSuiteModel {
    TestSuiteModel::from_sources(
        PathBuf::from("."),
        map.iter().map(|(p, s)| (p.clone(), s.clone())).collect(),
    )
    .unwrap()
}

fn run_ok(model: &TestSuiteModel) -> SuiteRun {
    let run = run_suite(model, TraceSink::Memory).unwrap();
    assert!(run.all_passed(), "suite must pass: {:?}", run.failures());
    run
}

/// Run, classify, resolve, and sanity-check that the updated suite passes.
fn full_cycle(
    sources: &[(&str, &str)],
    keep_setup: bool,
) -> (
    TestSuiteModel,
    SuiteRun,
    Vec<ClassifiedUnnecessaryStubbing>,
    ResolveOutcome,
    SuiteRun,
) {
    let model = model_of(sources);
    let run = run_ok(&model);
    let cus_set = classify(&run.trace, &model).unwrap();
    let outcome = resolve(&model, &cus_set, keep_setup).unwrap();
    assert_eq!(outcome.error_count, 0, "entries: {:#?}", outcome.entries);
    let updated_model = model_of_map(&outcome.updated);
    let updated_run = run_ok(&updated_model);
    (model, run, cus_set, outcome, updated_run)
}

fn assert_no_resolvable_left(updated: &BTreeMap<String, String>) {
    let model = model_of_map(updated);
    let run = run_ok(&model);
    let classification = classify_full(&run.trace, &model).unwrap();
    assert!(
        classification.cus_set.is_empty(),
        "re-detection still finds: {:?}",
        classification
            .cus_set
            .iter()
            .map(|c| (c.kind.code(), c.group.location.to_string()))
            .collect::<Vec<_>>()
    );
}

// --- TU: code removal ---------------------------------------------------------

const TU_SINGLE: &str = "class QueueTest {\n\
    @Test\n\
    void testDepth() {\n\
        Queue q = mock(Queue);\n\
        when(q.depth()).thenReturn(5);\n\
        when(q.name()).thenReturn(\"jobs\");\n\
        assertEq(q.depth(), 5);\n\
    }\n\
}\n";

#[test]
fn tu_removal_deletes_exactly_the_statement_line() {
    let (_, _, cus_set, outcome, _) = full_cycle(&[("QueueTest.tst", TU_SINGLE)], false);
    assert_eq!(cus_set.len(), 1);
    assert_eq!(cus_set[0].kind.code(), "TU");
    let updated = &outcome.updated["QueueTest.tst"];
    let expected = TU_SINGLE.replace("when(q.name()).thenReturn(\"jobs\");\n", "");
    assert_eq!(updated, &expected);
    assert_no_resolvable_left(&outcome.updated);
}

#[test]
fn tu_removal_takes_orphaned_pure_local_along() {
    let src = "class MailTest {\n\
        @Test\n\
        void testPeek() {\n\
            Mailbox m = mock(Mailbox);\n\
            String greeting = \"hello\";\n\
            when(m.peek()).thenReturn(greeting);\n\
            assertEq(m.size(), null);\n\
        }\n\
    }\n";
    let (_, _, _, outcome, _) = full_cycle(&[("MailTest.tst", src)], false);
    let updated = &outcome.updated["MailTest.tst"];
    assert!(!updated.contains("greeting"), "{updated}");
    assert!(updated.contains("assertEq(m.size(), null);"));
    assert!(outcome
        .notes
        .iter()
        .any(|n| n.contains("removed a local now unused")));
}

#[test]
fn tu_removal_keeps_local_with_helper_initializer() {
    let src = "class FeedTest {\n\
        @Test\n\
        void testFeed() {\n\
            Feed f = mock(Feed);\n\
            String tag = label();\n\
            when(f.tag()).thenReturn(tag);\n\
            assertEq(f.size(), null);\n\
        }\n\
        String label() {\n\
            return \"x\";\n\
        }\n\
    }\n";
    let (_, _, _, outcome, _) = full_cycle(&[("FeedTest.tst", src)], false);
    let updated = &outcome.updated["FeedTest.tst"];
    assert!(updated.contains("String tag = label();"), "{updated}");
    assert!(!updated.contains("when(f.tag())"));
}

#[test]
fn tu_removal_keeps_emptied_helper() {
    let src = "class StubOnlyTest {\n\
        @Test\n\
        void testIgnores() {\n\
            Widget w = mock(Widget);\n\
            prime(w);\n\
            assertEq(w.size(), null);\n\
        }\n\
        void prime(Widget w) {\n\
            when(w.speed()).thenReturn(3);\n\
        }\n\
    }\n";
    let (_, _, _, outcome, _) = full_cycle(&[("StubOnlyTest.tst", src)], false);
    let updated = &outcome.updated["StubOnlyTest.tst"];
    assert!(updated.contains("void prime(Widget w) {"), "{updated}");
    assert!(!updated.contains("when(w.speed())"));
    assert_no_resolvable_left(&outcome.updated);
}

#[test]
fn two_tu_removals_drop_exactly_two_lines() {
    let src = "class PairTest {\n\
        @Test\n\
        void testOne() {\n\
            Widget w = mock(Widget);\n\
            when(w.alpha()).thenReturn(1);\n\
            assertEq(w.size(), null);\n\
        }\n\
        @Test\n\
        void testTwo() {\n\
            Widget w = mock(Widget);\n\
            when(w.beta()).thenReturn(2);\n\
            assertEq(w.size(), null);\n\
        }\n\
    }\n";
    let (_, _, cus_set, outcome, _) = full_cycle(&[("PairTest.tst", src)], false);
    assert_eq!(cus_set.len(), 2);
    let loc_before = code_lines(src).unwrap().len();
    let loc_after = code_lines(&outcome.updated["PairTest.tst"]).unwrap().len();
    assert_eq!(loc_after, loc_before - 2);
}

// --- UUH: method duplication and removal ---------------------------------------

const MACRO_SUITE: &str = "class MacroTest {\n\
    @Test\n\
    void testReverse() {\n\
        Build fail = createBuild(\"FAILURE\", 41, \"failed\");\n\
        Build curr = createBuild(\"SUCCESS\", 42, \"ok\");\n\
        when(fail.getNextBuild()).thenReturn(curr);\n\
        assertEq(fail.getResult(), \"FAILURE\");\n\
        assertEq(curr.getChangeSets(), list(\"c: ok\"));\n\
        assertEq(fail.getChangeSets(), list(\"c: failed\"));\n\
        assertEq(curr.getNumber(), 42);\n\
        assertEq(fail.getNumber(), 41);\n\
    }\n\
    @Test\n\
    void testPlain() {\n\
        Build b = createBuild(\"SUCCESS\", 7, \"plain\");\n\
        assertEq(b.getResult(), \"SUCCESS\");\n\
        assertEq(b.getChangeSets(), list(\"c: plain\"));\n\
        assertEq(b.getNumber(), 7);\n\
    }\n\
    Build createBuild(String result, int number, String message) {\n\
        Build b = mock(Build);\n\
        when(b.getResult()).thenReturn(result);\n\
        String changes = \"c: \" + message;\n\
        when(b.getChangeSet()).thenReturn(changes);\n\
        when(b.getChangeSets()).thenReturn(list(changes));\n\
        when(b.getNumber()).thenReturn(number);\n\
        return b;\n\
    }\n\
}\n";

#[test]
fn uuh_duplicates_helper_and_retargets_only_the_unnecessary_call() {
    let (_, run, cus_set, outcome, updated_run) =
        full_cycle(&[("MacroTest.tst", MACRO_SUITE)], false);
    assert_eq!(cus_set.len(), 3); // getNextBuild TU, getResult UUH, getChangeSet TU
    let updated = &outcome.updated["MacroTest.tst"];

    // The second call in testReverse goes to the duplicate; the first call
    // and testPlain keep the original.
    assert!(updated.contains("Build fail = createBuild(\"FAILURE\", 41, \"failed\");"));
    assert!(updated.contains("Build curr = createBuild_nostub1(\"SUCCESS\", 42, \"ok\");"));
    assert!(updated.contains("Build b = createBuild(\"SUCCESS\", 7, \"plain\");"));

    // The duplicate drops getResult (its own pruning) and getChangeSet (the
    // in-place TU removal applies to copies too).
    let dup_start = updated.find("Build createBuild_nostub1(").unwrap();
    let dup = &updated[dup_start..];
    assert!(!dup.contains("getResult"));
    assert!(!dup.contains("getChangeSet()"));
    assert!(dup.contains("when(b.getChangeSets()).thenReturn(list(changes));"));

    // The original helper keeps getResult but loses the TU getChangeSet.
    let orig_start = updated.find("Build createBuild(").unwrap();
    let orig = &updated[orig_start..dup_start];
    assert!(orig.contains("when(b.getResult()).thenReturn(result);"));
    assert!(!orig.contains("when(b.getChangeSet()).thenReturn(changes);"));

    // getNextBuild stubbing is gone from the test body.
    assert!(!updated.contains("getNextBuild"));

    assert_no_resolvable_left(&outcome.updated);

    // Invocation multisets for used stubbings are unchanged.
    assert_eq!(
        invocation_multisets(&run.trace),
        remap_moved_tests(invocation_multisets(&updated_run.trace), &outcome.moved_tests)
    );
}

#[test]
fn uuh_chain_duplicates_each_method_once_and_retargets_the_test_call() {
    let src = "class RouterTest {\n\
        @Test\n\
        void testPrimaryRoute() {\n\
            Router r = buildRouter(\"primary\");\n\
            assertEq(r.getName(), \"primary\");\n\
            assertEq(r.getTimeout(), 30);\n\
        }\n\
        @Test\n\
        void testFallbackRoute() {\n\
            Router r = buildRouter(\"fallback\");\n\
            assertEq(r.getName(), \"fallback\");\n\
        }\n\
        Router buildRouter(String name) {\n\
            Router r = makeDouble(name);\n\
            return r;\n\
        }\n\
        Router makeDouble(String name) {\n\
            Router r = mock(Router);\n\
            when(r.getName()).thenReturn(name);\n\
            when(r.getTimeout()).thenReturn(30);\n\
            return r;\n\
        }\n\
    }\n";
    let (_, _, cus_set, outcome, _) = full_cycle(&[("RouterTest.tst", src)], false);
    assert_eq!(cus_set.len(), 1);
    assert_eq!(cus_set[0].kind.code(), "UUH");
    let updated = &outcome.updated["RouterTest.tst"];
    // Both chain methods are duplicated once; only the fallback test call is
    // retargeted.
    assert!(updated.contains("Router buildRouter_nostub1(String name) {"));
    assert!(updated.contains("Router makeDouble_nostub1(String name) {"));
    assert!(updated.contains("Router r = buildRouter(\"primary\");"));
    assert!(updated.contains("Router r = buildRouter_nostub1(\"fallback\");"));
    let dup_start = updated.find("Router buildRouter_nostub1").unwrap();
    let dup_end = updated[dup_start..].find('}').unwrap() + dup_start;
    assert!(updated[dup_start..dup_end].contains("makeDouble_nostub1(name)"));
    assert_no_resolvable_left(&outcome.updated);
}

#[test]
fn uuh_variant_name_skips_taken_names() {
    let src = "class TakenTest {\n\
        @Test\n\
        void testUses() {\n\
            Widget w = make(1);\n\
            assertEq(w.speed(), 1);\n\
            assertEq(w.size(), 9);\n\
        }\n\
        @Test\n\
        void testHalf() {\n\
            Widget w = make(2);\n\
            assertEq(w.size(), 9);\n\
        }\n\
        Widget make(int s) {\n\
            Widget w = mock(Widget);\n\
            when(w.speed()).thenReturn(s);\n\
            when(w.size()).thenReturn(9);\n\
            return w;\n\
        }\n\
        void make_nostub1() {\n\
            int unused = 0;\n\
        }\n\
    }\n";
    let (_, _, _, outcome, _) = full_cycle(&[("TakenTest.tst", src)], false);
    let updated = &outcome.updated["TakenTest.tst"];
    assert!(updated.contains("Widget make_nostub2(int s) {"), "{updated}");
    assert_no_resolvable_left(&outcome.updated);
}

// --- UUS: class duplication and removal -----------------------------------------

const SETUP_SUITE: &str = "class SetupTest {\n\
    Connection conn;\n\
\n\
    @Setup\n\
    void init() {\n\
        conn = mock(Connection);\n\
        when(conn.getHost()).thenReturn(\"localhost\");\n\
        when(conn.getPort()).thenReturn(5672);\n\
    }\n\
\n\
    @Teardown\n\
    void done() {\n\
        conn = null;\n\
    }\n\
\n\
    @Test\n\
    void testHost() {\n\
        assertEq(conn.getHost(), \"localhost\");\n\
        assertEq(conn.getPort(), 5672);\n\
    }\n\
\n\
    @Test\n\
    void testPort() {\n\
        assertEq(conn.getHost(), \"localhost\");\n\
        assertEq(conn.getPort(), 5672);\n\
    }\n\
\n\
    @Test\n\
    void testOffline() {\n\
        assertEq(conn.getHost(), \"localhost\");\n\
        assertEq(conn.getState(), null);\n\
    }\n\
}\n";

#[test]
fn uus_moves_nonusing_test_into_class_with_pruned_setup() {
    let (_, run, cus_set, outcome, updated_run) =
        full_cycle(&[("SetupTest.tst", SETUP_SUITE)], false);
    assert_eq!(cus_set.len(), 1);
    assert_eq!(cus_set[0].kind.code(), "UUS");

    let original = &outcome.updated["SetupTest.tst"];
    assert!(!original.contains("testOffline"), "moved test left behind");
    assert!(original.contains("when(conn.getPort()).thenReturn(5672);"));
    assert!(original.contains("testHost"));
    assert!(original.contains("testPort"));

    let new_class = &outcome.updated["SetupTest_Stubscrub1.tst"];
    assert!(new_class.contains("class SetupTest_Stubscrub1 {"));
    assert!(new_class.contains("Connection conn;"), "field copied");
    assert!(new_class.contains("when(conn.getHost()).thenReturn(\"localhost\");"));
    assert!(
        !new_class.contains("getPort"),
        "pruned setup still stubs getPort:\n{new_class}"
    );
    assert!(new_class.contains("void done() {"), "teardown copied");
    assert!(new_class.contains("void testOffline() {"));

    assert_eq!(outcome.moved_tests.len(), 1);
    assert_eq!(outcome.moved_tests[0].test, "testOffline");

    assert_no_resolvable_left(&outcome.updated);
    assert_eq!(
        invocation_multisets(&run.trace),
        remap_moved_tests(invocation_multisets(&updated_run.trace), &outcome.moved_tests)
    );
}

#[test]
fn uus_same_unnecessary_subset_shares_one_new_class() {
    let src = "class SharedTest {\n\
        Channel chan;\n\
\n\
        @Setup\n\
        void init() {\n\
            chan = mock(Channel);\n\
            when(chan.getId()).thenReturn(7);\n\
            when(chan.getLabel()).thenReturn(\"events\");\n\
            when(chan.getMode()).thenReturn(\"push\");\n\
        }\n\
\n\
        @Test\n\
        void testFull() {\n\
            assertEq(chan.getId(), 7);\n\
            assertEq(chan.getLabel(), \"events\");\n\
            assertEq(chan.getMode(), \"push\");\n\
        }\n\
\n\
        @Test\n\
        void testIdOnlyA() {\n\
            assertEq(chan.getId(), 7);\n\
            assertEq(chan.getMode(), \"push\");\n\
        }\n\
\n\
        @Test\n\
        void testIdOnlyB() {\n\
            assertEq(chan.getId(), 7);\n\
            assertEq(chan.getMode(), \"push\");\n\
        }\n\
    }\n";
    let (_, _, cus_set, outcome, _) = full_cycle(&[("SharedTest.tst", src)], false);
    // Only getLabel is unnecessary (for both IdOnly tests): one cus, one new
    // class holding both tests.
    assert_eq!(cus_set.len(), 1);
    let new_paths: Vec<&String> = outcome
        .updated
        .keys()
        .filter(|p| p.contains("Stubscrub"))
        .collect();
    assert_eq!(new_paths, vec!["SharedTest_Stubscrub1.tst"]);
    let new_class = &outcome.updated["SharedTest_Stubscrub1.tst"];
    assert!(new_class.contains("testIdOnlyA"));
    assert!(new_class.contains("testIdOnlyB"));
    assert!(!new_class.contains("getLabel"));
    assert_no_resolvable_left(&outcome.updated);
}

#[test]
fn uus_distinct_subsets_split_into_minimal_classes() {
    let src = "class CacheTest {\n\
        Cache cache;\n\
\n\
        @Setup\n\
        void prepare() {\n\
            cache = mock(Cache);\n\
            when(cache.capacity()).thenReturn(64);\n\
            when(cache.evictionPolicy()).thenReturn(\"lru\");\n\
            when(cache.isShared()).thenReturn(true);\n\
        }\n\
\n\
        @Test\n\
        void testAll() {\n\
            assertEq(cache.capacity(), 64);\n\
            assertEq(cache.evictionPolicy(), \"lru\");\n\
            assertTrue(cache.isShared());\n\
        }\n\
\n\
        @Test\n\
        void testNoPolicy() {\n\
            assertEq(cache.capacity(), 64);\n\
            assertTrue(cache.isShared());\n\
        }\n\
\n\
        @Test\n\
        void testCapacityOnly() {\n\
            assertEq(cache.capacity(), 64);\n\
        }\n\
    }\n";
    let (_, _, cus_set, outcome, _) = full_cycle(&[("CacheTest.tst", src)], false);
    // evictionPolicy unnecessary for {testNoPolicy, testCapacityOnly};
    // isShared unnecessary for {testCapacityOnly}: two signatures.
    assert_eq!(cus_set.len(), 2);
    let new_paths: Vec<&String> = outcome
        .updated
        .keys()
        .filter(|p| p.contains("Stubscrub"))
        .collect();
    assert_eq!(
        new_paths,
        vec!["CacheTest_Stubscrub1.tst", "CacheTest_Stubscrub2.tst"]
    );
    let one = &outcome.updated["CacheTest_Stubscrub1.tst"];
    let two = &outcome.updated["CacheTest_Stubscrub2.tst"];
    // Signature {evictionPolicy} holds testNoPolicy; {evictionPolicy,
    // isShared} holds testCapacityOnly.
    assert!(one.contains("testNoPolicy"));
    assert!(!one.contains("evictionPolicy"));
    assert!(one.contains("isShared"));
    assert!(two.contains("testCapacityOnly"));
    assert!(!two.contains("evictionPolicy"));
    assert!(!two.contains("isShared"));
    assert_no_resolvable_left(&outcome.updated);
}

const CHAIN_SETUP_SUITE: &str = "class ChainSetupTest {\n\
    Session session;\n\
\n\
    @Setup\n\
    void init() {\n\
        session = prepareSession(\"agent\");\n\
    }\n\
\n\
    @Test\n\
    void testAgentName() {\n\
        assertEq(session.getAgent(), \"agent\");\n\
        assertEq(session.getRegion(), \"us-east\");\n\
        assertEq(session.getRetries(), 3);\n\
    }\n\
\n\
    @Test\n\
    void testOfflineAgent() {\n\
        assertEq(session.getAgent(), \"agent\");\n\
    }\n\
\n\
    Session prepareSession(String name) {\n\
        Session s = mock(Session);\n\
        when(s.getAgent()).thenReturn(name);\n\
        when(s.getRegion()).thenReturn(\"us-east\");\n\
        when(s.getRetries()).thenReturn(3);\n\
        return s;\n\
    }\n\
}\n";

#[test]
fn uus_chain_copies_setup_and_duplicates_helper_in_new_class() {
    let (_, _, cus_set, outcome, _) =
        full_cycle(&[("ChainSetupTest.tst", CHAIN_SETUP_SUITE)], false);
    // getRegion and getRetries are unnecessary for testOfflineAgent: same
    // signature, one new class.
    assert_eq!(cus_set.len(), 2);
    assert!(cus_set.iter().all(|c| c.kind.code() == "UUS"));

    let original = &outcome.updated["ChainSetupTest.tst"];
    assert!(original.contains("prepareSession(\"agent\")"));
    assert!(original.contains("when(s.getRegion())"));
    assert!(!original.contains("testOfflineAgent"));

    let new_class = &outcome.updated["ChainSetupTest_Stubscrub1.tst"];
    assert!(new_class.contains("session = prepareSession_nostub1(\"agent\");"));
    assert!(new_class.contains("Session prepareSession_nostub1(String name) {"));
    assert!(!new_class.contains("getRegion"));
    assert!(!new_class.contains("getRetries"));
    assert!(new_class.contains("when(s.getAgent()).thenReturn(name);"));
    // The original helper is only copied if something still references it.
    assert!(!new_class.contains("Session prepareSession(String name)"));
    assert_no_resolvable_left(&outcome.updated);
}

// --- modes and edge cases --------------------------------------------------------

#[test]
fn empty_cus_set_is_byte_identical_with_empty_entries() {
    let src = "class CleanTest {\n\
        @Test\n\
        void testA() {\n\
            Widget w = mock(Widget);\n\
            when(w.spin()).thenReturn(1);\n\
            assertEq(w.spin(), 1);\n\
        }\n\
    }\n";
    let model = model_of(&[("CleanTest.tst", src)]);
    let outcome = resolve(&model, &[], false).unwrap();
    assert_eq!(outcome.updated["CleanTest.tst"], src);
    assert!(outcome.entries.is_empty());
    assert!(outcome.file_edits.is_empty());
}

#[test]
fn keep_setup_mode_skips_uus_and_matches_default_elsewhere() {
    let sources = &[
        ("MacroTest.tst", MACRO_SUITE),
        ("SetupTest.tst", SETUP_SUITE),
    ];
    let model = model_of(sources);
    let run = run_ok(&model);
    let cus_set = classify(&run.trace, &model).unwrap();
    let default_mode = resolve(&model, &cus_set, false).unwrap();
    let keep_mode = resolve(&model, &cus_set, true).unwrap();

    // UUS entries are skipped with a reason, nothing else changes status.
    for (d, k) in default_mode.entries.iter().zip(&keep_mode.entries) {
        assert_eq!(d.location, k.location);
        if d.kind == "UUS" {
            assert_eq!(k.status, EntryStatus::Skipped);
            assert!(k.reason.as_deref().unwrap().contains("keep-setup"));
        } else {
            assert_eq!(d, k, "non-UUS entries must be identical across modes");
        }
    }
    // The keep-mode suite equals the default-mode suite minus the UUS edits:
    // the macro file is identical, the setup file untouched, no new class.
    assert_eq!(
        keep_mode.updated["MacroTest.tst"],
        default_mode.updated["MacroTest.tst"]
    );
    assert_eq!(keep_mode.updated["SetupTest.tst"], SETUP_SUITE);
    assert!(keep_mode
        .updated
        .keys()
        .all(|p| !p.contains("Stubscrub")));
    assert!(default_mode
        .updated
        .contains_key("SetupTest_Stubscrub1.tst"));

    // Keep-mode output still passes and re-detects only the skipped UUS.
    let keep_model = model_of_map(&keep_mode.updated);
    let keep_run = run_ok(&keep_model);
    let redetected = classify(&keep_run.trace, &keep_model).unwrap();
    assert_eq!(redetected.len(), 1);
    assert_eq!(redetected[0].kind.code(), "UUS");
}

#[test]
fn resolution_is_idempotent() {
    let (_, _, _, outcome, updated_run) = full_cycle(
        &[
            ("MacroTest.tst", MACRO_SUITE),
            ("SetupTest.tst", SETUP_SUITE),
            ("ChainSetupTest.tst", CHAIN_SETUP_SUITE),
        ],
        false,
    );
    let updated_model = model_of_map(&outcome.updated);
    let cus_again = classify(&updated_run.trace, &updated_model).unwrap();
    assert!(cus_again.is_empty());
    let second = resolve(&updated_model, &cus_again, false).unwrap();
    assert_eq!(second.updated, outcome.updated);
    assert!(second.entries.is_empty());
}

#[test]
fn mixed_kinds_in_one_class_compose() {
    let src = "class MixedBagTest {\n\
        Registry reg;\n\
\n\
        @Setup\n\
        void setUp() {\n\
            reg = mock(Registry);\n\
            when(reg.size()).thenReturn(10);\n\
            when(reg.owner()).thenReturn(\"core\");\n\
        }\n\
\n\
        @Test\n\
        void testRegistrySize() {\n\
            assertEq(reg.size(), 10);\n\
            assertEq(reg.owner(), \"core\");\n\
        }\n\
\n\
        @Test\n\
        void testWidgetFlow() {\n\
            assertEq(reg.size(), 10);\n\
            Widget w = makeWidget(\"gear\", 3);\n\
            when(w.getSpare()).thenReturn(\"none\");\n\
            assertEq(w.getLabel(), \"gear\");\n\
            assertEq(w.getWeight(), 3);\n\
        }\n\
\n\
        @Test\n\
        void testWidgetLabelOnly() {\n\
            assertEq(reg.size(), 10);\n\
            assertEq(reg.owner(), \"core\");\n\
            Widget w = makeWidget(\"bolt\", 1);\n\
            assertEq(w.getLabel(), \"bolt\");\n\
        }\n\
\n\
        Widget makeWidget(String label, int weight) {\n\
            Widget w = mock(Widget);\n\
            when(w.getLabel()).thenReturn(label);\n\
            when(w.getWeight()).thenReturn(weight);\n\
            return w;\n\
        }\n\
    }\n";
    let (_, run, cus_set, outcome, updated_run) = full_cycle(&[("MixedBagTest.tst", src)], false);
    let kinds: Vec<&str> = cus_set.iter().map(|c| c.kind.code()).collect();
    assert_eq!(kinds, vec!["UUS", "TU", "UUH"]);

    let original = &outcome.updated["MixedBagTest.tst"];
    // UUH: the label-only test calls the pruned duplicate.
    assert!(original.contains("Widget w = makeWidget_nostub1(\"bolt\", 1);"));
    assert!(original.contains("Widget makeWidget_nostub1(String label, int weight) {"));
    // The moved test keeps the original helper call but loses the TU line.
    let new_class = &outcome.updated["MixedBagTest_Stubscrub1.tst"];
    assert!(new_class.contains("Widget w = makeWidget(\"gear\", 3);"));
    assert!(!new_class.contains("getSpare"));
    assert!(new_class.contains("Widget makeWidget(String label, int weight) {"), "helper copied");
    assert!(new_class.contains("Registry reg;"), "field copied");
    assert!(!new_class.contains("owner"), "pruned setup");

    assert_no_resolvable_left(&outcome.updated);
    assert_eq!(
        invocation_multisets(&run.trace),
        remap_moved_tests(invocation_multisets(&updated_run.trace), &outcome.moved_tests)
    );
}
