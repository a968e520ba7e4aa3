//! Source-to-source removal of unnecessary stubbings.
//!
//! Strategies by classification:
//!
//! - TU: *code removal* — delete the defining statement (plus any local
//!   variables that only fed it).
//! - UUH: *method duplication and removal* — duplicate the helper without
//!   the stubbing and retarget exactly the call sites that sat on
//!   unnecessary paths; used paths keep calling the original. Chains of
//!   helpers duplicate once per distinct needed variant.
//! - UUS: *class duplication and removal* — create a new test class whose
//!   copied setup lacks the stubbing (or calls a pruned helper variant),
//!   move the tests that never used the stubbing into it, and copy the
//!   fields and helpers they reference. Tests needing the same setup
//!   pruning share one new class, so the number of new classes equals the
//!   number of distinct pruning signatures.
//!
//! All planning happens against the original trees; edits materialize in one
//! pass per file, so trace locations never go stale mid-resolution. In-place
//! edits that fall inside a member being duplicated or moved are applied to
//! the copy as well.

pub mod edits;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::classify::{ClassifiedUnnecessaryStubbing, StubbingKind};
use crate::lang::ast::{ExprKind, MemberKind, Span};
use crate::lang::lexer::{lex, TokenKind};
use crate::report::{EntryStatus, MovedTest, ReportEntry};
use crate::suite::{ClassRef, MemberRef, MethodRole, TestSuiteModel};
use crate::trace::StackFrame;

use edits::{
    apply_edits, member_block_span, member_removal_span, orphaned_local_decls, slice_with_edits,
    statement_removal_span, TextEdit,
};

#[derive(Debug, Error)]
pub enum RefactorError {
    #[error("internal refactoring invariant violated: {0}")]
    Internal(String),
    #[error("could not find a fresh name derived from `{0}`")]
    NameExhaustion(String),
}

/// Result of resolving a classified set against a suite.
#[derive(Debug, Clone)]
pub struct ResolveOutcome {
    /// The complete updated suite: rel_path -> file text, new files included
    /// and untouched files carried over verbatim.
    pub updated: BTreeMap<String, String>,
    /// One entry per classified stubbing, in cus order.
    pub entries: Vec<ReportEntry>,
    pub moved_tests: Vec<MovedTest>,
    pub notes: Vec<String>,
    /// Edit-operation counts per touched path (new files count as one).
    pub file_edits: BTreeMap<String, usize>,
    pub error_count: usize,
}

// --- variant machinery -------------------------------------------------------

/// Canonical description of a pruned copy of one method: which stubbing
/// statements disappear and which internal calls retarget to other pruned
/// copies. Structurally equal requirements share one duplicate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct VariantReq {
    base: MemberRef,
    removals: BTreeSet<Span>,
    children: BTreeMap<(u32, String), VariantReq>,
}

fn merge_reqs(into: &mut VariantReq, from: VariantReq) {
    debug_assert_eq!(into.base, from.base);
    into.removals.extend(from.removals);
    for (key, child) in from.children {
        match into.children.get_mut(&key) {
            Some(existing) => merge_reqs(existing, child),
            None => {
                into.children.insert(key, child);
            }
        }
    }
}

#[derive(Debug, Clone)]
struct VariantInfo {
    base: MemberRef,
    name: String,
    removals: BTreeSet<Span>,
    call_retargets: BTreeMap<(u32, String), String>,
}

#[derive(Debug, Default)]
struct VariantRegistry {
    by_req: BTreeMap<VariantReq, usize>,
    infos: Vec<VariantInfo>,
    taken: BTreeSet<String>,
}

impl VariantRegistry {
    fn with_taken(taken: BTreeSet<String>) -> Self {
        VariantRegistry {
            taken,
            ..Default::default()
        }
    }

    fn intern(
        &mut self,
        model: &TestSuiteModel,
        req: &VariantReq,
    ) -> Result<String, RefactorError> {
        if let Some(&idx) = self.by_req.get(req) {
            return Ok(self.infos[idx].name.clone());
        }
        let mut call_retargets = BTreeMap::new();
        for (key, child) in &req.children {
            call_retargets.insert(key.clone(), self.intern(model, child)?);
        }
        let base_name = model.method(req.base).name.clone();
        let name = fresh_name(&format!("{base_name}_nostub"), &self.taken)?;
        self.taken.insert(name.clone());
        self.by_req.insert(req.clone(), self.infos.len());
        self.infos.push(VariantInfo {
            base: req.base,
            name: name.clone(),
            removals: req.removals.clone(),
            call_retargets,
        });
        Ok(name)
    }

    fn find(&self, name: &str) -> Option<&VariantInfo> {
        self.infos.iter().find(|i| i.name == name)
    }
}

fn fresh_name(prefix: &str, taken: &BTreeSet<String>) -> Result<String, RefactorError> {
    for k in 1..10_000 {
        let candidate = format!("{prefix}{k}");
        if !taken.contains(&candidate) {
            return Ok(candidate);
        }
    }
    Err(RefactorError::NameExhaustion(prefix.to_string()))
}

// --- plans --------------------------------------------------------------------

#[derive(Debug, Default)]
struct FilePlan {
    /// Raw statement spans to delete in place.
    removals: BTreeSet<Span>,
    /// Callee identifier span -> new method name (call-site rewrites in test
    /// bodies).
    retargets: BTreeMap<Span, String>,
    /// Member spans of tests moved out to new classes.
    moved_members: BTreeSet<Span>,
}

#[derive(Debug, Default)]
struct SetupEdits {
    removals: BTreeSet<Span>,
    children: BTreeMap<(u32, String), VariantReq>,
}

#[derive(Debug)]
struct NewClassPlan {
    name: String,
    setup_edits: BTreeMap<MemberRef, SetupEdits>,
    moved: Vec<MemberRef>,
}

#[derive(Debug)]
struct ClassWork {
    /// Pruning requirements per (entry member, call line, callee), merged
    /// across all UUH stubbings of the class.
    entry_reqs: BTreeMap<(MemberRef, u32, String), VariantReq>,
    uuh_registry: VariantRegistry,
    new_classes: Vec<NewClassPlan>,
}

/// Apply the per-kind strategies for every classified stubbing and produce
/// the updated suite plus report entries. `keep_setup_stubbings` skips the
/// UUS strategy and reports those entries as skipped.
pub fn resolve(
    model: &TestSuiteModel,
    cus_set: &[ClassifiedUnnecessaryStubbing],
    keep_setup_stubbings: bool,
) -> Result<ResolveOutcome, RefactorError> {
    let mut outcome = ResolveOutcome {
        updated: BTreeMap::new(),
        entries: Vec::new(),
        moved_tests: Vec::new(),
        notes: Vec::new(),
        file_edits: BTreeMap::new(),
        error_count: 0,
    };
    let mut file_plans: BTreeMap<usize, FilePlan> = BTreeMap::new();
    let mut class_work: BTreeMap<ClassRef, ClassWork> = BTreeMap::new();
    let mut entries: Vec<Option<ReportEntry>> = vec![None; cus_set.len()];

    let mut per_class: BTreeMap<ClassRef, Vec<usize>> = BTreeMap::new();
    for (idx, cus) in cus_set.iter().enumerate() {
        match model.resolve_when(&cus.group.location) {
            Some(site) => per_class
                .entry(site.member.class_ref())
                .or_default()
                .push(idx),
            None => {
                entries[idx] = Some(error_entry(
                    cus,
                    format!("location {} not found in the suite", cus.group.location),
                ));
            }
        }
    }

    let mut taken_class_names: BTreeSet<String> =
        model.class_names().map(|s| s.to_string()).collect();

    for (&class_ref, cus_indexes) in &per_class {
        let work = plan_class(
            model,
            class_ref,
            cus_set,
            cus_indexes,
            keep_setup_stubbings,
            &mut entries,
            &mut file_plans,
            &mut outcome,
            &mut taken_class_names,
        )?;
        class_work.insert(class_ref, work);
    }

    // Materialize edited originals (and carry unchanged files over).
    for (file_idx, file) in model.files.iter().enumerate() {
        let empty = FilePlan::default();
        let plan = file_plans.get(&file_idx).unwrap_or(&empty);
        let registries: Vec<&VariantRegistry> = class_work
            .iter()
            .filter(|(cr, _)| cr.file == file_idx)
            .map(|(_, w)| &w.uuh_registry)
            .collect();
        let (text, edit_count, notes) = materialize_file(model, file_idx, plan, &registries)?;
        if edit_count > 0 {
            outcome.file_edits.insert(file.rel_path.clone(), edit_count);
        }
        outcome.notes.extend(notes);
        outcome.updated.insert(file.rel_path.clone(), text);
    }

    // Materialize the new class files.
    for (class_ref, work) in &class_work {
        let empty = FilePlan::default();
        let plan = file_plans.get(&class_ref.file).unwrap_or(&empty);
        for new_class in &work.new_classes {
            let (path, text, notes) =
                build_new_class(model, *class_ref, new_class, &work.uuh_registry, plan)?;
            if outcome.updated.contains_key(&path) {
                return Err(RefactorError::Internal(format!(
                    "generated file `{path}` collides with an existing file"
                )));
            }
            outcome.notes.extend(notes);
            outcome.file_edits.insert(path.clone(), 1);
            outcome.updated.insert(path, text);
        }
        // Flag source classes left without tests.
        let class = model.class_decl(*class_ref);
        let moved: BTreeSet<&str> = work
            .new_classes
            .iter()
            .flat_map(|p| p.moved.iter())
            .map(|m| model.member(*m).name())
            .collect();
        if !moved.is_empty() {
            let remaining = model
                .members_with_role(*class_ref, MethodRole::Test)
                .iter()
                .filter(|(_, m)| !moved.contains(m.name()))
                .count();
            if remaining == 0 {
                outcome.notes.push(format!(
                    "class `{}` has no tests left after moving {}; the class is kept",
                    class.name,
                    moved.len()
                ));
            }
        }
    }

    outcome.entries = entries
        .into_iter()
        .enumerate()
        .map(|(idx, e)| {
            e.unwrap_or_else(|| error_entry(&cus_set[idx], "entry was never planned".to_string()))
        })
        .collect();
    outcome.error_count = outcome
        .entries
        .iter()
        .filter(|e| e.status == EntryStatus::Error)
        .count();
    outcome.notes.sort();
    outcome.notes.dedup();
    Ok(outcome)
}

fn base_entry(cus: &ClassifiedUnnecessaryStubbing) -> ReportEntry {
    ReportEntry {
        location: cus.group.location.to_string(),
        kind: cus.kind.code().to_string(),
        status: EntryStatus::Resolved,
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
    }
}

fn error_entry(cus: &ClassifiedUnnecessaryStubbing, reason: String) -> ReportEntry {
    ReportEntry {
        status: EntryStatus::Error,
        reason: Some(reason),
        ..base_entry(cus)
    }
}

#[allow(clippy::too_many_arguments)]
fn plan_class(
    model: &TestSuiteModel,
    class_ref: ClassRef,
    cus_set: &[ClassifiedUnnecessaryStubbing],
    cus_indexes: &[usize],
    keep_setup_stubbings: bool,
    entries: &mut [Option<ReportEntry>],
    file_plans: &mut BTreeMap<usize, FilePlan>,
    outcome: &mut ResolveOutcome,
    taken_class_names: &mut BTreeSet<String>,
) -> Result<ClassWork, RefactorError> {
    let class = model.class_decl(class_ref);
    let member_names: BTreeSet<String> =
        class.members.iter().map(|m| m.name().to_string()).collect();
    let mut work = ClassWork {
        entry_reqs: BTreeMap::new(),
        uuh_registry: VariantRegistry::with_taken(member_names),
        new_classes: Vec::new(),
    };
    let mut uus_indexes: Vec<usize> = Vec::new();

    for &idx in cus_indexes {
        let cus = &cus_set[idx];
        match cus.kind {
            StubbingKind::TotallyUnnecessary => {
                let site = model.resolve_when(&cus.group.location).unwrap();
                file_plans
                    .entry(class_ref.file)
                    .or_default()
                    .removals
                    .insert(site.stmt_span);
                let mut entry = base_entry(cus);
                entry.strategy = Some("code-removal".to_string());
                entry.edits.push(format!(
                    "removed stubbing statement at {}",
                    cus.group.location
                ));
                entries[idx] = Some(entry);
            }
            StubbingKind::UsedUnnecessaryHelper => {
                plan_uuh(model, cus_set, idx, entries, &mut work);
            }
            StubbingKind::UsedUnnecessarySetup => {
                if keep_setup_stubbings {
                    let mut entry = base_entry(cus);
                    entry.status = EntryStatus::Skipped;
                    entry.reason = Some(
                        "keep-setup-stubbings mode leaves setup stubbings in place".to_string(),
                    );
                    entries[idx] = Some(entry);
                } else {
                    uus_indexes.push(idx);
                }
            }
        }
    }

    // Turn the merged per-entry-site requirements into named duplicates and
    // call-site rewrites.
    let entry_reqs = std::mem::take(&mut work.entry_reqs);
    for ((entry_member, line, callee), req) in entry_reqs {
        let name = work.uuh_registry.intern(model, &req)?;
        for call in model.call_exprs_at(entry_member, &callee, line) {
            if let ExprKind::Call { callee_span, .. } = &call.kind {
                file_plans
                    .entry(class_ref.file)
                    .or_default()
                    .retargets
                    .insert(*callee_span, name.clone());
            }
        }
    }

    if !uus_indexes.is_empty() {
        plan_uus(
            model,
            class_ref,
            cus_set,
            &uus_indexes,
            entries,
            file_plans,
            outcome,
            taken_class_names,
            &mut work,
        )?;
    }
    Ok(work)
}

/// Resolve one definition stack into (entry member, entry call line, head
/// callee, requirement tree), validating every frame and call site.
fn chain_from_stack(
    model: &TestSuiteModel,
    stack: &[StackFrame],
    when_span: Span,
) -> Result<(MemberRef, u32, String, VariantReq), String> {
    if stack.len() < 2 {
        return Err("definition stack has no caller frame to retarget".to_string());
    }
    let resolve = |frame: &StackFrame| {
        model
            .find_method(&frame.declaring_class, &frame.method_name)
            .ok_or_else(|| {
                format!(
                    "frame {}.{} does not resolve",
                    frame.declaring_class, frame.method_name
                )
            })
    };
    let mut req = VariantReq {
        base: resolve(&stack[0])?,
        removals: [when_span].into(),
        children: BTreeMap::new(),
    };
    for i in 1..stack.len() - 1 {
        let base = resolve(&stack[i])?;
        let callee = stack[i - 1].method_name.clone();
        if model.call_exprs_at(base, &callee, stack[i].line).is_empty() {
            return Err(format!(
                "no call to `{callee}` at {}:{}",
                stack[i].file_path, stack[i].line
            ));
        }
        let mut children = BTreeMap::new();
        children.insert((stack[i].line, callee), req);
        req = VariantReq {
            base,
            removals: BTreeSet::new(),
            children,
        };
    }
    let entry = resolve(stack.last().unwrap())?;
    let head_callee = stack[stack.len() - 2].method_name.clone();
    let entry_line = stack.last().unwrap().line;
    if model
        .call_exprs_at(entry, &head_callee, entry_line)
        .is_empty()
    {
        return Err(format!(
            "no call to `{head_callee}` at {}:{}",
            stack.last().unwrap().file_path,
            entry_line
        ));
    }
    Ok((entry, entry_line, head_callee, req))
}

fn plan_uuh(
    model: &TestSuiteModel,
    cus_set: &[ClassifiedUnnecessaryStubbing],
    idx: usize,
    entries: &mut [Option<ReportEntry>],
    work: &mut ClassWork,
) {
    let cus = &cus_set[idx];
    let site = model.resolve_when(&cus.group.location).unwrap();

    // Validate the whole cus before touching shared state; a broken stack
    // fails this cus and leaves the others alone.
    let mut chains = Vec::new();
    for occurrence in &cus.group.usd_list {
        match chain_from_stack(model, &occurrence.stack, site.stmt_span) {
            Ok(chain) => chains.push(chain),
            Err(reason) => {
                entries[idx] = Some(error_entry(cus, reason));
                return;
            }
        }
    }

    let mut entry_sites: BTreeSet<(MemberRef, u32, String)> = BTreeSet::new();
    for (entry, line, callee, req) in chains {
        entry_sites.insert((entry, line, callee.clone()));
        match work.entry_reqs.get_mut(&(entry, line, callee.clone())) {
            Some(existing) => merge_reqs(existing, req),
            None => {
                work.entry_reqs.insert((entry, line, callee), req);
            }
        }
    }

    let helper_name = model.method(site.member).name.clone();
    let mut entry = base_entry(cus);
    entry.strategy = Some("method-duplication-and-removal".to_string());
    entry.edits.push(format!(
        "removed the stubbing from a duplicate of `{helper_name}`"
    ));
    for (entry_member, line, callee) in &entry_sites {
        entry.edits.push(format!(
            "retargeted call to `{callee}` at {}:{line} in `{}`",
            model.file(entry_member.file).rel_path,
            model.method(*entry_member).name
        ));
    }
    entries[idx] = Some(entry);
}

#[allow(clippy::too_many_arguments)]
fn plan_uus(
    model: &TestSuiteModel,
    class_ref: ClassRef,
    cus_set: &[ClassifiedUnnecessaryStubbing],
    uus_indexes: &[usize],
    entries: &mut [Option<ReportEntry>],
    file_plans: &mut BTreeMap<usize, FilePlan>,
    outcome: &mut ResolveOutcome,
    taken_class_names: &mut BTreeSet<String>,
    work: &mut ClassWork,
) -> Result<(), RefactorError> {
    let class = model.class_decl(class_ref);

    struct ValidUus {
        idx: usize,
        is_direct: bool,
        direct_setups: BTreeSet<MemberRef>,
        direct_span: Span,
        chains: Vec<(MemberRef, u32, String, VariantReq)>,
    }

    let mut valid: Vec<ValidUus> = Vec::new();
    for &idx in uus_indexes {
        let cus = &cus_set[idx];
        let site = model.resolve_when(&cus.group.location).unwrap();
        if let Some(test) = cus
            .group
            .tusd_list
            .iter()
            .find(|t| cus.group.tisd_list.contains(t))
        {
            entries[idx] = Some(error_entry(
                cus,
                format!(
                    "internal inconsistency: {}#{} both uses and wastes the setup stubbing",
                    test.0, test.1
                ),
            ));
            continue;
        }
        let is_direct = model.role_of(model.member(site.member)) == MethodRole::Setup;
        let mut direct_setups = BTreeSet::new();
        let mut chains = Vec::new();
        let mut failed = None;
        for occurrence in &cus.group.usd_list {
            let entry_frame = occurrence.stack.last().unwrap();
            if !model.is_setup_method(&entry_frame.declaring_class, &entry_frame.method_name) {
                outcome.notes.push(format!(
                    "{}: an unnecessary occurrence reaches the setup-classified stubbing \
                     through `{}.{}`; only setup paths are resolved",
                    cus.group.location, entry_frame.declaring_class, entry_frame.method_name
                ));
                continue;
            }
            if is_direct {
                direct_setups.insert(
                    model
                        .find_method(&entry_frame.declaring_class, &entry_frame.method_name)
                        .expect("setup frame resolves"),
                );
            } else {
                match chain_from_stack(model, &occurrence.stack, site.stmt_span) {
                    Ok(chain) => chains.push(chain),
                    Err(reason) => {
                        failed = Some(reason);
                        break;
                    }
                }
            }
        }
        if let Some(reason) = failed {
            entries[idx] = Some(error_entry(cus, reason));
            continue;
        }
        valid.push(ValidUus {
            idx,
            is_direct,
            direct_setups,
            direct_span: site.stmt_span,
            chains,
        });
    }

    // Signature of a test: which valid stubbings its setup must lose. Tests
    // sharing a signature share one new class.
    let mut sig_of_test: BTreeMap<MemberRef, Vec<usize>> = BTreeMap::new();
    for (pos, vu) in valid.iter().enumerate() {
        for (test_class, test_name) in &cus_set[vu.idx].group.tusd_list {
            let member = model.find_method(test_class, test_name).ok_or_else(|| {
                RefactorError::Internal(format!("test {test_class}#{test_name} not found"))
            })?;
            sig_of_test.entry(member).or_default().push(pos);
        }
    }
    let mut signatures: BTreeMap<Vec<usize>, Vec<MemberRef>> = BTreeMap::new();
    for (member, sig) in sig_of_test {
        signatures.entry(sig).or_default().push(member);
    }
    for tests in signatures.values_mut() {
        tests.sort();
    }

    let mut new_classes_of_pos: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (sig, tests) in &signatures {
        let name = fresh_name(&format!("{}_Stubscrub", class.name), taken_class_names)?;
        taken_class_names.insert(name.clone());
        let mut setup_edits: BTreeMap<MemberRef, SetupEdits> = BTreeMap::new();
        for &pos in sig {
            let vu = &valid[pos];
            if vu.is_direct {
                for &setup in &vu.direct_setups {
                    setup_edits
                        .entry(setup)
                        .or_default()
                        .removals
                        .insert(vu.direct_span);
                }
            }
            for (setup, line, callee, req) in &vu.chains {
                let slot = setup_edits.entry(*setup).or_default();
                match slot.children.get_mut(&(*line, callee.clone())) {
                    Some(existing) => merge_reqs(existing, req.clone()),
                    None => {
                        slot.children.insert((*line, callee.clone()), req.clone());
                    }
                }
            }
            new_classes_of_pos.entry(pos).or_default().push(name.clone());
        }
        for &test in tests {
            file_plans
                .entry(class_ref.file)
                .or_default()
                .moved_members
                .insert(model.member(test).span);
            outcome.moved_tests.push(MovedTest {
                test: model.member(test).name().to_string(),
                from_class: class.name.clone(),
                to_class: name.clone(),
            });
        }
        work.new_classes.push(NewClassPlan {
            name,
            setup_edits,
            moved: tests.clone(),
        });
    }

    for (pos, vu) in valid.iter().enumerate() {
        let cus = &cus_set[vu.idx];
        let mut entry = base_entry(cus);
        entry.strategy = Some("class-duplication-and-removal".to_string());
        entry.new_classes = new_classes_of_pos.get(&pos).cloned().unwrap_or_default();
        entry.edits.push(if vu.is_direct {
            "removed the stubbing from the setup copied into the new class(es)".to_string()
        } else {
            "copied setup calls a pruned helper duplicate in the new class(es)".to_string()
        });
        for moved in &outcome.moved_tests {
            if moved.from_class == class.name
                && entry.new_classes.contains(&moved.to_class)
                && entry
                    .affected_tests
                    .contains(&format!("{}#{}", moved.from_class, moved.test))
            {
                entry.moved_tests.push(moved.clone());
            }
        }
        entries[vu.idx] = Some(entry);
    }
    Ok(())
}

// --- materialization -----------------------------------------------------------

/// Copy one member's block with removals (plus orphaned-local cleanup), call
/// retargets, span retargets, and an optional rename applied.
fn member_copy(
    model: &TestSuiteModel,
    member_ref: MemberRef,
    rename: Option<&str>,
    extra_removals: &BTreeSet<Span>,
    call_retargets: &BTreeMap<(u32, String), String>,
    span_retargets: &BTreeMap<Span, String>,
    file_removals: &BTreeSet<Span>,
) -> Result<(String, Vec<String>), RefactorError> {
    let file = model.file(member_ref.file);
    let member = model.member(member_ref);
    let window = member_block_span(&file.text, member.span);
    let mut raw: BTreeSet<Span> = extra_removals.clone();
    raw.extend(
        file_removals
            .iter()
            .filter(|s| member.span.contains(**s))
            .copied(),
    );
    let mut notes = Vec::new();
    let mut text_edits: Vec<TextEdit> = Vec::new();
    if let Some(method) = member.as_method() {
        if !raw.is_empty() {
            for orphan in orphaned_local_decls(method, &raw) {
                notes.push(format!(
                    "removed a local now unused in `{}.{}`",
                    model.class_decl(member_ref.class_ref()).name,
                    method.name
                ));
                raw.insert(orphan);
            }
        }
        if let Some(new_name) = rename {
            text_edits.push(TextEdit::replace(method.name_span, new_name.to_string()));
        }
        for ((line, callee), new_name) in call_retargets {
            let calls = model.call_exprs_at(member_ref, callee, *line);
            if calls.is_empty() {
                return Err(RefactorError::Internal(format!(
                    "validated call to `{callee}` at line {line} vanished"
                )));
            }
            for call in calls {
                if let ExprKind::Call { callee_span, .. } = &call.kind {
                    text_edits.push(TextEdit::replace(*callee_span, new_name.clone()));
                }
            }
        }
    }
    for span in &raw {
        text_edits.push(TextEdit::delete(statement_removal_span(&file.text, *span)));
    }
    for (span, new_name) in span_retargets {
        if member.span.contains(*span) {
            text_edits.push(TextEdit::replace(*span, new_name.clone()));
        }
    }
    let text = slice_with_edits(&file.text, window, &text_edits)?;
    Ok((text, notes))
}

fn materialize_file(
    model: &TestSuiteModel,
    file_idx: usize,
    plan: &FilePlan,
    registries: &[&VariantRegistry],
) -> Result<(String, usize, Vec<String>), RefactorError> {
    let file = model.file(file_idx);
    let text = &file.text;
    let mut notes = Vec::new();
    let mut text_edits: Vec<TextEdit> = Vec::new();
    let inside_moved = |span: Span| plan.moved_members.iter().any(|m| m.contains(span));

    for class in &file.classes {
        for member in &class.members {
            if plan.moved_members.contains(&member.span) {
                continue;
            }
            let mut raw: BTreeSet<Span> = plan
                .removals
                .iter()
                .filter(|s| member.span.contains(**s))
                .copied()
                .collect();
            if raw.is_empty() {
                continue;
            }
            if let Some(method) = member.as_method() {
                for orphan in orphaned_local_decls(method, &raw) {
                    notes.push(format!(
                        "removed a local now unused in `{}.{}`",
                        class.name, method.name
                    ));
                    raw.insert(orphan);
                }
            }
            for span in raw {
                text_edits.push(TextEdit::delete(statement_removal_span(text, span)));
            }
        }
    }
    for (span, new_name) in &plan.retargets {
        if !inside_moved(*span) {
            text_edits.push(TextEdit::replace(*span, new_name.clone()));
        }
    }
    for span in &plan.moved_members {
        text_edits.push(TextEdit::delete(member_removal_span(text, *span)));
    }
    // Helper duplicates land right after their base member.
    for registry in registries {
        for info in &registry.infos {
            let base_member = model.member(info.base);
            let (copy, copy_notes) = member_copy(
                model,
                info.base,
                Some(&info.name),
                &info.removals,
                &info.call_retargets,
                &BTreeMap::new(),
                &plan.removals,
            )?;
            notes.extend(copy_notes);
            let at = member_block_span(text, base_member.span).end;
            text_edits.push(TextEdit::insert(at, format!("\n{copy}")));
        }
    }
    let edit_count = text_edits.len();
    let new_text = apply_edits(text, &text_edits)?;
    Ok((new_text, edit_count, notes))
}

fn idents_of(text: &str) -> BTreeSet<String> {
    match lex(text) {
        Ok(tokens) => tokens
            .into_iter()
            .filter_map(|t| match t.kind {
                TokenKind::Ident(name) => Some(name),
                _ => None,
            })
            .collect(),
        Err(_) => BTreeSet::new(),
    }
}

fn build_new_class(
    model: &TestSuiteModel,
    class_ref: ClassRef,
    plan: &NewClassPlan,
    uuh_registry: &VariantRegistry,
    file_plan: &FilePlan,
) -> Result<(String, String, Vec<String>), RefactorError> {
    let class = model.class_decl(class_ref);
    let file = model.file(class_ref.file);
    let mut notes = Vec::new();
    let no_extra: BTreeSet<Span> = BTreeSet::new();

    // The new class gets its own pruned-helper namespace, seeded with the
    // original member names so copies never collide.
    let mut registry = VariantRegistry::with_taken(
        class.members.iter().map(|m| m.name().to_string()).collect(),
    );

    let mut setup_blocks: Vec<String> = Vec::new();
    for (setup_ref, _) in model.members_with_role(class_ref, MethodRole::Setup) {
        let mut call_retargets = BTreeMap::new();
        let removals = match plan.setup_edits.get(&setup_ref) {
            Some(edits) => {
                for (key, req) in &edits.children {
                    call_retargets.insert(key.clone(), registry.intern(model, req)?);
                }
                edits.removals.clone()
            }
            None => BTreeSet::new(),
        };
        let (text, copy_notes) = member_copy(
            model,
            setup_ref,
            None,
            &removals,
            &call_retargets,
            &file_plan.retargets,
            &file_plan.removals,
        )?;
        notes.extend(copy_notes);
        setup_blocks.push(text);
    }

    let mut teardown_blocks: Vec<String> = Vec::new();
    for (teardown_ref, _) in model.members_with_role(class_ref, MethodRole::Teardown) {
        let (text, copy_notes) = member_copy(
            model,
            teardown_ref,
            None,
            &no_extra,
            &BTreeMap::new(),
            &file_plan.retargets,
            &file_plan.removals,
        )?;
        notes.extend(copy_notes);
        teardown_blocks.push(text);
    }

    let mut test_blocks: Vec<String> = Vec::new();
    for &test_ref in &plan.moved {
        let (text, copy_notes) = member_copy(
            model,
            test_ref,
            None,
            &no_extra,
            &BTreeMap::new(),
            &file_plan.retargets,
            &file_plan.removals,
        )?;
        notes.extend(copy_notes);
        test_blocks.push(text);
    }

    // Reference closure: copy the fields, helpers, and pruned duplicates the
    // copied members mention, transitively.
    let mut referenced: BTreeSet<String> = BTreeSet::new();
    for block in setup_blocks.iter().chain(&teardown_blocks).chain(&test_blocks) {
        referenced.extend(idents_of(block));
    }
    let mut included: BTreeMap<String, String> = BTreeMap::new();
    loop {
        let mut added = false;
        let candidates: Vec<String> = referenced
            .iter()
            .filter(|name| !included.contains_key(*name))
            .cloned()
            .collect();
        for name in candidates {
            let copyable = class.members.iter().position(|m| {
                m.name() == name && model.role_of(m) == MethodRole::Helper
                    || (m.name() == name && matches!(m.kind, MemberKind::Field(_)))
            });
            let block = if let Some(member_idx) = copyable {
                let member = &class.members[member_idx];
                match member.kind {
                    MemberKind::Field(_) => {
                        let span = member_block_span(&file.text, member.span);
                        Some(file.text[span.start..span.end].to_string())
                    }
                    MemberKind::Method(_) => {
                        let member_ref = MemberRef {
                            file: class_ref.file,
                            class: class_ref.class,
                            member: member_idx,
                        };
                        let (text, copy_notes) = member_copy(
                            model,
                            member_ref,
                            None,
                            &no_extra,
                            &BTreeMap::new(),
                            &file_plan.retargets,
                            &file_plan.removals,
                        )?;
                        notes.extend(copy_notes);
                        Some(text)
                    }
                }
            } else if let Some(info) = registry
                .find(&name)
                .cloned()
                .or_else(|| uuh_registry.find(&name).cloned())
            {
                let (text, copy_notes) = member_copy(
                    model,
                    info.base,
                    Some(&info.name),
                    &info.removals,
                    &info.call_retargets,
                    &BTreeMap::new(),
                    &file_plan.removals,
                )?;
                notes.extend(copy_notes);
                Some(text)
            } else {
                None
            };
            if let Some(block) = block {
                referenced.extend(idents_of(&block));
                included.insert(name, block);
                added = true;
            }
        }
        if !added {
            break;
        }
    }

    // Assemble: fields, setup, teardown, moved tests, then helpers and their
    // pruned duplicates in declaration/creation order. Fields stay adjacent
    // as one block.
    let mut blocks: Vec<String> = Vec::new();
    let mut field_block = String::new();
    for member in &class.members {
        if matches!(member.kind, MemberKind::Field(_)) {
            if let Some(block) = included.remove(member.name()) {
                field_block.push_str(&block);
            }
        }
    }
    if !field_block.is_empty() {
        blocks.push(field_block);
    }
    blocks.extend(setup_blocks);
    blocks.extend(teardown_blocks);
    blocks.extend(test_blocks);
    for member in &class.members {
        if member.as_method().is_some() {
            if let Some(block) = included.remove(member.name()) {
                blocks.push(block);
            }
            for info in registry.infos.iter().chain(uuh_registry.infos.iter()) {
                if model.member(info.base).name() == member.name() {
                    if let Some(block) = included.remove(&info.name) {
                        blocks.push(block);
                    }
                }
            }
        }
    }

    let body = blocks.join("\n");
    let text = format!("class {} {{\n{body}}}\n", plan.name);
    let dir = match file.rel_path.rfind('/') {
        Some(i) => &file.rel_path[..=i],
        None => "",
    };
    let path = format!("{dir}{}.tst", plan.name);
    Ok((path, text, notes))
}
