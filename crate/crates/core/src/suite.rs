//! Syntax-tree view of a test suite: test classes, setup/teardown methods,
//! test methods, helper methods, fields, and an index from code locations to
//! stubbing-definition statements.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lang::ast::*;
use crate::lang::parser::parse_file;
use crate::lang::LangError;
use crate::trace::CodeLocation;

/// File extension for suite files.
pub const SUITE_EXT: &str = "tst";

/// Names reserved for the runtime; user methods may not shadow them.
pub const BUILTINS: [&str; 8] = [
    "mock",
    "when",
    "thenReturn",
    "list",
    "range",
    "assertEq",
    "assertTrue",
    "param",
];

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("no suite files (*.{SUITE_EXT}) under {0}")]
    Empty(PathBuf),
    #[error("{0}")]
    Model(String),
}

/// Role a method plays in its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodRole {
    Test,
    Setup,
    Teardown,
    Helper,
}

/// Stable reference to a class inside the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClassRef {
    pub file: usize,
    pub class: usize,
}

/// Stable reference to a member inside the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MemberRef {
    pub file: usize,
    pub class: usize,
    pub member: usize,
}

impl MemberRef {
    pub fn class_ref(&self) -> ClassRef {
        ClassRef {
            file: self.file,
            class: self.class,
        }
    }
}

/// One stubbing-definition statement, resolved from a code location.
#[derive(Debug, Clone, Copy)]
pub struct WhenSite {
    pub member: MemberRef,
    pub stmt_span: Span,
    pub line: u32,
    pub occurrence_index: u32,
    /// True when a loop statement encloses the definition.
    pub in_loop: bool,
}

#[derive(Debug)]
pub struct TestSuiteModel {
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
    classes: BTreeMap<String, ClassRef>,
    when_index: BTreeMap<(String, u32, u32), WhenSite>,
}

impl TestSuiteModel {
    /// Load every `*.tst` file under `root` (recursively, sorted by path).
    pub fn from_dir(root: &Path) -> Result<Self, SuiteError> {
        let mut paths = Vec::new();
        collect_suite_files(root, root, &mut paths)?;
        paths.sort();
        if paths.is_empty() {
            return Err(SuiteError::Empty(root.to_path_buf()));
        }
        let mut sources = Vec::new();
        for rel in paths {
            let abs = root.join(&rel);
            let text = std::fs::read_to_string(&abs).map_err(|source| SuiteError::Io {
                path: abs.clone(),
                source,
            })?;
            sources.push((rel.to_string_lossy().replace('\\', "/"), text));
        }
        Self::from_sources(root.to_path_buf(), sources)
    }

    pub fn from_sources(
        root: PathBuf,
        sources: Vec<(String, String)>,
    ) -> Result<Self, SuiteError> {
        let mut files = Vec::new();
        for (rel_path, text) in sources {
            files.push(parse_file(&rel_path, &text)?);
        }
        let mut model = TestSuiteModel {
            root,
            files,
            classes: BTreeMap::new(),
            when_index: BTreeMap::new(),
        };
        model.build_indexes()?;
        model.validate()?;
        Ok(model)
    }

    fn build_indexes(&mut self) -> Result<(), SuiteError> {
        for (file_idx, file) in self.files.iter().enumerate() {
            for (class_idx, class) in file.classes.iter().enumerate() {
                let clash = self.classes.insert(
                    class.name.clone(),
                    ClassRef {
                        file: file_idx,
                        class: class_idx,
                    },
                );
                if clash.is_some() {
                    return Err(SuiteError::Model(format!(
                        "class `{}` is declared more than once",
                        class.name
                    )));
                }
                for (member_idx, member) in class.members.iter().enumerate() {
                    if let MemberKind::Method(method) = &member.kind {
                        let member_ref = MemberRef {
                            file: file_idx,
                            class: class_idx,
                            member: member_idx,
                        };
                        index_whens(
                            &file.rel_path,
                            member_ref,
                            &method.body,
                            false,
                            &mut self.when_index,
                        );
                    }
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), SuiteError> {
        for file in &self.files {
            for class in &file.classes {
                for annotation in &class.annotations {
                    match annotation.name.as_str() {
                        "Params" if !annotation.args.is_empty() => {}
                        "Params" => {
                            return Err(SuiteError::Model(format!(
                                "class `{}`: @Params needs at least one value",
                                class.name
                            )))
                        }
                        other => {
                            return Err(SuiteError::Model(format!(
                                "class `{}`: unknown class annotation @{other}",
                                class.name
                            )))
                        }
                    }
                }
                let mut names = BTreeMap::new();
                for member in &class.members {
                    let name = member.name();
                    if BUILTINS.contains(&name) {
                        return Err(SuiteError::Model(format!(
                            "class `{}`: member `{name}` shadows a builtin",
                            class.name
                        )));
                    }
                    if names.insert(name.to_string(), ()).is_some() {
                        return Err(SuiteError::Model(format!(
                            "class `{}`: duplicate member `{name}`",
                            class.name
                        )));
                    }
                    for annotation in &member.annotations {
                        match annotation.name.as_str() {
                            "Test" | "Setup" | "Teardown" => {
                                let method = member.as_method().ok_or_else(|| {
                                    SuiteError::Model(format!(
                                        "class `{}`: @{} applies to methods only",
                                        class.name, annotation.name
                                    ))
                                })?;
                                if !method.params.is_empty() {
                                    return Err(SuiteError::Model(format!(
                                        "class `{}`: @{} method `{}` must take no parameters",
                                        class.name, annotation.name, method.name
                                    )));
                                }
                            }
                            other => {
                                return Err(SuiteError::Model(format!(
                                    "class `{}`: unknown member annotation @{other}",
                                    class.name
                                )))
                            }
                        }
                    }
                    if member.annotations.len() > 1 {
                        return Err(SuiteError::Model(format!(
                            "class `{}`: member `{name}` carries several annotations",
                            class.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn file(&self, idx: usize) -> &SourceFile {
        &self.files[idx]
    }

    pub fn class_ref(&self, name: &str) -> Option<ClassRef> {
        self.classes.get(name).copied()
    }

    pub fn class_decl(&self, class_ref: ClassRef) -> &ClassDecl {
        &self.files[class_ref.file].classes[class_ref.class]
    }

    pub fn member(&self, member_ref: MemberRef) -> &Member {
        &self.files[member_ref.file].classes[member_ref.class].members[member_ref.member]
    }

    pub fn method(&self, member_ref: MemberRef) -> &MethodDecl {
        self.member(member_ref)
            .as_method()
            .expect("member_ref must point at a method")
    }

    /// Class names in deterministic order.
    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(|s| s.as_str())
    }

    pub fn is_parameterized(&self, class_ref: ClassRef) -> bool {
        self.class_decl(class_ref)
            .annotations
            .iter()
            .any(|a| a.name == "Params")
    }

    pub fn params_of(&self, class_ref: ClassRef) -> Vec<Literal> {
        self.class_decl(class_ref)
            .annotations
            .iter()
            .find(|a| a.name == "Params")
            .map(|a| a.args.clone())
            .unwrap_or_default()
    }

    pub fn role_of(&self, member: &Member) -> MethodRole {
        match member.annotations.first().map(|a| a.name.as_str()) {
            Some("Test") => MethodRole::Test,
            Some("Setup") => MethodRole::Setup,
            Some("Teardown") => MethodRole::Teardown,
            _ => MethodRole::Helper,
        }
    }

    /// Members of a class with a given role, in declaration order.
    pub fn members_with_role(
        &self,
        class_ref: ClassRef,
        role: MethodRole,
    ) -> Vec<(MemberRef, &Member)> {
        self.class_decl(class_ref)
            .members
            .iter()
            .enumerate()
            .filter(|(_, m)| m.as_method().is_some() && self.role_of(m) == role)
            .map(|(idx, m)| {
                (
                    MemberRef {
                        file: class_ref.file,
                        class: class_ref.class,
                        member: idx,
                    },
                    m,
                )
            })
            .collect()
    }

    /// True when `method_name` is a setup method of `class_name`.
    pub fn is_setup_method(&self, class_name: &str, method_name: &str) -> bool {
        self.class_ref(class_name)
            .map(|cr| {
                self.members_with_role(cr, MethodRole::Setup)
                    .iter()
                    .any(|(_, m)| m.name() == method_name)
            })
            .unwrap_or(false)
    }

    pub fn find_method(&self, class_name: &str, method_name: &str) -> Option<MemberRef> {
        let class_ref = self.class_ref(class_name)?;
        let class = self.class_decl(class_ref);
        class
            .members
            .iter()
            .position(|m| m.as_method().is_some() && m.name() == method_name)
            .map(|idx| MemberRef {
                file: class_ref.file,
                class: class_ref.class,
                member: idx,
            })
    }

    /// Resolve a trace location to its stubbing-definition statement.
    pub fn resolve_when(&self, location: &CodeLocation) -> Option<&WhenSite> {
        self.when_index.get(&(
            location.file_path.clone(),
            location.line,
            location.occurrence_index,
        ))
    }

    /// All indexed stubbing-definition statements, in location order.
    pub fn when_sites(&self) -> impl Iterator<Item = (&(String, u32, u32), &WhenSite)> {
        self.when_index.iter()
    }

    /// Call expressions targeting `callee` on `line` within a method.
    pub fn call_exprs_at(&self, member_ref: MemberRef, callee: &str, line: u32) -> Vec<&Expr> {
        let method = self.method(member_ref);
        let mut out = Vec::new();
        walk_exprs(&method.body, &mut |expr| {
            if let ExprKind::Call { callee: c, .. } = &expr.kind {
                if c == callee && expr.line == line {
                    out.push(expr);
                }
            }
        });
        out
    }

    /// Names of class methods the given method calls, with call lines.
    pub fn local_calls(&self, member_ref: MemberRef) -> Vec<(String, u32)> {
        let class = self.class_decl(member_ref.class_ref());
        let method = self.method(member_ref);
        let mut out = Vec::new();
        walk_exprs(&method.body, &mut |expr| {
            if let ExprKind::Call { callee, .. } = &expr.kind {
                if class.members.iter().any(|m| m.name() == callee.as_str()) {
                    out.push((callee.clone(), expr.line));
                }
            }
        });
        out
    }

    /// (class, test member) pairs in execution order: files sorted by path,
    /// classes and tests in declaration order.
    pub fn test_plan(&self) -> Vec<(ClassRef, MemberRef)> {
        let mut plan = Vec::new();
        let mut file_order: Vec<usize> = (0..self.files.len()).collect();
        file_order.sort_by(|a, b| self.files[*a].rel_path.cmp(&self.files[*b].rel_path));
        for file_idx in file_order {
            for (class_idx, _) in self.files[file_idx].classes.iter().enumerate() {
                let class_ref = ClassRef {
                    file: file_idx,
                    class: class_idx,
                };
                for (member_ref, _) in self.members_with_role(class_ref, MethodRole::Test) {
                    plan.push((class_ref, member_ref));
                }
            }
        }
        plan
    }

    /// Every (class, test method) name pair in the suite.
    pub fn all_test_names(&self) -> Vec<(String, String)> {
        self.test_plan()
            .into_iter()
            .map(|(c, m)| {
                (
                    self.class_decl(c).name.clone(),
                    self.member(m).name().to_string(),
                )
            })
            .collect()
    }
}

fn collect_suite_files(
    root: &Path,
    dir: &Path,
    out: &mut Vec<PathBuf>,
) -> Result<(), SuiteError> {
    let entries = std::fs::read_dir(dir).map_err(|source| SuiteError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| SuiteError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.is_dir() {
            collect_suite_files(root, &path, out)?;
        } else if path.extension().and_then(|e| e.to_str()) == Some(SUITE_EXT) {
            out.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
    Ok(())
}

fn index_whens(
    rel_path: &str,
    member_ref: MemberRef,
    block: &Block,
    in_loop: bool,
    index: &mut BTreeMap<(String, u32, u32), WhenSite>,
) {
    for stmt in &block.stmts {
        match &stmt.kind {
            StmtKind::When(w) => {
                index.insert(
                    (rel_path.to_string(), stmt.line, w.occurrence_index),
                    WhenSite {
                        member: member_ref,
                        stmt_span: stmt.span,
                        line: stmt.line,
                        occurrence_index: w.occurrence_index,
                        in_loop,
                    },
                );
            }
            StmtKind::If {
                then_block,
                else_branch,
                ..
            } => {
                index_whens(rel_path, member_ref, then_block, in_loop, index);
                let mut branch = else_branch.as_ref();
                while let Some(eb) = branch {
                    match eb {
                        ElseBranch::Else(b) => {
                            index_whens(rel_path, member_ref, b, in_loop, index);
                            branch = None;
                        }
                        ElseBranch::ElseIf(s) => {
                            if let StmtKind::If {
                                then_block,
                                else_branch,
                                ..
                            } = &s.kind
                            {
                                index_whens(rel_path, member_ref, then_block, in_loop, index);
                                branch = else_branch.as_ref();
                            } else {
                                branch = None;
                            }
                        }
                    }
                }
            }
            StmtKind::While { body, .. }
            | StmtKind::DoWhile { body, .. }
            | StmtKind::ForEach { body, .. } => {
                index_whens(rel_path, member_ref, body, true, index);
            }
            _ => {}
        }
    }
}
