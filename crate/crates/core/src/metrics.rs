//! LOC and cognitive-complexity measurement over suite files.
//!
//! Cognitive complexity follows the SonarSource scoring rules for the
//! constructs this language has:
//!
//! - `if`, ternary `?:`, `for`, `while`, `do..while` add 1 plus the current
//!   nesting depth, and increment nesting for their children.
//! - `else` and `else if` add 1 with no nesting penalty (their bodies still
//!   nest one level deeper).
//! - Each sequence of like logical operators adds 1: `a && b && c` is one
//!   increment, `a && b || c` is two.
//! - Every method in a recursion cycle (direct or mutual) adds 1.
//!
//! LOC counts lines carrying at least one non-comment token, straight off
//! the lexer's token stream.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lang::ast::*;
use crate::lang::lexer::code_lines;
use crate::lang::parser::parse_file;
use crate::lang::LangError;

/// Per-file LOC and cognitive score plus suite totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexitySnapshot {
    pub per_file: BTreeMap<String, FileComplexity>,
    pub loc_total: u64,
    pub cognitive_total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileComplexity {
    pub loc: u64,
    pub cognitive: u64,
}

/// Measure every file of a suite given as (rel_path, text) pairs.
pub fn snapshot(texts: &BTreeMap<String, String>) -> Result<ComplexitySnapshot, LangError> {
    let mut per_file = BTreeMap::new();
    let mut loc_total = 0;
    let mut cognitive_total = 0;
    for (rel_path, text) in texts {
        let loc = code_lines(text)?.len() as u64;
        let file = parse_file(rel_path, text)?;
        let cognitive = cognitive_of_file(&file);
        loc_total += loc;
        cognitive_total += cognitive;
        per_file.insert(rel_path.clone(), FileComplexity { loc, cognitive });
    }
    Ok(ComplexitySnapshot {
        per_file,
        loc_total,
        cognitive_total,
    })
}

/// Sum of method scores over every class in the file. Complexity is additive
/// over top-level declarations; fields contribute nothing.
pub fn cognitive_of_file(file: &SourceFile) -> u64 {
    file.classes.iter().map(cognitive_of_class).sum()
}

pub fn cognitive_of_class(class: &ClassDecl) -> u64 {
    let recursive = recursive_methods(class);
    class
        .members
        .iter()
        .filter_map(|m| m.as_method())
        .map(|m| cognitive_of_method(m, recursive.contains(&m.name)))
        .sum()
}

/// Score one method body; `in_recursion_cycle` adds the flat recursion
/// increment.
pub fn cognitive_of_method(method: &MethodDecl, in_recursion_cycle: bool) -> u64 {
    let mut score = if in_recursion_cycle { 1 } else { 0 };
    score += block_score(&method.body, 0);
    score
}

fn block_score(block: &Block, nesting: u64) -> u64 {
    let mut score = 0;
    for stmt in &block.stmts {
        score += stmt_score(stmt, nesting);
    }
    score
}

fn stmt_score(stmt: &Stmt, nesting: u64) -> u64 {
    let mut score = 0;
    for expr in stmt_exprs(stmt) {
        score += expr_score(expr, nesting, None);
    }
    match &stmt.kind {
        StmtKind::If {
            then_block,
            else_branch,
            ..
        } => {
            score += 1 + nesting;
            score += block_score(then_block, nesting + 1);
            let mut branch = else_branch.as_ref();
            while let Some(eb) = branch {
                // else / else-if add one, without a nesting penalty.
                score += 1;
                match eb {
                    ElseBranch::Else(b) => {
                        score += block_score(b, nesting + 1);
                        branch = None;
                    }
                    ElseBranch::ElseIf(s) => {
                        if let StmtKind::If {
                            cond,
                            then_block,
                            else_branch,
                        } = &s.kind
                        {
                            score += expr_score(cond, nesting, None);
                            score += block_score(then_block, nesting + 1);
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
            score += 1 + nesting;
            score += block_score(body, nesting + 1);
        }
        _ => {}
    }
    score
}

/// Expression increments: ternaries (structural, with nesting penalty) and
/// logical operator sequences (flat). `context` is the logical operator we
/// are already inside of, if any.
fn expr_score(expr: &Expr, nesting: u64, context: Option<BinaryOp>) -> u64 {
    match &expr.kind {
        ExprKind::Ternary {
            cond,
            then_value,
            else_value,
        } => {
            1 + nesting
                + expr_score(cond, nesting + 1, None)
                + expr_score(then_value, nesting + 1, None)
                + expr_score(else_value, nesting + 1, None)
        }
        ExprKind::Binary { op, lhs, rhs } if op.is_logical() => {
            let new_sequence = context != Some(*op);
            let here = if new_sequence { 1 } else { 0 };
            here + expr_score(lhs, nesting, Some(*op)) + expr_score(rhs, nesting, Some(*op))
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            expr_score(lhs, nesting, None) + expr_score(rhs, nesting, None)
        }
        ExprKind::Unary { operand, .. } => expr_score(operand, nesting, None),
        ExprKind::MethodCall { receiver, args, .. } => {
            expr_score(receiver, nesting, None)
                + args.iter().map(|a| expr_score(a, nesting, None)).sum::<u64>()
        }
        ExprKind::Call { args, .. } => {
            args.iter().map(|a| expr_score(a, nesting, None)).sum::<u64>()
        }
        _ => 0,
    }
}

/// Methods of the class that sit on a cycle of the intra-class call graph,
/// self-calls included.
fn recursive_methods(class: &ClassDecl) -> BTreeSet<String> {
    let method_names: BTreeSet<&str> = class
        .members
        .iter()
        .filter(|m| m.as_method().is_some())
        .map(|m| m.name())
        .collect();
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for member in &class.members {
        if let Some(method) = member.as_method() {
            let targets = edges.entry(member.name()).or_default();
            walk_exprs(&method.body, &mut |expr| {
                if let ExprKind::Call { callee, .. } = &expr.kind {
                    if method_names.contains(callee.as_str()) {
                        targets.insert(callee.as_str());
                    }
                }
            });
        }
    }
    // A method is on a cycle when it can reach itself.
    let mut cyclic = BTreeSet::new();
    for &start in method_names.iter() {
        let mut stack: Vec<&str> = edges.get(start).into_iter().flatten().copied().collect();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        while let Some(node) = stack.pop() {
            if node == start {
                cyclic.insert(start.to_string());
                break;
            }
            if seen.insert(node) {
                stack.extend(edges.get(node).into_iter().flatten().copied());
            }
        }
    }
    cyclic
}

/// Relative change between two snapshots per metric: `100 * (after - before)
/// / before`, or `None` when the base is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentDelta {
    pub loc_pct: Option<f64>,
    pub cognitive_pct: Option<f64>,
}

pub fn percent_delta(before: &ComplexitySnapshot, after: &ComplexitySnapshot) -> PercentDelta {
    PercentDelta {
        loc_pct: pct(before.loc_total, after.loc_total),
        cognitive_pct: pct(before.cognitive_total, after.cognitive_total),
    }
}

fn pct(before: u64, after: u64) -> Option<f64> {
    if before == 0 {
        None
    } else {
        Some(100.0 * (after as f64 - before as f64) / before as f64)
    }
}
