//! Span-level text surgery. Everything the refactorer writes is spliced out
//! of the original file bytes: unedited regions are copied verbatim, removed
//! statements take their whole line along when they own it, and duplicated
//! members are re-emitted from their original block with edits applied.

use std::collections::BTreeSet;

use crate::lang::ast::{
    walk_stmts, Expr, ExprKind, MethodDecl, Span, Stmt, StmtKind,
};

use super::RefactorError;

/// One replacement; deletion uses an empty replacement. Insertions use an
/// empty span at the insertion offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextEdit {
    pub span: Span,
    pub replacement: String,
}

impl TextEdit {
    pub fn delete(span: Span) -> Self {
        TextEdit {
            span,
            replacement: String::new(),
        }
    }

    pub fn insert(offset: usize, text: String) -> Self {
        TextEdit {
            span: Span::new(offset, offset),
            replacement: text,
        }
    }

    pub fn replace(span: Span, text: String) -> Self {
        TextEdit {
            span,
            replacement: text,
        }
    }
}

fn line_start(text: &str, offset: usize) -> usize {
    text[..offset].rfind('\n').map(|i| i + 1).unwrap_or(0)
}

/// End offset just past the newline terminating the line containing
/// `offset - 1` (or EOF).
fn line_end(text: &str, offset: usize) -> usize {
    match text[offset..].find('\n') {
        Some(i) => offset + i + 1,
        None => text.len(),
    }
}

fn is_blank(s: &str) -> bool {
    s.chars().all(|c| c == ' ' || c == '\t' || c == '\r' || c == '\n')
}

/// Deletion span for a statement: the statement's full lines when nothing
/// else shares them, otherwise the exact span plus the horizontal whitespace
/// directly before it.
pub fn statement_removal_span(text: &str, span: Span) -> Span {
    let start = line_start(text, span.start);
    let end = line_end(text, span.end.saturating_sub(1).max(span.start));
    let before = &text[start..span.start];
    let after = &text[span.end..end];
    if is_blank(before) && is_blank(after) {
        Span::new(start, end)
    } else {
        let mut ws_start = span.start;
        while ws_start > start {
            let c = text.as_bytes()[ws_start - 1];
            if c == b' ' || c == b'\t' {
                ws_start -= 1;
            } else {
                break;
            }
        }
        Span::new(ws_start, span.end)
    }
}

/// Full-line block of a member declaration (annotations included), without a
/// trailing blank line.
pub fn member_block_span(text: &str, span: Span) -> Span {
    Span::new(
        line_start(text, span.start),
        line_end(text, span.end.saturating_sub(1).max(span.start)),
    )
}

/// Deletion span for a whole member: its block plus at most one following
/// blank line, so removals do not pile up empty gaps.
pub fn member_removal_span(text: &str, span: Span) -> Span {
    let block = member_block_span(text, span);
    let next_end = line_end(text, block.end);
    if block.end < text.len() && is_blank(&text[block.end..next_end]) {
        Span::new(block.start, next_end)
    } else {
        block
    }
}

/// Apply non-overlapping edits to the whole text.
pub fn apply_edits(text: &str, edits: &[TextEdit]) -> Result<String, RefactorError> {
    let mut sorted: Vec<&TextEdit> = edits.iter().collect();
    sorted.sort_by_key(|e| (e.span.start, e.span.end));
    for pair in sorted.windows(2) {
        if pair[1].span.start < pair[0].span.end {
            return Err(RefactorError::Internal(format!(
                "overlapping edits at bytes {}..{} and {}..{}",
                pair[0].span.start, pair[0].span.end, pair[1].span.start, pair[1].span.end
            )));
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for edit in sorted {
        out.push_str(&text[cursor..edit.span.start]);
        out.push_str(&edit.replacement);
        cursor = edit.span.end;
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}

/// Copy of `text[window]` with the edits that fall inside the window
/// applied. Edits outside the window are ignored; an edit straddling the
/// window boundary is an internal error.
pub fn slice_with_edits(
    text: &str,
    window: Span,
    edits: &[TextEdit],
) -> Result<String, RefactorError> {
    let mut inner = Vec::new();
    for edit in edits {
        if window.contains(edit.span) {
            inner.push(TextEdit {
                span: Span::new(edit.span.start - window.start, edit.span.end - window.start),
                replacement: edit.replacement.clone(),
            });
        } else if edit.span.end > window.start && edit.span.start < window.end {
            return Err(RefactorError::Internal(format!(
                "edit {}..{} straddles member window {}..{}",
                edit.span.start, edit.span.end, window.start, window.end
            )));
        }
    }
    apply_edits(&text[window.start..window.end], &inner)
}

/// Statement-span/expression view of one method used by the def-use scan.
struct LocalDecl<'a> {
    name: &'a str,
    span: Span,
    init: &'a Expr,
}

/// Local declarations that lose every remaining reference once `removed`
/// statements are gone, and whose initializers have no observable effects.
/// Runs to a fixpoint so chains of feeder locals fall together.
pub fn orphaned_local_decls(method: &MethodDecl, removed: &BTreeSet<Span>) -> Vec<Span> {
    let mut decls: Vec<LocalDecl> = Vec::new();
    let mut all_stmts: Vec<&Stmt> = Vec::new();
    walk_stmts(&method.body, &mut |stmt| {
        all_stmts.push(stmt);
        if let StmtKind::VarDecl { name, init, .. } = &stmt.kind {
            decls.push(LocalDecl {
                name,
                span: stmt.span,
                init,
            });
        }
    });

    let mut gone: BTreeSet<Span> = removed.clone();
    loop {
        let mut changed = false;
        for decl in &decls {
            if gone.contains(&decl.span) || !is_effect_free(decl.init) {
                continue;
            }
            let mut referenced = false;
            for stmt in &all_stmts {
                if gone.contains(&stmt.span) || stmt.span == decl.span {
                    continue;
                }
                if stmt_references(stmt, decl.name) {
                    referenced = true;
                    break;
                }
            }
            if !referenced {
                gone.insert(decl.span);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    gone.difference(removed).copied().collect()
}

fn stmt_references(stmt: &Stmt, name: &str) -> bool {
    if let StmtKind::Assign {
        name: target,
        value,
    } = &stmt.kind
    {
        if target == name {
            return true;
        }
        return expr_references(value, name);
    }
    crate::lang::ast::stmt_exprs(stmt)
        .iter()
        .any(|e| expr_references(e, name))
}

fn expr_references(expr: &Expr, name: &str) -> bool {
    let mut found = false;
    crate::lang::ast::walk_expr_tree(expr, &mut |e| {
        if let ExprKind::Var(n) = &e.kind {
            if n == name {
                found = true;
            }
        }
    });
    found
}

/// True when evaluating the expression cannot touch a double's stub table,
/// log a trace event, or fail an assertion. Helper and double-method calls
/// are treated as effects; pure constructors and operators are not.
fn is_effect_free(expr: &Expr) -> bool {
    match &expr.kind {
        ExprKind::Null
        | ExprKind::Bool(_)
        | ExprKind::Int(_)
        | ExprKind::Str(_)
        | ExprKind::Var(_)
        | ExprKind::Mock { .. } => true,
        ExprKind::Unary { operand, .. } => is_effect_free(operand),
        ExprKind::Binary { lhs, rhs, .. } => is_effect_free(lhs) && is_effect_free(rhs),
        ExprKind::Ternary {
            cond,
            then_value,
            else_value,
        } => is_effect_free(cond) && is_effect_free(then_value) && is_effect_free(else_value),
        ExprKind::Call { callee, args, .. } => {
            matches!(callee.as_str(), "list" | "range") && args.iter().all(is_effect_free)
        }
        ExprKind::MethodCall { .. } => false,
    }
}
