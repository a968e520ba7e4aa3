//! Syntax tree for suite files. Every node keeps its byte span into the
//! original text, so unedited code can always be reproduced verbatim and
//! edits can splice the source directly.

/// Half-open byte range into a file's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone)]
pub struct SourceFile {
    /// Suite-relative path, forward slashes.
    pub rel_path: String,
    pub text: String,
    pub classes: Vec<ClassDecl>,
}

#[derive(Debug, Clone)]
pub struct Annotation {
    pub name: String,
    pub args: Vec<Literal>,
    pub span: Span,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Str(String),
    Bool(bool),
}

#[derive(Debug, Clone)]
pub struct ClassDecl {
    pub annotations: Vec<Annotation>,
    pub name: String,
    pub members: Vec<Member>,
    /// Entire declaration, annotations included.
    pub span: Span,
    /// Byte offset of the closing `}` of the class body.
    pub close_brace: usize,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct Member {
    pub annotations: Vec<Annotation>,
    pub kind: MemberKind,
    /// Entire member, annotations included.
    pub span: Span,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub enum MemberKind {
    Field(FieldDecl),
    Method(MethodDecl),
}

impl Member {
    pub fn name(&self) -> &str {
        match &self.kind {
            MemberKind::Field(f) => &f.name,
            MemberKind::Method(m) => &m.name,
        }
    }

    pub fn as_method(&self) -> Option<&MethodDecl> {
        match &self.kind {
            MemberKind::Method(m) => Some(m),
            MemberKind::Field(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldDecl {
    pub type_name: String,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct MethodDecl {
    pub return_type: String,
    pub name: String,
    /// Span of the name identifier, for renaming duplicates.
    pub name_span: Span,
    pub params: Vec<Param>,
    pub body: Block,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub type_name: String,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    VarDecl {
        type_name: String,
        name: String,
        init: Expr,
    },
    Assign {
        name: String,
        value: Expr,
    },
    /// `when(target.method()).thenReturn(value);`
    When(WhenStmt),
    Expr(Expr),
    Return(Option<Expr>),
    If {
        cond: Expr,
        then_block: Block,
        else_branch: Option<ElseBranch>,
    },
    While {
        cond: Expr,
        body: Block,
    },
    DoWhile {
        body: Block,
        cond: Expr,
    },
    /// `for (Type x : iterable) { ... }`
    ForEach {
        type_name: String,
        var: String,
        iterable: Expr,
        body: Block,
    },
}

#[derive(Debug, Clone)]
pub enum ElseBranch {
    /// `else if (...)` chains nest as a single-statement branch.
    ElseIf(Box<Stmt>),
    Else(Block),
}

#[derive(Debug, Clone)]
pub struct WhenStmt {
    pub target: Expr,
    pub method: String,
    pub value: Expr,
    /// 0-based index among stubbing definitions starting on the same line,
    /// assigned after the whole file is parsed.
    pub occurrence_index: u32,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Null,
    Bool(bool),
    Int(i64),
    Str(String),
    Var(String),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then_value: Box<Expr>,
        else_value: Box<Expr>,
    },
    /// `receiver.method(args)` — dispatched on a test double at runtime.
    MethodCall {
        receiver: Box<Expr>,
        method: String,
        args: Vec<Expr>,
    },
    /// `callee(args)` — a helper method of the enclosing class or a builtin.
    Call {
        callee: String,
        callee_span: Span,
        args: Vec<Expr>,
    },
    /// `mock(TypeName)`
    Mock {
        type_name: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn is_logical(&self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or)
    }
}

/// Depth-first walk over the statements of a block, nested blocks included.
pub fn walk_stmts<'a>(block: &'a Block, visit: &mut dyn FnMut(&'a Stmt)) {
    for stmt in &block.stmts {
        visit(stmt);
        match &stmt.kind {
            StmtKind::If {
                then_block,
                else_branch,
                ..
            } => {
                walk_stmts(then_block, visit);
                let mut branch = else_branch.as_ref();
                while let Some(eb) = branch {
                    match eb {
                        ElseBranch::Else(b) => {
                            walk_stmts(b, visit);
                            branch = None;
                        }
                        ElseBranch::ElseIf(s) => {
                            visit(s);
                            if let StmtKind::If {
                                then_block,
                                else_branch,
                                ..
                            } = &s.kind
                            {
                                walk_stmts(then_block, visit);
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
            | StmtKind::ForEach { body, .. } => walk_stmts(body, visit),
            _ => {}
        }
    }
}

/// Depth-first walk over every expression in a block.
pub fn walk_exprs<'a>(block: &'a Block, visit: &mut dyn FnMut(&'a Expr)) {
    walk_stmts(block, &mut |stmt| {
        for expr in stmt_exprs(stmt) {
            walk_expr_tree(expr, visit);
        }
    });
}

/// The expressions directly owned by a statement (not those in nested blocks).
pub fn stmt_exprs(stmt: &Stmt) -> Vec<&Expr> {
    match &stmt.kind {
        StmtKind::VarDecl { init, .. } => vec![init],
        StmtKind::Assign { value, .. } => vec![value],
        StmtKind::When(w) => vec![&w.target, &w.value],
        StmtKind::Expr(e) => vec![e],
        StmtKind::Return(Some(e)) => vec![e],
        StmtKind::Return(None) => vec![],
        StmtKind::If { cond, .. } => vec![cond],
        StmtKind::While { cond, .. } => vec![cond],
        StmtKind::DoWhile { cond, .. } => vec![cond],
        StmtKind::ForEach { iterable, .. } => vec![iterable],
    }
}

pub fn walk_expr_tree<'a>(expr: &'a Expr, visit: &mut dyn FnMut(&'a Expr)) {
    visit(expr);
    match &expr.kind {
        ExprKind::Unary { operand, .. } => walk_expr_tree(operand, visit),
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr_tree(lhs, visit);
            walk_expr_tree(rhs, visit);
        }
        ExprKind::Ternary {
            cond,
            then_value,
            else_value,
        } => {
            walk_expr_tree(cond, visit);
            walk_expr_tree(then_value, visit);
            walk_expr_tree(else_value, visit);
        }
        ExprKind::MethodCall { receiver, args, .. } => {
            walk_expr_tree(receiver, visit);
            for arg in args {
                walk_expr_tree(arg, visit);
            }
        }
        ExprKind::Call { args, .. } => {
            for arg in args {
                walk_expr_tree(arg, visit);
            }
        }
        _ => {}
    }
}
