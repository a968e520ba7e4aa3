//! Recursive-descent parser for suite files.
//!
//! The grammar is deliberately small: classes with annotated members, typed
//! fields/locals, `when(...).thenReturn(...)` stubbing statements, and
//! conventional statements and expressions. Modifier words (`public`,
//! `private`, `protected`, `static`, `final`) are accepted and skipped; they
//! survive in the source text via spans.

use super::ast::*;
use super::lexer::{lex, Token, TokenKind};
use super::LangError;

const MODIFIERS: [&str; 5] = ["public", "private", "protected", "static", "final"];

pub fn parse_file(rel_path: &str, text: &str) -> Result<SourceFile, LangError> {
    let tokens = lex(text).map_err(|e| e.in_file(rel_path))?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        rel_path,
    };
    let mut classes = Vec::new();
    while !parser.at_end() {
        classes.push(parser.class_decl()?);
    }
    let mut file = SourceFile {
        rel_path: rel_path.to_string(),
        text: text.to_string(),
        classes,
    };
    assign_when_occurrences(&mut file);
    Ok(file)
}

/// Number stubbing definitions that share a physical line, in textual order.
fn assign_when_occurrences(file: &mut SourceFile) {
    use std::collections::HashMap;
    let mut per_line: HashMap<u32, u32> = HashMap::new();
    for class in &mut file.classes {
        for member in &mut class.members {
            if let MemberKind::Method(method) = &mut member.kind {
                assign_in_block(&mut method.body, &mut per_line);
            }
        }
    }

    fn assign_in_block(block: &mut Block, per_line: &mut HashMap<u32, u32>) {
        for stmt in &mut block.stmts {
            match &mut stmt.kind {
                StmtKind::When(w) => {
                    let counter = per_line.entry(stmt.line).or_insert(0);
                    w.occurrence_index = *counter;
                    *counter += 1;
                }
                StmtKind::If {
                    then_block,
                    else_branch,
                    ..
                } => {
                    assign_in_block(then_block, per_line);
                    let mut branch = else_branch.as_mut();
                    while let Some(eb) = branch {
                        match eb {
                            ElseBranch::Else(b) => {
                                assign_in_block(b, per_line);
                                branch = None;
                            }
                            ElseBranch::ElseIf(s) => {
                                if let StmtKind::If {
                                    then_block,
                                    else_branch,
                                    ..
                                } = &mut s.kind
                                {
                                    assign_in_block(then_block, per_line);
                                    branch = else_branch.as_mut();
                                } else {
                                    branch = None;
                                }
                            }
                        }
                    }
                }
                StmtKind::While { body, .. }
                | StmtKind::DoWhile { body, .. }
                | StmtKind::ForEach { body, .. } => assign_in_block(body, per_line),
                _ => {}
            }
        }
    }
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    rel_path: &'a str,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset)
    }

    fn advance(&mut self) -> Option<&Token> {
        let token = self.tokens.get(self.pos);
        if token.is_some() {
            self.pos += 1;
        }
        token
    }

    fn current_line(&self) -> u32 {
        self.peek()
            .map(|t| t.line)
            .or_else(|| self.tokens.last().map(|t| t.line))
            .unwrap_or(1)
    }

    fn error(&self, message: impl Into<String>) -> LangError {
        LangError::parse(self.current_line(), message).in_file(self.rel_path)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<&Token, LangError> {
        match self.peek() {
            Some(token) if token.kind == kind => Ok(self.advance().unwrap()),
            Some(token) => Err(self.error(format!(
                "expected {}, found {}",
                kind.describe(),
                token.kind.describe()
            ))),
            None => Err(self.error(format!("expected {}, found end of file", kind.describe()))),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span, u32), LangError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(name),
                span,
                line,
            }) => {
                let out = (name.clone(), *span, *line);
                self.pos += 1;
                Ok(out)
            }
            Some(token) => Err(self.error(format!(
                "expected identifier, found {}",
                token.kind.describe()
            ))),
            None => Err(self.error("expected identifier, found end of file")),
        }
    }

    fn expect_keyword(&mut self, word: &str) -> Result<Span, LangError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(name),
                span,
                ..
            }) if name == word => {
                let span = *span;
                self.pos += 1;
                Ok(span)
            }
            Some(token) => Err(self.error(format!(
                "expected `{word}`, found {}",
                token.kind.describe()
            ))),
            None => Err(self.error(format!("expected `{word}`, found end of file"))),
        }
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Ident(name), .. }) if name == word)
    }

    fn ident_at(&self, offset: usize) -> Option<&str> {
        match self.peek_at(offset) {
            Some(Token {
                kind: TokenKind::Ident(name),
                ..
            }) => Some(name.as_str()),
            _ => None,
        }
    }

    fn kind_at(&self, offset: usize) -> Option<&TokenKind> {
        self.peek_at(offset).map(|t| &t.kind)
    }

    fn skip_modifiers(&mut self) {
        while let Some(name) = self.ident_at(0) {
            if MODIFIERS.contains(&name) && matches!(self.kind_at(1), Some(TokenKind::Ident(_))) {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn annotations(&mut self) -> Result<Vec<Annotation>, LangError> {
        let mut annotations = Vec::new();
        while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::At)) {
            let at = self.expect(TokenKind::At)?.span;
            let line = self.current_line();
            let (name, name_span, _) = self.expect_ident()?;
            let mut args = Vec::new();
            let mut end = name_span.end;
            if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen)) {
                self.advance();
                if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
                    loop {
                        args.push(self.literal()?);
                        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                }
                end = self.expect(TokenKind::RParen)?.span.end;
            }
            annotations.push(Annotation {
                name,
                args,
                span: Span::new(at.start, end),
                line,
            });
        }
        Ok(annotations)
    }

    fn literal(&mut self) -> Result<Literal, LangError> {
        match self.peek().cloned() {
            Some(Token {
                kind: TokenKind::Int(v),
                ..
            }) => {
                self.advance();
                Ok(Literal::Int(v))
            }
            Some(Token {
                kind: TokenKind::Str(s),
                ..
            }) => {
                self.advance();
                Ok(Literal::Str(s))
            }
            Some(Token {
                kind: TokenKind::Ident(name),
                ..
            }) if name == "true" || name == "false" => {
                self.advance();
                Ok(Literal::Bool(name == "true"))
            }
            _ => Err(self.error("annotation arguments must be literals")),
        }
    }

    fn class_decl(&mut self) -> Result<ClassDecl, LangError> {
        let annotations = self.annotations()?;
        let start = annotations
            .first()
            .map(|a| a.span.start)
            .unwrap_or_else(|| self.peek().map(|t| t.span.start).unwrap_or(0));
        self.skip_modifiers();
        let keyword = self.expect_keyword("class")?;
        let line = self.tokens[self.pos - 1].line;
        let start = start.min(keyword.start);
        let (name, _, _) = self.expect_ident()?;
        self.expect(TokenKind::LBrace)?;
        let mut members = Vec::new();
        loop {
            match self.peek() {
                Some(Token {
                    kind: TokenKind::RBrace,
                    ..
                }) => break,
                Some(_) => members.push(self.member()?),
                None => return Err(self.error(format!("unterminated class `{name}`"))),
            }
        }
        let close = self.expect(TokenKind::RBrace)?.span;
        Ok(ClassDecl {
            annotations,
            name,
            members,
            span: Span::new(start, close.end),
            close_brace: close.start,
            line,
        })
    }

    fn member(&mut self) -> Result<Member, LangError> {
        let annotations = self.annotations()?;
        let decl_start = self.peek().map(|t| t.span.start).unwrap_or(0);
        let start = annotations
            .first()
            .map(|a| a.span.start)
            .unwrap_or(decl_start);
        let line = annotations
            .first()
            .map(|a| a.line)
            .unwrap_or_else(|| self.current_line());
        self.skip_modifiers();
        let (type_name, _, _) = self.expect_ident()?;
        let (name, name_span, _) = self.expect_ident()?;
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Semi) => {
                let semi = self.advance().unwrap().span;
                Ok(Member {
                    annotations,
                    kind: MemberKind::Field(FieldDecl { type_name, name }),
                    span: Span::new(start, semi.end),
                    line,
                })
            }
            Some(TokenKind::LParen) => {
                self.advance();
                let mut params = Vec::new();
                if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
                    loop {
                        let (ptype, _, _) = self.expect_ident()?;
                        let (pname, _, _) = self.expect_ident()?;
                        params.push(Param {
                            type_name: ptype,
                            name: pname,
                        });
                        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(TokenKind::RParen)?;
                let body = self.block()?;
                let end = body.span.end;
                Ok(Member {
                    annotations,
                    kind: MemberKind::Method(MethodDecl {
                        return_type: type_name,
                        name,
                        name_span,
                        params,
                        body,
                    }),
                    span: Span::new(start, end),
                    line,
                })
            }
            _ => Err(self.error(format!(
                "expected `;` (field) or `(` (method) after `{type_name} {name}`"
            ))),
        }
    }

    fn block(&mut self) -> Result<Block, LangError> {
        let open = self.expect(TokenKind::LBrace)?.span;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Some(Token {
                    kind: TokenKind::RBrace,
                    ..
                }) => break,
                Some(_) => stmts.push(self.statement()?),
                None => return Err(self.error("unterminated block")),
            }
        }
        let close = self.expect(TokenKind::RBrace)?.span;
        Ok(Block {
            stmts,
            span: Span::new(open.start, close.end),
        })
    }

    fn statement(&mut self) -> Result<Stmt, LangError> {
        let token = self.peek().ok_or_else(|| self.error("expected statement"))?;
        let start = token.span.start;
        let line = token.line;
        if let TokenKind::Ident(word) = &token.kind {
            match word.as_str() {
                "when" if matches!(self.kind_at(1), Some(TokenKind::LParen)) => {
                    return self.when_stmt(start, line)
                }
                "return" => {
                    self.advance();
                    let value = if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Semi)) {
                        None
                    } else {
                        Some(self.expression()?)
                    };
                    let semi = self.expect(TokenKind::Semi)?.span;
                    return Ok(Stmt {
                        kind: StmtKind::Return(value),
                        span: Span::new(start, semi.end),
                        line,
                    });
                }
                "if" => return self.if_stmt(start, line),
                "while" => {
                    self.advance();
                    self.expect(TokenKind::LParen)?;
                    let cond = self.expression()?;
                    self.expect(TokenKind::RParen)?;
                    let body = self.block()?;
                    let end = body.span.end;
                    return Ok(Stmt {
                        kind: StmtKind::While { cond, body },
                        span: Span::new(start, end),
                        line,
                    });
                }
                "do" => {
                    self.advance();
                    let body = self.block()?;
                    self.expect_keyword("while")?;
                    self.expect(TokenKind::LParen)?;
                    let cond = self.expression()?;
                    self.expect(TokenKind::RParen)?;
                    let semi = self.expect(TokenKind::Semi)?.span;
                    return Ok(Stmt {
                        kind: StmtKind::DoWhile { body, cond },
                        span: Span::new(start, semi.end),
                        line,
                    });
                }
                "for" => {
                    self.advance();
                    self.expect(TokenKind::LParen)?;
                    let (type_name, _, _) = self.expect_ident()?;
                    let (var, _, _) = self.expect_ident()?;
                    self.expect(TokenKind::Colon)?;
                    let iterable = self.expression()?;
                    self.expect(TokenKind::RParen)?;
                    let body = self.block()?;
                    let end = body.span.end;
                    return Ok(Stmt {
                        kind: StmtKind::ForEach {
                            type_name,
                            var,
                            iterable,
                            body,
                        },
                        span: Span::new(start, end),
                        line,
                    });
                }
                _ => {}
            }
            // `Type name = expr;` declares a local.
            if matches!(self.kind_at(1), Some(TokenKind::Ident(_))) {
                let type_name = word.clone();
                if !matches!(self.kind_at(2), Some(TokenKind::Assign)) {
                    return Err(self.error("local declarations require an initializer"));
                }
                self.advance();
                let (name, _, _) = self.expect_ident()?;
                self.expect(TokenKind::Assign)?;
                let init = self.expression()?;
                let semi = self.expect(TokenKind::Semi)?.span;
                return Ok(Stmt {
                    kind: StmtKind::VarDecl {
                        type_name,
                        name,
                        init,
                    },
                    span: Span::new(start, semi.end),
                    line,
                });
            }
            // `name = expr;` assigns to a local or field.
            if matches!(self.kind_at(1), Some(TokenKind::Assign)) {
                let name = word.clone();
                self.advance();
                self.advance();
                let value = self.expression()?;
                let semi = self.expect(TokenKind::Semi)?.span;
                return Ok(Stmt {
                    kind: StmtKind::Assign { name, value },
                    span: Span::new(start, semi.end),
                    line,
                });
            }
        }
        let expr = self.expression()?;
        let semi = self.expect(TokenKind::Semi)?.span;
        Ok(Stmt {
            kind: StmtKind::Expr(expr),
            span: Span::new(start, semi.end),
            line,
        })
    }

    fn if_stmt(&mut self, start: usize, line: u32) -> Result<Stmt, LangError> {
        self.expect_keyword("if")?;
        self.expect(TokenKind::LParen)?;
        let cond = self.expression()?;
        self.expect(TokenKind::RParen)?;
        let then_block = self.block()?;
        let mut end = then_block.span.end;
        let else_branch = if self.at_ident("else") {
            self.advance();
            if self.at_ident("if") {
                let nested_start = self.peek().unwrap().span.start;
                let nested_line = self.current_line();
                let nested = self.if_stmt(nested_start, nested_line)?;
                end = nested.span.end;
                Some(ElseBranch::ElseIf(Box::new(nested)))
            } else {
                let block = self.block()?;
                end = block.span.end;
                Some(ElseBranch::Else(block))
            }
        } else {
            None
        };
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then_block,
                else_branch,
            },
            span: Span::new(start, end),
            line,
        })
    }

    fn when_stmt(&mut self, start: usize, line: u32) -> Result<Stmt, LangError> {
        self.expect_keyword("when")?;
        self.expect(TokenKind::LParen)?;
        let stubbed = self.expression()?;
        self.expect(TokenKind::RParen)?;
        let (target, method) = match stubbed.kind {
            ExprKind::MethodCall {
                receiver,
                method,
                args,
            } if args.is_empty() => (*receiver, method),
            ExprKind::MethodCall { .. } => {
                return Err(LangError::parse(
                    line,
                    "stubbed methods take no arguments".to_string(),
                )
                .in_file(self.rel_path))
            }
            _ => {
                return Err(LangError::parse(
                    line,
                    "when(...) expects a method call on a test double".to_string(),
                )
                .in_file(self.rel_path))
            }
        };
        self.expect(TokenKind::Dot)?;
        self.expect_keyword("thenReturn")?;
        self.expect(TokenKind::LParen)?;
        let value = self.expression()?;
        self.expect(TokenKind::RParen)?;
        let semi = self.expect(TokenKind::Semi)?.span;
        Ok(Stmt {
            kind: StmtKind::When(WhenStmt {
                target,
                method,
                value,
                occurrence_index: 0,
            }),
            span: Span::new(start, semi.end),
            line,
        })
    }

    fn expression(&mut self) -> Result<Expr, LangError> {
        self.ternary()
    }

    fn ternary(&mut self) -> Result<Expr, LangError> {
        let cond = self.binary(0)?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Question)) {
            self.advance();
            let then_value = self.expression()?;
            self.expect(TokenKind::Colon)?;
            let else_value = self.ternary()?;
            let span = Span::new(cond.span.start, else_value.span.end);
            let line = cond.line;
            return Ok(Expr {
                kind: ExprKind::Ternary {
                    cond: Box::new(cond),
                    then_value: Box::new(then_value),
                    else_value: Box::new(else_value),
                },
                span,
                line,
            });
        }
        Ok(cond)
    }

    /// Precedence climbing over the binary operator tiers.
    fn binary(&mut self, tier: usize) -> Result<Expr, LangError> {
        const TIERS: [&[(TokenKind, BinaryOp)]; 5] = [
            &[(TokenKind::OrOr, BinaryOp::Or)],
            &[(TokenKind::AndAnd, BinaryOp::And)],
            &[(TokenKind::Eq, BinaryOp::Eq), (TokenKind::Ne, BinaryOp::Ne)],
            &[
                (TokenKind::Lt, BinaryOp::Lt),
                (TokenKind::Le, BinaryOp::Le),
                (TokenKind::Gt, BinaryOp::Gt),
                (TokenKind::Ge, BinaryOp::Ge),
            ],
            &[
                (TokenKind::Plus, BinaryOp::Add),
                (TokenKind::Minus, BinaryOp::Sub),
            ],
        ];
        if tier == TIERS.len() {
            return self.multiplicative();
        }
        let mut lhs = self.binary(tier + 1)?;
        loop {
            let op = TIERS[tier].iter().find_map(|(kind, op)| {
                if self.peek().map(|t| &t.kind) == Some(kind) {
                    Some(*op)
                } else {
                    None
                }
            });
            match op {
                Some(op) => {
                    self.advance();
                    let rhs = self.binary(tier + 1)?;
                    let span = Span::new(lhs.span.start, rhs.span.end);
                    let line = lhs.line;
                    lhs = Expr {
                        kind: ExprKind::Binary {
                            op,
                            lhs: Box::new(lhs),
                            rhs: Box::new(rhs),
                        },
                        span,
                        line,
                    };
                }
                None => return Ok(lhs),
            }
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Star) => BinaryOp::Mul,
                Some(TokenKind::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            let span = Span::new(lhs.span.start, rhs.span.end);
            let line = lhs.line;
            lhs = Expr {
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
                line,
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Bang) => Some(UnaryOp::Not),
            Some(TokenKind::Minus) => Some(UnaryOp::Neg),
            _ => None,
        };
        if let Some(op) = op {
            let token = self.advance().unwrap();
            let start = token.span.start;
            let line = token.line;
            let operand = self.unary()?;
            let span = Span::new(start, operand.span.end);
            return Ok(Expr {
                kind: ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                span,
                line,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, LangError> {
        let mut expr = self.primary()?;
        while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Dot)) {
            self.advance();
            let (method, _, _) = self.expect_ident()?;
            self.expect(TokenKind::LParen)?;
            let args = self.arguments()?;
            let close = self.expect(TokenKind::RParen)?.span;
            let span = Span::new(expr.span.start, close.end);
            let line = expr.line;
            expr = Expr {
                kind: ExprKind::MethodCall {
                    receiver: Box::new(expr),
                    method,
                    args,
                },
                span,
                line,
            };
        }
        Ok(expr)
    }

    fn arguments(&mut self) -> Result<Vec<Expr>, LangError> {
        let mut args = Vec::new();
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
            return Ok(args);
        }
        loop {
            args.push(self.expression()?);
            if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                self.advance();
            } else {
                return Ok(args);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        let token = self
            .peek()
            .cloned()
            .ok_or_else(|| self.error("expected expression"))?;
        let span = token.span;
        let line = token.line;
        match token.kind {
            TokenKind::Int(v) => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::Int(v),
                    span,
                    line,
                })
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::Str(s),
                    span,
                    line,
                })
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.expression()?;
                let close = self.expect(TokenKind::RParen)?.span;
                Ok(Expr {
                    kind: inner.kind,
                    span: Span::new(span.start, close.end),
                    line,
                })
            }
            TokenKind::Ident(name) => {
                self.advance();
                match name.as_str() {
                    "true" | "false" => Ok(Expr {
                        kind: ExprKind::Bool(name == "true"),
                        span,
                        line,
                    }),
                    "null" => Ok(Expr {
                        kind: ExprKind::Null,
                        span,
                        line,
                    }),
                    _ => {
                        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen)) {
                            let callee_span = span;
                            self.advance();
                            let args = self.arguments()?;
                            let close = self.expect(TokenKind::RParen)?.span;
                            let span = Span::new(span.start, close.end);
                            if name == "mock" {
                                let type_name = match args.as_slice() {
                                    [Expr {
                                        kind: ExprKind::Var(type_name),
                                        ..
                                    }] => type_name.clone(),
                                    _ => {
                                        return Err(self
                                            .error("mock(...) expects a single type name"))
                                    }
                                };
                                return Ok(Expr {
                                    kind: ExprKind::Mock { type_name },
                                    span,
                                    line,
                                });
                            }
                            Ok(Expr {
                                kind: ExprKind::Call {
                                    callee: name,
                                    callee_span,
                                    args,
                                },
                                span,
                                line,
                            })
                        } else {
                            Ok(Expr {
                                kind: ExprKind::Var(name),
                                span,
                                line,
                            })
                        }
                    }
                }
            }
            other => Err(self.error(format!("expected expression, found {}", other.describe()))),
        }
    }
}
