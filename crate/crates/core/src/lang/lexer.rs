//! Tokenizer for suite files. Comments (`//` and `/* */`) are consumed, not
//! emitted; line counting survives both comment styles and string literals.

use super::ast::Span;
use super::LangError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Colon,
    Question,
    At,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    AndAnd,
    OrOr,
    Bang,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(name) => format!("`{name}`"),
            TokenKind::Int(v) => format!("`{v}`"),
            TokenKind::Str(_) => "string literal".to_string(),
            TokenKind::LParen => "`(`".to_string(),
            TokenKind::RParen => "`)`".to_string(),
            TokenKind::LBrace => "`{`".to_string(),
            TokenKind::RBrace => "`}`".to_string(),
            TokenKind::Comma => "`,`".to_string(),
            TokenKind::Semi => "`;`".to_string(),
            TokenKind::Dot => "`.`".to_string(),
            TokenKind::Colon => "`:`".to_string(),
            TokenKind::Question => "`?`".to_string(),
            TokenKind::At => "`@`".to_string(),
            TokenKind::Assign => "`=`".to_string(),
            TokenKind::Eq => "`==`".to_string(),
            TokenKind::Ne => "`!=`".to_string(),
            TokenKind::Lt => "`<`".to_string(),
            TokenKind::Le => "`<=`".to_string(),
            TokenKind::Gt => "`>`".to_string(),
            TokenKind::Ge => "`>=`".to_string(),
            TokenKind::Plus => "`+`".to_string(),
            TokenKind::Minus => "`-`".to_string(),
            TokenKind::Star => "`*`".to_string(),
            TokenKind::Slash => "`/`".to_string(),
            TokenKind::AndAnd => "`&&`".to_string(),
            TokenKind::OrOr => "`||`".to_string(),
            TokenKind::Bang => "`!`".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    pub line: u32,
}

pub fn lex(text: &str) -> Result<Vec<Token>, LangError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0usize;
    let mut line = 1u32;

    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b'\n' => {
                line += 1;
                pos += 1;
            }
            b' ' | b'\t' | b'\r' => pos += 1,
            b'/' if bytes.get(pos + 1) == Some(&b'/') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            b'/' if bytes.get(pos + 1) == Some(&b'*') => {
                let start_line = line;
                pos += 2;
                loop {
                    if pos + 1 >= bytes.len() {
                        return Err(LangError::lex(start_line, "unterminated block comment"));
                    }
                    if bytes[pos] == b'*' && bytes[pos + 1] == b'/' {
                        pos += 2;
                        break;
                    }
                    if bytes[pos] == b'\n' {
                        line += 1;
                    }
                    pos += 1;
                }
            }
            b'"' => {
                let start = pos;
                let start_line = line;
                pos += 1;
                let mut value = String::new();
                loop {
                    match bytes.get(pos) {
                        None | Some(b'\n') => {
                            return Err(LangError::lex(start_line, "unterminated string literal"));
                        }
                        Some(b'"') => {
                            pos += 1;
                            break;
                        }
                        Some(b'\\') => {
                            let escaped = bytes.get(pos + 1).copied().ok_or_else(|| {
                                LangError::lex(start_line, "unterminated string literal")
                            })?;
                            value.push(match escaped {
                                b'"' => '"',
                                b'\\' => '\\',
                                b'n' => '\n',
                                b't' => '\t',
                                other => {
                                    return Err(LangError::lex(
                                        start_line,
                                        format!("unknown escape `\\{}`", other as char),
                                    ))
                                }
                            });
                            pos += 2;
                        }
                        Some(_) => {
                            // Multi-byte UTF-8 is copied through unchanged.
                            let ch_len = utf8_len(bytes[pos]);
                            value.push_str(&text[pos..pos + ch_len]);
                            pos += ch_len;
                        }
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Str(value),
                    span: Span::new(start, pos),
                    line: start_line,
                });
            }
            b'0'..=b'9' => {
                let start = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                let digits = &text[start..pos];
                let value = digits
                    .parse::<i64>()
                    .map_err(|_| LangError::lex(line, format!("integer `{digits}` overflows")))?;
                tokens.push(Token {
                    kind: TokenKind::Int(value),
                    span: Span::new(start, pos),
                    line,
                });
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = pos;
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
                {
                    pos += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(text[start..pos].to_string()),
                    span: Span::new(start, pos),
                    line,
                });
            }
            _ => {
                let (kind, len) = match (b, bytes.get(pos + 1).copied()) {
                    (b'=', Some(b'=')) => (TokenKind::Eq, 2),
                    (b'!', Some(b'=')) => (TokenKind::Ne, 2),
                    (b'<', Some(b'=')) => (TokenKind::Le, 2),
                    (b'>', Some(b'=')) => (TokenKind::Ge, 2),
                    (b'&', Some(b'&')) => (TokenKind::AndAnd, 2),
                    (b'|', Some(b'|')) => (TokenKind::OrOr, 2),
                    (b'=', _) => (TokenKind::Assign, 1),
                    (b'!', _) => (TokenKind::Bang, 1),
                    (b'<', _) => (TokenKind::Lt, 1),
                    (b'>', _) => (TokenKind::Gt, 1),
                    (b'(', _) => (TokenKind::LParen, 1),
                    (b')', _) => (TokenKind::RParen, 1),
                    (b'{', _) => (TokenKind::LBrace, 1),
                    (b'}', _) => (TokenKind::RBrace, 1),
                    (b',', _) => (TokenKind::Comma, 1),
                    (b';', _) => (TokenKind::Semi, 1),
                    (b'.', _) => (TokenKind::Dot, 1),
                    (b':', _) => (TokenKind::Colon, 1),
                    (b'?', _) => (TokenKind::Question, 1),
                    (b'@', _) => (TokenKind::At, 1),
                    (b'+', _) => (TokenKind::Plus, 1),
                    (b'-', _) => (TokenKind::Minus, 1),
                    (b'*', _) => (TokenKind::Star, 1),
                    (b'/', _) => (TokenKind::Slash, 1),
                    _ => {
                        return Err(LangError::lex(
                            line,
                            format!("unexpected character `{}`", text[pos..].chars().next().unwrap()),
                        ))
                    }
                };
                tokens.push(Token {
                    kind,
                    span: Span::new(pos, pos + len),
                    line,
                });
                pos += len;
            }
        }
    }
    Ok(tokens)
}

fn utf8_len(first: u8) -> usize {
    match first {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

/// Distinct 1-based line numbers carrying at least one non-comment token.
/// This is the file's LOC measure.
pub fn code_lines(text: &str) -> Result<std::collections::BTreeSet<u32>, LangError> {
    let tokens = lex(text)?;
    let mut lines = std::collections::BTreeSet::new();
    let line_starts = line_start_table(text);
    for token in &tokens {
        // Multi-line tokens (only strings can span? they cannot) count once,
        // but a token ending past its starting line still marks each line it
        // touches as code.
        lines.insert(token.line);
        let end_line = line_of_offset(&line_starts, token.span.end.saturating_sub(1));
        for l in token.line..=end_line {
            lines.insert(l);
        }
    }
    Ok(lines)
}

/// Byte offsets at which each line begins.
pub fn line_start_table(text: &str) -> Vec<usize> {
    let mut starts = vec![0usize];
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            starts.push(i + 1);
        }
    }
    starts
}

/// 1-based line containing the byte at `offset`.
pub fn line_of_offset(line_starts: &[usize], offset: usize) -> u32 {
    match line_starts.binary_search(&offset) {
        Ok(idx) => idx as u32 + 1,
        Err(idx) => idx as u32,
    }
}
