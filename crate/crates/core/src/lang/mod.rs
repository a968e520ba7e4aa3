//! The class-based test language understood by the tool: a small,
//! Java-flavored dialect with annotated test classes, setup/teardown
//! methods, helper methods, and `when(...).thenReturn(...)` stubbing
//! statements. Suite files use the `.tst` extension.

pub mod ast;
pub mod lexer;
pub mod parser;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LangError {
    #[error("{file}{phase} error at line {line}: {message}", file = fmt_file(.file), phase = .phase)]
    Syntax {
        file: Option<String>,
        phase: &'static str,
        line: u32,
        message: String,
    },
}

fn fmt_file(file: &Option<String>) -> String {
    match file {
        Some(f) => format!("{f}: "),
        None => String::new(),
    }
}

impl LangError {
    pub fn lex(line: u32, message: impl Into<String>) -> Self {
        LangError::Syntax {
            file: None,
            phase: "lex",
            line,
            message: message.into(),
        }
    }

    pub fn parse(line: u32, message: impl Into<String>) -> Self {
        LangError::Syntax {
            file: None,
            phase: "parse",
            line,
            message: message.into(),
        }
    }

    pub fn in_file(self, rel_path: &str) -> Self {
        match self {
            LangError::Syntax {
                phase,
                line,
                message,
                ..
            } => LangError::Syntax {
                file: Some(rel_path.to_string()),
                phase,
                line,
                message,
            },
        }
    }
}
