//! The `.qml` scenario language: lexer, parser, pretty-printer and
//! interpreter.
//!
//! A script is a flat list of `;`-terminated statements. Measurements and
//! unitaries consume the named systems and introduce successors (`B1`
//! becomes `B2`, `A` becomes `A'`) unless renamed with `as`.

use std::fmt;

use thiserror::Error;

pub mod ast;
pub mod interp;
pub mod lexer;
mod parser;
pub mod printer;

pub use ast::Script;
pub use interp::{bind_and_run, parse_binding, Bindings, Interpreter, LoadError, RunResult, RuntimeError};
pub use parser::{SymbolKind, Symbols, BUILTIN_OPERATORS};
pub use printer::print_script;

/// Source region; `line` and `col` are 1-based and point at `start`.
///
/// Spans never take part in equality, so ASTs compare structurally.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    InvalidUtf8,
    Lexical,
    Syntax,
    Duplicate,
    Undeclared,
    WrongKind,
    TooDeep,
}

impl DiagnosticKind {
    fn label(self) -> &'static str {
        match self {
            DiagnosticKind::InvalidUtf8 => "encoding error",
            DiagnosticKind::Lexical => "lexical error",
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Duplicate => "duplicate identifier",
            DiagnosticKind::Undeclared => "use before declaration",
            DiagnosticKind::WrongKind => "wrong kind of identifier",
            DiagnosticKind::TooDeep => "nesting too deep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub span: Span,
    /// Offending token, when there is one.
    pub found: Option<String>,
    pub expected: Vec<String>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.col, self.kind.label(), self.message)
    }
}

pub fn parse(src: &str) -> Result<Script, Diagnostic> {
    parser::parse_with(src, &mut Symbols::default())
}

/// Like [`parse`], for input that may not be UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<Script, Diagnostic> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse(s),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let text = String::from_utf8_lossy(valid);
            let line = 1 + text.matches('\n').count() as u32;
            let col = 1 + text.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32;
            Err(Diagnostic {
                kind: DiagnosticKind::InvalidUtf8,
                message: format!("invalid UTF-8 at byte {}", e.valid_up_to()),
                span: Span {
                    start: e.valid_up_to(),
                    end: e.valid_up_to() + e.error_len().unwrap_or(1),
                    line,
                    col,
                },
                found: None,
                expected: Vec::new(),
            })
        }
    }
}

#[cfg(test)]
mod tests;
