use std::fmt;

use super::{Diagnostic, DiagnosticKind, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Space,
    Dim,
    System,
    Ket,
    On,
    Operator,
    Observable,
    Assume,
    Apply,
    To,
    As,
    Measure,
    With,
    Chosen,
    Any,
    Query,
    Possible,
    Verifies,
    Expect,
    Param,
    Sqrt,
    Exp,
    Cos,
    Sin,
    Conj,
    Pi,
    I,
}

impl Keyword {
    pub const ALL: [Keyword; 27] = [
        Keyword::Space,
        Keyword::Dim,
        Keyword::System,
        Keyword::Ket,
        Keyword::On,
        Keyword::Operator,
        Keyword::Observable,
        Keyword::Assume,
        Keyword::Apply,
        Keyword::To,
        Keyword::As,
        Keyword::Measure,
        Keyword::With,
        Keyword::Chosen,
        Keyword::Any,
        Keyword::Query,
        Keyword::Possible,
        Keyword::Verifies,
        Keyword::Expect,
        Keyword::Param,
        Keyword::Sqrt,
        Keyword::Exp,
        Keyword::Cos,
        Keyword::Sin,
        Keyword::Conj,
        Keyword::Pi,
        Keyword::I,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Space => "space",
            Keyword::Dim => "dim",
            Keyword::System => "system",
            Keyword::Ket => "ket",
            Keyword::On => "on",
            Keyword::Operator => "operator",
            Keyword::Observable => "observable",
            Keyword::Assume => "assume",
            Keyword::Apply => "apply",
            Keyword::To => "to",
            Keyword::As => "as",
            Keyword::Measure => "measure",
            Keyword::With => "with",
            Keyword::Chosen => "chosen",
            Keyword::Any => "any",
            Keyword::Query => "query",
            Keyword::Possible => "possible",
            Keyword::Verifies => "verifies",
            Keyword::Expect => "expect",
            Keyword::Param => "param",
            Keyword::Sqrt => "sqrt",
            Keyword::Exp => "exp",
            Keyword::Cos => "cos",
            Keyword::Sin => "sin",
            Keyword::Conj => "conj",
            Keyword::Pi => "pi",
            Keyword::I => "i",
        }
    }

    fn lookup(word: &str) -> Option<Keyword> {
        Keyword::ALL.into_iter().find(|k| k.as_str() == word)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Keyword(Keyword),
    Number(f64),
    /// Literal with an `i` suffix, e.g. `0.8i`.
    Imaginary(f64),
    /// Qubit basis literal such as `|01>` or `|+>`; holds the inner symbols.
    KetLiteral(String),
    Models,
    Arrow,
    Semi,
    Colon,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    Amp,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Keyword(k) => write!(f, "`{}`", k.as_str()),
            Tok::Number(x) => write!(f, "number `{x}`"),
            Tok::Imaginary(x) => write!(f, "number `{x}i`"),
            Tok::KetLiteral(s) => write!(f, "`|{s}>`"),
            Tok::Eof => f.write_str("end of input"),
            other => write!(f, "`{}`", other.symbol()),
        }
    }
}

impl Tok {
    pub fn symbol(&self) -> &'static str {
        match self {
            Tok::Models => "|=",
            Tok::Arrow => "->",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Eq => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Amp => "&",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: usize, line: u32, col: u32) -> Span {
        Span {
            start,
            end: self.pos,
            line,
            col,
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits `src` into tokens, ending with [`Tok::Eof`].
pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '#' {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
            } else {
                break;
            }
        }
        let (start, line, col) = (cur.pos, cur.line, cur.col);
        let Some(c) = cur.bump() else {
            out.push(Token {
                tok: Tok::Eof,
                span: cur.span_from(start, line, col),
            });
            return Ok(out);
        };
        let tok = match c {
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '=' => Tok::Eq,
            '+' => Tok::Plus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '&' | '⊗' => Tok::Amp,
            '-' if cur.peek() == Some('>') => {
                cur.bump();
                Tok::Arrow
            }
            '-' => Tok::Minus,
            '|' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Models
            }
            '|' => {
                let inner_start = cur.pos;
                while cur.peek().is_some_and(|c| matches!(c, '0' | '1' | '+' | '-')) {
                    cur.bump();
                }
                let inner = src[inner_start..cur.pos].to_owned();
                if inner.is_empty() || cur.peek() != Some('>') {
                    return Err(lex_error(
                        cur.span_from(start, line, col),
                        "malformed ket literal; expected `|` followed by 0, 1, + or - symbols and `>`",
                    ));
                }
                cur.bump();
                Tok::KetLiteral(inner)
            }
            c if c.is_ascii_digit() || (c == '.' && cur.peek().is_some_and(|d| d.is_ascii_digit())) => {
                lex_number(&mut cur, start, line, col)?
            }
            c if is_ident_start(c) => {
                while cur.peek().is_some_and(is_ident_continue) {
                    cur.bump();
                }
                while cur.peek() == Some('\'') {
                    cur.bump();
                }
                let word = &src[start..cur.pos];
                match Keyword::lookup(word) {
                    Some(k) => Tok::Keyword(k),
                    None => Tok::Ident(word.to_owned()),
                }
            }
            other => {
                return Err(lex_error(
                    cur.span_from(start, line, col),
                    &format!("unexpected character {other:?}"),
                ))
            }
        };
        out.push(Token {
            tok,
            span: cur.span_from(start, line, col),
        });
    }
}

fn lex_number(cur: &mut Cursor<'_>, start: usize, line: u32, col: u32) -> Result<Tok, Diagnostic> {
    while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') && cur.peek2().is_none_or(|c| c.is_ascii_digit()) {
        cur.bump();
        while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let save = (cur.pos, cur.line, cur.col);
        cur.bump();
        if matches!(cur.peek(), Some('+' | '-')) {
            cur.bump();
        }
        if cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
        } else {
            (cur.pos, cur.line, cur.col) = save;
        }
    }
    let text = &cur.src[start..cur.pos];
    let value: f64 = text
        .parse()
        .map_err(|_| lex_error(cur.span_from(start, line, col), "invalid number"))?;
    if !value.is_finite() {
        return Err(lex_error(cur.span_from(start, line, col), "number out of range"));
    }
    let imaginary = cur.peek() == Some('i') && !cur.peek2().is_some_and(is_ident_continue);
    if imaginary {
        cur.bump();
        return Ok(Tok::Imaginary(value));
    }
    if cur.peek().is_some_and(is_ident_start) {
        cur.bump();
        return Err(lex_error(
            cur.span_from(start, line, col),
            "identifier characters directly after a number",
        ));
    }
    Ok(Tok::Number(value))
}

fn lex_error(span: Span, message: &str) -> Diagnostic {
    Diagnostic {
        kind: DiagnosticKind::Lexical,
        message: message.to_owned(),
        span,
        found: None,
        expected: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn models_versus_ket_literal() {
        assert_eq!(
            toks("A |= |0+>"),
            vec![Tok::Ident("A".into()), Tok::Models, Tok::KetLiteral("0+".into()), Tok::Eof]
        );
    }

    #[test]
    fn numbers_and_imaginary() {
        assert_eq!(
            toks("0.6+0.8i 3/5 1e-3 2i"),
            vec![
                Tok::Number(0.6),
                Tok::Plus,
                Tok::Imaginary(0.8),
                Tok::Number(3.0),
                Tok::Slash,
                Tok::Number(5.0),
                Tok::Number(1e-3),
                Tok::Imaginary(2.0),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn primes_and_keywords() {
        assert_eq!(
            toks("measure A' -> any # tail"),
            vec![
                Tok::Keyword(Keyword::Measure),
                Tok::Ident("A'".into()),
                Tok::Arrow,
                Tok::Keyword(Keyword::Any),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("a\n  ;").unwrap();
        assert_eq!((t[1].span.line, t[1].span.col), (2, 3));
    }

    #[test]
    fn lexical_errors() {
        assert!(tokenize("|2>").is_err());
        assert!(tokenize("1e999").is_err());
        assert!(tokenize("3x").is_err());
        assert!(tokenize("a $").is_err());
    }
}
