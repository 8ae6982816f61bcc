use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::lexer::{tokenize, Keyword, Tok, Token};
use super::{Diagnostic, DiagnosticKind, Span};
use crate::engine::successor_name;

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Space,
    System,
    Ket,
    Operator,
    Observable,
    Param,
}

impl SymbolKind {
    fn noun(self) -> &'static str {
        match self {
            SymbolKind::Space => "space",
            SymbolKind::System => "system",
            SymbolKind::Ket => "ket",
            SymbolKind::Operator => "operator",
            SymbolKind::Observable => "observable",
            SymbolKind::Param => "parameter",
        }
    }
}

/// Names known to the parser. Systems consumed by a measurement or a
/// unitary stay declared; their successors are introduced alongside.
#[derive(Debug, Clone)]
pub struct Symbols {
    kinds: HashMap<String, SymbolKind>,
    consumed: HashSet<String>,
}

pub const BUILTIN_OPERATORS: [&str; 5] = ["H", "CNOT", "SX", "SZ", "ID2"];

impl Default for Symbols {
    fn default() -> Self {
        let mut kinds = HashMap::new();
        kinds.insert("qubit".to_owned(), SymbolKind::Space);
        for op in BUILTIN_OPERATORS {
            kinds.insert(op.to_owned(), SymbolKind::Operator);
        }
        Symbols {
            kinds,
            consumed: HashSet::new(),
        }
    }
}

impl Symbols {
    pub fn kind(&self, name: &str) -> Option<SymbolKind> {
        self.kinds.get(name).copied()
    }
}

struct Parser<'s> {
    toks: Vec<Token>,
    pos: usize,
    syms: &'s mut Symbols,
    depth: usize,
}

type PResult<T> = Result<T, Diagnostic>;

const STATEMENT_START: [&str; 11] = [
    "space",
    "system",
    "ket",
    "operator",
    "observable",
    "assume",
    "apply",
    "measure",
    "query",
    "expect",
    "param",
];

pub(super) fn parse_with(src: &str, syms: &mut Symbols) -> PResult<Script> {
    let toks = tokenize(src)?;
    let mut scratch = syms.clone();
    let mut p = Parser {
        toks,
        pos: 0,
        syms: &mut scratch,
        depth: 0,
    };
    let mut statements = Vec::new();
    while p.peek() != &Tok::Eof {
        statements.push(p.statement()?);
    }
    *syms = scratch;
    Ok(Script { statements })
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].span.end
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> Diagnostic {
        let found = self.peek().to_string();
        let list = expected.join(", ");
        Diagnostic {
            kind: DiagnosticKind::Syntax,
            message: format!("expected {list}, found {found}"),
            span: self.span(),
            found: Some(found),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if self.peek() == &tok {
            Ok(self.bump().span)
        } else {
            let shown = match &tok {
                Tok::Keyword(k) => format!("`{}`", k.as_str()),
                other => format!("`{}`", other.symbol()),
            };
            Err(self.error(&[&shown]))
        }
    }

    fn keyword(&mut self, k: Keyword) -> PResult<Span> {
        self.expect(Tok::Keyword(k))
    }

    fn ident(&mut self, what: &str) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn declare(&mut self, id: &Ident, kind: SymbolKind) -> PResult<()> {
        if let Some(existing) = self.syms.kind(&id.name) {
            return Err(Diagnostic {
                kind: DiagnosticKind::Duplicate,
                message: format!("`{}` is already declared as a {}", id.name, existing.noun()),
                span: id.span,
                found: Some(id.name.clone()),
                expected: Vec::new(),
            });
        }
        self.syms.kinds.insert(id.name.clone(), kind);
        Ok(())
    }

    fn resolve(&self, id: &Ident, allowed: &[SymbolKind]) -> PResult<()> {
        let wanted: Vec<&str> = allowed.iter().map(|k| k.noun()).collect();
        match self.syms.kind(&id.name) {
            None => Err(Diagnostic {
                kind: DiagnosticKind::Undeclared,
                message: format!("`{}` is not declared", id.name),
                span: id.span,
                found: Some(id.name.clone()),
                expected: wanted.iter().map(|s| s.to_string()).collect(),
            }),
            Some(k) if !allowed.contains(&k) => Err(Diagnostic {
                kind: DiagnosticKind::WrongKind,
                message: format!("`{}` is a {}, expected a {}", id.name, k.noun(), wanted.join(" or ")),
                span: id.span,
                found: Some(id.name.clone()),
                expected: wanted.iter().map(|s| s.to_string()).collect(),
            }),
            Some(_) => Ok(()),
        }
    }

    fn resolved(&mut self, what: &str, kind: SymbolKind) -> PResult<Ident> {
        let id = self.ident(what)?;
        self.resolve(&id, &[kind])?;
        Ok(id)
    }

    fn list_of(&mut self, what: &str, kind: SymbolKind) -> PResult<Vec<Ident>> {
        let mut out = vec![self.resolved(what, kind)?];
        while self.eat(&Tok::Comma) {
            out.push(self.resolved(what, kind)?);
        }
        Ok(out)
    }

    /// `( A, B )` or a single bare system.
    fn system_group(&mut self) -> PResult<Vec<Ident>> {
        if self.eat(&Tok::LParen) {
            let list = self.list_of("system identifier", SymbolKind::System)?;
            self.expect(Tok::RParen)?;
            Ok(list)
        } else if matches!(self.peek(), Tok::Ident(_)) {
            Ok(vec![self.resolved("system identifier", SymbolKind::System)?])
        } else {
            Err(self.error(&["`(`", "system identifier"]))
        }
    }

    fn fresh_group(&mut self) -> PResult<Vec<Ident>> {
        let parens = self.eat(&Tok::LParen);
        let mut out = vec![self.ident("new system name")?];
        if parens {
            while self.eat(&Tok::Comma) {
                out.push(self.ident("new system name")?);
            }
            self.expect(Tok::RParen)?;
        }
        Ok(out)
    }

    /// Marks `input` consumed and declares its successor. A system that is
    /// already consumed is left for the runtime to reject.
    fn succeed(&mut self, input: &Ident, new: Option<&Ident>) -> PResult<()> {
        if !self.syms.consumed.insert(input.name.clone()) {
            return Ok(());
        }
        let successor = match new {
            Some(id) => id.clone(),
            None => Ident {
                name: successor_name(&input.name),
                span: input.span,
            },
        };
        self.declare(&successor, SymbolKind::System)
    }

    fn observable_ref(&mut self) -> PResult<ObservableRef> {
        if self.eat(&Tok::LBrace) {
            let kets = self.list_of("ket identifier", SymbolKind::Ket)?;
            self.expect(Tok::RBrace)?;
            Ok(ObservableRef::Inline(kets))
        } else if matches!(self.peek(), Tok::Ident(_)) {
            Ok(ObservableRef::Named(self.resolved("observable identifier", SymbolKind::Observable)?))
        } else {
            Err(self.error(&["observable identifier", "`{`"]))
        }
    }

    fn ket_set(&mut self) -> PResult<Vec<Ident>> {
        self.expect(Tok::LBrace)?;
        let kets = self.list_of("ket identifier", SymbolKind::Ket)?;
        self.expect(Tok::RBrace)?;
        Ok(kets)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let kind = match self.peek() {
            Tok::Keyword(Keyword::Space) => {
                self.bump();
                let name = self.ident("space name")?;
                self.keyword(Keyword::Dim)?;
                let dim = match *self.peek() {
                    Tok::Number(x) if x.fract() == 0.0 && (2.0..=4096.0).contains(&x) => {
                        self.bump();
                        x as usize
                    }
                    _ => return Err(self.error(&["integer dimension between 2 and 4096"])),
                };
                self.declare(&name, SymbolKind::Space)?;
                StmtKind::Space { name, dim }
            }
            Tok::Keyword(Keyword::System) => {
                self.bump();
                let name = self.ident("system name")?;
                self.expect(Tok::Colon)?;
                let space = self.resolved("space identifier", SymbolKind::Space)?;
                self.declare(&name, SymbolKind::System)?;
                StmtKind::System { name, space }
            }
            Tok::Keyword(Keyword::Ket) => {
                self.bump();
                let name = self.ident("ket name")?;
                let spaces = if self.eat(&Tok::Keyword(Keyword::On)) {
                    Some(self.list_of("space identifier", SymbolKind::Space)?)
                } else {
                    None
                };
                self.expect(Tok::Eq)?;
                let value = self.expr("ket expression")?;
                self.declare(&name, SymbolKind::Ket)?;
                StmtKind::Ket { name, spaces, value }
            }
            Tok::Keyword(Keyword::Operator) => {
                self.bump();
                let name = self.ident("operator name")?;
                self.expect(Tok::Eq)?;
                let def = match self.peek() {
                    Tok::Ident(_) => OperatorDef::Alias(self.resolved("operator identifier", SymbolKind::Operator)?),
                    Tok::LBracket => OperatorDef::Matrix(self.matrix()?),
                    _ => return Err(self.error(&["operator identifier", "`[`"])),
                };
                self.declare(&name, SymbolKind::Operator)?;
                StmtKind::Operator { name, def }
            }
            Tok::Keyword(Keyword::Observable) => {
                self.bump();
                let name = self.ident("observable name")?;
                self.keyword(Keyword::On)?;
                let space = self.resolved("space identifier", SymbolKind::Space)?;
                self.expect(Tok::Eq)?;
                let kets = self.ket_set()?;
                self.declare(&name, SymbolKind::Observable)?;
                StmtKind::Observable { name, space, kets }
            }
            Tok::Keyword(Keyword::Assume) => {
                self.bump();
                let systems = self.system_group()?;
                self.expect(Tok::Models)?;
                let value = self.expr("ket expression")?;
                StmtKind::Assume { systems, value }
            }
            Tok::Keyword(Keyword::Apply) => {
                self.bump();
                let operator = self.resolved("operator identifier", SymbolKind::Operator)?;
                self.keyword(Keyword::To)?;
                let systems = self.system_group()?;
                let rename = if self.eat(&Tok::Keyword(Keyword::As)) {
                    let names = self.fresh_group()?;
                    if names.len() != systems.len() {
                        return Err(Diagnostic {
                            kind: DiagnosticKind::Syntax,
                            message: format!("expected {} new name(s), found {}", systems.len(), names.len()),
                            span: names[0].span,
                            found: None,
                            expected: Vec::new(),
                        });
                    }
                    Some(names)
                } else {
                    None
                };
                for (k, input) in systems.iter().enumerate() {
                    self.succeed(input, rename.as_ref().map(|r| &r[k]))?;
                }
                StmtKind::Apply {
                    operator,
                    systems,
                    rename,
                }
            }
            Tok::Keyword(Keyword::Measure) => {
                self.bump();
                let system = self.resolved("system identifier", SymbolKind::System)?;
                self.keyword(Keyword::With)?;
                let observable = self.observable_ref()?;
                self.expect(Tok::Arrow)?;
                let outcome = match self.peek() {
                    Tok::Keyword(Keyword::Chosen) => {
                        self.bump();
                        Outcome::Chosen(self.resolved("ket identifier", SymbolKind::Ket)?)
                    }
                    Tok::Keyword(Keyword::Any) => {
                        self.bump();
                        Outcome::Any
                    }
                    _ => return Err(self.error(&["`chosen`", "`any`"])),
                };
                let rename = if self.eat(&Tok::Keyword(Keyword::As)) {
                    Some(self.ident("new system name")?)
                } else {
                    None
                };
                self.succeed(&system, rename.as_ref())?;
                StmtKind::Measure {
                    system,
                    observable,
                    outcome,
                    rename,
                }
            }
            Tok::Keyword(Keyword::Query) => {
                self.bump();
                match self.peek() {
                    Tok::Keyword(Keyword::Possible) => {
                        self.bump();
                        let system = self.resolved("system identifier", SymbolKind::System)?;
                        self.keyword(Keyword::With)?;
                        let observable = self.observable_ref()?;
                        StmtKind::QueryPossible { system, observable }
                    }
                    Tok::Keyword(Keyword::Verifies) => {
                        self.bump();
                        let systems = self.system_group()?;
                        self.expect(Tok::Models)?;
                        let value = self.expr("ket expression")?;
                        StmtKind::QueryVerifies { systems, value }
                    }
                    _ => return Err(self.error(&["`possible`", "`verifies`"])),
                }
            }
            Tok::Keyword(Keyword::Expect) => {
                self.bump();
                match self.peek() {
                    Tok::Keyword(Keyword::Possible) => {
                        self.bump();
                        let system = self.resolved("system identifier", SymbolKind::System)?;
                        self.keyword(Keyword::With)?;
                        let observable = self.observable_ref()?;
                        self.expect(Tok::Eq)?;
                        let outcomes = self.ket_set()?;
                        StmtKind::ExpectPossible {
                            system,
                            observable,
                            outcomes,
                        }
                    }
                    Tok::Keyword(Keyword::Verifies) => {
                        self.bump();
                        let systems = self.system_group()?;
                        self.expect(Tok::Models)?;
                        let value = self.expr("ket expression")?;
                        StmtKind::ExpectVerifies { systems, value }
                    }
                    _ => return Err(self.error(&["`possible`", "`verifies`"])),
                }
            }
            Tok::Keyword(Keyword::Param) => {
                self.bump();
                let name = self.ident("parameter name")?;
                let default = if self.eat(&Tok::Eq) {
                    Some(self.expr("expression")?)
                } else {
                    None
                };
                self.declare(&name, SymbolKind::Param)?;
                StmtKind::Param { name, default }
            }
            _ => return Err(self.error(&STATEMENT_START)),
        };
        self.expect(Tok::Semi)?;
        Ok(Stmt {
            kind,
            span: Span {
                end: self.prev_end(),
                ..start
            },
        })
    }

    fn matrix(&mut self) -> PResult<Vec<Vec<Expr>>> {
        self.expect(Tok::LBracket)?;
        let mut rows = vec![self.row()?];
        while self.eat(&Tok::Comma) {
            rows.push(self.row()?);
        }
        self.expect(Tok::RBracket)?;
        Ok(rows)
    }

    fn row(&mut self) -> PResult<Vec<Expr>> {
        self.expect(Tok::LBracket)?;
        let items = self.expr_list()?;
        self.expect(Tok::RBracket)?;
        Ok(items)
    }

    fn expr_list(&mut self) -> PResult<Vec<Expr>> {
        let mut out = vec![self.expr("expression")?];
        while self.eat(&Tok::Comma) {
            out.push(self.expr("expression")?);
        }
        Ok(out)
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(Diagnostic {
                kind: DiagnosticKind::TooDeep,
                message: format!("expression nesting exceeds {MAX_DEPTH} levels"),
                span: self.span(),
                found: Some(self.peek().to_string()),
                expected: Vec::new(),
            });
        }
        Ok(())
    }

    fn join(&self, a: &Expr, b: &Expr) -> Span {
        Span { end: b.span.end, ..a.span }
    }

    fn expr(&mut self, what: &str) -> PResult<Expr> {
        self.enter()?;
        let mut lhs = self.term(what)?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term("expression")?;
            lhs = self.binary(op, lhs, rhs);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn binary(&self, op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        let span = self.join(&lhs, &rhs);
        Expr {
            kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            span,
        }
    }

    fn term(&mut self, what: &str) -> PResult<Expr> {
        let mut lhs = self.tensor(what)?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.tensor("expression")?;
            lhs = self.binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn tensor(&mut self, what: &str) -> PResult<Expr> {
        let mut lhs = self.unary(what)?;
        while self.eat(&Tok::Amp) {
            let rhs = self.unary("expression")?;
            lhs = self.binary(BinOp::Tensor, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self, what: &str) -> PResult<Expr> {
        if self.peek() == &Tok::Minus {
            let start = self.bump().span;
            self.enter()?;
            let inner = self.unary("expression")?;
            self.depth -= 1;
            return Ok(Expr {
                span: Span {
                    end: inner.span.end,
                    ..start
                },
                kind: ExprKind::Neg(Box::new(inner)),
            });
        }
        self.primary(what)
    }

    fn primary(&mut self, what: &str) -> PResult<Expr> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Number(x) => {
                self.bump();
                ExprKind::Number(x)
            }
            Tok::Imaginary(x) => {
                self.bump();
                ExprKind::Imaginary(x)
            }
            Tok::Keyword(Keyword::I) => {
                self.bump();
                ExprKind::ImaginaryUnit
            }
            Tok::Keyword(Keyword::Pi) => {
                self.bump();
                ExprKind::Pi
            }
            Tok::KetLiteral(s) => {
                self.bump();
                ExprKind::KetLiteral(s)
            }
            Tok::Ident(_) => {
                let id = self.ident("identifier")?;
                self.resolve(&id, &[SymbolKind::Ket, SymbolKind::Param])?;
                ExprKind::Var(id.name)
            }
            Tok::LBracket => {
                self.bump();
                let items = self.expr_list()?;
                self.expect(Tok::RBracket)?;
                ExprKind::Vector(VectorStyle::Bracket, items)
            }
            Tok::Keyword(Keyword::Ket) => {
                self.bump();
                self.expect(Tok::LParen)?;
                let items = self.expr_list()?;
                self.expect(Tok::RParen)?;
                ExprKind::Vector(VectorStyle::Call, items)
            }
            Tok::Keyword(k @ (Keyword::Sqrt | Keyword::Exp | Keyword::Cos | Keyword::Sin | Keyword::Conj)) => {
                self.bump();
                let f = match k {
                    Keyword::Sqrt => Func::Sqrt,
                    Keyword::Exp => Func::Exp,
                    Keyword::Cos => Func::Cos,
                    Keyword::Sin => Func::Sin,
                    _ => Func::Conj,
                };
                self.expect(Tok::LParen)?;
                let arg = self.expr("expression")?;
                self.expect(Tok::RParen)?;
                ExprKind::Call(f, Box::new(arg))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr("expression")?;
                self.expect(Tok::RParen)?;
                return Ok(Expr {
                    kind: inner.kind,
                    span: Span {
                        end: self.prev_end(),
                        ..start
                    },
                });
            }
            _ => return Err(self.error(&[what])),
        };
        Ok(Expr {
            kind,
            span: Span {
                end: self.prev_end(),
                ..start
            },
        })
    }
}
