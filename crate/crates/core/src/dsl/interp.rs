use std::collections::HashMap;

use thiserror::Error;

use super::ast::*;
use super::parser::{parse_with, Symbols};
use super::printer::print_expr;
use super::{Diagnostic, Span};
use crate::algebra::{gates, proportional, tensor, AlgebraError, ComplexScalar, Ket, Operator, SpaceShape};
use crate::engine::{successor_name, EngineError, OutcomeChoice, Session};
use crate::logic::{make_observable, HandleId, Judgement, Observable, ObservableError};

pub type Bindings = HashMap<String, ComplexScalar>;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(ComplexScalar),
    Ket(Ket),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("type error: {0}")]
    Type(String),
    #[error("expression is not finite")]
    NonFinite,
    #[error("parameter {0} has no value")]
    Unbound(String),
    #[error("unknown system {0}")]
    UnknownSystem(String),
    #[error("ket {ket} is not an outcome of {observable}")]
    NotAnOutcome { ket: String, observable: String },
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Failure while executing one statement.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}:{}: {error}", span.line, span.col)]
pub struct RuntimeError {
    pub span: Span,
    pub error: EvalError,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("{0}")]
    Parse(#[from] Diagnostic),
    #[error("parameter {0} is declared without a default and was not bound")]
    Unbound(String),
    #[error("binding for undeclared parameter {0}")]
    UnknownParam(String),
    #[error("invalid binding {0}: {1}")]
    Binding(String, String),
}

/// Report of one executed statement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub lines: Vec<String>,
    /// `Some(passed)` for `expect` statements.
    pub expect: Option<bool>,
}

fn finite(c: ComplexScalar) -> Result<ComplexScalar, EvalError> {
    if c.re.is_finite() && c.im.is_finite() {
        Ok(c)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn finite_ket(k: Ket) -> Result<Ket, EvalError> {
    if k.amps().iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
        Ok(k)
    } else {
        Err(EvalError::NonFinite)
    }
}

/// Six-digit rendering for human-facing output.
pub fn short_ket(k: &Ket) -> String {
    let parts: Vec<String> = k
        .amps()
        .iter()
        .map(|a| {
            let re = if a.re.abs() < 5e-7 { 0.0 } else { a.re };
            if a.im.abs() < 5e-7 {
                format!("{re:.6}")
            } else {
                format!("{re:.6}{:+.6}i", a.im)
            }
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

pub fn describe_fact(session: &Session, f: &Judgement) -> String {
    format!("{} ({}) |= {}", f.id, session.names(&f.subject).join(", "), short_ket(&f.vector))
}

/// Evaluates constant expressions such as `-p` binding values.
pub fn eval_constant(text: &str) -> Result<ComplexScalar, String> {
    let mut syms = Symbols::default();
    let script = parse_with(&format!("param __value = {text};"), &mut syms).map_err(|d| d.message)?;
    let Some(StmtKind::Param { default: Some(e), .. }) = script.statements.first().map(|s| &s.kind) else {
        return Err("expected a single expression".into());
    };
    if script.statements.len() != 1 {
        return Err("expected a single expression".into());
    }
    let env = Interpreter::new(Session::new(0), Bindings::new());
    match env.eval(e).map_err(|e| e.to_string())? {
        Value::Scalar(c) => Ok(c),
        Value::Ket(_) => Err("expected a scalar".into()),
    }
}

/// Executes statements against one session, one at a time.
pub struct Interpreter {
    session: Session,
    bindings: Bindings,
    symbols: Symbols,
    params: HashMap<String, ComplexScalar>,
    spaces: HashMap<String, usize>,
    kets: HashMap<String, Ket>,
    operators: HashMap<String, Operator>,
    observables: HashMap<String, Observable>,
}

impl Interpreter {
    pub fn new(session: Session, bindings: Bindings) -> Self {
        Interpreter {
            session,
            bindings,
            symbols: Symbols::default(),
            params: HashMap::new(),
            spaces: HashMap::from([("qubit".to_owned(), 2)]),
            kets: HashMap::new(),
            operators: gates::standard_gates().into_iter().map(|(n, g)| (n.to_owned(), g)).collect(),
            observables: HashMap::new(),
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn into_session(self) -> Session {
        self.session
    }

    /// Parses more source against the names this interpreter already knows.
    pub fn parse(&mut self, text: &str) -> Result<Script, Diagnostic> {
        parse_with(text, &mut self.symbols)
    }

    /// Runs one parsed statement. A failed statement leaves the session
    /// unchanged.
    pub fn execute(&mut self, stmt: &Stmt) -> Result<StepOutput, RuntimeError> {
        self.step(stmt).map_err(|error| RuntimeError { span: stmt.span, error })
    }

    /// Parses and runs `text` as a unit: if any statement fails, the
    /// symbols introduced by the failing and later statements are dropped.
    pub fn execute_source(&mut self, text: &str) -> Result<Vec<StepOutput>, ExecError> {
        let before = self.symbols.clone();
        let script = self.parse(text).map_err(ExecError::Parse)?;
        let mut outputs = Vec::new();
        for stmt in &script.statements {
            match self.execute(stmt) {
                Ok(o) => outputs.push(o),
                Err(e) => {
                    self.symbols = before;
                    self.resync_symbols(&script, stmt);
                    return Err(ExecError::Runtime(outputs, e));
                }
            }
        }
        Ok(outputs)
    }

    /// Replays the symbol effects of the statements before `failed`.
    fn resync_symbols(&mut self, script: &Script, failed: &Stmt) {
        let ok: Vec<Stmt> = script.statements.iter().take_while(|s| !std::ptr::eq(*s, failed)).cloned().collect();
        let text = super::printer::print_script(&Script { statements: ok });
        let _ = parse_with(&text, &mut self.symbols);
    }

    fn handle(&self, id: &Ident) -> Result<HandleId, EvalError> {
        self.session
            .handle_by_name(&id.name)
            .map(|h| h.id)
            .ok_or_else(|| EvalError::UnknownSystem(id.name.clone()))
    }

    fn handles(&self, ids: &[Ident]) -> Result<Vec<HandleId>, EvalError> {
        ids.iter().map(|i| self.handle(i)).collect()
    }

    fn ket_value(&self, e: &Expr) -> Result<Ket, EvalError> {
        match self.eval(e)? {
            Value::Ket(k) => Ok(k),
            Value::Scalar(_) => Err(EvalError::Type(format!("`{}` is a scalar, expected a ket", print_expr(e)))),
        }
    }

    fn observable(&self, r: &ObservableRef, dim: usize) -> Result<(String, Observable), EvalError> {
        match r {
            ObservableRef::Named(id) => Ok((id.name.clone(), self.observables[&id.name].clone())),
            ObservableRef::Inline(ids) => {
                let name = format!("{{{}}}", ids.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", "));
                let kets = ids.iter().map(|i| self.kets[&i.name].clone()).collect::<Vec<_>>();
                if kets.iter().any(|k| k.dim() != dim) {
                    return Err(EvalError::Shape(format!("outcomes of {name} do not match dimension {dim}")));
                }
                let obs = make_observable(kets, self.session.tolerances().unitary)?
                    .with_labels(ids.iter().map(|i| Some(i.name.clone())).collect());
                Ok((name, obs))
            }
        }
    }

    fn outcome_index(&self, obs: &Observable, obs_name: &str, ket: &Ident) -> Result<usize, EvalError> {
        if let Some(i) = obs.index_of_label(&ket.name) {
            return Ok(i);
        }
        let v = &self.kets[&ket.name];
        let tol = self.session.tolerances();
        obs.basis()
            .iter()
            .position(|o| o.dim() == v.dim() && proportional(o, v, tol.proportional).unwrap_or(false))
            .ok_or_else(|| EvalError::NotAnOutcome {
                ket: ket.name.clone(),
                observable: obs_name.to_owned(),
            })
    }

    fn label_set(obs: &Observable, items: &[usize]) -> String {
        let names: Vec<String> = items.iter().map(|&i| obs.outcome_name(i)).collect();
        format!("{{{}}}", names.join(", "))
    }

    fn step(&mut self, stmt: &Stmt) -> Result<StepOutput, EvalError> {
        let mut out = StepOutput::default();
        match &stmt.kind {
            StmtKind::Space { name, dim } => {
                self.spaces.insert(name.name.clone(), *dim);
            }
            StmtKind::System { name, space } => {
                self.session.declare_named(&name.name, self.spaces[&space.name])?;
            }
            StmtKind::Ket { name, spaces, value } => {
                let mut k = self.ket_value(value)?;
                if let Some(spaces) = spaces {
                    let dims: Vec<usize> = spaces.iter().map(|s| self.spaces[&s.name]).collect();
                    let shape = SpaceShape::new(dims)?;
                    if shape.total() != k.dim() {
                        return Err(EvalError::Shape(format!(
                            "ket {} has {} amplitudes, expected {}",
                            name.name,
                            k.dim(),
                            shape.total()
                        )));
                    }
                    k = k.reshape(shape)?;
                }
                self.kets.insert(name.name.clone(), k);
            }
            StmtKind::Operator { name, def } => {
                let op = match def {
                    OperatorDef::Alias(id) => self.operators[&id.name].clone(),
                    OperatorDef::Matrix(rows) => {
                        let mut values = Vec::with_capacity(rows.len());
                        for row in rows {
                            let mut r = Vec::with_capacity(row.len());
                            for e in row {
                                match self.eval(e)? {
                                    Value::Scalar(c) => r.push(c),
                                    Value::Ket(_) => {
                                        return Err(EvalError::Type("matrix entries must be scalars".into()))
                                    }
                                }
                            }
                            values.push(r);
                        }
                        Operator::from_rows(&values, self.session.tolerances().unitary)?
                    }
                };
                self.operators.insert(name.name.clone(), op);
            }
            StmtKind::Observable { name, space, kets } => {
                let dim = self.spaces[&space.name];
                let (_, obs) = self.observable(&ObservableRef::Inline(kets.clone()), dim)?;
                self.observables.insert(name.name.clone(), obs);
            }
            StmtKind::Param { name, default } => {
                let value = match (self.bindings.get(&name.name), default) {
                    (Some(v), _) => *v,
                    (None, Some(e)) => match self.eval(e)? {
                        Value::Scalar(c) => c,
                        Value::Ket(_) => return Err(EvalError::Type("parameters must be scalars".into())),
                    },
                    (None, None) => return Err(EvalError::Unbound(name.name.clone())),
                };
                self.params.insert(name.name.clone(), value);
            }
            StmtKind::Assume { systems, value } => {
                let hs = self.handles(systems)?;
                let v = self.ket_value(value)?;
                self.session.assume(&hs, &v)?;
            }
            StmtKind::Apply {
                operator,
                systems,
                rename,
            } => {
                let hs = self.handles(systems)?;
                let names: Vec<String> = match rename {
                    Some(r) => r.iter().map(|i| i.name.clone()).collect(),
                    None => systems.iter().map(|s| successor_name(&s.name)).collect(),
                };
                let op = self.operators[&operator.name].clone();
                self.session.apply_unitary_named(&hs, &op, Some(&names))?;
            }
            StmtKind::Measure {
                system,
                observable,
                outcome,
                rename,
            } => {
                let h = self.handle(system)?;
                let dim = self.session.handle(h)?.dim;
                let (obs_name, obs) = self.observable(observable, dim)?;
                let choice = match outcome {
                    Outcome::Chosen(k) => OutcomeChoice::Chosen(self.outcome_index(&obs, &obs_name, k)?),
                    Outcome::Any => {
                        let (set, forced) = self.session.admissibility(h, &obs)?;
                        out.lines.push(match (forced, set.as_slice()) {
                            (true, [only]) => format!("certain: {}", obs.outcome_name(*only)),
                            _ => format!("admissible: {}", Self::label_set(&obs, &set)),
                        });
                        OutcomeChoice::Any
                    }
                };
                let successor = rename.as_ref().map_or_else(|| successor_name(&system.name), |r| r.name.clone());
                let r = self.session.measure_named(h, &obs, choice, Some(&successor))?;
                out.lines.push(format!(
                    "measure {} with {obs_name}: {} -> {successor}",
                    system.name,
                    obs.outcome_name(r.outcome)
                ));
            }
            StmtKind::QueryPossible { system, observable } => {
                let h = self.handle(system)?;
                let dim = self.session.handle(h)?.dim;
                let (obs_name, obs) = self.observable(observable, dim)?;
                let (set, forced) = self.session.admissibility(h, &obs)?;
                let note = if forced { " (certain)" } else { "" };
                out.lines.push(format!(
                    "possible {} with {obs_name}: {}{note}",
                    system.name,
                    Self::label_set(&obs, &set)
                ));
            }
            StmtKind::QueryVerifies { systems, value } => {
                let hs = self.handles(systems)?;
                let v = self.ket_value(value)?;
                let answer = match self.session.verifies(&hs, &v)? {
                    Some(d) => format!("yes by {d}"),
                    None => "no".to_owned(),
                };
                out.lines.push(format!("verifies {} |= {}: {answer}", group(systems), print_expr(value)));
            }
            StmtKind::ExpectVerifies { systems, value } => {
                let hs = self.handles(systems)?;
                let v = self.ket_value(value)?;
                let ok = self.session.verifies(&hs, &v)?.is_some();
                out.expect = Some(ok);
                out.lines.push(format!(
                    "expect verifies {} |= {}: {}",
                    group(systems),
                    print_expr(value),
                    verdict(ok, stmt.span)
                ));
            }
            StmtKind::ExpectPossible {
                system,
                observable,
                outcomes,
            } => {
                let h = self.handle(system)?;
                let dim = self.session.handle(h)?.dim;
                let (obs_name, obs) = self.observable(observable, dim)?;
                let mut want = outcomes
                    .iter()
                    .map(|k| self.outcome_index(&obs, &obs_name, k))
                    .collect::<Result<Vec<_>, _>>()?;
                want.sort_unstable();
                want.dedup();
                let (got, _) = self.session.admissibility(h, &obs)?;
                let ok = got == want;
                out.expect = Some(ok);
                let detail = if ok {
                    verdict(true, stmt.span)
                } else {
                    format!("{} (got {})", verdict(false, stmt.span), Self::label_set(&obs, &got))
                };
                out.lines.push(format!(
                    "expect possible {} with {obs_name} = {}: {detail}",
                    system.name,
                    Self::label_set(&obs, &want)
                ));
            }
        }
        Ok(out)
    }

    pub fn eval(&self, e: &Expr) -> Result<Value, EvalError> {
        use ComplexScalar as C;
        Ok(match &e.kind {
            ExprKind::Number(x) => Value::Scalar(C::new(*x, 0.0)),
            ExprKind::Imaginary(x) => Value::Scalar(C::new(0.0, *x)),
            ExprKind::ImaginaryUnit => Value::Scalar(C::new(0.0, 1.0)),
            ExprKind::Pi => Value::Scalar(C::new(std::f64::consts::PI, 0.0)),
            ExprKind::Var(name) => {
                if let Some(k) = self.kets.get(name) {
                    Value::Ket(k.clone())
                } else {
                    Value::Scalar(*self.params.get(name).ok_or_else(|| EvalError::Unbound(name.clone()))?)
                }
            }
            ExprKind::KetLiteral(symbols) => {
                let mut acc: Option<Ket> = None;
                for c in symbols.chars() {
                    let k = match c {
                        '0' => Ket::basis(2, 0)?,
                        '1' => Ket::basis(2, 1)?,
                        '+' => Ket::plus(),
                        _ => Ket::minus(),
                    };
                    acc = Some(match acc {
                        None => k,
                        Some(a) => tensor(&a, &k),
                    });
                }
                Value::Ket(acc.ok_or_else(|| EvalError::Type("empty ket literal".into()))?)
            }
            ExprKind::Vector(_, items) => {
                let mut amps = Vec::with_capacity(items.len());
                for item in items {
                    match self.eval(item)? {
                        Value::Scalar(c) => amps.push(c),
                        Value::Ket(_) => return Err(EvalError::Type("vector entries must be scalars".into())),
                    }
                }
                Value::Ket(Ket::from_amps(amps)?)
            }
            ExprKind::Call(f, arg) => {
                let Value::Scalar(x) = self.eval(arg)? else {
                    return Err(EvalError::Type(format!("{}() takes a scalar", f.name())));
                };
                Value::Scalar(finite(match f {
                    Func::Sqrt => x.sqrt(),
                    Func::Exp => x.exp(),
                    Func::Cos => x.cos(),
                    Func::Sin => x.sin(),
                    Func::Conj => x.conj(),
                })?)
            }
            ExprKind::Neg(inner) => match self.eval(inner)? {
                Value::Scalar(c) => Value::Scalar(-c),
                Value::Ket(k) => Value::Ket(k.scale(C::new(-1.0, 0.0))),
            },
            ExprKind::Binary(op, l, r) => {
                let (a, b) = (self.eval(l)?, self.eval(r)?);
                match (op, a, b) {
                    (BinOp::Add, Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(finite(x + y)?),
                    (BinOp::Sub, Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(finite(x - y)?),
                    (BinOp::Mul, Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(finite(x * y)?),
                    (BinOp::Div, Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(finite(x / y)?),
                    (BinOp::Add, Value::Ket(x), Value::Ket(y)) => Value::Ket(finite_ket(x.add(&y)?)?),
                    (BinOp::Sub, Value::Ket(x), Value::Ket(y)) => {
                        Value::Ket(finite_ket(x.add(&y.scale(C::new(-1.0, 0.0)))?)?)
                    }
                    (BinOp::Mul, Value::Scalar(c), Value::Ket(k)) | (BinOp::Mul, Value::Ket(k), Value::Scalar(c)) => {
                        Value::Ket(finite_ket(k.scale(c))?)
                    }
                    (BinOp::Div, Value::Ket(k), Value::Scalar(c)) => Value::Ket(finite_ket(k.scale(C::new(1.0, 0.0) / c))?),
                    (BinOp::Tensor, Value::Ket(x), Value::Ket(y)) => Value::Ket(tensor(&x, &y)),
                    (BinOp::Mul, Value::Ket(_), Value::Ket(_)) => {
                        return Err(EvalError::Type("kets cannot be multiplied; use & for the tensor product".into()))
                    }
                    (BinOp::Tensor, ..) => return Err(EvalError::Type("& takes two kets".into())),
                    _ => {
                        return Err(EvalError::Type(format!(
                            "cannot combine a scalar and a ket in `{}`",
                            print_expr(e)
                        )))
                    }
                }
            }
        })
    }
}

fn group(ids: &[Ident]) -> String {
    format!("({})", ids.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", "))
}

fn verdict(ok: bool, span: Span) -> String {
    if ok {
        "PASS".to_owned()
    } else {
        format!("FAIL (line {})", span.line)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("{0}")]
    Parse(Diagnostic),
    #[error("{1}")]
    Runtime(Vec<StepOutput>, RuntimeError),
}

/// Outcome of running a whole script.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub session: Session,
    pub lines: Vec<String>,
    pub expects: usize,
    pub expect_failures: usize,
    /// First runtime error; execution stops there.
    pub error: Option<RuntimeError>,
}

impl RunResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.expect_failures == 0
    }
}

/// Checks that `bindings` covers exactly the script's free parameters.
pub fn check_bindings(script: &Script, bindings: &Bindings) -> Result<(), LoadError> {
    let declared: Vec<&str> = script.params().map(|(n, _)| n.name.as_str()).collect();
    if let Some(extra) = bindings.keys().find(|k| !declared.contains(&k.as_str())) {
        return Err(LoadError::UnknownParam(extra.clone()));
    }
    for (name, default) in script.params() {
        if default.is_none() && !bindings.contains_key(&name.name) {
            return Err(LoadError::Unbound(name.name.clone()));
        }
    }
    Ok(())
}

/// Runs `script` to completion on `session`. `expect` failures are
/// counted; the first runtime error stops execution.
pub fn bind_and_run(script: &Script, session: Session, bindings: &Bindings) -> Result<RunResult, LoadError> {
    check_bindings(script, bindings)?;
    let mut interp = Interpreter::new(session, bindings.clone());
    let mut lines = Vec::new();
    let (mut expects, mut expect_failures, mut error) = (0, 0, None);
    for stmt in &script.statements {
        match interp.execute(stmt) {
            Ok(out) => {
                if let Some(ok) = out.expect {
                    expects += 1;
                    if !ok {
                        expect_failures += 1;
                    }
                }
                lines.extend(out.lines);
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    Ok(RunResult {
        session: interp.into_session(),
        lines,
        expects,
        expect_failures,
        error,
    })
}

/// Parses `k=v` with a constant expression on the right.
pub fn parse_binding(text: &str) -> Result<(String, ComplexScalar), LoadError> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| LoadError::Binding(text.to_owned(), "expected key=value".into()))?;
    let value = eval_constant(v.trim()).map_err(|m| LoadError::Binding(text.to_owned(), m))?;
    Ok((k.trim().to_owned(), value))
}
