use std::fmt::Write as _;

use super::ast::*;

fn number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        ExprKind::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        ExprKind::Binary(BinOp::Tensor, ..) => 3,
        ExprKind::Neg(_) => 4,
        _ => 5,
    }
}

fn expr_at(e: &Expr, min: u8, out: &mut String) {
    let p = precedence(e);
    let wrap = p < min;
    if wrap {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Number(x) => out.push_str(&number(*x)),
        ExprKind::Imaginary(x) => {
            out.push_str(&number(*x));
            out.push('i');
        }
        ExprKind::ImaginaryUnit => out.push('i'),
        ExprKind::Pi => out.push_str("pi"),
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::KetLiteral(s) => {
            let _ = write!(out, "|{s}>");
        }
        ExprKind::Vector(style, items) => {
            let (open, close) = match style {
                VectorStyle::Bracket => ("[", "]"),
                VectorStyle::Call => ("ket(", ")"),
            };
            out.push_str(open);
            list(items, out);
            out.push_str(close);
        }
        ExprKind::Call(f, arg) => {
            out.push_str(f.name());
            out.push('(');
            expr_at(arg, 0, out);
            out.push(')');
        }
        ExprKind::Neg(inner) => {
            out.push('-');
            expr_at(inner, 4, out);
        }
        ExprKind::Binary(op, l, r) => {
            let sym = match op {
                BinOp::Add => " + ",
                BinOp::Sub => " - ",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Tensor => " & ",
            };
            expr_at(l, p, out);
            out.push_str(sym);
            expr_at(r, p + 1, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

fn list(items: &[Expr], out: &mut String) {
    for (k, e) in items.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        expr_at(e, 0, out);
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr_at(e, 0, &mut s);
    s
}

fn names(ids: &[Ident]) -> String {
    ids.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", ")
}

fn group(ids: &[Ident]) -> String {
    format!("({})", names(ids))
}

fn observable(o: &ObservableRef) -> String {
    match o {
        ObservableRef::Named(id) => id.name.clone(),
        ObservableRef::Inline(kets) => format!("{{{}}}", names(kets)),
    }
}

pub fn print_stmt(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Space { name, dim } => format!("space {} dim {dim};", name.name),
        StmtKind::System { name, space } => format!("system {} : {};", name.name, space.name),
        StmtKind::Ket { name, spaces, value } => {
            let on = spaces.as_ref().map(|sp| format!(" on {}", names(sp))).unwrap_or_default();
            format!("ket {}{on} = {};", name.name, print_expr(value))
        }
        StmtKind::Operator { name, def } => {
            let rhs = match def {
                OperatorDef::Alias(id) => id.name.clone(),
                OperatorDef::Matrix(rows) => {
                    let rs: Vec<String> = rows
                        .iter()
                        .map(|r| {
                            let mut s = String::from("[");
                            list(r, &mut s);
                            s.push(']');
                            s
                        })
                        .collect();
                    format!("[{}]", rs.join(", "))
                }
            };
            format!("operator {} = {rhs};", name.name)
        }
        StmtKind::Observable { name, space, kets } => {
            format!("observable {} on {} = {{{}}};", name.name, space.name, names(kets))
        }
        StmtKind::Assume { systems, value } => format!("assume {} |= {};", group(systems), print_expr(value)),
        StmtKind::Apply {
            operator,
            systems,
            rename,
        } => {
            let r = rename.as_ref().map(|r| format!(" as {}", group(r))).unwrap_or_default();
            format!("apply {} to {}{r};", operator.name, group(systems))
        }
        StmtKind::Measure {
            system,
            observable: o,
            outcome,
            rename,
        } => {
            let out = match outcome {
                Outcome::Chosen(k) => format!("chosen {}", k.name),
                Outcome::Any => "any".to_owned(),
            };
            let r = rename.as_ref().map(|r| format!(" as {}", r.name)).unwrap_or_default();
            format!("measure {} with {} -> {out}{r};", system.name, observable(o))
        }
        StmtKind::QueryPossible { system, observable: o } => {
            format!("query possible {} with {};", system.name, observable(o))
        }
        StmtKind::QueryVerifies { systems, value } => {
            format!("query verifies {} |= {};", group(systems), print_expr(value))
        }
        StmtKind::ExpectVerifies { systems, value } => {
            format!("expect verifies {} |= {};", group(systems), print_expr(value))
        }
        StmtKind::ExpectPossible {
            system,
            observable: o,
            outcomes,
        } => format!(
            "expect possible {} with {} = {{{}}};",
            system.name,
            observable(o),
            names(outcomes)
        ),
        StmtKind::Param { name, default } => match default {
            Some(e) => format!("param {} = {};", name.name, print_expr(e)),
            None => format!("param {};", name.name),
        },
    }
}

/// Canonical source text, one statement per line.
pub fn print_script(script: &Script) -> String {
    let mut out = String::new();
    for s in &script.statements {
        out.push_str(&print_stmt(s));
        out.push('\n');
    }
    out
}
