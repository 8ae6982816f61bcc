use super::ast::*;
use super::interp::{bind_and_run, eval_constant, Bindings, ExecError, Interpreter, LoadError};
use super::*;
use crate::algebra::ComplexScalar;
use crate::engine::{EngineError, Session};

const PRELUDE: &str = "ket k0 = [1, 0]; ket k1 = [0, 1]; observable Z on qubit = {k0, k1};\n";

fn run(src: &str, bindings: &[(&str, f64)]) -> RunResult {
    let script = parse(src).unwrap_or_else(|d| panic!("{d}"));
    let b: Bindings = bindings
        .iter()
        .map(|(k, v)| (k.to_string(), ComplexScalar::new(*v, 0.0)))
        .collect();
    bind_and_run(&script, Session::new(0), &b).unwrap()
}

#[test]
fn two_statements() {
    let s = parse("system A : qubit; assume A |= ket(1,0);").unwrap();
    assert_eq!(s.statements.len(), 2);
}

#[test]
fn measure_with_inline_observable() {
    let s = parse("system A : qubit; ket k0 = [1,0]; ket k1 = [0,1]; measure A with {k0, k1} -> chosen k1;").unwrap();
    match &s.statements[3].kind {
        StmtKind::Measure {
            observable: ObservableRef::Inline(k),
            outcome: Outcome::Chosen(c),
            ..
        } => {
            assert_eq!(k.len(), 2);
            assert_eq!(c.name, "k1");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_ket_expression_points_at_semicolon() {
    let d = parse("system A : qubit; assume A |= ;").unwrap_err();
    assert_eq!(d.kind, DiagnosticKind::Syntax);
    assert_eq!((d.span.line, d.span.col), (1, 31));
    assert_eq!(d.expected, vec!["ket expression".to_owned()]);
    assert_eq!(d.found.as_deref(), Some("`;`"));
}

#[test]
fn name_resolution_errors() {
    assert_eq!(parse("system A : qubit; system A : qubit;").unwrap_err().kind, DiagnosticKind::Duplicate);
    assert_eq!(parse("assume A |= |0>;").unwrap_err().kind, DiagnosticKind::Undeclared);
    assert_eq!(parse("system A : qubit; apply A to (A);").unwrap_err().kind, DiagnosticKind::WrongKind);
    assert_eq!(parse("space H dim 2;").unwrap_err().kind, DiagnosticKind::Duplicate);
    let d = parse("system A : qubit;\nassume B |= |0>;").unwrap_err();
    assert_eq!((d.span.line, d.span.col), (2, 8));
}

#[test]
fn successors_are_declared() {
    let src = format!(
        "{PRELUDE}system A : qubit; system B1 : qubit;\n\
         measure A with Z -> any; apply H to (B1); assume A' |= |0>; assume B2 |= |0>;\n\
         measure A' with Z -> any as Final; query possible Final with Z;"
    );
    parse(&src).unwrap();
    assert_eq!(
        parse(&format!("{PRELUDE}system A : qubit; measure A with Z -> any; assume A |= |0>; assume A2 |= |0>;"))
            .unwrap_err()
            .kind,
        DiagnosticKind::Undeclared
    );
}

#[test]
fn consumed_systems_are_left_to_the_runtime() {
    let src = format!("{PRELUDE}system A : qubit; assume A |= k0;\nmeasure A with Z -> any;\nmeasure A with Z -> any;");
    let result = run(&src, &[]);
    let err = result.error.expect("linearity violation");
    assert_eq!(err.span.line, 4);
    assert!(matches!(err.error, interp::EvalError::Engine(EngineError::LinearityViolation { .. })));
}

#[test]
fn apply_rename_arity() {
    let d = parse("system A : qubit; system B : qubit; apply CNOT to (A, B) as (X);").unwrap_err();
    assert_eq!(d.kind, DiagnosticKind::Syntax);
}

#[test]
fn round_trip() {
    let src = format!(
        "{PRELUDE}param alpha = 3/5; param t;\n\
         space trit dim 3;\n\
         ket w on qubit, qubit = (|00> - -|11>)/sqrt(2) & [1, 0] - 2*(|0+-> + 0.5i*exp(i*t*pi)*conj(1e-20 - 1i)*|111>);\n\
         ket u = ket(cos(t), sin(t)*exp(i*alpha));\n\
         operator U = [[0, 1], [1, 0]]; operator V = U;\n\
         system A : qubit; system B : trit;\n\
         assume A |= -alpha*k0 - (k1 - k0);\n\
         apply V to A as (A9);\n\
         measure A9 with {{k0, k1}} -> chosen k1 as Z9;\n\
         query verifies (Z9) |= k1; expect possible Z9 with Z = {{k1}}; expect verifies Z9 |= k1;"
    );
    let once = parse(&src).unwrap();
    let printed = print_script(&once);
    let twice = parse(&printed).unwrap_or_else(|d| panic!("{d}\n{printed}"));
    assert_eq!(once, twice);
    assert_eq!(printed, print_script(&twice));
}

#[test]
fn nesting_limit() {
    let deep = format!("param x = {}1{};", "(".repeat(500), ")".repeat(500));
    assert_eq!(parse(&deep).unwrap_err().kind, DiagnosticKind::TooDeep);
    let negs = format!("param x = {}1;", "-".repeat(500));
    assert_eq!(parse(&negs).unwrap_err().kind, DiagnosticKind::TooDeep);
}

#[test]
fn invalid_utf8_is_a_diagnostic() {
    let d = parse_bytes(b"system A\n : \xff").unwrap_err();
    assert_eq!(d.kind, DiagnosticKind::InvalidUtf8);
    assert_eq!((d.span.line, d.span.col), (2, 4));
}

#[test]
fn constants() {
    assert_eq!(eval_constant("3/5").unwrap(), ComplexScalar::new(0.6, 0.0));
    assert_eq!(eval_constant("0.6+0.8i").unwrap(), ComplexScalar::new(0.6, 0.8));
    assert!(eval_constant("|0>").is_err());
    assert!(eval_constant("1/0").is_err());
    assert_eq!(parse_binding("beta = 4/5").unwrap().0, "beta");
}

#[test]
fn teleport_script_passes() {
    let src = format!(
        "{PRELUDE}param alpha; param beta;\n\
         system A1 : qubit; system B1 : qubit; system C1 : qubit;\n\
         assume (A1, B1) |= |00> + |11>;\n\
         assume C1 |= alpha*k0 + beta*k1;\n\
         apply CNOT to (C1, A1);\n\
         apply H to (C2);\n\
         measure C3 with Z -> chosen k1;\n\
         measure A2 with Z -> chosen k0;\n\
         expect verifies (B1) |= alpha*k0 - beta*k1;\n\
         apply SZ to (B1);\n\
         expect verifies (B2) |= alpha*k0 + beta*k1;\n\
         expect verifies (B2) |= k0;"
    );
    let r = run(&src, &[("alpha", 0.6), ("beta", 0.8)]);
    assert!(r.error.is_none(), "{:?}", r.error);
    assert_eq!((r.expects, r.expect_failures), (3, 1));
    assert!(r.lines.iter().any(|l| l.ends_with("FAIL (line 13)")), "{:?}", r.lines);
}

#[test]
fn possible_after_assume() {
    let r = run(&format!("{PRELUDE}system A : qubit; assume A |= k0; query possible A with Z;"), &[]);
    assert_eq!(r.lines, vec!["possible A with Z: {k0} (certain)".to_owned()]);
}

#[test]
fn bindings_are_checked() {
    let script = parse("param alpha; param beta = 1;").unwrap();
    let s = Session::new(0);
    assert_eq!(
        bind_and_run(&script, s.clone(), &Bindings::new()).unwrap_err(),
        LoadError::Unbound("alpha".into())
    );
    let b: Bindings = [("gamma".to_owned(), ComplexScalar::new(1.0, 0.0))].into();
    assert_eq!(bind_and_run(&script, s, &b).unwrap_err(), LoadError::UnknownParam("gamma".into()));
}

#[test]
fn runtime_errors_carry_location() {
    let r = run(&format!("{PRELUDE}system A : qubit;\nassume A |= k0;\nmeasure A with Z -> chosen k1;"), &[]);
    let e = r.error.unwrap();
    assert_eq!(e.span.line, 4);
    assert!(e.to_string().starts_with("4:1: "));
}

#[test]
fn incremental_execution_rolls_back_failures() {
    let mut it = Interpreter::new(Session::new(0), Bindings::new());
    it.execute_source(&format!("{PRELUDE}system A : qubit; assume A |= k0;")).unwrap();
    let err = it.execute_source("measure A with Z -> chosen k1;").unwrap_err();
    assert!(matches!(err, ExecError::Runtime(..)));
    // the failed measurement did not introduce A'
    assert!(matches!(it.execute_source("assume A' |= k0;"), Err(ExecError::Parse(_))));
    let out = it.execute_source("measure A with Z -> any;").unwrap();
    assert_eq!(out[0].lines, vec!["certain: k0".to_owned(), "measure A with Z: k0 -> A'".to_owned()]);
    assert_eq!(it.session().rng_draws(), 0);
}

#[test]
fn type_errors() {
    let r = run("system A : qubit; assume A |= 3;", &[]);
    assert!(matches!(r.error.unwrap().error, interp::EvalError::Type(_)));
    let r = run("ket a = |0> * |1>;", &[]);
    assert!(matches!(r.error.unwrap().error, interp::EvalError::Type(_)));
}
