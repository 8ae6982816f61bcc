//! C ABI over the `qml` engine.
//!
//! All objects are opaque and owned by the caller once returned; release
//! them with the matching `*_free` function. Every function returns a
//! [`QmlStatus`]; on failure a description is available from
//! [`qml_last_error`] on the same thread. Complex numbers cross the
//! boundary as interleaved `(re, im)` pairs of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qml::algebra::{AlgebraError, ComplexScalar, Ket, Operator};
use qml::dsl::interp::EvalError;
use qml::dsl::{self, Bindings, LoadError, RunResult};
use qml::engine::TraceFormat;
use qml::{make_observable, EngineError, HandleId, Observable, OutcomeChoice, Session};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QmlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    LinearityViolation = 4,
    ImpossibleOutcome = 5,
    NoAdmissibleOutcome = 6,
    NotAProductState = 7,
    DimensionMismatch = 8,
    InvalidArgument = 9,
    Internal = 10,
}

/// A reasoning session driven call by call.
pub struct QmlSession {
    inner: Session,
}

/// The result of running a script.
pub struct QmlRun {
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg.into()));
}

fn fail(status: QmlStatus, msg: impl Into<String>) -> QmlStatus {
    set_error(msg);
    status
}

fn engine_status(e: &EngineError) -> QmlStatus {
    match e {
        EngineError::LinearityViolation { .. } => QmlStatus::LinearityViolation,
        EngineError::ImpossibleOutcome { .. } => QmlStatus::ImpossibleOutcome,
        EngineError::NoAdmissibleOutcome { .. } => QmlStatus::NoAdmissibleOutcome,
        EngineError::NotAProductState(_) => QmlStatus::NotAProductState,
        EngineError::ShapeMismatch { .. }
        | EngineError::OperatorDimension { .. }
        | EngineError::ObservableDimension { .. }
        | EngineError::Algebra(AlgebraError::DimensionMismatch { .. } | AlgebraError::ShapeMismatch(..)) => {
            QmlStatus::DimensionMismatch
        }
        _ => QmlStatus::InvalidArgument,
    }
}

fn engine_fail(e: EngineError) -> QmlStatus {
    let status = engine_status(&e);
    fail(status, e.to_string())
}

/// Runs `body`, converting a panic into [`QmlStatus::Internal`].
fn guard(body: impl FnOnce() -> QmlStatus) -> QmlStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|_| fail(QmlStatus::Internal, "internal panic"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, QmlStatus> {
    if p.is_null() {
        return Err(fail(QmlStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QmlStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn read_complex(p: *const f64, n: usize) -> Result<Vec<ComplexScalar>, QmlStatus> {
    if p.is_null() {
        return Err(fail(QmlStatus::NullPointer, "null amplitude array"));
    }
    let raw = std::slice::from_raw_parts(p, 2 * n);
    Ok(raw.chunks_exact(2).map(|c| ComplexScalar::new(c[0], c[1])).collect())
}

unsafe fn read_handles(p: *const u32, n: usize) -> Result<Vec<HandleId>, QmlStatus> {
    if p.is_null() {
        return Err(fail(QmlStatus::NullPointer, "null handle array"));
    }
    Ok(std::slice::from_raw_parts(p, n).iter().map(|&h| HandleId(h)).collect())
}

unsafe fn ket(p: *const f64, n: usize) -> Result<Ket, QmlStatus> {
    Ket::from_amps(read_complex(p, n)?).map_err(|e| fail(QmlStatus::InvalidArgument, e.to_string()))
}

/// `dim` outcome rows of `dim` amplitudes each.
unsafe fn observable(basis: *const f64, dim: usize, session: &Session) -> Result<Observable, QmlStatus> {
    let amps = read_complex(basis, dim * dim)?;
    let kets = amps
        .chunks(dim.max(1))
        .map(|row| Ket::from_amps(row.to_vec()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| fail(QmlStatus::InvalidArgument, e.to_string()))?;
    make_observable(kets, session.tolerances().unitary).map_err(|e| fail(QmlStatus::InvalidArgument, e.to_string()))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! session_mut {
    ($p:expr) => {
        match $p.as_mut() {
            Some(s) => &mut s.inner,
            None => return fail(QmlStatus::NullPointer, "null session"),
        }
    };
}

/// Returns the message of the last failure on this thread, or NULL. The
/// caller frees it with [`qml_string_free`].
#[no_mangle]
pub extern "C" fn qml_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone()).map_or(ptr::null_mut(), into_c_string)
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and runs a script. `bindings` is NULL or `name=value` pairs
/// separated by newlines or `;`. Runtime errors and failed expectations
/// are reported through the run, not the return status.
///
/// # Safety
/// `source` and `bindings` must be NUL-terminated or NULL; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qml_script_run(
    source: *const c_char,
    bindings: *const c_char,
    seed: u64,
    out: *mut *mut QmlRun,
) -> QmlStatus {
    guard(|| {
        if out.is_null() {
            return fail(QmlStatus::NullPointer, "null output pointer");
        }
        let src = try_status!(read_str(source));
        let mut map = Bindings::new();
        if !bindings.is_null() {
            let text = try_status!(read_str(bindings));
            for item in text.split(['\n', ';']).map(str::trim).filter(|s| !s.is_empty()) {
                match dsl::parse_binding(item) {
                    Ok((k, v)) => {
                        map.insert(k, v);
                    }
                    Err(e) => return fail(QmlStatus::InvalidArgument, e.to_string()),
                }
            }
        }
        let script = match dsl::parse(src) {
            Ok(s) => s,
            Err(d) => return fail(QmlStatus::ParseError, d.to_string()),
        };
        match dsl::bind_and_run(&script, Session::new(seed), &map) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(QmlRun { result }));
                QmlStatus::Ok
            }
            Err(LoadError::Parse(d)) => fail(QmlStatus::ParseError, d.to_string()),
            Err(e) => fail(QmlStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Status of the run's runtime error, [`QmlStatus::Ok`] if it completed.
/// `expect_failures` receives the number of failed `expect` statements.
///
/// # Safety
/// `run` must be a live run; `expect_failures` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn qml_run_status(run: *const QmlRun, expect_failures: *mut u32) -> QmlStatus {
    guard(|| {
        let Some(run) = run.as_ref() else {
            return fail(QmlStatus::NullPointer, "null run");
        };
        if let Some(n) = expect_failures.as_mut() {
            *n = run.result.expect_failures as u32;
        }
        match &run.result.error {
            None => QmlStatus::Ok,
            Some(e) => {
                let status = match &e.error {
                    EvalError::Engine(inner) => engine_status(inner),
                    EvalError::Shape(_) => QmlStatus::DimensionMismatch,
                    _ => QmlStatus::InvalidArgument,
                };
                fail(status, e.to_string())
            }
        }
    })
}

/// Query answers and expectation results, one per line.
///
/// # Safety
/// `run` must be a live run; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qml_run_output(run: *const QmlRun, out: *mut *mut c_char) -> QmlStatus {
    guard(|| match (run.as_ref(), out.is_null()) {
        (Some(run), false) => {
            let mut text = run.result.lines.join("\n");
            text.push('\n');
            *out = into_c_string(text);
            QmlStatus::Ok
        }
        _ => fail(QmlStatus::NullPointer, "null argument"),
    })
}

/// Derivation trace; `structured` selects the line-record format.
///
/// # Safety
/// `run` must be a live run; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qml_run_trace(run: *const QmlRun, structured: bool, out: *mut *mut c_char) -> QmlStatus {
    guard(|| match (run.as_ref(), out.is_null()) {
        (Some(run), false) => {
            *out = into_c_string(run.result.session.render_trace(format(structured)));
            QmlStatus::Ok
        }
        _ => fail(QmlStatus::NullPointer, "null argument"),
    })
}

/// Replays the run against the state-vector oracle. `passed` receives 1
/// when the report has no FAIL line.
///
/// # Safety
/// `run` must be a live run; `report` and `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn qml_run_audit(run: *const QmlRun, report: *mut *mut c_char, passed: *mut bool) -> QmlStatus {
    guard(|| {
        let (Some(run), false, false) = (run.as_ref(), report.is_null(), passed.is_null()) else {
            return fail(QmlStatus::NullPointer, "null argument");
        };
        match qml::oracle::audit(&run.result.session) {
            Ok(r) => {
                *passed = r.passed();
                *report = into_c_string(r.to_string());
                QmlStatus::Ok
            }
            Err(e) => fail(QmlStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `run` must come from [`qml_script_run`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qml_run_free(run: *mut QmlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

fn format(structured: bool) -> TraceFormat {
    if structured {
        TraceFormat::Structured
    } else {
        TraceFormat::Text
    }
}

/// New empty session with default tolerances.
#[no_mangle]
pub extern "C" fn qml_session_new(seed: u64) -> *mut QmlSession {
    Box::into_raw(Box::new(QmlSession {
        inner: Session::new(seed),
    }))
}

/// # Safety
/// `session` must come from [`qml_session_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qml_session_free(session: *mut QmlSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Declares a system; `name` may be NULL for an automatic name.
///
/// # Safety
/// `session` must be live; `name` NULL or NUL-terminated; `handle` writable.
#[no_mangle]
pub unsafe extern "C" fn qml_session_declare(
    session: *mut QmlSession,
    name: *const c_char,
    dim: usize,
    handle: *mut u32,
) -> QmlStatus {
    guard(|| {
        let s = session_mut!(session);
        if handle.is_null() {
            return fail(QmlStatus::NullPointer, "null handle output");
        }
        let r = if name.is_null() {
            s.declare_system(dim)
        } else {
            s.declare_named(try_status!(read_str(name)), dim)
        };
        match r {
            Ok(h) => {
                *handle = h.0;
                QmlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

/// Records `(handles) |= amps`. `fact` may be NULL.
///
/// # Safety
/// Arrays must hold `n_handles` handles and `n_amps` complex pairs.
#[no_mangle]
pub unsafe extern "C" fn qml_session_assume(
    session: *mut QmlSession,
    handles: *const u32,
    n_handles: usize,
    amps: *const f64,
    n_amps: usize,
    fact: *mut u32,
) -> QmlStatus {
    guard(|| {
        let s = session_mut!(session);
        let hs = try_status!(read_handles(handles, n_handles));
        let v = try_status!(ket(amps, n_amps));
        match s.assume(&hs, &v) {
            Ok(f) => {
                if let Some(out) = fact.as_mut() {
                    *out = f.0;
                }
                QmlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

/// Applies the `dim`×`dim` row-major unitary to the listed systems; the
/// successor handles are written to `out_handles` (length `n_handles`).
///
/// # Safety
/// Arrays must have the stated lengths; `out_handles` writable.
#[no_mangle]
pub unsafe extern "C" fn qml_session_apply(
    session: *mut QmlSession,
    handles: *const u32,
    n_handles: usize,
    matrix: *const f64,
    dim: usize,
    out_handles: *mut u32,
) -> QmlStatus {
    guard(|| {
        let s = session_mut!(session);
        if out_handles.is_null() {
            return fail(QmlStatus::NullPointer, "null handle output");
        }
        let hs = try_status!(read_handles(handles, n_handles));
        let entries = try_status!(read_complex(matrix, dim * dim));
        let op = match Operator::new(dim, entries, s.tolerances().unitary) {
            Ok(op) => op,
            Err(e) => return fail(QmlStatus::InvalidArgument, e.to_string()),
        };
        match s.apply_unitary(&hs, &op) {
            Ok(outs) => {
                for (k, h) in outs.iter().enumerate() {
                    *out_handles.add(k) = h.0;
                }
                QmlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

/// Measures `handle` in the basis given as `dim` rows of `dim` amplitudes.
/// `chosen` is an outcome index, or -1 to sample among admissible ones.
///
/// # Safety
/// `basis` must hold `dim*dim` complex pairs; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn qml_session_measure(
    session: *mut QmlSession,
    handle: u32,
    basis: *const f64,
    dim: usize,
    chosen: i64,
    outcome: *mut u32,
    successor: *mut u32,
) -> QmlStatus {
    guard(|| {
        let s = session_mut!(session);
        if outcome.is_null() || successor.is_null() {
            return fail(QmlStatus::NullPointer, "null output");
        }
        let obs = try_status!(observable(basis, dim, s));
        let choice = match chosen {
            -1 => OutcomeChoice::Any,
            k if k >= 0 => OutcomeChoice::Chosen(k as usize),
            _ => return fail(QmlStatus::InvalidArgument, "chosen must be an index or -1"),
        };
        match s.measure(HandleId(handle), &obs, choice) {
            Ok(r) => {
                *outcome = r.outcome as u32;
                *successor = r.handle.0;
                QmlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

/// Writes the admissible outcome indices (at most `dim`) and their count.
///
/// # Safety
/// `basis` must hold `dim*dim` pairs; `outcomes` room for `dim` entries.
#[no_mangle]
pub unsafe extern "C" fn qml_session_possible(
    session: *mut QmlSession,
    handle: u32,
    basis: *const f64,
    dim: usize,
    outcomes: *mut u32,
    count: *mut usize,
) -> QmlStatus {
    guard(|| {
        let s = session_mut!(session);
        if outcomes.is_null() || count.is_null() {
            return fail(QmlStatus::NullPointer, "null output");
        }
        let obs = try_status!(observable(basis, dim, s));
        match s.possible_outcomes(HandleId(handle), &obs) {
            Ok(set) => {
                for (k, i) in set.iter().enumerate() {
                    *outcomes.add(k) = *i as u32;
                }
                *count = set.len();
                QmlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

/// Sets `*holds` to whether `(handles) |= amps` follows from the facts.
///
/// # Safety
/// Arrays must have the stated lengths; `holds` writable.
#[no_mangle]
pub unsafe extern "C" fn qml_session_verifies(
    session: *mut QmlSession,
    handles: *const u32,
    n_handles: usize,
    amps: *const f64,
    n_amps: usize,
    holds: *mut bool,
) -> QmlStatus {
    guard(|| {
        let s = session_mut!(session);
        if holds.is_null() {
            return fail(QmlStatus::NullPointer, "null output");
        }
        let hs = try_status!(read_handles(handles, n_handles));
        let v = try_status!(ket(amps, n_amps));
        match s.verifies(&hs, &v) {
            Ok(d) => {
                *holds = d.is_some();
                QmlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

/// # Safety
/// `session` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qml_session_trace(
    session: *const QmlSession,
    structured: bool,
    out: *mut *mut c_char,
) -> QmlStatus {
    guard(|| match (session.as_ref(), out.is_null()) {
        (Some(s), false) => {
            *out = into_c_string(s.inner.render_trace(format(structured)));
            QmlStatus::Ok
        }
        _ => fail(QmlStatus::NullPointer, "null argument"),
    })
}
