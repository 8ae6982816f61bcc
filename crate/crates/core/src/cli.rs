//! `qml` command-line front end.
//!
//! Exit statuses: 0 success, 1 failed `expect`, 2 runtime error, 3 usage,
//! I/O, parse or binding error, 4 oracle audit FAIL.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::algebra::Tolerances;
use crate::dsl::interp::{describe_fact, ExecError, StepOutput};
use crate::dsl::{self, Bindings, Interpreter};
use crate::engine::TraceFormat;
use crate::engine::{Faults, Session};
use crate::oracle;

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPECT: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_LOAD: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qml", version, about = "Run and audit quantum measurement scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a script and report queries and expectations.
    Run(RunArgs),
    /// Execute a script and replay it against the state-vector oracle.
    Audit(RunArgs),
    /// Load a script, then read further statements from standard input.
    Explore(RunArgs),
    /// Execute a script, then list the admissible outcomes of one measurement.
    Possible {
        #[command(flatten)]
        run: RunArgs,
        /// System to measure.
        system: String,
        /// Observable declared in the script.
        observable: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceArg {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FaultArg {
    SkipWeakBorn,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Script file.
    script: PathBuf,
    /// Parameter binding `name=value`; repeatable.
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Seed for outcome sampling.
    #[arg(long, env = "QML_SEED", default_value_t = 0)]
    seed: u64,
    /// Amplitude threshold below which a vector counts as zero (default 1e-12).
    #[arg(long, value_parser = positive)]
    tol_zero: Option<f64>,
    /// Proportionality tolerance (default 1e-9).
    #[arg(long, value_parser = positive)]
    tol_prop: Option<f64>,
    /// Print the derivation trace after the results.
    #[arg(long, value_enum)]
    trace: Option<TraceArg>,
    /// Write the trace to a file instead of standard output.
    #[arg(long, requires = "trace")]
    trace_out: Option<PathBuf>,
    /// Also replay the run against the oracle.
    #[arg(long)]
    audit: bool,
    #[arg(long, value_enum, hide = true)]
    fault: Option<FaultArg>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl RunArgs {
    fn session(&self) -> Session {
        let mut tol = Tolerances::default();
        if let Some(z) = self.tol_zero {
            tol.zero = z;
        }
        if let Some(p) = self.tol_prop {
            tol.proportional = p;
        }
        let faults = Faults {
            skip_weak_born: self.fault == Some(FaultArg::SkipWeakBorn),
        };
        Session::with_tolerances(self.seed, tol).with_faults(faults)
    }

    fn bindings(&self) -> Result<Bindings, dsl::LoadError> {
        self.params.iter().map(|p| dsl::parse_binding(p)).collect()
    }
}

/// Loaded script ready to run.
struct Loaded {
    source: String,
    bindings: Bindings,
}

fn load(args: &RunArgs, io: &mut Io<'_>) -> Result<Loaded, i32> {
    let path = args.script.display();
    let bytes = std::fs::read(&args.script).map_err(|e| {
        let _ = writeln!(io.err, "error: cannot read {path}: {e}");
        EXIT_LOAD
    })?;
    let script = dsl::parse_bytes(&bytes).map_err(|d| {
        let _ = writeln!(io.err, "{path}:{d}");
        EXIT_LOAD
    })?;
    let fail = |e: dsl::LoadError, io: &mut Io<'_>| {
        let _ = writeln!(io.err, "{path}: error: {e}");
        EXIT_LOAD
    };
    let bindings = match args.bindings() {
        Ok(b) => b,
        Err(e) => return Err(fail(e, io)),
    };
    if let Err(e) = dsl::interp::check_bindings(&script, &bindings) {
        return Err(fail(e, io));
    }
    Ok(Loaded {
        source: String::from_utf8(bytes).expect("validated by the parser"),
        bindings,
    })
}

/// Results of executing the loaded script inside an interpreter.
struct Executed {
    interp: Interpreter,
    expect_failures: usize,
    runtime_error: bool,
}

fn execute(args: &RunArgs, loaded: Loaded, io: &mut Io<'_>) -> Executed {
    let mut interp = Interpreter::new(args.session(), loaded.bindings);
    let mut expect_failures = 0;
    let mut tally = |outputs: &[StepOutput], io: &mut Io<'_>| {
        for o in outputs {
            for line in &o.lines {
                let _ = writeln!(io.out, "{line}");
            }
            if o.expect == Some(false) {
                expect_failures += 1;
            }
        }
    };
    let runtime_error = match interp.execute_source(&loaded.source) {
        Ok(outputs) => {
            tally(&outputs, io);
            false
        }
        Err(ExecError::Runtime(outputs, e)) => {
            tally(&outputs, io);
            let _ = writeln!(io.err, "{}:{}:{}: error: {}", args.script.display(), e.span.line, e.span.col, e.error);
            true
        }
        Err(ExecError::Parse(d)) => unreachable!("script already parsed: {d}"),
    };
    Executed {
        interp,
        expect_failures,
        runtime_error,
    }
}

fn write_trace(args: &RunArgs, session: &Session, io: &mut Io<'_>) -> Result<(), i32> {
    let Some(fmt) = args.trace else { return Ok(()) };
    let text = session.render_trace(match fmt {
        TraceArg::Text => TraceFormat::Text,
        TraceArg::Structured => TraceFormat::Structured,
    });
    match &args.trace_out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            let _ = writeln!(io.err, "error: cannot write {}: {e}", path.display());
            EXIT_LOAD
        }),
        None => {
            let _ = io.out.write_all(text.as_bytes());
            Ok(())
        }
    }
}

/// Prints the oracle report; true when it contains no FAIL.
fn write_audit(session: &Session, io: &mut Io<'_>) -> bool {
    match oracle::audit(session) {
        Ok(report) => {
            let _ = write!(io.out, "{report}");
            report.passed()
        }
        Err(e) => {
            let _ = writeln!(io.out, "FAIL seed: {e}");
            false
        }
    }
}

fn status(ex: &Executed, audit_ok: bool) -> i32 {
    if ex.runtime_error {
        EXIT_RUNTIME
    } else if !audit_ok {
        EXIT_AUDIT
    } else if ex.expect_failures > 0 {
        EXIT_EXPECT
    } else {
        EXIT_OK
    }
}

fn cmd_run(args: &RunArgs, force_audit: bool, io: &mut Io<'_>) -> i32 {
    let loaded = match load(args, io) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let ex = execute(args, loaded, io);
    if let Err(code) = write_trace(args, ex.interp.session(), io) {
        return code;
    }
    let audit_ok = if args.audit || force_audit {
        write_audit(ex.interp.session(), io)
    } else {
        true
    };
    status(&ex, audit_ok)
}

fn cmd_possible(args: &RunArgs, system: &str, observable: &Path, io: &mut Io<'_>) -> i32 {
    let loaded = match load(args, io) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let mut ex = execute(args, loaded, io);
    if ex.runtime_error {
        return EXIT_RUNTIME;
    }
    let query = format!("query possible {system} with {};", observable.display());
    match ex.interp.execute_source(&query) {
        Ok(outputs) => {
            for line in outputs.iter().flat_map(|o| &o.lines) {
                let _ = writeln!(io.out, "{line}");
            }
            EXIT_OK
        }
        Err(ExecError::Parse(d)) => {
            let _ = writeln!(io.err, "error: {}", d.message);
            EXIT_LOAD
        }
        Err(ExecError::Runtime(_, e)) => {
            let _ = writeln!(io.err, "error: {}", e.error);
            EXIT_RUNTIME
        }
    }
}

const EXPLORE_HELP: &str = "statements end with `;`. commands: facts, trace, help, quit";

fn cmd_explore(args: &RunArgs, input: &mut dyn BufRead, io: &mut Io<'_>) -> i32 {
    let loaded = match load(args, io) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let mut ex = execute(args, loaded, io);
    let _ = writeln!(io.out, "{EXPLORE_HELP}");
    let mut pending = String::new();
    loop {
        let _ = write!(io.out, "{}", if pending.is_empty() { "qml> " } else { "...> " });
        let _ = io.out.flush();
        let mut line = String::new();
        match input.read_line(&mut line) {
            Ok(0) | Err(_) => {
                let _ = writeln!(io.out);
                break;
            }
            Ok(_) => {}
        }
        if pending.is_empty() {
            match line.trim() {
                "" => continue,
                "quit" | "exit" => break,
                "help" => {
                    let _ = writeln!(io.out, "{EXPLORE_HELP}");
                    continue;
                }
                "undo" => {
                    let _ = writeln!(io.out, "undo is not available: measurements and unitaries are irreversible");
                    continue;
                }
                "facts" => {
                    let session = ex.interp.session();
                    for f in session.active_facts() {
                        let _ = writeln!(io.out, "{}", describe_fact(session, f));
                    }
                    continue;
                }
                "trace" => {
                    let _ = write!(io.out, "{}", ex.interp.session().render_trace(TraceFormat::Text));
                    continue;
                }
                _ => {}
            }
        }
        pending.push_str(&line);
        if !pending.trim_end().ends_with(';') {
            continue;
        }
        let chunk = std::mem::take(&mut pending);
        match ex.interp.execute_source(&chunk) {
            Ok(outputs) => {
                for line in outputs.iter().flat_map(|o| &o.lines) {
                    let _ = writeln!(io.out, "{line}");
                }
            }
            Err(ExecError::Parse(d)) => {
                let _ = writeln!(io.out, "error: {d}");
            }
            Err(ExecError::Runtime(outputs, e)) => {
                for line in outputs.iter().flat_map(|o| &o.lines) {
                    let _ = writeln!(io.out, "{line}");
                }
                let _ = writeln!(io.out, "error: {e}");
            }
        }
    }
    EXIT_OK
}

/// Runs the CLI on `argv` (including the program name).
pub fn run<I, T>(argv: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_LOAD } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let mut io = Io { out, err };
    match &cli.command {
        Command::Run(args) => cmd_run(args, false, &mut io),
        Command::Audit(args) => cmd_run(args, true, &mut io),
        Command::Explore(args) => cmd_explore(args, input, &mut io),
        Command::Possible {
            run,
            system,
            observable,
        } => cmd_possible(run, system, Path::new(observable), &mut io),
    }
}
