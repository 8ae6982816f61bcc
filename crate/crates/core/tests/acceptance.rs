//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use common::*;
use qml::algebra::{gates, partial_apply, ComplexScalar, Ket, SpaceShape};
use qml::dsl::{self, Bindings};
use qml::engine::{Faults, TraceFormat};
use qml::logic::make_observable;
use qml::oracle;
use qml::{EngineError, HandleId, Observable, OutcomeChoice, Session};
use rand::Rng;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);
type Correction = ((usize, usize), [ComplexScalar; 2], &'static [&'static str]);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if let false = $cond {
            return Err(format!($($msg)+));
        }
    };
}

const TOL: f64 = 1e-9;

fn binds(pairs: &[(&str, ComplexScalar)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn run_script(name: &str, bindings: &Bindings, session: Session) -> Result<dsl::RunResult, String> {
    let script = dsl::parse(&scenario(name)).map_err(|d| format!("{name}: {d}"))?;
    dsl::bind_and_run(&script, session, bindings).map_err(|e| format!("{name}: {e}"))
}

fn handle(s: &Session, name: &str) -> HandleId {
    s.handle_by_name(name).unwrap_or_else(|| panic!("no system {name}")).id
}

fn fact_on(s: &Session, subject: &[HandleId], expected: &[ComplexScalar]) -> bool {
    s.facts()
        .iter()
        .any(|f| f.subject == subject && same_ray(f.vector.amps(), expected, TOL))
}

fn z() -> Observable {
    Observable::computational(2).unwrap()
}

fn qubit(a: ComplexScalar, b: ComplexScalar) -> Ket {
    Ket::from_amps(vec![a, b]).unwrap()
}

fn bell() -> Ket {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ket::new(SpaceShape::qubits(2), vec![c(h, 0.), c(0., 0.), c(0., 0.), c(h, 0.)]).unwrap()
}

fn random_pair(r: &mut rand_chacha::ChaCha8Rng) -> (ComplexScalar, ComplexScalar) {
    let v = random_amps(r, 2);
    let n = norm(&v);
    (v[0] / n, v[1] / n)
}

fn criterion_teleport() -> Check {
    let mut r = rng(11);
    let mut pairs = vec![(c(0.6, 0.), c(0.8, 0.))];
    pairs.extend((0..5).map(|_| random_pair(&mut r)));
    for (alpha, beta) in pairs {
        let run = run_script("teleport.qml", &binds(&[("alpha", alpha), ("beta", beta)]), Session::new(0))?;
        ensure!(run.error.is_none(), "runtime error: {:?}", run.error);
        ensure!(run.expects == 2 && run.expect_failures == 0, "expectations failed: {:?}", run.lines);
        let s = &run.session;
        ensure!(
            fact_on(s, &[handle(s, "B1")], &[alpha, -beta]),
            "no B1 |= a|0> - b|1> for ({alpha}, {beta})"
        );
        ensure!(
            s.verifies(&[handle(s, "B2")], &qubit(alpha, beta)).map_err(|e| e.to_string())?.is_some(),
            "B2 does not verify a|0> + b|1>"
        );
    }

    // B's state for each (C, A) outcome, read off the pre-measurement state
    // (a|0> + b|1>)|Phi+> after CNOT(C->A) and H(C), and its correction.
    let (alpha, beta) = random_pair(&mut r);
    let table: [Correction; 4] = [
        ((0, 0), [alpha, beta], &[]),
        ((0, 1), [beta, alpha], &["X"]),
        ((1, 0), [alpha, -beta], &["Z"]),
        ((1, 1), [-beta, alpha], &["X", "Z"]),
    ];
    for ((cbit, abit), expected, fixes) in table {
        let mut s = Session::new(0);
        let a1 = s.declare_named("A1", 2).unwrap();
        let b1 = s.declare_named("B1", 2).unwrap();
        let c1 = s.declare_named("C1", 2).unwrap();
        s.assume(&[a1, b1], &bell()).map_err(|e| e.to_string())?;
        s.assume(&[c1], &qubit(alpha, beta)).map_err(|e| e.to_string())?;
        let ca = s.apply_unitary(&[c1, a1], &gates::cnot()).map_err(|e| e.to_string())?;
        let c3 = s.apply_unitary(&[ca[0]], &gates::hadamard()).map_err(|e| e.to_string())?[0];
        s.measure(c3, &z(), OutcomeChoice::Chosen(cbit)).map_err(|e| e.to_string())?;
        s.measure(ca[1], &z(), OutcomeChoice::Chosen(abit)).map_err(|e| e.to_string())?;
        ensure!(fact_on(&s, &[b1], &expected), "pair ({cbit},{abit}): B1 judgement not as derived");
        let mut b = b1;
        for fix in fixes {
            let g = if *fix == "X" { gates::sigma_x() } else { gates::sigma_z() };
            b = s.apply_unitary(&[b], &g).map_err(|e| e.to_string())?[0];
        }
        ensure!(
            s.verifies(&[b], &qubit(alpha, beta)).map_err(|e| e.to_string())?.is_some(),
            "pair ({cbit},{abit}): corrected B does not verify the input state"
        );
    }
    Ok(())
}

fn criterion_entangled_source() -> Check {
    let mut r = rng(22);
    for _ in 0..5 {
        let (alpha, beta) = random_pair(&mut r);
        let angles: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
        let b = binds(&[
            ("alpha", alpha),
            ("beta", beta),
            ("t0", c(angles[0], 0.)),
            ("p0", c(angles[1], 0.)),
            ("t1", c(angles[2], 0.)),
            ("p1", c(angles[3], 0.)),
        ]);
        let run = run_script("teleport_entangled.qml", &b, Session::new(0))?;
        ensure!(run.error.is_none(), "runtime error: {:?}", run.error);
        ensure!(run.expect_failures == 0, "expectation failed: {:?}", run.lines);
        let phi = |t: f64, p: f64| [c(t.cos(), 0.), c(p.cos(), p.sin()) * t.sin()];
        let phi0 = phi(angles[0], angles[1]);
        let phi1 = phi(angles[2], angles[3]);
        let target: Vec<ComplexScalar> = kron(&[alpha, c(0., 0.)], &phi0)
            .iter()
            .zip(kron(&[c(0., 0.), beta], &phi1))
            .map(|(x, y)| x + y)
            .collect();
        let s = &run.session;
        let k = Ket::new(SpaceShape::qubits(2), target).unwrap();
        let found = s.verifies(&[handle(s, "B2"), handle(s, "D")], &k).map_err(|e| e.to_string())?;
        ensure!(found.is_some(), "(B2, D) does not verify the carried correlation");
    }
    Ok(())
}

fn criterion_epr() -> Check {
    let mut r = rng(33);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = vec![c(0., 0.), c(h, 0.), c(-h, 0.), c(0., 0.)];
    let psi = Ket::new(SpaceShape::qubits(2), singlet.clone()).unwrap();
    for _ in 0..20 {
        let theta = r.random_range(0.0..std::f64::consts::PI);
        let phi = r.random_range(0.0..2.0 * std::f64::consts::PI);
        let e = c(phi.cos(), phi.sin());
        let u = [c(theta.cos(), 0.), e * theta.sin()];
        let v = [c(-theta.sin(), 0.), e * theta.cos()];
        let contracted = partial_apply(&[0], &qubit(u[0], u[1]), &psi).map_err(|e| e.to_string())?;
        ensure!(same_ray(contracted.amps(), &v, TOL), "appl1(u, psi-) not along v at theta={theta}");

        let obs = make_observable(vec![qubit(u[0], u[1]), qubit(v[0], v[1])], 1e-9).unwrap();
        let mut s = Session::new(5);
        let a = s.declare_named("A", 2).unwrap();
        let b = s.declare_named("B", 2).unwrap();
        s.assume(&[a, b], &psi).map_err(|e| e.to_string())?;
        s.measure(a, &obs, OutcomeChoice::Chosen(0)).map_err(|e| e.to_string())?;
        let draws = s.rng_draws();
        let rb = s.measure(b, &obs, OutcomeChoice::Any).map_err(|e| e.to_string())?;
        ensure!(rb.outcome == 1 && rb.certain, "B's outcome was not the certain v");
        ensure!(s.rng_draws() == draws, "certain outcome consumed randomness");
        let in_trace = |want: &[ComplexScalar]| {
            s.trace()
                .iter()
                .any(|t| t.subject == [a, b] && t.fact.is_some() && same_ray(t.vector.amps(), want, TOL))
        };
        ensure!(in_trace(&singlet), "(A,B) |= psi- missing from trace");
        ensure!(in_trace(&kron(&u, &v)), "(A,B) |= u&v missing from trace");
    }
    Ok(())
}

fn criterion_hardy() -> Check {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = [c(h, 0.), c(h, 0.)];
    let minus = [c(h, 0.), c(-h, 0.)];
    let zero = [c(1., 0.), c(0., 0.)];
    let one = [c(0., 0.), c(1., 0.)];
    let pp = kron(&plus, &plus);
    let e11 = kron(&one, &one);
    let overlap = dot(&e11, &pp);
    let psi_h: Vec<ComplexScalar> = pp.iter().zip(&e11).map(|(x, y)| x - overlap * y).collect();
    let psi = Ket::new(SpaceShape::qubits(2), psi_h).unwrap();
    let appl = |at: usize, fixed: &[ComplexScalar; 2]| partial_apply(&[at], &qubit(fixed[0], fixed[1]), &psi);
    let claims = [
        ("appl2(-B) ~ 1A", appl(1, &minus), one),
        ("appl1(1A) ~ 0B", appl(0, &one), zero),
        ("appl2(0B) ~ +A", appl(1, &zero), plus),
    ];
    for (label, got, want) in claims {
        let got = got.map_err(|e| e.to_string())?;
        ensure!(same_ray(got.amps(), &want, TOL), "{label} fails: {:?}", got.amps());
    }

    let src = scenario("hardy_blocked.qml");
    let line = 1 + src
        .lines()
        .position(|l| l.starts_with("measure B with Z"))
        .expect("third inference in script");
    let run = run_script("hardy_blocked.qml", &Bindings::new(), Session::new(0))?;
    let err = run.error.ok_or("blocked step was accepted")?;
    ensure!(
        matches!(err.error, dsl::interp::EvalError::Engine(EngineError::LinearityViolation { .. })),
        "wrong error: {err}"
    );
    ensure!(err.span.line as usize == line, "error at line {}, expected {line}", err.span.line);
    let s = &run.session;
    let a_plus = s.trace().iter().any(|t| {
        t.subject.len() == 1
            && s.handle(t.subject[0]).is_ok_and(|hd| hd.name.starts_with('A'))
            && same_ray(t.vector.amps(), &plus, TOL)
    });
    ensure!(!a_plus, "a judgement A |= |+> appears in the trace");
    Ok(())
}

fn criterion_contraction_identity() -> Check {
    let mut r = rng(55);
    for n in 0..1000 {
        let d1 = r.random_range(2..=3);
        let d2 = r.random_range(2..=3);
        let psi = random_ket(&mut r, &[d1, d2]);
        let f1 = random_ket(&mut r, &[d1]);
        let f2 = random_ket(&mut r, &[d2]);
        let lhs = dot(psi.amps(), &kron(f1.amps(), f2.amps()));
        let appl = partial_apply(&[0], &f1, &psi).map_err(|e| e.to_string())?;
        let rhs = dot(appl.amps(), f2.amps());
        let bound = 1e-9 * psi.norm() * f1.norm() * f2.norm();
        ensure!((lhs - rhs).norm() <= bound, "instance {n}: |{lhs} - {rhs}| > {bound}");
    }
    Ok(())
}

fn criterion_product_round_trip() -> Check {
    let mut r = rng(66);
    for n in 0..200 {
        let (da, db) = (r.random_range(2..=3), r.random_range(2..=3));
        let (ka, kb) = (random_ket(&mut r, &[da]), random_ket(&mut r, &[db]));
        let mut s = Session::new(0);
        let a = s.declare_system(da).unwrap();
        let b = s.declare_system(db).unwrap();
        let fa = s.assume(&[a], &ka).map_err(|e| e.to_string())?;
        let fb = s.assume(&[b], &kb).map_err(|e| e.to_string())?;
        let fab = s.combine(fa, fb).map_err(|e| e.to_string())?;
        let joint = s.fact(fab).unwrap().vector.amps().to_vec();
        ensure!(same_ray(&joint, &kron(ka.amps(), kb.amps()), TOL), "instance {n}: combine");
        let (pa, pb) = s.split(fab, &[a]).map_err(|e| e.to_string())?;
        ensure!(same_ray(s.fact(pa).unwrap().vector.amps(), ka.amps(), TOL), "instance {n}: split left");
        ensure!(same_ray(s.fact(pb).unwrap().vector.amps(), kb.amps(), TOL), "instance {n}: split right");

        let mut s = Session::new(0);
        let a = s.declare_system(da).unwrap();
        let b = s.declare_system(db).unwrap();
        let prod = Ket::new(SpaceShape::new(vec![da, db]).unwrap(), kron(ka.amps(), kb.amps())).unwrap();
        let f = s.assume(&[a, b], &prod).map_err(|e| e.to_string())?;
        let (pa, pb) = s.split(f, &[b]).map_err(|e| e.to_string())?;
        let back = s.combine(pa, pb).map_err(|e| e.to_string())?;
        ensure!(same_ray(s.fact(back).unwrap().vector.amps(), prod.amps(), TOL), "instance {n}: split/combine");
    }
    let mut s = Session::new(0);
    let a = s.declare_system(2).unwrap();
    let b = s.declare_system(2).unwrap();
    let singlet = Ket::new(SpaceShape::qubits(2), vec![c(0., 0.), c(1., 0.), c(-1., 0.), c(0., 0.)]).unwrap();
    let f = s.assume(&[a, b], &singlet).unwrap();
    ensure!(
        matches!(s.split(f, &[a]), Err(EngineError::NotAProductState(_))),
        "split of psi- did not report NotAProductState"
    );
    Ok(())
}

fn random_observable(r: &mut rand_chacha::ChaCha8Rng, dim: usize) -> Observable {
    if r.random_bool(0.5) {
        return Observable::computational(dim).unwrap();
    }
    let u = random_unitary(r, dim);
    let basis = (0..dim)
        .map(|j| Ket::from_amps((0..dim).map(|i| u.get(i, j)).collect()).unwrap())
        .collect();
    make_observable(basis, 1e-9).unwrap()
}

fn criterion_weak_born() -> Check {
    let (mut measured, mut forced_seen) = (0, 0);
    for n in 0..500u64 {
        let mut r = rng(7000 + n);
        let mut s = Session::new(n);
        let k = r.random_range(1..=3);
        let hs: Vec<HandleId> = (0..k).map(|_| s.declare_system(r.random_range(2..=3)).unwrap()).collect();
        // a random partition into prepared groups
        let mut start = 0;
        while start < k {
            let len = r.random_range(1..=k - start);
            let group = &hs[start..start + len];
            let dims: Vec<usize> = group.iter().map(|h| s.handle(*h).unwrap().dim).collect();
            let v = if len == 1 && r.random_bool(0.4) {
                Ket::basis(dims[0], r.random_range(0..dims[0])).unwrap()
            } else {
                random_ket(&mut r, &dims)
            };
            s.assume(group, &v).map_err(|e| format!("session {n}: {e}"))?;
            start += len;
        }
        for _ in 0..r.random_range(1..=5) {
            let live: Vec<HandleId> = s.handles().iter().filter(|h| h.is_live()).map(|h| h.id).collect();
            if r.random_bool(0.3) {
                let pick: Vec<HandleId> = if live.len() > 1 && r.random_bool(0.5) {
                    let i = r.random_range(0..live.len());
                    let j = (i + 1 + r.random_range(0..live.len() - 1)) % live.len();
                    vec![live[i], live[j]]
                } else {
                    vec![live[r.random_range(0..live.len())]]
                };
                let dim: usize = pick.iter().map(|h| s.handle(*h).unwrap().dim).product();
                let u = random_unitary(&mut r, dim);
                s.apply_unitary(&pick, &u).map_err(|e| format!("session {n}: {e}"))?;
                continue;
            }
            let h = live[r.random_range(0..live.len())];
            let dim = s.handle(h).unwrap().dim;
            let obs = random_observable(&mut r, dim);
            let singles: Vec<Vec<ComplexScalar>> = s
                .active_facts()
                .filter(|f| f.subject == [h])
                .map(|f| f.vector.amps().to_vec())
                .collect();
            let forced = (0..dim).find(|&j| singles.iter().any(|f| same_ray(f, obs.basis()[j].amps(), TOL)));
            let any = r.random_bool(0.6);
            let choice = if any {
                OutcomeChoice::Any
            } else {
                OutcomeChoice::Chosen(r.random_range(0..dim))
            };
            let draws = s.rng_draws();
            match s.measure(h, &obs, choice) {
                Ok(m) => {
                    measured += 1;
                    let o = obs.basis()[m.outcome].amps();
                    for f in &singles {
                        ensure!(
                            dot(f, o).norm() > 1e-12 * norm(f) * norm(o),
                            "session {n}: outcome orthogonal to an active fact"
                        );
                    }
                    if let (Some(j), true) = (forced, any) {
                        forced_seen += 1;
                        ensure!(m.outcome == j, "session {n}: certain outcome not returned");
                        ensure!(s.rng_draws() == draws, "session {n}: certain outcome consumed randomness");
                    }
                }
                Err(EngineError::ImpossibleOutcome { .. }) if !any => {}
                Err(e) => return Err(format!("session {n}: {e}")),
            }
        }
        let report = oracle::audit(&s).map_err(|e| format!("session {n}: {e}"))?;
        ensure!(report.passed(), "session {n}: oracle disagrees\n{report}");
    }
    ensure!(measured > 500 && forced_seen > 50, "too few cases: {measured} measured, {forced_seen} forced");
    Ok(())
}

fn criterion_audit() -> Check {
    let teleport = binds(&[("alpha", c(0.6, 0.)), ("beta", c(0.8, 0.))]);
    let none = Bindings::new();
    for (name, b) in [
        ("teleport.qml", &teleport),
        ("teleport_entangled.qml", &none),
        ("epr.qml", &none),
        ("hardy_prefix.qml", &none),
    ] {
        let run = run_script(name, b, Session::new(0))?;
        ensure!(run.error.is_none(), "{name}: {:?}", run.error);
        let report = oracle::audit(&run.session).map_err(|e| e.to_string())?;
        ensure!(report.passed() && !report.skipped(), "{name}:\n{report}");
    }
    let clean = run_script("faults/impossible_outcome.qml", &none, Session::new(0))?;
    ensure!(
        matches!(
            clean.error.as_ref().map(|e| &e.error),
            Some(dsl::interp::EvalError::Engine(EngineError::ImpossibleOutcome { .. }))
        ),
        "the correct engine accepted an impossible outcome"
    );
    let faulty = Session::new(0).with_faults(Faults { skip_weak_born: true });
    let run = run_script("faults/impossible_outcome.qml", &none, faulty)?;
    let report = oracle::audit(&run.session).map_err(|e| e.to_string())?;
    ensure!(report.failures() >= 1, "fault not detected:\n{report}");
    Ok(())
}

fn criterion_determinism() -> Check {
    let teleport = binds(&[("alpha", c(0.6, 0.)), ("beta", c(0.8, 0.))]);
    for name in CORPUS {
        let b = if name == "teleport.qml" { teleport.clone() } else { Bindings::new() };
        let once = run_script(name, &b, Session::new(42))?.session.render_trace(TraceFormat::Structured);
        let twice = run_script(name, &b, Session::new(42))?.session.render_trace(TraceFormat::Structured);
        ensure!(!once.is_empty() && once == twice, "{name}: traces differ");
    }
    let dir = std::env::temp_dir().join(format!("qml-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let path = dir.join("sampling.qml");
    std::fs::write(
        &path,
        "system A : qubit; system B : qubit; system C : qubit;\n\
         assume (A, B, C) |= |+0+> + |-11>;\n\
         measure A with {k0, k1} -> any; measure C with {k0, k1} -> any; measure B with {k0, k1} -> any;\n"
            .replace("system A", "ket k0 = |0>; ket k1 = |1>; system A"),
    )
    .map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_qml");
    let run = || {
        std::process::Command::new(bin)
            .args(["run", "--trace", "structured", "--seed", "9"])
            .arg(&path)
            .output()
            .map(|o| (o.status.code(), o.stdout))
    };
    let (a, b) = (run().map_err(|e| e.to_string())?, run().map_err(|e| e.to_string())?);
    let _ = std::fs::remove_dir_all(&dir);
    ensure!(a.0 == Some(0), "CLI run failed: {:?}", a.0);
    ensure!(a.1 == b.1 && !a.1.is_empty(), "CLI traces differ");
    Ok(())
}

fn criterion_parser() -> Check {
    let fragments: &[&[u8]] = &[
        b"system ", b"A", b" : ", b"qubit", b";", b"assume ", b"(", b")", b"|=", b"|0+>", b"ket(", b"1", b",",
        b"measure ", b" with ", b"{", b"}", b"->", b" chosen ", b"any", b"apply ", b"H", b" to ", b"0.5i", b"*",
        b"sqrt(", b"&", b"-", b"#c\n", b"param ", b"=", b"[", b"]", b"\xff", b"'", b"query ", b"possible ",
    ];
    let mut r = rng(1010);
    for n in 0..100_000 {
        let len = r.random_range(0..48);
        let input: Vec<u8> = if n % 2 == 0 {
            (0..len).map(|_| r.random()).collect()
        } else {
            (0..len / 3).flat_map(|_| fragments[r.random_range(0..fragments.len())].iter().copied()).collect()
        };
        let outcome = catch_unwind(AssertUnwindSafe(|| dsl::parse_bytes(&input)));
        match outcome {
            Err(_) => return Err(format!("parser panicked on {input:?}")),
            Ok(Err(d)) => {
                ensure!(
                    d.span.start <= d.span.end && d.span.end <= input.len() && d.span.line >= 1 && !d.message.is_empty(),
                    "malformed diagnostic {d:?} for {input:?}"
                );
            }
            Ok(Ok(_)) => {}
        }
    }
    for name in CORPUS {
        let first = dsl::parse(&scenario(name)).map_err(|d| format!("{name}: {d}"))?;
        let printed = dsl::print_script(&first);
        let second = dsl::parse(&printed).map_err(|d| format!("{name} reprinted: {d}"))?;
        ensure!(first == second, "{name}: AST changed through pretty-printing");
        ensure!(printed == dsl::print_script(&second), "{name}: printed form not stable");
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("teleportation with bound and random amplitudes, all four outcome pairs", criterion_teleport),
        ("teleportation of an entangled source", criterion_entangled_source),
        ("EPR pair: contraction, certain second outcome, both judgements traced", criterion_epr),
        ("Hardy chain: three contractions, blocked third inference", criterion_hardy),
        ("contraction identity on 1000 random instances", criterion_contraction_identity),
        ("combine/split round trips; singlet is not a product", criterion_product_round_trip),
        ("weak Born rule and certain outcomes over 500 random sessions", criterion_weak_born),
        ("oracle audit of the corpus; fault injection detected", criterion_audit),
        ("deterministic structured traces", criterion_determinism),
        ("parser robustness and round trip", criterion_parser),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(()) => println!("PASS {:>2} {name}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
