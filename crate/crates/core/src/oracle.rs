//! Brute-force state-vector replay of a session's event log.
//!
//! Assumed judgements on declared systems are read as actual
//! preparations; the resulting global pure state is evolved with full
//! embedded matrices and collapsed on the recorded outcomes. Every fact
//! the engine holds active at a point of the log is checked against the
//! state at that point. Nothing here reuses the engine's contraction code.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::algebra::{ComplexScalar, Ket, Operator, SpaceShape};
use crate::engine::Session;
use crate::logic::{EventKind, FactId, HandleId, Judgement, Observable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("assumptions {0} and {1} cannot both be preparations")]
    Inconsistent(FactId, FactId),
}

/// Normalized pure state over the live handles, in ascending handle order.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    handles: Vec<HandleId>,
    dims: Vec<usize>,
    amps: Vec<ComplexScalar>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Seed {
    State(GlobalState),
    Underdetermined(String),
}

/// Square matrix over the full space, row-major.
struct Dense {
    dim: usize,
    m: Vec<ComplexScalar>,
}

impl Dense {
    fn apply(&self, v: &[ComplexScalar]) -> Vec<ComplexScalar> {
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.m[r * self.dim + c] * v[c]).sum())
            .collect()
    }
}

fn digits(mut x: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = x % dims[k];
        x /= dims[k];
    }
    out
}

/// `local` acting on the factors at `positions` (first listed = most
/// significant), identity elsewhere.
fn embed(local: &[ComplexScalar], positions: &[usize], dims: &[usize]) -> Dense {
    let dim: usize = dims.iter().product();
    let sub_dims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
    let local_dim: usize = sub_dims.iter().product();
    let sub_index = |d: &[usize]| positions.iter().fold(0, |acc, &p| acc * dims[p] + d[p]);
    let mut m = vec![ComplexScalar::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        let dr = digits(r, dims);
        for c in 0..dim {
            let dc = digits(c, dims);
            let same_rest = (0..dims.len()).all(|k| positions.contains(&k) || dr[k] == dc[k]);
            if same_rest {
                m[r * dim + c] = local[sub_index(&dr) * local_dim + sub_index(&dc)];
            }
        }
    }
    Dense { dim, m }
}

fn projector(v: &Ket) -> Vec<ComplexScalar> {
    let n = v.norm();
    let a: Vec<ComplexScalar> = v.amps().iter().map(|x| x / n).collect();
    let d = a.len();
    (0..d * d).map(|k| a[k / d] * a[k % d].conj()).collect()
}

fn norm(v: &[ComplexScalar]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

impl GlobalState {
    pub fn from_ket(handles: Vec<HandleId>, state: &Ket) -> Self {
        let n = state.norm();
        GlobalState {
            handles,
            dims: state.shape().dims().to_vec(),
            amps: state.amps().iter().map(|a| a / n).collect(),
        }
    }

    pub fn handles(&self) -> &[HandleId] {
        &self.handles
    }

    pub fn ket(&self) -> Ket {
        Ket::new(SpaceShape::new(self.dims.clone()).expect("valid"), self.amps.clone()).expect("finite")
    }

    pub fn position(&self, h: HandleId) -> Option<usize> {
        self.handles.iter().position(|&x| x == h)
    }

    fn apply(&mut self, op: &Operator, positions: &[usize]) {
        self.amps = embed(op.entries(), positions, &self.dims).apply(&self.amps);
    }

    /// Born probability of each outcome of `obs` on the factor at `pos`.
    pub fn probabilities(&self, pos: usize, obs: &Observable) -> Vec<f64> {
        obs.basis()
            .iter()
            .map(|o| norm(&embed(&projector(o), &[pos], &self.dims).apply(&self.amps)).powi(2))
            .collect()
    }

    fn collapse(&mut self, pos: usize, outcome: &Ket) -> f64 {
        let projected = embed(&projector(outcome), &[pos], &self.dims).apply(&self.amps);
        let n = norm(&projected);
        if n > 0.0 {
            self.amps = projected.iter().map(|a| a / n).collect();
        }
        n
    }

    fn rename(&mut self, from: &[HandleId], to: &[HandleId]) {
        for h in self.handles.iter_mut() {
            if let Some(k) = from.iter().position(|f| f == h) {
                *h = to[k];
            }
        }
        let mut order: Vec<usize> = (0..self.handles.len()).collect();
        order.sort_by_key(|&k| self.handles[k]);
        if order.iter().enumerate().any(|(i, &k)| i != k) {
            let permuted = self.ket().permute_factors(&order).expect("valid permutation");
            self.handles = order.iter().map(|&k| self.handles[k]).collect();
            self.dims = permuted.shape().dims().to_vec();
            self.amps = permuted.into_amps();
        }
    }

    /// Norm of the component of the state orthogonal to `vector` on the
    /// factors of `subject`; zero iff the subject verifies `vector`.
    pub fn leakage(&self, subject: &[HandleId], vector: &Ket) -> Option<f64> {
        let positions = subject.iter().map(|h| self.position(*h)).collect::<Option<Vec<_>>>()?;
        let projected = embed(&projector(vector), &positions, &self.dims).apply(&self.amps);
        let residual: Vec<ComplexScalar> = self.amps.iter().zip(&projected).map(|(a, p)| a - p).collect();
        Some(norm(&residual))
    }
}

/// Outcome indices with nonzero Born probability: projection norm above
/// `tol_zero`.
pub fn born_support(state: &GlobalState, pos: usize, obs: &Observable, tol_zero: f64) -> Vec<usize> {
    state
        .probabilities(pos, obs)
        .iter()
        .enumerate()
        .filter(|(_, p)| p.sqrt() > tol_zero)
        .map(|(i, _)| i)
        .collect()
}

/// Reads the session's assumptions on declared systems as preparations.
pub fn seed_state(session: &Session) -> Result<Seed, OracleError> {
    let tol = session.tolerances();
    let declared: Vec<HandleId> = session.handles().iter().filter(|h| h.origin.is_none()).map(|h| h.id).collect();
    let mut seeds: Vec<&Judgement> = session
        .assumptions()
        .iter()
        .filter_map(|id| session.fact(*id).ok())
        .filter(|f| f.subject.iter().all(|h| declared.contains(h)))
        .collect();
    seeds.sort_by_key(|f| std::cmp::Reverse(f.subject.len()));

    let mut chosen: Vec<&Judgement> = Vec::new();
    for f in seeds {
        let overlapping: Vec<&Judgement> =
            chosen.iter().copied().filter(|c| c.subject.iter().any(|h| f.mentions(*h))).collect();
        if overlapping.is_empty() {
            chosen.push(f);
            continue;
        }
        let union: BTreeSet<HandleId> = overlapping.iter().flat_map(|c| c.subject.iter().copied()).collect();
        if !f.subject.iter().all(|h| union.contains(h)) {
            return Err(OracleError::Inconsistent(overlapping[0].id, f.id));
        }
        // f must hold in the product of the preparations it overlaps
        let (handles, ket) = product(&overlapping);
        let state = GlobalState::from_ket(handles, &ket);
        let leak = state.leakage(&f.subject, &f.vector).unwrap_or(f64::INFINITY);
        if leak > tol.zero.max(tol.proportional) {
            return Err(OracleError::Inconsistent(overlapping[0].id, f.id));
        }
    }
    let covered: BTreeSet<HandleId> = chosen.iter().flat_map(|f| f.subject.iter().copied()).collect();
    let missing: Vec<String> = declared
        .iter()
        .filter(|h| !covered.contains(h))
        .map(|h| session.handle(*h).map(|s| s.name.clone()).unwrap_or_default())
        .collect();
    if declared.is_empty() {
        return Ok(Seed::Underdetermined("no systems declared".into()));
    }
    if !missing.is_empty() {
        return Ok(Seed::Underdetermined(format!("no assumption prepares {}", missing.join(", "))));
    }
    let (handles, ket) = product(&chosen);
    Ok(Seed::State(GlobalState::from_ket(handles, &ket)))
}

/// Tensor product of the facts' normalized vectors, in ascending handle order.
fn product(facts: &[&Judgement]) -> (Vec<HandleId>, Ket) {
    let mut handles: Vec<HandleId> = Vec::new();
    let mut acc: Option<Ket> = None;
    for f in facts {
        handles.extend(&f.subject);
        let v = f.vector.normalized().expect("nonzero assumption");
        acc = Some(match acc {
            None => v,
            Some(a) => crate::algebra::tensor(&a, &v),
        });
    }
    let ket = acc.expect("at least one fact");
    let mut state = GlobalState::from_ket(handles.clone(), &ket);
    state.rename(&[], &[]);
    (state.handles.clone(), state.ket())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub verdict: Verdict,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.verdict, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub findings: Vec<Finding>,
    /// Set when a recorded outcome had zero Born probability.
    pub replay_mismatch: bool,
}

impl AuditReport {
    fn push(&mut self, verdict: Verdict, message: impl Into<String>) {
        self.findings.push(Finding {
            verdict,
            message: message.into(),
        });
    }

    pub fn failures(&self) -> usize {
        self.findings.iter().filter(|f| f.verdict == Verdict::Fail).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn skipped(&self) -> bool {
        self.findings.iter().any(|f| f.verdict == Verdict::Skip)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.findings {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn set(items: &[usize]) -> String {
    let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// States after each prefix of the event log (index 0 = seed), stopping
/// at the first recorded outcome with zero probability.
pub fn replay(session: &Session) -> Result<Option<Vec<GlobalState>>, OracleError> {
    let Seed::State(mut state) = seed_state(session)? else {
        return Ok(None);
    };
    let tol = session.tolerances().zero;
    let mut states = vec![state.clone()];
    for event in session.events() {
        if !step(&mut state, &event.kind, tol) {
            break;
        }
        states.push(state.clone());
    }
    Ok(Some(states))
}

/// Advances the state over one event; false on a replay mismatch.
fn step(state: &mut GlobalState, kind: &EventKind, tol_zero: f64) -> bool {
    match kind {
        EventKind::Unitary { inputs, operator, outputs } => {
            let positions: Vec<usize> = inputs.iter().map(|h| state.position(*h).expect("live handle")).collect();
            state.apply(operator, &positions);
            state.rename(inputs, outputs);
            true
        }
        EventKind::Measurement {
            input,
            observable,
            outcome,
            output,
            ..
        } => {
            let pos = state.position(*input).expect("live handle");
            if state.collapse(pos, &observable.basis()[*outcome]) <= tol_zero {
                return false;
            }
            state.rename(&[*input], &[*output]);
            true
        }
    }
}

/// Replays the session and checks every active fact and every admissible
/// set against the oracle.
pub fn audit(session: &Session) -> Result<AuditReport, OracleError> {
    let mut report = AuditReport::default();
    let mut state = match seed_state(session)? {
        Seed::State(s) => s,
        Seed::Underdetermined(why) => {
            report.push(Verdict::Skip, format!("seed: underdetermined ({why}); oracle checks skipped"));
            return Ok(report);
        }
    };
    let tol = session.tolerances().zero;
    let names = |hs: &[HandleId]| session.names(hs).join(", ");
    report.push(Verdict::Pass, format!("seed: global state over ({})", names(state.handles())));
    let mut failed_facts: BTreeSet<FactId> = BTreeSet::new();
    check_facts(session, &state, 0, "seed", &mut report, &mut failed_facts);

    let events = session.events();
    for (k, event) in events.iter().enumerate() {
        let label = event.id.to_string();
        if let EventKind::Measurement {
            input,
            observable,
            outcome,
            admissible,
            ..
        } = &event.kind
        {
            let pos = state.position(*input).expect("live handle");
            let probs = state.probabilities(pos, observable);
            let support = born_support(&state, pos, observable, tol);
            let name = names(&[*input]);
            if !support.contains(outcome) {
                report.replay_mismatch = true;
                report.push(
                    Verdict::Fail,
                    format!(
                        "{label} measurement of {name}: recorded outcome {} has zero probability (replay mismatch)",
                        observable.outcome_name(*outcome)
                    ),
                );
                let rest = events.len() - k - 1;
                if rest > 0 {
                    report.push(Verdict::Skip, format!("{rest} later event(s) not replayed"));
                }
                return Ok(report);
            }
            let missing: Vec<usize> = support.iter().copied().filter(|i| !admissible.contains(i)).collect();
            if missing.is_empty() {
                report.push(
                    Verdict::Pass,
                    format!(
                        "{label} measurement of {name}: outcome {} (p={:.6}), admissible {} covers support {}",
                        observable.outcome_name(*outcome),
                        probs[*outcome],
                        set(admissible),
                        set(&support)
                    ),
                );
            } else {
                for i in missing {
                    report.push(
                        Verdict::Fail,
                        format!(
                            "{label} measurement of {name}: admissible {} excludes outcome {} with probability {:.3e}",
                            set(admissible),
                            observable.outcome_name(i),
                            probs[i]
                        ),
                    );
                }
            }
        }
        step(&mut state, &event.kind, tol);
        check_facts(session, &state, k + 1, &label, &mut report, &mut failed_facts);
    }
    Ok(report)
}

fn check_facts(
    session: &Session,
    state: &GlobalState,
    epoch: usize,
    label: &str,
    report: &mut AuditReport,
    failed: &mut BTreeSet<FactId>,
) {
    let tol = session.tolerances().zero;
    let mut checked = 0;
    let mut bad = 0;
    for f in session.facts().iter().filter(|f| f.active_at(epoch)) {
        checked += 1;
        let Some(leak) = state.leakage(&f.subject, &f.vector) else {
            continue;
        };
        if leak > tol {
            bad += 1;
            if failed.insert(f.id) {
                report.push(
                    Verdict::Fail,
                    format!(
                        "{label} fact {} ({}) violated: orthogonal outcomes have probability {:.3e}",
                        f.id,
                        session.names(&f.subject).join(", "),
                        leak * leak
                    ),
                );
            }
        }
    }
    if bad == 0 {
        report.push(Verdict::Pass, format!("{label} facts: {checked} active fact(s) consistent"));
    }
}
