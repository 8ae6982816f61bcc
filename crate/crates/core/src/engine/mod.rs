//! The reasoning session: an append-only event log, a fact base of
//! verification judgements, and eager rule firing at each event.
//!
//! Every mutating operation validates its inputs completely before it
//! touches the session, so a rejected call leaves the session unchanged.

mod trace;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::{self, AlgebraError, Ket, Operator, SpaceShape, Tolerances};
use crate::logic::{
    canonicalize_parts, Event, EventId, EventKind, FactId, FactStatus, HandleId, HandleStatus, Judgement,
    Observable, Provenance, Rule, SystemHandle,
};

pub use trace::{TraceFormat, TraceRecord, TraceRule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("linearity violation: system {name} was already consumed{}", consumed_by.map(|e| format!(" by event {e}")).unwrap_or_default())]
    LinearityViolation {
        name: String,
        handle: HandleId,
        consumed_by: Option<EventId>,
    },
    #[error("impossible outcome {outcome} for {name}: {reason}")]
    ImpossibleOutcome { name: String, outcome: String, reason: String },
    #[error("no admissible outcome when measuring {name}: the assumptions are inconsistent")]
    NoAdmissibleOutcome { name: String },
    #[error("fact {0} is not a product state across the requested cut")]
    NotAProductState(FactId),
    #[error("subjects of {0} and {1} overlap")]
    OverlappingSubjects(FactId, FactId),
    #[error("system {0} listed twice")]
    DuplicateHandle(String),
    #[error("unknown system handle {0}")]
    UnknownHandle(HandleId),
    #[error("unknown fact {0}")]
    UnknownFact(FactId),
    #[error("fact {0} is historical")]
    InactiveFact(FactId),
    #[error("vector over {found} does not fit subject dimensions {expected:?}")]
    ShapeMismatch { expected: Vec<usize>, found: String },
    #[error("zero vector cannot be verified")]
    ZeroVector,
    #[error("space dimension {0} is below 2")]
    DimensionTooSmall(usize),
    #[error("operator of dimension {found} cannot act on systems of total dimension {expected}")]
    OperatorDimension { expected: usize, found: usize },
    #[error("observable on dimension {found} cannot measure {name} of dimension {expected}")]
    ObservableDimension { name: String, expected: usize, found: usize },
    #[error("outcome index {index} out of range for an observable with {len} outcomes")]
    OutcomeOutOfRange { index: usize, len: usize },
    #[error("invalid split: {0}")]
    InvalidCut(String),
    #[error("system name {0} already in use")]
    NameTaken(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// How the outcome of a measurement is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeChoice {
    Chosen(usize),
    /// Uniform over the admissible outcomes; deterministic when only one
    /// outcome is admissible.
    Any,
}

/// Switches that deliberately break rules, for auditing the auditor.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faults {
    pub skip_weak_born: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureResult {
    pub handle: HandleId,
    pub outcome: usize,
    pub outcome_ket: Ket,
    /// Admissible set the outcome was taken from.
    pub admissible: Vec<usize>,
    /// True when the outcome was forced by a fact coinciding with a basis
    /// element.
    pub certain: bool,
    pub derived: Vec<FactId>,
}

/// How a queried judgement follows from the fact base.
#[derive(Debug, Clone, PartialEq)]
pub enum Derivation {
    Fact(FactId),
    /// Factor of a product fact on the listed handles.
    Split { fact: FactId, part: Vec<HandleId> },
    Tensor(Vec<Derivation>),
}

impl Derivation {
    pub fn facts(&self) -> Vec<FactId> {
        match self {
            Derivation::Fact(f) | Derivation::Split { fact: f, .. } => vec![*f],
            Derivation::Tensor(parts) => parts.iter().flat_map(Derivation::facts).collect(),
        }
    }
}

impl std::fmt::Display for Derivation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Derivation::Fact(id) => write!(f, "{id}"),
            Derivation::Split { fact, part } => {
                let hs: Vec<String> = part.iter().map(|h| h.to_string()).collect();
                write!(f, "tensor-split({fact}; {})", hs.join(","))
            }
            Derivation::Tensor(parts) => {
                let ps: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "tensor({})", ps.join(", "))
            }
        }
    }
}

struct Screen {
    admissible: Vec<usize>,
    certain: Option<usize>,
    checked: Vec<FactId>,
}

/// Preferred successor name: `B1 -> B2`, `A -> A'`.
pub fn successor_name(name: &str) -> String {
    let digits = name.len() - name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 && digits < name.len() {
        let (stem, num) = name.split_at(name.len() - digits);
        if let Ok(n) = num.parse::<u64>() {
            return format!("{stem}{}", n + 1);
        }
    }
    format!("{name}'")
}

#[derive(Debug, Clone)]
pub struct Session {
    handles: Vec<SystemHandle>,
    facts: Vec<Judgement>,
    events: Vec<Event>,
    trace: Vec<TraceRecord>,
    assumptions: Vec<FactId>,
    rng: ChaCha8Rng,
    seed: u64,
    rng_draws: u64,
    tol: Tolerances,
    faults: Faults,
}

impl Default for Session {
    fn default() -> Self {
        Self::new(0)
    }
}

impl Session {
    pub fn new(seed: u64) -> Self {
        Self::with_tolerances(seed, Tolerances::default())
    }

    pub fn with_tolerances(seed: u64, tol: Tolerances) -> Self {
        Session {
            handles: Vec::new(),
            facts: Vec::new(),
            events: Vec::new(),
            trace: Vec::new(),
            assumptions: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            rng_draws: 0,
            tol,
            faults: Faults::default(),
        }
    }

    #[doc(hidden)]
    pub fn with_faults(mut self, faults: Faults) -> Self {
        self.faults = faults;
        self
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of random draws consumed by `Any` measurements so far.
    pub fn rng_draws(&self) -> u64 {
        self.rng_draws
    }

    pub fn handles(&self) -> &[SystemHandle] {
        &self.handles
    }

    pub fn handle(&self, id: HandleId) -> Result<&SystemHandle> {
        self.handles.get(id.0 as usize).ok_or(EngineError::UnknownHandle(id))
    }

    pub fn handle_by_name(&self, name: &str) -> Option<&SystemHandle> {
        self.handles.iter().rev().find(|h| h.name == name)
    }

    pub fn facts(&self) -> &[Judgement] {
        &self.facts
    }

    pub fn fact(&self, id: FactId) -> Result<&Judgement> {
        self.facts.get(id.0 as usize).ok_or(EngineError::UnknownFact(id))
    }

    pub fn active_facts(&self) -> impl Iterator<Item = &Judgement> {
        self.facts.iter().filter(|f| f.is_active())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn assumptions(&self) -> &[FactId] {
        &self.assumptions
    }

    pub fn names(&self, subject: &[HandleId]) -> Vec<String> {
        subject
            .iter()
            .map(|h| self.handle(*h).map(|s| s.name.clone()).unwrap_or_else(|_| h.to_string()))
            .collect()
    }

    pub fn declare_system(&mut self, dim: usize) -> Result<HandleId> {
        let name = format!("S{}", self.handles.len());
        self.declare_named(&name, dim)
    }

    pub fn declare_named(&mut self, name: &str, dim: usize) -> Result<HandleId> {
        if dim < 2 {
            return Err(EngineError::DimensionTooSmall(dim));
        }
        if self.handle_by_name(name).is_some() {
            return Err(EngineError::NameTaken(name.to_owned()));
        }
        Ok(self.push_handle(name.to_owned(), dim, None))
    }

    fn push_handle(&mut self, name: String, dim: usize, origin: Option<EventId>) -> HandleId {
        let id = HandleId(self.handles.len() as u32);
        self.handles.push(SystemHandle {
            id,
            name,
            dim,
            status: HandleStatus::Live,
            origin,
        });
        id
    }

    fn unique_successor(&self, name: &str) -> String {
        let mut next = successor_name(name);
        while self.handle_by_name(&next).is_some() {
            next = successor_name(&next);
        }
        next
    }

    fn consumer_of(&self, h: HandleId) -> Option<EventId> {
        self.events.iter().find(|e| e.inputs().contains(&h)).map(|e| e.id)
    }

    fn require_live(&self, h: HandleId) -> Result<&SystemHandle> {
        let handle = self.handle(h)?;
        if !handle.is_live() {
            return Err(EngineError::LinearityViolation {
                name: handle.name.clone(),
                handle: h,
                consumed_by: self.consumer_of(h),
            });
        }
        Ok(handle)
    }

    fn require_live_distinct(&self, subject: &[HandleId]) -> Result<Vec<usize>> {
        let mut seen = BTreeSet::new();
        subject
            .iter()
            .map(|&h| {
                let handle = self.require_live(h)?;
                if !seen.insert(h) {
                    return Err(EngineError::DuplicateHandle(handle.name.clone()));
                }
                Ok(handle.dim)
            })
            .collect()
    }

    fn require_active(&self, id: FactId) -> Result<&Judgement> {
        let f = self.fact(id)?;
        if !f.is_active() {
            return Err(EngineError::InactiveFact(id));
        }
        Ok(f)
    }

    /// Shapes `vector` to the subject's factor dimensions.
    fn fit(&self, dims: &[usize], vector: &Ket) -> Result<Ket> {
        let shape = SpaceShape::new(dims.to_vec())?;
        if vector.shape() == &shape {
            return Ok(vector.clone());
        }
        if vector.dim() != shape.total() || (vector.shape().factors() > 1 && vector.shape().factors() != dims.len()) {
            return Err(EngineError::ShapeMismatch {
                expected: dims.to_vec(),
                found: vector.shape().to_string(),
            });
        }
        Ok(vector.reshape(shape)?)
    }

    fn is_zero_relative(&self, v: &Ket, scale: f64) -> bool {
        v.norm() <= self.tol.zero * scale
    }

    fn same_fact(&self, subject: &[HandleId], vector: &Ket, include_historical: bool) -> Option<FactId> {
        self.facts
            .iter()
            .filter(|f| include_historical || f.is_active())
            .filter(|f| f.subject == subject)
            .find(|f| algebra::proportional_with(&f.vector, vector, self.tol.proportional, 0.0).unwrap_or(false))
            .map(|f| f.id)
    }

    /// Records a canonical fact, or returns an existing proportional one.
    fn record_fact(
        &mut self,
        subject: &[HandleId],
        vector: &Ket,
        provenance: Provenance,
        status: FactStatus,
        rule: TraceRule,
    ) -> Result<FactId> {
        let (subject, vector) = canonicalize_parts(subject, vector)?;
        let historical = status == FactStatus::Historical;
        if let Some(existing) = self.same_fact(&subject, &vector, historical) {
            return Ok(existing);
        }
        let id = FactId(self.facts.len() as u32);
        let epoch = self.events.len();
        let (parents, event) = match &provenance {
            Provenance::Assumed => (Vec::new(), None),
            Provenance::Derived { parents, event, .. } => (parents.clone(), *event),
        };
        self.trace.push(TraceRecord {
            event,
            rule,
            parents,
            fact: Some(id),
            subject: subject.clone(),
            vector: vector.clone(),
        });
        self.facts.push(Judgement {
            id,
            subject,
            vector,
            provenance,
            status,
            epoch,
            retired: historical.then_some(epoch),
        });
        Ok(id)
    }

    fn derive(&mut self, rule: Rule, subject: &[HandleId], vector: &Ket, parents: Vec<FactId>, event: Option<EventId>) -> Result<FactId> {
        self.record_fact(
            subject,
            vector,
            Provenance::Derived { rule, parents, event },
            FactStatus::Active,
            TraceRule::Rule(rule),
        )
    }

    /// Marks every active fact that mentions a consumed handle historical.
    fn retire_consumed(&mut self) {
        let epoch = self.events.len();
        let consumed: Vec<bool> = self.handles.iter().map(|h| !h.is_live()).collect();
        for f in self.facts.iter_mut().filter(|f| f.is_active()) {
            if f.subject.iter().any(|h| consumed[h.0 as usize]) {
                f.status = FactStatus::Historical;
                f.retired = Some(epoch);
            }
        }
    }

    /// Adds `subject ⊨ vector` as an assumption.
    pub fn assume(&mut self, subject: &[HandleId], vector: &Ket) -> Result<FactId> {
        let dims = self.require_live_distinct(subject)?;
        if subject.is_empty() {
            return Err(EngineError::ShapeMismatch {
                expected: vec![],
                found: vector.shape().to_string(),
            });
        }
        let vector = self.fit(&dims, vector)?;
        if vector.is_negligible(self.tol.zero) {
            return Err(EngineError::ZeroVector);
        }
        let before = self.facts.len();
        let id = self.record_fact(subject, &vector, Provenance::Assumed, FactStatus::Active, TraceRule::Assume)?;
        if self.facts.len() > before {
            self.assumptions.push(id);
        }
        Ok(id)
    }

    /// Tensor product rule, left to right.
    pub fn combine(&mut self, a: FactId, b: FactId) -> Result<FactId> {
        let fa = self.require_active(a)?;
        let fb = self.require_active(b)?;
        if fa.subject.iter().any(|h| fb.subject.contains(h)) {
            return Err(EngineError::OverlappingSubjects(a, b));
        }
        let subject: Vec<HandleId> = fa.subject.iter().chain(&fb.subject).copied().collect();
        let vector = algebra::tensor(&fa.vector, &fb.vector);
        self.derive(Rule::Tensor, &subject, &vector, vec![a, b], None)
    }

    /// Tensor product rule, right to left: factors fact `j` into the part
    /// on `cut` and the part on the remaining handles.
    pub fn split(&mut self, j: FactId, cut: &[HandleId]) -> Result<(FactId, FactId)> {
        let f = self.require_active(j)?;
        let positions = cut
            .iter()
            .map(|h| f.position_of(*h).ok_or_else(|| EngineError::InvalidCut(format!("{h} not in subject of {j}"))))
            .collect::<Result<Vec<_>>>()?;
        if positions.is_empty() || positions.len() >= f.subject.len() {
            return Err(EngineError::InvalidCut("cut must be a nonempty strict subset of the subject".into()));
        }
        let mut positions = positions;
        positions.sort_unstable();
        positions.dedup();
        if positions.len() != cut.len() {
            return Err(EngineError::InvalidCut("repeated handle in cut".into()));
        }
        let (left, right) = algebra::factorize(&f.vector, &positions, self.tol.proportional, self.tol.zero)?
            .ok_or(EngineError::NotAProductState(j))?;
        let left_subject: Vec<HandleId> = positions.iter().map(|&p| f.subject[p]).collect();
        let right_subject: Vec<HandleId> = f.subject.iter().filter(|h| !left_subject.contains(h)).copied().collect();
        let l = self.derive(Rule::TensorSplit, &left_subject, &left, vec![j], None)?;
        let r = self.derive(Rule::TensorSplit, &right_subject, &right, vec![j], None)?;
        Ok((l, r))
    }

    /// Picks pairwise disjoint active facts covering `handles`, most recent
    /// first.
    fn cover(&self, handles: &[HandleId], exclude: &[FactId]) -> Option<Vec<FactId>> {
        let mut chosen: Vec<FactId> = Vec::new();
        let mut covered: BTreeSet<HandleId> = BTreeSet::new();
        for &h in handles {
            if covered.contains(&h) {
                continue;
            }
            let pick = self
                .facts
                .iter()
                .rev()
                .filter(|f| f.is_active() && f.mentions(h) && !exclude.contains(&f.id))
                .find(|f| f.subject.iter().all(|s| !covered.contains(s)))?;
            covered.extend(pick.subject.iter().copied());
            chosen.push(pick.id);
        }
        Some(chosen)
    }

    /// Unitary evolution of the systems `handles` (in operator order).
    pub fn apply_unitary(&mut self, handles: &[HandleId], u: &Operator) -> Result<Vec<HandleId>> {
        self.apply_unitary_named(handles, u, None)
    }

    pub fn apply_unitary_named(&mut self, handles: &[HandleId], u: &Operator, names: Option<&[String]>) -> Result<Vec<HandleId>> {
        let dims = self.require_live_distinct(handles)?;
        let total: usize = dims.iter().product();
        if handles.is_empty() || total != u.dim() {
            return Err(EngineError::OperatorDimension { expected: total, found: u.dim() });
        }
        let dev = u.unitarity_deviation();
        if dev > self.tol.unitary {
            return Err(AlgebraError::NotUnitary(dev).into());
        }
        let names = self.output_names(handles, names)?;

        // Bring the acted handles under one fact when the knowledge about
        // them is spread over several.
        let whole = self.active_facts().any(|f| handles.iter().all(|h| f.mentions(*h)));
        if !whole {
            if let Some(cover) = self.cover(handles, &[]) {
                let mut acc = cover[0];
                for next in &cover[1..] {
                    acc = self.combine(acc, *next)?;
                }
            }
        }

        let event = EventId(self.events.len() as u32);
        let outputs: Vec<HandleId> = handles
            .iter()
            .zip(&dims)
            .zip(names)
            .map(|((_, &dim), name)| self.push_handle(name, dim, Some(event)))
            .collect();
        let transported: Vec<(FactId, Vec<HandleId>, Ket)> = self
            .active_facts()
            .filter(|f| handles.iter().all(|h| f.mentions(*h)))
            .map(|f| {
                let positions: Vec<usize> = handles.iter().map(|h| f.position_of(*h).expect("mentioned")).collect();
                let vector = algebra::apply_operator_on(u, &f.vector, &positions)?;
                let subject = f
                    .subject
                    .iter()
                    .map(|s| handles.iter().position(|h| h == s).map_or(*s, |k| outputs[k]))
                    .collect();
                Ok((f.id, subject, vector))
            })
            .collect::<Result<_>>()?;
        self.events.push(Event {
            id: event,
            kind: EventKind::Unitary {
                inputs: handles.to_vec(),
                operator: u.clone(),
                outputs: outputs.clone(),
            },
        });
        for h in handles {
            self.handles[h.0 as usize].status = HandleStatus::Consumed;
        }
        self.retire_consumed();
        for (parent, subject, vector) in transported {
            self.derive(Rule::Unitary, &subject, &vector, vec![parent], Some(event))?;
        }
        Ok(outputs)
    }

    fn output_names(&self, handles: &[HandleId], names: Option<&[String]>) -> Result<Vec<String>> {
        match names {
            Some(names) => {
                if names.len() != handles.len() {
                    return Err(EngineError::InvalidCut(format!(
                        "{} output names for {} systems",
                        names.len(),
                        handles.len()
                    )));
                }
                for (i, n) in names.iter().enumerate() {
                    if self.handle_by_name(n).is_some() || names[..i].contains(n) {
                        return Err(EngineError::NameTaken(n.clone()));
                    }
                }
                Ok(names.to_vec())
            }
            None => {
                let mut out: Vec<String> = Vec::new();
                for h in handles {
                    let mut next = self.unique_successor(&self.handles[h.0 as usize].name);
                    while out.contains(&next) {
                        next = successor_name(&next);
                    }
                    out.push(next);
                }
                Ok(out)
            }
        }
    }

    fn screen(&self, h: HandleId, obs: &Observable) -> Screen {
        let n = obs.len();
        if self.faults.skip_weak_born {
            return Screen {
                admissible: (0..n).collect(),
                certain: None,
                checked: Vec::new(),
            };
        }
        let mut excluded = vec![false; n];
        let mut certain: Option<usize> = None;
        let mut conflict = false;
        let mut checked = Vec::new();
        for f in self.active_facts().filter(|f| f.mentions(h)) {
            checked.push(f.id);
            let fnorm = f.vector.norm();
            for (i, o) in obs.basis().iter().enumerate() {
                let scale = fnorm * o.norm();
                if f.subject.len() == 1 {
                    let ip = algebra::inner(&f.vector, o).expect("dimension checked");
                    if ip.norm() <= self.tol.zero * scale {
                        excluded[i] = true;
                    } else if ip.norm() >= (1.0 - self.tol.proportional) * scale {
                        match certain {
                            Some(c) if c != i => conflict = true,
                            _ => certain = Some(i),
                        }
                    }
                } else {
                    let pos = f.position_of(h).expect("mentioned");
                    let rest = algebra::partial_apply(&[pos], o, &f.vector).expect("dimension checked");
                    if self.is_zero_relative(&rest, scale) {
                        excluded[i] = true;
                    }
                }
            }
        }
        let admissible = match certain {
            _ if conflict => Vec::new(),
            Some(c) if !excluded[c] => vec![c],
            Some(_) => Vec::new(),
            None => (0..n).filter(|&i| !excluded[i]).collect(),
        };
        Screen {
            admissible,
            certain,
            checked,
        }
    }

    fn check_observable(&self, h: HandleId, obs: &Observable) -> Result<()> {
        let handle = self.handle(h)?;
        if obs.dim() != handle.dim {
            return Err(EngineError::ObservableDimension {
                name: handle.name.clone(),
                expected: handle.dim,
                found: obs.dim(),
            });
        }
        Ok(())
    }

    /// Outcome indices a measurement of `h` with `obs` could yield.
    pub fn possible_outcomes(&self, h: HandleId, obs: &Observable) -> Result<Vec<usize>> {
        self.require_live(h)?;
        self.check_observable(h, obs)?;
        Ok(self.screen(h, obs).admissible)
    }

    /// Same as [`Session::possible_outcomes`], also reporting whether the
    /// set was forced by a fact equal to a basis element.
    pub fn admissibility(&self, h: HandleId, obs: &Observable) -> Result<(Vec<usize>, bool)> {
        self.require_live(h)?;
        self.check_observable(h, obs)?;
        let s = self.screen(h, obs);
        let forced = s.certain.is_some() && s.admissible.len() == 1;
        Ok((s.admissible, forced))
    }

    pub fn measure(&mut self, h: HandleId, obs: &Observable, choice: OutcomeChoice) -> Result<MeasureResult> {
        self.measure_named(h, obs, choice, None)
    }

    pub fn measure_named(
        &mut self,
        h: HandleId,
        obs: &Observable,
        choice: OutcomeChoice,
        name: Option<&str>,
    ) -> Result<MeasureResult> {
        let handle = self.require_live(h)?.clone();
        self.check_observable(h, obs)?;
        let out_name = self.output_names(&[h], name.map(|n| vec![n.to_owned()]).as_deref())?.remove(0);
        let screen = self.screen(h, obs);
        let forced = screen.certain.filter(|_| screen.admissible.len() == 1);
        let outcome = match choice {
            OutcomeChoice::Chosen(i) => {
                if i >= obs.len() {
                    return Err(EngineError::OutcomeOutOfRange { index: i, len: obs.len() });
                }
                if let Some(c) = screen.certain.filter(|&c| c != i) {
                    return Err(EngineError::ImpossibleOutcome {
                        name: handle.name.clone(),
                        outcome: obs.outcome_name(i),
                        reason: format!("outcome {} is certain", obs.outcome_name(c)),
                    });
                }
                if !screen.admissible.contains(&i) {
                    return Err(EngineError::ImpossibleOutcome {
                        name: handle.name.clone(),
                        outcome: obs.outcome_name(i),
                        reason: "orthogonal to a verified vector".into(),
                    });
                }
                i
            }
            OutcomeChoice::Any => match screen.admissible.as_slice() {
                [] => return Err(EngineError::NoAdmissibleOutcome { name: handle.name.clone() }),
                [only] => *only,
                many => {
                    self.rng_draws += 1;
                    many[self.rng.random_range(0..many.len())]
                }
            },
        };
        let outcome_ket = obs.basis()[outcome].clone();

        let event = EventId(self.events.len() as u32);
        let output = self.push_handle(out_name, handle.dim, Some(event));
        let before: Vec<Judgement> = self.facts.iter().filter(|f| f.mentions(h)).cloned().collect();
        self.events.push(Event {
            id: event,
            kind: EventKind::Measurement {
                input: h,
                observable: obs.clone(),
                outcome,
                output,
                admissible: screen.admissible.clone(),
            },
        });
        self.handles[h.0 as usize].status = HandleStatus::Consumed;
        self.retire_consumed();

        for rule in [Rule::OutcomeDefinition, Rule::WeakBorn] {
            let parents = if rule == Rule::WeakBorn { screen.checked.clone() } else { Vec::new() };
            self.trace.push(TraceRecord {
                event: Some(event),
                rule: TraceRule::Rule(rule),
                parents,
                fact: None,
                subject: vec![h],
                vector: outcome_ket.clone(),
            });
        }
        let mut derived = vec![self.derive(Rule::Projection, &[output], &outcome_ket, Vec::new(), Some(event))?];

        for f in before.iter().filter(|f| f.is_active() && f.subject.len() > 1) {
            let pos = f.position_of(h).expect("mentioned");
            let rest = algebra::partial_apply(&[pos], &outcome_ket, &f.vector)?;
            if self.is_zero_relative(&rest, f.vector.norm() * outcome_ket.norm()) {
                continue;
            }
            let subject: Vec<HandleId> = f.subject.iter().filter(|&&s| s != h).copied().collect();
            derived.push(self.derive(Rule::PartialMeasurement, &subject, &rest, vec![f.id], Some(event))?);
        }

        // Records about earlier systems that were retired by measuring a
        // partner stay valid; conditioning them on this outcome yields
        // historical judgements for the audit trail only.
        let singles: Vec<&Judgement> = before.iter().filter(|f| f.is_active() && f.subject == [h]).collect();
        let records: Vec<&Judgement> = before
            .iter()
            .filter(|f| self.is_measurement_record(f) && f.subject.len() > 1)
            .collect();
        for f in records {
            let pos = f.position_of(h).expect("mentioned");
            let rest = algebra::partial_apply(&[pos], &outcome_ket, &f.vector)?;
            if self.is_zero_relative(&rest, f.vector.norm() * outcome_ket.norm()) {
                continue;
            }
            let subject: Vec<HandleId> = f.subject.iter().filter(|&&s| s != h).copied().collect();
            let audit = self.record_fact(
                &subject,
                &rest,
                Provenance::Derived {
                    rule: Rule::PartialMeasurement,
                    parents: vec![f.id],
                    event: Some(event),
                },
                FactStatus::Historical,
                TraceRule::Rule(Rule::PartialMeasurement),
            )?;
            for g in &singles {
                let joined = algebra::tensor(&rest, &g.vector);
                let mut joined_subject = subject.clone();
                joined_subject.push(h);
                self.record_fact(
                    &joined_subject,
                    &joined,
                    Provenance::Derived {
                        rule: Rule::Tensor,
                        parents: vec![audit, g.id],
                        event: Some(event),
                    },
                    FactStatus::Historical,
                    TraceRule::Rule(Rule::Tensor),
                )?;
            }
        }

        Ok(MeasureResult {
            handle: output,
            outcome,
            outcome_ket,
            admissible: screen.admissible,
            certain: forced.is_some(),
            derived,
        })
    }

    /// A historical fact retired by measuring one of its systems, and not
    /// itself an audit record.
    fn is_measurement_record(&self, f: &Judgement) -> bool {
        match f.retired {
            Some(r) if f.status == FactStatus::Historical && r > f.epoch => matches!(
                self.events.get(r - 1).map(|e| &e.kind),
                Some(EventKind::Measurement { .. })
            ),
            _ => false,
        }
    }

    /// Checks whether `subject ⊨ v` follows from the active facts, directly
    /// or by tensor recombination. Never records anything.
    pub fn verifies(&self, subject: &[HandleId], v: &Ket) -> Result<Option<Derivation>> {
        let dims = self.require_live_distinct(subject)?;
        let v = self.fit(&dims, v)?;
        if v.is_negligible(self.tol.zero) {
            return Ok(None);
        }
        let (target_subject, target) = canonicalize_parts(subject, &v)?;
        let wanted: BTreeSet<HandleId> = target_subject.iter().copied().collect();

        struct Piece {
            subject: Vec<HandleId>,
            vector: Ket,
            how: Derivation,
        }
        let mut pieces: Vec<Piece> = Vec::new();
        for f in self.active_facts() {
            let inside: Vec<usize> = (0..f.subject.len()).filter(|&p| wanted.contains(&f.subject[p])).collect();
            if inside.is_empty() {
                continue;
            }
            if inside.len() == f.subject.len() {
                pieces.push(Piece {
                    subject: f.subject.clone(),
                    vector: f.vector.clone(),
                    how: Derivation::Fact(f.id),
                });
            } else if let Ok(Some((part, _))) = algebra::factorize(&f.vector, &inside, self.tol.proportional, self.tol.zero) {
                let part_subject: Vec<HandleId> = inside.iter().map(|&p| f.subject[p]).collect();
                pieces.push(Piece {
                    subject: part_subject.clone(),
                    vector: part,
                    how: Derivation::Split {
                        fact: f.id,
                        part: part_subject,
                    },
                });
            }
        }

        fn search(
            pieces: &[Piece],
            remaining: &BTreeSet<HandleId>,
            chosen: &mut Vec<usize>,
            check: &dyn Fn(&[usize]) -> bool,
        ) -> Option<Vec<usize>> {
            let Some(&first) = remaining.iter().next() else {
                return check(chosen).then(|| chosen.clone());
            };
            for (i, p) in pieces.iter().enumerate() {
                if p.subject.contains(&first) && p.subject.iter().all(|s| remaining.contains(s)) {
                    let rest: BTreeSet<HandleId> = remaining.iter().filter(|s| !p.subject.contains(s)).copied().collect();
                    chosen.push(i);
                    if let Some(found) = search(pieces, &rest, chosen, check) {
                        return Some(found);
                    }
                    chosen.pop();
                }
            }
            None
        }

        let tol = self.tol;
        let check = |chosen: &[usize]| -> bool {
            let mut subject: Vec<HandleId> = Vec::new();
            let mut acc: Option<Ket> = None;
            for &i in chosen {
                subject.extend(&pieces[i].subject);
                acc = Some(match acc {
                    None => pieces[i].vector.clone(),
                    Some(a) => algebra::tensor(&a, &pieces[i].vector),
                });
            }
            let Some(acc) = acc else { return false };
            match canonicalize_parts(&subject, &acc) {
                Ok((_, canon)) => algebra::proportional_with(&canon, &target, tol.proportional, 0.0).unwrap_or(false),
                Err(_) => false,
            }
        };
        let found = search(&pieces, &wanted, &mut Vec::new(), &check);
        Ok(found.map(|idx| {
            let mut parts: Vec<Derivation> = idx.iter().map(|&i| pieces[i].how.clone()).collect();
            if parts.len() == 1 {
                parts.remove(0)
            } else {
                Derivation::Tensor(parts)
            }
        }))
    }

    /// Renders the derivation trace.
    pub fn render_trace(&self, format: TraceFormat) -> String {
        let mut out = String::new();
        for r in &self.trace {
            out.push_str(&r.render(format, self));
            out.push('\n');
        }
        out
    }
}
