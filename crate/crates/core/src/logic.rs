//! Vocabulary of the measurement logic: system handles, observables,
//! events and verification judgements.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{self, AlgebraError, Ket, Operator, SpaceShape};

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(HandleId, "h");
id_type!(FactId, "f");
id_type!(EventId, "e");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandleStatus {
    Live,
    Consumed,
}

/// A use-once label for a system at one point of its history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemHandle {
    pub id: HandleId,
    pub name: String,
    pub dim: usize,
    pub status: HandleStatus,
    /// Event that produced the handle; `None` for declared systems.
    pub origin: Option<EventId>,
}

impl SystemHandle {
    pub fn is_live(&self) -> bool {
        self.status == HandleStatus::Live
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error("observable on a {dim}-dimensional space needs {dim} outcomes, got {got}")]
    WrongCount { dim: usize, got: usize },
    #[error("outcome {index} has dimension {found}, expected {expected}")]
    WrongDimension { index: usize, expected: usize, found: usize },
    #[error("outcome {0} is the zero vector")]
    ZeroOutcome(usize),
    #[error("outcomes {0} and {1} are not orthogonal (|<i|j>| = {2:.3e})")]
    NotOrthogonal(usize, usize, f64),
    #[error("space dimension must be at least 2")]
    TooSmall,
}

/// A nondegenerate observable, identified with an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    dim: usize,
    basis: Vec<Ket>,
    labels: Vec<Option<String>>,
}

impl Observable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[Ket] {
        &self.basis
    }

    pub fn outcome(&self, index: usize) -> Option<&Ket> {
        self.basis.get(index)
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).and_then(|l| l.as_deref())
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.as_deref() == Some(label))
    }

    /// Display name for an outcome: its label, or `#index`.
    pub fn outcome_name(&self, index: usize) -> String {
        self.label(index)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("#{index}"))
    }

    pub fn with_labels(mut self, labels: Vec<Option<String>>) -> Self {
        labels.into_iter().enumerate().take(self.dim).for_each(|(i, l)| self.labels[i] = l);
        self
    }

    /// Re-runs the validation `make_observable` performs.
    pub fn validate(&self, tol_unitary: f64) -> Result<(), ObservableError> {
        check_orthonormal(&self.basis, self.dim, tol_unitary)
    }

    /// The computational basis of a `dim`-dimensional space.
    pub fn computational(dim: usize) -> Result<Observable, ObservableError> {
        let basis = (0..dim)
            .map(|i| Ket::basis(dim, i).map_err(|_| ObservableError::TooSmall))
            .collect::<Result<Vec<_>, _>>()?;
        make_observable(basis, algebra::Tolerances::default().unitary)
    }
}

fn check_orthonormal(basis: &[Ket], dim: usize, tol: f64) -> Result<(), ObservableError> {
    if dim < 2 {
        return Err(ObservableError::TooSmall);
    }
    if basis.len() != dim {
        return Err(ObservableError::WrongCount { dim, got: basis.len() });
    }
    for (i, k) in basis.iter().enumerate() {
        if k.dim() != dim {
            return Err(ObservableError::WrongDimension {
                index: i,
                expected: dim,
                found: k.dim(),
            });
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let ip = algebra::inner(&basis[i], &basis[j]).expect("same dimension");
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (ip.re - target).abs().max(ip.im.abs());
            if dev > tol {
                return Err(ObservableError::NotOrthogonal(i, j, ip.norm()));
            }
        }
    }
    Ok(())
}

/// Validates and normalizes a basis into an [`Observable`].
pub fn make_observable(basis: Vec<Ket>, tol_unitary: f64) -> Result<Observable, ObservableError> {
    let dim = basis.first().map(Ket::dim).unwrap_or(0);
    let dim = if dim == 0 { basis.len() } else { dim };
    if basis.len() != dim {
        return Err(ObservableError::WrongCount { dim, got: basis.len() });
    }
    let basis = basis
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            let flat = SpaceShape::single(k.dim()).map_err(|_| ObservableError::TooSmall)?;
            k.reshape(flat)
                .and_then(|k| k.normalized())
                .map_err(|_| ObservableError::ZeroOutcome(i))
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_orthonormal(&basis, dim, tol_unitary)?;
    Ok(Observable {
        dim,
        labels: vec![None; dim],
        basis,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Assumed,
    Derived {
        rule: Rule,
        parents: Vec<FactId>,
        event: Option<EventId>,
    },
}

/// Derivation rules of the logic, by trace name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    OutcomeDefinition,
    WeakBorn,
    Projection,
    Unitary,
    Tensor,
    TensorSplit,
    PartialMeasurement,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::OutcomeDefinition => "outcome-definition",
            Rule::WeakBorn => "weak-born",
            Rule::Projection => "projection",
            Rule::Unitary => "unitary",
            Rule::Tensor => "tensor",
            Rule::TensorSplit => "tensor-split",
            Rule::PartialMeasurement => "partial-measurement",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactStatus {
    Active,
    Historical,
}

/// `subject ⊨ vector`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    pub id: FactId,
    pub subject: Vec<HandleId>,
    pub vector: Ket,
    pub provenance: Provenance,
    pub status: FactStatus,
    /// Number of events in the log when the fact was recorded.
    pub epoch: usize,
    /// Number of events in the log when the fact became historical.
    pub retired: Option<usize>,
}

impl Judgement {
    pub fn is_active(&self) -> bool {
        self.status == FactStatus::Active
    }

    pub fn mentions(&self, h: HandleId) -> bool {
        self.subject.contains(&h)
    }

    pub fn position_of(&self, h: HandleId) -> Option<usize> {
        self.subject.iter().position(|&s| s == h)
    }

    /// Whether the fact holds in the state after `events` events.
    pub fn active_at(&self, events: usize) -> bool {
        self.epoch <= events && self.retired.is_none_or(|r| r > events)
    }

    pub fn is_canonical(&self) -> bool {
        self.subject.windows(2).all(|w| w[0] < w[1])
    }
}

/// Sorts `subject` ascending and permutes the vector's factors to match.
pub fn canonicalize_parts(subject: &[HandleId], vector: &Ket) -> Result<(Vec<HandleId>, Ket), AlgebraError> {
    let mut order: Vec<usize> = (0..subject.len()).collect();
    order.sort_by_key(|&k| subject[k]);
    let sorted = order.iter().map(|&k| subject[k]).collect();
    let vector = if order.iter().enumerate().all(|(i, &k)| i == k) {
        vector.clone()
    } else {
        vector.permute_factors(&order)?
    };
    Ok((sorted, vector))
}

pub fn canonicalize(j: &Judgement) -> Judgement {
    let (subject, vector) =
        canonicalize_parts(&j.subject, &j.vector).expect("judgement shape matches its subject");
    Judgement {
        subject,
        vector,
        ..j.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Measurement {
        input: HandleId,
        observable: Observable,
        outcome: usize,
        output: HandleId,
        /// Outcome indices the engine considered admissible.
        admissible: Vec<usize>,
    },
    Unitary {
        inputs: Vec<HandleId>,
        operator: Operator,
        outputs: Vec<HandleId>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: EventId,
    pub kind: EventKind,
}

impl Event {
    pub fn inputs(&self) -> Vec<HandleId> {
        match &self.kind {
            EventKind::Measurement { input, .. } => vec![*input],
            EventKind::Unitary { inputs, .. } => inputs.clone(),
        }
    }
}
