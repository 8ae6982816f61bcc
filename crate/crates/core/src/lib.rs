//! Reasoning about quantum systems through verification judgements
//! `S ⊨ |φ⟩` instead of state vectors.
//!
//! The crate is layered bottom-up:
//!
//! * [`algebra`]: dense kets, operators, tensor products and partial
//!   application.
//! * [`logic`]: handles, observables, judgements and events.
//! * [`engine`]: the session that fires the inference rules at each event
//!   and enforces single use of system handles.
//! * [`oracle`]: a brute-force state-vector replay used as ground truth.
//! * [`dsl`]: the `.qml` scenario language.
//! * [`cli`]: the `qml` command-line front end.

pub mod algebra;
pub mod cli;
pub mod dsl;
pub mod engine;
pub mod logic;
pub mod oracle;

pub use algebra::{ComplexScalar, Ket, Operator, SpaceShape, Tolerances};
pub use engine::{EngineError, OutcomeChoice, Session};
pub use logic::{make_observable, FactId, HandleId, Judgement, Observable};
