use std::fmt::Write as _;

use crate::algebra::Ket;
use crate::logic::{EventId, FactId, HandleId, Rule};

use super::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    /// Human-ordered prose, one derivation per line.
    Text,
    /// `key=value` records, one derivation per line.
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceRule {
    Assume,
    Rule(Rule),
}

impl TraceRule {
    pub fn name(self) -> &'static str {
        match self {
            TraceRule::Assume => "assume",
            TraceRule::Rule(r) => r.name(),
        }
    }
}

/// One derivation step. `fact` is `None` for the outcome-definition and
/// weak-born records, whose subject/vector carry the measured handle and
/// its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub event: Option<EventId>,
    pub rule: TraceRule,
    pub parents: Vec<FactId>,
    pub fact: Option<FactId>,
    pub subject: Vec<HandleId>,
    pub vector: Ket,
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Amplitudes as `re:im` pairs with 17 significant digits.
pub(crate) fn format_amps(k: &Ket) -> String {
    k.amps()
        .iter()
        .map(|a| format!("{:.16e}:{:.16e}", a.re, a.im))
        .collect::<Vec<_>>()
        .join(",")
}

fn prose_amps(k: &Ket) -> String {
    let parts: Vec<String> = k
        .amps()
        .iter()
        .map(|a| {
            if a.im == 0.0 {
                format!("{:.6}", a.re)
            } else {
                format!("{:.6}{:+.6}i", a.re, a.im)
            }
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

impl TraceRecord {
    pub fn render(&self, format: TraceFormat, session: &Session) -> String {
        match format {
            TraceFormat::Structured => {
                let mut line = String::new();
                let _ = write!(
                    line,
                    "event={} rule={} parents={} fact={} subject={} amps={}",
                    self.event.map_or("-".to_owned(), |e| e.to_string()),
                    self.rule.name(),
                    if self.parents.is_empty() { "-".to_owned() } else { join(&self.parents) },
                    self.fact.map_or("-".to_owned(), |f| f.to_string()),
                    join(&self.subject),
                    format_amps(&self.vector),
                );
                line
            }
            TraceFormat::Text => {
                let names = session.names(&self.subject).join(", ");
                let at = self.event.map_or("  ".to_owned(), |e| e.to_string());
                let from = if self.parents.is_empty() {
                    String::new()
                } else {
                    format!(" from {}", join(&self.parents))
                };
                let historical = self
                    .fact
                    .and_then(|f| session.fact(f).ok())
                    .is_some_and(|f| f.epoch == f.retired.unwrap_or(usize::MAX));
                let note = if historical { " (record)" } else { "" };
                match (self.rule, self.fact) {
                    (TraceRule::Rule(Rule::OutcomeDefinition), _) => {
                        format!("{at} outcome-definition: measuring {names} yields {}", prose_amps(&self.vector))
                    }
                    (TraceRule::Rule(Rule::WeakBorn), _) => {
                        let screened = if self.parents.is_empty() { "no fact".to_owned() } else { join(&self.parents) };
                        format!("{at} weak-born: outcome for {names} not orthogonal to {screened}")
                    }
                    (rule, Some(f)) => format!(
                        "{at} {}: {f} ({names}) |= {}{from}{note}",
                        rule.name(),
                        prose_amps(&self.vector)
                    ),
                    (rule, None) => format!("{at} {}: ({names}) {}", rule.name(), prose_amps(&self.vector)),
                }
            }
        }
    }
}
