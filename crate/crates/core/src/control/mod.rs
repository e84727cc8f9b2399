//! Controlling automata: acceptors over production events.
//!
//! A controlling grammar's terminals are production labels of the controlled
//! grammar, grouped into named [`EventClass`]es. Right-linear controlling
//! grammars compile to a deterministic [`FiniteControl`]; anything else to a
//! [`PushdownControl`] simulated over sets of configurations.

mod class;
mod finite;
mod pushdown;
mod rule;

use std::fmt;

use thiserror::Error;

use crate::grammar::{DerivationTrace, Grammar, GrammarError, ProductionEvent};

pub use class::{classify_event, EventClass, Pattern};
pub use finite::{intersect, FiniteControl, FiniteRun, Product};
pub use pushdown::{
    Acceptance, PdaTransition, PushdownControl, PushdownRun, DEFAULT_CONFIG_BUDGET,
};
pub use rule::compile_rule;

/// Errors raised while compiling a rule or binding it to a grammar.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("rule grammar: {0}")]
    Grammar(#[from] GrammarError),
    #[error("grammar uses `{0}`, which is not a declared event class")]
    UndeclaredClass(String),
    #[error("event class `{0}` is declared twice")]
    DuplicateClass(String),
    #[error("event classes `{0}` and `{1}` overlap")]
    NonDisjoint(String, String),
    #[error("only one `other` class may be declared")]
    MultipleWildcards,
    #[error("event class `{class}` refers to `{label}`, which is not a production of the controlled grammar")]
    UnknownLabel { class: String, label: String },
    #[error("rule `{rule}` cannot classify production `{label}` (declare an `other` class)")]
    NotTotal { rule: String, label: String },
    #[error("controlling grammar is left-recursive in `{0}`")]
    LeftRecursive(String),
}

/// Errors raised while running an automaton over a trace.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControlError {
    #[error("event {index} (`{event}`) matches no event class")]
    Unclassifiable { index: usize, event: String },
    #[error("pushdown run exceeded {limit} live configurations at event {index}")]
    ConfigurationBudget { index: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    /// `first_dead_index` equals the trace length when the trace ended
    /// without reaching acceptance.
    Rejected {
        first_dead_index: usize,
    },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }

    pub fn dead_index(&self) -> Option<usize> {
        match self {
            Verdict::Accepted => None,
            Verdict::Rejected { first_dead_index } => Some(*first_dead_index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlKind {
    Finite,
    Pushdown,
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlKind::Finite => "finite",
            ControlKind::Pushdown => "pushdown",
        })
    }
}

#[derive(Debug, Clone)]
pub enum Control {
    Finite(FiniteControl),
    Pushdown(PushdownControl),
}

/// A compiled controlling grammar with its identity.
#[derive(Debug, Clone)]
pub struct ControllingAutomaton {
    pub rule_id: String,
    pub description: String,
    pub control: Control,
    /// The controlling grammar the automaton was compiled from, over class
    /// names.
    pub grammar: Option<Grammar>,
}

impl ControllingAutomaton {
    pub fn kind(&self) -> ControlKind {
        match self.control {
            Control::Finite(_) => ControlKind::Finite,
            Control::Pushdown(_) => ControlKind::Pushdown,
        }
    }

    pub fn finite(&self) -> Option<&FiniteControl> {
        match &self.control {
            Control::Finite(f) => Some(f),
            Control::Pushdown(_) => None,
        }
    }

    pub fn pushdown(&self) -> Option<&PushdownControl> {
        match &self.control {
            Control::Pushdown(p) => Some(p),
            Control::Finite(_) => None,
        }
    }

    pub fn alphabet(&self) -> &[EventClass] {
        match &self.control {
            Control::Finite(f) => f.alphabet(),
            Control::Pushdown(p) => p.alphabet(),
        }
    }

    pub fn start(&self) -> Run<'_> {
        match &self.control {
            Control::Finite(f) => Run::Finite(f.start_run()),
            Control::Pushdown(p) => Run::Pushdown(p.start_run()),
        }
    }

    /// Runs the automaton over a whole trace.
    pub fn accepts(&self, trace: &DerivationTrace) -> Result<Verdict, ControlError> {
        let mut run = self.start();
        for e in &trace.events {
            run.step(e)?;
            if run.is_dead() {
                break;
            }
        }
        Ok(run.finish())
    }

    /// Checks that every class names a production of `g` and that every
    /// production of `g` can be classified.
    pub fn bind(&self, g: &Grammar) -> Result<(), RuleError> {
        for class in self.alphabet() {
            for pattern in std::iter::once(&class.include).chain(class.exclude.iter()) {
                if let Some(label) = pattern.label() {
                    if g.production(label).is_none() {
                        return Err(RuleError::UnknownLabel {
                            class: class.name.clone(),
                            label: label.to_string(),
                        });
                    }
                }
            }
        }
        for p in g.productions() {
            // A parameterized production must be classifiable for any value,
            // so probe with one no class can name.
            let probe = if p.param_terminal().is_some() {
                ProductionEvent::with_parameter(p.label.clone(), "\u{0}")
            } else {
                ProductionEvent::new(p.label.clone())
            };
            if classify_event(self.alphabet(), &probe).is_none() {
                return Err(RuleError::NotTotal {
                    rule: self.rule_id.clone(),
                    label: p.label.clone(),
                });
            }
        }
        Ok(())
    }
}

/// An in-progress run of a controlling automaton, fed one event at a time.
#[derive(Debug, Clone)]
pub enum Run<'a> {
    Finite(FiniteRun<'a>),
    Pushdown(PushdownRun<'a>),
}

impl Run<'_> {
    /// Consumes one event. Events after the run has died are counted but
    /// otherwise ignored.
    pub fn step(&mut self, e: &ProductionEvent) -> Result<(), ControlError> {
        match self {
            Run::Finite(r) => r.step(e),
            Run::Pushdown(r) => r.step(e),
        }
    }

    pub fn is_dead(&self) -> bool {
        match self {
            Run::Finite(r) => r.is_dead(),
            Run::Pushdown(r) => r.is_dead(),
        }
    }

    pub fn finish(&self) -> Verdict {
        match self {
            Run::Finite(r) => r.finish(),
            Run::Pushdown(r) => r.finish(),
        }
    }
}
