//! C-Systems: a controlled grammar paired with controlling automata.
//!
//! A word belongs to the global language when some leftmost derivation of it
//! produces a trace that every control accepts.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::control::{
    classify_event, ControlError, ControlKind, ControllingAutomaton, FiniteControl, FiniteRun,
    Product, RuleError, Run, Verdict,
};
use crate::grammar::{ChartParser, DerivationTrace, Grammar, ParseError, ProductionEvent, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CSystemError {
    #[error("a C-System needs at least one control")]
    NoControls,
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LanguageKind {
    /// Regular: a right-linear grammar or a finite control.
    R,
    /// Context-free.
    CF,
}

impl fmt::Display for LanguageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LanguageKind::R => "R",
            LanguageKind::CF => "CF",
        })
    }
}

/// The family `C_X^Y` of a system with an X-type controlled grammar and
/// Y-type controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Family {
    pub controlled: LanguageKind,
    pub control: LanguageKind,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C_{}^{}", self.controlled, self.control)
    }
}

/// One control's verdict on the best trace of a rejected word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ControlVerdict {
    pub rule_id: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Membership {
    /// `trace` is the first accepted trace in canonical order.
    InGlobalLanguage { trace: DerivationTrace },
    /// No derivation; `position` is the first token with no viable
    /// continuation.
    RejectedByControlled { position: usize },
    /// Every trace is rejected by some control. Details come from the best
    /// trace: the one accepted by the most controls, ties broken by the
    /// later rejection, then canonical order.
    RejectedByControls {
        trace: DerivationTrace,
        controls: Vec<ControlVerdict>,
    },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::InGlobalLanguage { .. })
    }
}

/// `G ·> Ĝ₁ ∧ … ∧ Ĝₙ`. Immutable once built.
#[derive(Debug, Clone)]
pub struct CSystem {
    controlled: Grammar,
    controls: Vec<ControllingAutomaton>,
    family: Family,
    /// Product of the finite controls, when there are at least two.
    product: Option<(Product, Vec<usize>)>,
    max_traces: usize,
}

impl CSystem {
    /// Pairs `controlled` with `controls`, checking that every control can
    /// classify every production.
    pub fn new(
        controlled: Grammar,
        controls: Vec<ControllingAutomaton>,
    ) -> Result<Self, CSystemError> {
        if controls.is_empty() {
            return Err(CSystemError::NoControls);
        }
        for c in &controls {
            c.bind(&controlled)?;
        }
        let family = Family {
            controlled: if controlled.is_right_linear() {
                LanguageKind::R
            } else {
                LanguageKind::CF
            },
            control: if controls.iter().any(|c| c.kind() == ControlKind::Pushdown) {
                LanguageKind::CF
            } else {
                LanguageKind::R
            },
        };
        let finite: Vec<usize> = (0..controls.len())
            .filter(|&i| controls[i].kind() == ControlKind::Finite)
            .collect();
        let product = (finite.len() >= 2).then(|| {
            let parts: Vec<_> = finite
                .iter()
                .filter_map(|&i| controls[i].finite())
                .collect();
            (Product::new(&parts), finite)
        });
        Ok(CSystem {
            controlled,
            controls,
            family,
            product,
            max_traces: crate::grammar::DEFAULT_MAX_TRACES,
        })
    }

    /// Caps the number of derivation traces considered per word.
    pub fn with_max_traces(mut self, n: usize) -> Self {
        self.max_traces = n;
        self
    }

    pub fn controlled(&self) -> &Grammar {
        &self.controlled
    }

    pub fn controls(&self) -> &[ControllingAutomaton] {
        &self.controls
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// The family tag, e.g. `C_R^R`.
    pub fn classify(&self) -> String {
        self.family.to_string()
    }

    /// Decides membership of `input` in the global language.
    pub fn membership(&self, input: &[Token]) -> Result<Membership, CSystemError> {
        let traces = match ChartParser::new(&self.controlled)
            .max_traces(self.max_traces)
            .parse(input)
        {
            Ok(t) => t,
            Err(ParseError::NoParse { position, .. }) => {
                return Ok(Membership::RejectedByControlled { position })
            }
            Err(e) => return Err(e.into()),
        };
        let (best, verdicts) = self.best_trace(&traces)?;
        let trace = traces.into_iter().nth(best).expect("index from best_trace");
        if verdicts.iter().all(Verdict::is_accepted) {
            return Ok(Membership::InGlobalLanguage { trace });
        }
        Ok(Membership::RejectedByControls {
            trace,
            controls: self
                .controls
                .iter()
                .zip(verdicts)
                .map(|(c, verdict)| ControlVerdict {
                    rule_id: c.rule_id.clone(),
                    verdict,
                })
                .collect(),
        })
    }

    /// Picks the trace to report from a non-empty set: the first accepted by
    /// every control if any, else the one accepted by the most controls,
    /// ties broken by the larger sum of dead indices, then by position.
    pub fn best_trace(
        &self,
        traces: &[DerivationTrace],
    ) -> Result<(usize, Vec<Verdict>), ControlError> {
        assert!(!traces.is_empty(), "best_trace needs at least one trace");
        let mut best: Option<((usize, usize), usize, Vec<Verdict>)> = None;
        for (i, trace) in traces.iter().enumerate() {
            let verdicts = self.check_events(&trace.events)?;
            if verdicts.iter().all(Verdict::is_accepted) {
                return Ok((i, verdicts));
            }
            let accepted = verdicts.iter().filter(|v| v.is_accepted()).count();
            let reach: usize = verdicts.iter().filter_map(Verdict::dead_index).sum();
            if best.as_ref().is_none_or(|(k, _, _)| (accepted, reach) > *k) {
                best = Some(((accepted, reach), i, verdicts));
            }
        }
        let (_, i, verdicts) = best.expect("non-empty");
        Ok((i, verdicts))
    }

    /// Runs every control over `trace` in one pass; one verdict per control,
    /// in control order.
    pub fn check_trace(&self, trace: &DerivationTrace) -> Result<Vec<Verdict>, ControlError> {
        let mut runs: Vec<Run<'_>> = self
            .controls
            .iter()
            .map(ControllingAutomaton::start)
            .collect();
        for e in &trace.events {
            for run in runs.iter_mut().filter(|r| !r.is_dead()) {
                run.step(e)?;
            }
            if runs.iter().all(Run::is_dead) {
                break;
            }
        }
        Ok(runs.iter().map(Run::finish).collect())
    }

    /// Like [`check_trace`](Self::check_trace), but steps the finite
    /// controls through their product automaton. Verdicts are still
    /// reported per control.
    pub fn check_events<'e, I>(&self, events: I) -> Result<Vec<Verdict>, ControlError>
    where
        I: IntoIterator<Item = &'e ProductionEvent>,
    {
        let Some((product, finite)) = &self.product else {
            let trace = DerivationTrace::new(events.into_iter().cloned().collect());
            return self.check_trace(&trace);
        };
        let mut stream = ProductStream::new(self, product, finite);
        for e in events {
            stream.step(e)?;
        }
        Ok(stream.finish())
    }
}

/// Streaming state for [`CSystem::check_events`]: the product run while all
/// finite controls are alive, individual runs after the first one dies.
struct ProductStream<'a> {
    product: &'a Product,
    finite: &'a [usize],
    parts: Vec<&'a FiniteControl>,
    joint: Option<FiniteRun<'a>>,
    split: Vec<FiniteRun<'a>>,
    others: Vec<(usize, Run<'a>)>,
    consumed: usize,
    total: usize,
}

impl<'a> ProductStream<'a> {
    fn new(sys: &'a CSystem, product: &'a Product, finite: &'a [usize]) -> Self {
        ProductStream {
            product,
            finite,
            parts: finite
                .iter()
                .filter_map(|&i| sys.controls[i].finite())
                .collect(),
            joint: Some(product.control.start_run()),
            split: Vec::new(),
            others: (0..sys.controls.len())
                .filter(|i| !finite.contains(i))
                .map(|i| (i, sys.controls[i].start()))
                .collect(),
            consumed: 0,
            total: sys.controls.len(),
        }
    }

    fn step(&mut self, e: &ProductionEvent) -> Result<(), ControlError> {
        for (_, run) in self.others.iter_mut() {
            run.step(e)?;
        }
        match &mut self.joint {
            Some(joint) => {
                let state = joint.state().expect("joint run is dropped once dead");
                joint.step(e)?;
                if joint.is_dead() {
                    let class = classify_event(self.product.control.alphabet(), e)
                        .expect("the joint step classified this event");
                    self.joint = None;
                    self.split = self
                        .parts
                        .iter()
                        .enumerate()
                        .map(|(k, part)| {
                            let mut run =
                                part.resume(self.product.components[state][k], self.consumed);
                            run.step_class(self.product.classes[class][k]);
                            run
                        })
                        .collect();
                }
            }
            None => {
                for run in &mut self.split {
                    run.step(e)?;
                }
            }
        }
        self.consumed += 1;
        Ok(())
    }

    fn finish(self) -> Vec<Verdict> {
        let mut out = vec![Verdict::Accepted; self.total];
        for (i, run) in &self.others {
            out[*i] = run.finish();
        }
        for (k, &i) in self.finite.iter().enumerate() {
            out[i] = match &self.joint {
                Some(joint) => {
                    let s = joint.state().expect("joint run is alive");
                    if self.parts[k].is_accepting(self.product.components[s][k]) {
                        Verdict::Accepted
                    } else {
                        Verdict::Rejected {
                            first_dead_index: self.consumed,
                        }
                    }
                }
                None => self.split[k].finish(),
            };
        }
        out
    }
}
