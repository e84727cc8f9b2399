//! Checking models against rules and reporting the violations.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::builtin::{ConfigError, RuleConfig};
use crate::control::{ControlError, ControllingAutomaton, RuleError, Verdict};
use crate::csystem::{CSystem, CSystemError};
use crate::grammar::{word_tokens, ChartParser, DerivationTrace, Grammar, ParseError, Span};
use crate::xmi::{line_col, load_xmi, uml_grammar, XmiDocument, XmiError, XmiOptions, XmiWarning};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Xmi(#[from] XmiError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    System(#[from] CSystemError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{name}: {error}")]
    Rule { name: String, error: RuleError },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule_id: String,
    pub message: String,
    /// Index into the checked trace; equal to its length when the trace
    /// ended before the rule could accept.
    pub event_index: usize,
    /// Span of the anchoring element.
    pub byte_span: Span,
    pub line: usize,
    pub column: usize,
    pub element_id: Option<String>,
    pub element_name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportVerdict {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub events: usize,
    pub rules: usize,
    /// Derivations found for the input.
    pub traces: usize,
    /// Wall-clock time; zeroed by [`Report::without_timing`].
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProcessingError {
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub byte_offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub file: String,
    pub verdict: ReportVerdict,
    pub violations: Vec<Violation>,
    pub stats: Stats,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<XmiWarning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ProcessingError>,
    /// Production labels of the checked trace, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<String>>,
}

impl Report {
    fn error(file: &str, rules: usize, source: Option<&str>, e: &CheckError) -> Self {
        let offset = match e {
            CheckError::Xmi(x) => x.offset(),
            CheckError::Parse(ParseError::NoParse { position, .. }) => Some(*position),
            _ => None,
        };
        let (line, column) = match (offset, source) {
            (Some(o), Some(src)) => {
                let (l, c) = line_col(src, o);
                (Some(l), Some(c))
            }
            _ => (None, None),
        };
        Report {
            file: file.to_string(),
            verdict: ReportVerdict::Error,
            violations: Vec::new(),
            stats: Stats {
                events: 0,
                rules,
                traces: 0,
                elapsed_ms: 0,
            },
            warnings: Vec::new(),
            error: Some(ProcessingError {
                message: e.to_string(),
                byte_offset: offset,
                line,
                column,
            }),
            trace: None,
        }
    }

    /// The same report with `elapsed_ms` zeroed, for byte-exact comparison.
    pub fn without_timing(mut self) -> Self {
        self.stats.elapsed_ms = 0;
        self
    }

    /// Human-readable rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let verdict = match self.verdict {
            ReportVerdict::Pass => "pass",
            ReportVerdict::Fail => "FAIL",
            ReportVerdict::Error => "ERROR",
        };
        let _ = writeln!(
            s,
            "{}: {verdict} ({} violation(s); {} events, {} rule(s), {} ms)",
            self.file,
            self.violations.len(),
            self.stats.events,
            self.stats.rules,
            self.stats.elapsed_ms
        );
        if let Some(e) = &self.error {
            match (e.line, e.column) {
                (Some(l), Some(c)) => {
                    let _ = writeln!(s, "  {}:{l}:{c}: error: {}", self.file, e.message);
                }
                _ => {
                    let _ = writeln!(s, "  error: {}", e.message);
                }
            }
        }
        for v in &self.violations {
            let element = match (&v.element_name, &v.element_id) {
                (Some(n), Some(id)) => format!(" [{n}, xmi:id {id}]"),
                (None, Some(id)) => format!(" [xmi:id {id}]"),
                (Some(n), None) => format!(" [{n}]"),
                (None, None) => String::new(),
            };
            let _ = writeln!(
                s,
                "  {}:{}:{}: {}: {}{element}",
                self.file, v.line, v.column, v.rule_id, v.message
            );
        }
        for w in &self.warnings {
            let _ = writeln!(
                s,
                "  {}:{}:{}: warning: {}",
                self.file, w.line, w.column, w.message
            );
        }
        if let Some(t) = &self.trace {
            let _ = writeln!(s, "  trace: {}", t.join(", "));
        }
        s
    }
}

/// `{"reports": [...]}`, pretty-printed, one object per invocation.
pub fn reports_to_json(reports: &[Report]) -> String {
    #[derive(Serialize)]
    struct Envelope<'a> {
        reports: &'a [Report],
    }
    serde_json::to_string_pretty(&Envelope { reports }).expect("reports serialize")
}

/// How input files are read.
#[derive(Debug, Clone)]
pub enum InputMode {
    /// XMI documents under the bundled document grammar.
    Xmi(XmiOptions),
    /// Whitespace-separated terminals of a user grammar.
    Words { max_traces: usize },
}

/// A C-System ready to check inputs: the controlled grammar plus rules.
#[derive(Debug, Clone)]
pub struct Checker {
    system: CSystem,
    mode: InputMode,
    trace: bool,
}

impl Checker {
    /// Checks XMI documents against `rules`.
    pub fn new(rules: Vec<ControllingAutomaton>, options: XmiOptions) -> Result<Self, CheckError> {
        Ok(Checker {
            system: CSystem::new(uml_grammar().clone(), rules)?,
            mode: InputMode::Xmi(options),
            trace: false,
        })
    }

    /// Checks XMI documents against the enabled built-in rules.
    pub fn from_config(config: &RuleConfig, options: XmiOptions) -> Result<Self, CheckError> {
        Checker::new(config.rules()?, options)
    }

    /// Checks token files against a user grammar.
    pub fn with_grammar(
        grammar: Grammar,
        rules: Vec<ControllingAutomaton>,
    ) -> Result<Self, CheckError> {
        Ok(Checker {
            system: CSystem::new(grammar, rules)?,
            mode: InputMode::Words {
                max_traces: crate::grammar::DEFAULT_MAX_TRACES,
            },
            trace: false,
        })
    }

    /// Include the checked trace in every report.
    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn system(&self) -> &CSystem {
        &self.system
    }

    /// Reads and checks a file. Never fails: problems become an `error`
    /// report.
    pub fn check_path(&self, path: &Path) -> Report {
        let file = path.display().to_string();
        match std::fs::read_to_string(path) {
            Ok(src) => self.check_source(&file, &src),
            Err(e) => Report::error(
                &file,
                self.system.controls().len(),
                None,
                &CheckError::Io {
                    path: file.clone(),
                    message: e.to_string(),
                },
            ),
        }
    }

    /// Checks in-memory source; `file` only labels the report.
    pub fn check_source(&self, file: &str, src: &str) -> Report {
        let started = Instant::now();
        let result = match &self.mode {
            InputMode::Xmi(options) => load_xmi(src, options)
                .map_err(CheckError::from)
                .and_then(|doc| self.check_document(file, &doc)),
            InputMode::Words { max_traces } => self.check_words(file, src, *max_traces),
        };
        let mut report = result
            .unwrap_or_else(|e| Report::error(file, self.system.controls().len(), Some(src), &e));
        report.stats.elapsed_ms = started.elapsed().as_millis() as u64;
        report
    }

    /// Checks an already loaded document.
    pub fn check_document(&self, file: &str, doc: &XmiDocument) -> Result<Report, CheckError> {
        let (best, verdicts) = self.system.best_trace(&doc.traces)?;
        let trace = &doc.traces[best];
        let mut violations = Vec::new();
        for (rule, verdict) in self.system.controls().iter().zip(&verdicts) {
            let Verdict::Rejected { first_dead_index } = *verdict else {
                continue;
            };
            let at = first_dead_index.min(trace.len().saturating_sub(1));
            let element = trace
                .events
                .get(at)
                .and_then(|e| doc.event_element(e))
                .or((!doc.elements.is_empty()).then_some(0))
                .and_then(|el| doc.named(el).or(Some(el)));
            let record = element.map(|i| &doc.elements[i]);
            let byte_span = record.map_or(Span::new(0, doc.source.len()), |r| r.span);
            let (line, column) = doc.line_col(byte_span.start);
            violations.push(Violation {
                rule_id: rule.rule_id.clone(),
                message: violation_message(rule, trace, first_dead_index),
                event_index: first_dead_index,
                byte_span,
                line,
                column,
                element_id: record.and_then(|r| r.xmi_id.clone()),
                element_name: record.and_then(|r| r.name.clone()),
            });
        }
        Ok(self.finish(
            file,
            trace,
            doc.traces.len(),
            violations,
            doc.warnings.clone(),
        ))
    }

    fn check_words(&self, file: &str, src: &str, max_traces: usize) -> Result<Report, CheckError> {
        let tokens = word_tokens(src);
        let traces = ChartParser::new(self.system.controlled())
            .max_traces(max_traces)
            .parse(&tokens)?;
        let (best, verdicts) = self.system.best_trace(&traces)?;
        let trace = &traces[best];
        let violations = self
            .system
            .controls()
            .iter()
            .zip(&verdicts)
            .filter_map(|(rule, v)| v.dead_index().map(|i| (rule, i)))
            .map(|(rule, i)| {
                // Anchor to the first token of the dead event, or the end of input.
                let byte_span = trace
                    .events
                    .get(i)
                    .and_then(|e| e.span)
                    .unwrap_or(Span::new(src.len(), src.len()));
                let (line, column) = line_col(src, byte_span.start);
                Violation {
                    rule_id: rule.rule_id.clone(),
                    message: violation_message(rule, trace, i),
                    event_index: i,
                    byte_span,
                    line,
                    column,
                    element_id: None,
                    element_name: None,
                }
            })
            .collect();
        Ok(self.finish(file, trace, traces.len(), violations, Vec::new()))
    }

    fn finish(
        &self,
        file: &str,
        trace: &DerivationTrace,
        traces: usize,
        mut violations: Vec<Violation>,
        warnings: Vec<XmiWarning>,
    ) -> Report {
        // Stable: ties keep rule order.
        violations.sort_by_key(|v| v.event_index);
        Report {
            file: file.to_string(),
            verdict: if violations.is_empty() {
                ReportVerdict::Pass
            } else {
                ReportVerdict::Fail
            },
            violations,
            stats: Stats {
                events: trace.len(),
                rules: self.system.controls().len(),
                traces,
                elapsed_ms: 0,
            },
            warnings,
            error: None,
            trace: self
                .trace
                .then(|| trace.events.iter().map(|e| e.to_string()).collect()),
        }
    }
}

fn violation_message(rule: &ControllingAutomaton, trace: &DerivationTrace, dead: usize) -> String {
    let what = if rule.description.is_empty() {
        format!("rule {} violated", rule.rule_id)
    } else {
        format!("violates \"{}\"", rule.description)
    };
    match trace.events.get(dead) {
        Some(e) => format!("{what}: no continuation at event {dead} ({e})"),
        None => format!("{what}: trace ended after {dead} events before the rule was satisfied"),
    }
}

/// Loads `path` and checks it against `rules`.
pub fn check_model(
    path: &Path,
    rules: Vec<ControllingAutomaton>,
    config: &RuleConfig,
    options: XmiOptions,
) -> Result<Report, CheckError> {
    config.validate()?;
    let src = std::fs::read_to_string(path).map_err(|e| CheckError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let checker = Checker::new(rules, options)?;
    let started = Instant::now();
    let doc = load_xmi(&src, &options)?;
    let mut report = checker.check_document(&path.display().to_string(), &doc)?;
    report.stats.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}
