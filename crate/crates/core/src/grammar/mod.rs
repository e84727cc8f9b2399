//! Labeled context-free grammars, leftmost derivations and derivation traces.
//!
//! A [`Grammar`] is a set of productions `label: A → α` indexed by label. The
//! chart parser in [`earley`] turns an input token sequence into every
//! leftmost derivation of it, each recorded as a [`DerivationTrace`]: the
//! ordered sequence of applied production labels. [`leftmost_derive`] replays
//! a trace back into a sentential form.

mod derive;
pub mod earley;
mod source;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use derive::{leftmost_derive, DeriveError};
pub use earley::{parse_traces, ChartParser, ParseError, DEFAULT_MAX_TRACES};
pub use source::{compile_grammar, compile_grammar_with_terminals};

/// A grammar symbol.
///
/// Parameterized terminals stand for a family of terminals that differ only in
/// a value, written `name(param)`. Inside a grammar the parameter is the formal
/// name (`qname(xmiName)`); in an input or a sentential form it is the actual
/// value (`qname(Package)`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Nonterminal(String),
    Terminal(String),
    Param { name: String, parameter: String },
}

impl Symbol {
    pub fn nonterminal(name: impl Into<String>) -> Self {
        Symbol::Nonterminal(name.into())
    }

    pub fn terminal(name: impl Into<String>) -> Self {
        Symbol::Terminal(name.into())
    }

    pub fn param(name: impl Into<String>, parameter: impl Into<String>) -> Self {
        Symbol::Param {
            name: name.into(),
            parameter: parameter.into(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Symbol::Nonterminal(n) | Symbol::Terminal(n) => n,
            Symbol::Param { name, .. } => name,
        }
    }

    pub fn parameter(&self) -> Option<&str> {
        match self {
            Symbol::Param { parameter, .. } => Some(parameter),
            _ => None,
        }
    }

    pub fn is_nonterminal(&self) -> bool {
        matches!(self, Symbol::Nonterminal(_))
    }

    pub fn is_terminal(&self) -> bool {
        !self.is_nonterminal()
    }

    /// Whether an input symbol can stand where `self` (a grammar terminal)
    /// appears. Parameterized terminals match on name only.
    pub fn accepts(&self, input: &Symbol) -> bool {
        match (self, input) {
            (Symbol::Terminal(a), Symbol::Terminal(b)) => a == b,
            (Symbol::Param { name: a, .. }, Symbol::Param { name: b, .. }) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Nonterminal(n) => f.write_str(n),
            Symbol::Terminal(t) => {
                if t.chars().next().is_some_and(|c| c.is_lowercase()) && !t.contains(' ') {
                    f.write_str(t)
                } else {
                    write!(f, "\"{t}\"")
                }
            }
            Symbol::Param { name, parameter } => write!(f, "{name}({parameter})"),
        }
    }
}

/// `label: lhs → rhs`. An empty `rhs` is an ε-production.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledProduction {
    pub label: String,
    pub lhs: String,
    pub rhs: Vec<Symbol>,
}

impl LabeledProduction {
    pub fn is_epsilon(&self) -> bool {
        self.rhs.is_empty()
    }

    /// The formal parameter symbol of this production, if its body carries one.
    pub fn param_terminal(&self) -> Option<&Symbol> {
        self.rhs.iter().find(|s| matches!(s, Symbol::Param { .. }))
    }
}

impl fmt::Display for LabeledProduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} →", self.label, self.lhs)?;
        if self.rhs.is_empty() {
            return f.write_str(" ε");
        }
        for s in &self.rhs {
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate production label `{0}`")]
    DuplicateLabel(String),
    #[error("symbol `{symbol}` is used in production `{label}` but has no productions")]
    UndeclaredSymbol { symbol: String, label: String },
    #[error("no start symbol: declare one with `start` or add a production")]
    StartMissing,
    #[error("start symbol `{0}` derives no terminal string")]
    StartUnderivable(String),
    #[error("`{0}` is used both as a terminal and a nonterminal")]
    SymbolClash(String),
}

/// A labeled context-free grammar `(N, T, P, S)`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    nonterminals: BTreeSet<String>,
    terminals: BTreeSet<Symbol>,
    productions: Vec<LabeledProduction>,
    by_label: HashMap<String, usize>,
    start: String,
}

impl Grammar {
    /// Builds a grammar and checks its invariants.
    pub fn new(
        productions: Vec<LabeledProduction>,
        start: impl Into<String>,
    ) -> Result<Self, GrammarError> {
        let start = start.into();
        let mut by_label = HashMap::with_capacity(productions.len());
        for (i, p) in productions.iter().enumerate() {
            if by_label.insert(p.label.clone(), i).is_some() {
                return Err(GrammarError::DuplicateLabel(p.label.clone()));
            }
        }
        let nonterminals: BTreeSet<String> = productions.iter().map(|p| p.lhs.clone()).collect();
        let mut terminals = BTreeSet::new();
        for p in &productions {
            for s in &p.rhs {
                match s {
                    Symbol::Nonterminal(n) if !nonterminals.contains(n) => {
                        return Err(GrammarError::UndeclaredSymbol {
                            symbol: n.clone(),
                            label: p.label.clone(),
                        });
                    }
                    Symbol::Nonterminal(_) => {}
                    t => {
                        if nonterminals.contains(t.name()) {
                            return Err(GrammarError::SymbolClash(t.name().to_string()));
                        }
                        terminals.insert(t.clone());
                    }
                }
            }
        }
        let g = Grammar {
            nonterminals,
            terminals,
            productions,
            by_label,
            start,
        };
        if !g.productive().contains(g.start.as_str()) {
            return Err(GrammarError::StartUnderivable(g.start.clone()));
        }
        Ok(g)
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn productions(&self) -> &[LabeledProduction] {
        &self.productions
    }

    pub fn nonterminals(&self) -> &BTreeSet<String> {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &BTreeSet<Symbol> {
        &self.terminals
    }

    pub fn production(&self, label: &str) -> Option<&LabeledProduction> {
        self.by_label.get(label).map(|&i| &self.productions[i])
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.productions.iter().map(|p| p.label.as_str())
    }

    pub fn productions_of<'a>(
        &'a self,
        lhs: &'a str,
    ) -> impl Iterator<Item = &'a LabeledProduction> {
        self.productions.iter().filter(move |p| p.lhs == lhs)
    }

    /// Syntactic right-linearity: every body is a run of terminals followed by
    /// at most one nonterminal.
    pub fn is_right_linear(&self) -> bool {
        self.productions.iter().all(|p| {
            let nts = p.rhs.iter().filter(|s| s.is_nonterminal()).count();
            nts == 0 || (nts == 1 && p.rhs.last().is_some_and(Symbol::is_nonterminal))
        })
    }

    /// Nonterminals that derive at least one terminal string.
    pub fn productive(&self) -> BTreeSet<&str> {
        let mut productive: BTreeSet<&str> = BTreeSet::new();
        loop {
            let before = productive.len();
            for p in &self.productions {
                if p.rhs.iter().all(|s| match s {
                    Symbol::Nonterminal(n) => productive.contains(n.as_str()),
                    _ => true,
                }) {
                    productive.insert(p.lhs.as_str());
                }
            }
            if productive.len() == before {
                return productive;
            }
        }
    }

    /// Nonterminals that derive ε.
    pub fn nullable(&self) -> BTreeSet<&str> {
        let mut nullable: BTreeSet<&str> = BTreeSet::new();
        loop {
            let before = nullable.len();
            for p in &self.productions {
                if p.rhs.iter().all(|s| match s {
                    Symbol::Nonterminal(n) => nullable.contains(n.as_str()),
                    _ => false,
                }) {
                    nullable.insert(p.lhs.as_str());
                }
            }
            if nullable.len() == before {
                return nullable;
            }
        }
    }

    /// Same grammar with a different start symbol.
    pub fn with_start(&self, start: &str) -> Result<Grammar, GrammarError> {
        Grammar::new(self.productions.clone(), start)
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start {}", self.start)?;
        for p in &self.productions {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Half-open byte range in a source text.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn cover(&self, other: &Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

/// One input token: a terminal (or actual parameterized terminal) plus where
/// it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub symbol: Symbol,
    pub span: Span,
}

impl Token {
    pub fn new(symbol: Symbol, span: Span) -> Self {
        Token { symbol, span }
    }
}

/// One token per character, whitespace skipped.
pub fn char_tokens(input: &str) -> Vec<Token> {
    input
        .char_indices()
        .filter(|(_, c)| !c.is_whitespace())
        .map(|(i, c)| {
            Token::new(
                Symbol::terminal(c.to_string()),
                Span::new(i, i + c.len_utf8()),
            )
        })
        .collect()
}

/// One token per whitespace-separated word. `name(value)` becomes a
/// parameterized terminal.
pub fn word_tokens(input: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    let mut push = |s: usize, e: usize| {
        let word = &input[s..e];
        let symbol = match (word.find('('), word.ends_with(')')) {
            (Some(open), true) if open > 0 => {
                Symbol::param(&word[..open], &word[open + 1..word.len() - 1])
            }
            _ => Symbol::terminal(word),
        };
        out.push(Token::new(symbol, Span::new(s, e)));
    };
    for (i, c) in input.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                push(s, i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        push(s, input.len());
    }
    out
}

/// One applied production in a derivation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductionEvent {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_id: Option<String>,
}

impl ProductionEvent {
    pub fn new(label: impl Into<String>) -> Self {
        ProductionEvent {
            label: label.into(),
            parameter: None,
            span: None,
            element_id: None,
        }
    }

    pub fn with_parameter(label: impl Into<String>, parameter: impl Into<String>) -> Self {
        ProductionEvent {
            parameter: Some(parameter.into()),
            ..ProductionEvent::new(label)
        }
    }
}

impl fmt::Display for ProductionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.parameter {
            Some(p) => write!(f, "{}({})", self.label, p),
            None => f.write_str(&self.label),
        }
    }
}

/// The production sequence `p1 p2 … pk` of a leftmost derivation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DerivationTrace {
    pub events: Vec<ProductionEvent>,
}

impl DerivationTrace {
    pub fn new(events: Vec<ProductionEvent>) -> Self {
        DerivationTrace { events }
    }

    /// Builds a trace from `label` or `label(param)` strings.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        DerivationTrace::new(
            labels
                .iter()
                .map(|l| {
                    let l = l.as_ref();
                    match (l.find('('), l.ends_with(')')) {
                        (Some(open), true) => {
                            ProductionEvent::with_parameter(&l[..open], &l[open + 1..l.len() - 1])
                        }
                        _ => ProductionEvent::new(l),
                    }
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.label.as_str()).collect()
    }

    /// Replays the trace under `g` (see [`leftmost_derive`]).
    pub fn replay(&self, g: &Grammar) -> Result<Vec<Symbol>, DeriveError> {
        leftmost_derive(
            g,
            self.events
                .iter()
                .map(|e| (e.label.as_str(), e.parameter.as_deref())),
        )
    }

    /// `2a_2, 2k(Package), 2d_2, …`
    pub fn listing(&self) -> String {
        self.events
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn sort_key(&self) -> Vec<(&str, Option<&str>)> {
        self.events
            .iter()
            .map(|e| (e.label.as_str(), e.parameter.as_deref()))
            .collect()
    }
}

/// Canonical ordering for trace sets: lexicographic by label sequence.
pub(crate) fn sort_traces(traces: &mut [DerivationTrace]) {
    traces.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}
