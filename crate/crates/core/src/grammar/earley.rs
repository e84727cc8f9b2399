//! Earley recognizer plus leftmost-trace extraction from the finished chart.
//!
//! Nullable nonterminals are handled by advancing over them at prediction
//! time. Traces are read back top-down: a parse tree's preorder is exactly its
//! leftmost derivation, so each tree yields one trace.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use thiserror::Error;

use super::{sort_traces, DerivationTrace, Grammar, ProductionEvent, Span, Symbol, Token};

/// Default cap on the number of traces enumerated for one input.
pub const DEFAULT_MAX_TRACES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    /// The input is not in the language. `position` is the index of the first
    /// token with no viable continuation (equal to the input length when the
    /// input ends too early).
    #[error("no parse: unexpected {found} at token {position}; expected one of: {}", expected.join(", "))]
    NoParse {
        position: usize,
        span: Option<Span>,
        found: String,
        expected: Vec<String>,
    },
    #[error("input has more than {limit} leftmost derivations")]
    TraceBudgetExceeded { limit: usize },
    #[error("input has infinitely many leftmost derivations (cyclic grammar)")]
    UnboundedAmbiguity,
    #[error("unknown start symbol `{0}`")]
    UnknownStart(String),
}

/// Every leftmost derivation trace of `input` under `g`, up to `max_traces`,
/// in canonical order. Non-membership yields an empty set.
pub fn parse_traces(
    g: &Grammar,
    input: &[Token],
    max_traces: usize,
) -> Result<Vec<DerivationTrace>, ParseError> {
    match ChartParser::new(g).max_traces(max_traces).parse(input) {
        Err(ParseError::NoParse { .. }) => Ok(Vec::new()),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    N(usize),
    T(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Item {
    prod: u32,
    dot: u32,
    origin: u32,
}

impl Item {
    fn new(prod: usize, dot: usize, origin: usize) -> Self {
        Item {
            prod: prod as u32,
            dot: dot as u32,
            origin: origin as u32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChartParser<'g> {
    grammar: &'g Grammar,
    terminals: Vec<Symbol>,
    rhs: Vec<Vec<Sym>>,
    lhs: Vec<usize>,
    by_lhs: Vec<Vec<usize>>,
    nullable: Vec<bool>,
    nt_names: Vec<String>,
    start: usize,
    max_traces: usize,
}

impl<'g> ChartParser<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        let nt_names: Vec<String> = grammar.nonterminals().iter().cloned().collect();
        let nt_index: HashMap<&str, usize> = nt_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let terminals: Vec<Symbol> = grammar.terminals().iter().cloned().collect();
        let t_index: HashMap<&Symbol, usize> =
            terminals.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let mut by_lhs = vec![Vec::new(); nt_names.len()];
        let mut rhs = Vec::new();
        let mut lhs = Vec::new();
        for (i, p) in grammar.productions().iter().enumerate() {
            let l = nt_index[p.lhs.as_str()];
            by_lhs[l].push(i);
            lhs.push(l);
            rhs.push(
                p.rhs
                    .iter()
                    .map(|s| match s {
                        Symbol::Nonterminal(n) => Sym::N(nt_index[n.as_str()]),
                        t => Sym::T(t_index[t]),
                    })
                    .collect(),
            );
        }
        let nullable_names = grammar.nullable();
        let nullable = nt_names
            .iter()
            .map(|n| nullable_names.contains(n.as_str()))
            .collect();
        let start = nt_index[grammar.start()];
        ChartParser {
            grammar,
            terminals,
            rhs,
            lhs,
            by_lhs,
            nullable,
            nt_names,
            start,
            max_traces: DEFAULT_MAX_TRACES,
        }
    }

    /// Parses from `start` instead of the grammar's start symbol.
    pub fn with_start(mut self, start: &str) -> Result<Self, ParseError> {
        self.start = self
            .nt_names
            .iter()
            .position(|n| n == start)
            .ok_or_else(|| ParseError::UnknownStart(start.to_string()))?;
        Ok(self)
    }

    pub fn max_traces(mut self, n: usize) -> Self {
        self.max_traces = n.max(1);
        self
    }

    /// Membership only.
    pub fn recognize(&self, input: &[Token]) -> Result<(), ParseError> {
        self.chart(input).map(|_| ())
    }

    /// All leftmost derivation traces of `input`, canonically ordered.
    pub fn parse(&self, input: &[Token]) -> Result<Vec<DerivationTrace>, ParseError> {
        let chart = self.chart(input)?;
        let mut forest = Forest {
            parser: self,
            chart: &chart,
            memo: HashMap::new(),
            active: HashSet::new(),
            cap: self.max_traces + 1,
        };
        let roots = forest.trees(self.start, 0, input.len())?;
        if roots.len() > self.max_traces {
            return Err(ParseError::TraceBudgetExceeded {
                limit: self.max_traces,
            });
        }
        let mut traces: Vec<DerivationTrace> = roots
            .iter()
            .map(|root| {
                let mut events = Vec::new();
                self.flatten(root, input, &mut events);
                DerivationTrace::new(events)
            })
            .collect();
        sort_traces(&mut traces);
        Ok(traces)
    }

    fn flatten(&self, node: &Inner, input: &[Token], out: &mut Vec<ProductionEvent>) {
        let p = &self.grammar.productions()[node.prod];
        let parameter = node.children.iter().find_map(|c| match c {
            Node::Leaf(t) => input[*t].symbol.parameter().map(str::to_string),
            Node::Inner(_) => None,
        });
        // Starts at the first yield token even when token spans are not in
        // source order, so the start identifies that token.
        let span = if node.to > node.from {
            let first = input[node.from].span;
            let end = input[node.from..node.to]
                .iter()
                .map(|t| t.span.end)
                .max()
                .unwrap_or(first.end);
            Some(Span::new(first.start, end))
        } else if let Some(next) = input.get(node.from) {
            Some(Span::new(next.span.start, next.span.start))
        } else {
            input.last().map(|t| Span::new(t.span.end, t.span.end))
        };
        out.push(ProductionEvent {
            label: p.label.clone(),
            parameter,
            span,
            element_id: None,
        });
        for c in &node.children {
            if let Node::Inner(inner) = c {
                self.flatten(inner, input, out);
            }
        }
    }

    fn matching_terminals(&self, token: &Token) -> Vec<usize> {
        self.terminals
            .iter()
            .enumerate()
            .filter(|(_, t)| t.accepts(&token.symbol))
            .map(|(i, _)| i)
            .collect()
    }

    fn chart(&self, input: &[Token]) -> Result<Chart, ParseError> {
        let n = input.len();
        let matches: Vec<Vec<usize>> = input.iter().map(|t| self.matching_terminals(t)).collect();
        let mut sets: Vec<Vec<Item>> = vec![Vec::new(); n + 1];
        let mut seen: Vec<HashSet<Item>> = vec![HashSet::new(); n + 1];
        let mut waiting: Vec<HashMap<usize, Vec<Item>>> = vec![HashMap::new(); n + 1];

        fn add(sets: &mut [Vec<Item>], seen: &mut [HashSet<Item>], k: usize, item: Item) {
            if seen[k].insert(item) {
                sets[k].push(item);
            }
        }

        for &p in &self.by_lhs[self.start] {
            add(&mut sets, &mut seen, 0, Item::new(p, 0, 0));
        }
        for k in 0..=n {
            let mut i = 0;
            while i < sets[k].len() {
                let item = sets[k][i];
                i += 1;
                let body = &self.rhs[item.prod as usize];
                match body.get(item.dot as usize) {
                    Some(&Sym::N(b)) => {
                        waiting[k].entry(b).or_default().push(item);
                        for &q in &self.by_lhs[b] {
                            add(&mut sets, &mut seen, k, Item::new(q, 0, k));
                        }
                        if self.nullable[b] {
                            add(
                                &mut sets,
                                &mut seen,
                                k,
                                Item::new(
                                    item.prod as usize,
                                    item.dot as usize + 1,
                                    item.origin as usize,
                                ),
                            );
                        }
                    }
                    Some(&Sym::T(t)) => {
                        if k < n && matches[k].contains(&t) {
                            add(
                                &mut sets,
                                &mut seen,
                                k + 1,
                                Item::new(
                                    item.prod as usize,
                                    item.dot as usize + 1,
                                    item.origin as usize,
                                ),
                            );
                        }
                    }
                    None => {
                        let origin = item.origin as usize;
                        if origin == k {
                            // ε-completions are covered by the nullable advance.
                            continue;
                        }
                        let lhs = self.lhs[item.prod as usize];
                        let parents = waiting[origin].get(&lhs).cloned().unwrap_or_default();
                        for w in parents {
                            add(
                                &mut sets,
                                &mut seen,
                                k,
                                Item::new(w.prod as usize, w.dot as usize + 1, w.origin as usize),
                            );
                        }
                    }
                }
            }
            if k < n && sets[k + 1].is_empty() {
                return Err(self.no_parse(&sets[k], input, k));
            }
        }
        let accepted = sets[n].iter().any(|it| {
            it.origin == 0
                && self.lhs[it.prod as usize] == self.start
                && it.dot as usize == self.rhs[it.prod as usize].len()
        });
        if !accepted {
            return Err(self.no_parse(&sets[n], input, n));
        }
        let mut done = HashSet::new();
        for (k, set) in sets.iter().enumerate() {
            for it in set {
                if it.dot as usize == self.rhs[it.prod as usize].len() {
                    done.insert((self.lhs[it.prod as usize], it.origin as usize, k));
                }
            }
        }
        Ok(Chart {
            seen,
            done,
            matches,
        })
    }

    fn no_parse(&self, set: &[Item], input: &[Token], k: usize) -> ParseError {
        let mut expected: Vec<String> = set
            .iter()
            .filter_map(|it| match self.rhs[it.prod as usize].get(it.dot as usize) {
                Some(Sym::T(t)) => Some(self.terminals[*t].to_string()),
                _ => None,
            })
            .collect();
        expected.sort();
        expected.dedup();
        if expected.is_empty() {
            expected.push("end of input".to_string());
        }
        let (found, span) = match input.get(k) {
            Some(t) => (format!("`{}`", t.symbol), Some(t.span)),
            None => (
                "end of input".to_string(),
                input.last().map(|t| Span::new(t.span.end, t.span.end)),
            ),
        };
        ParseError::NoParse {
            position: k,
            span,
            found,
            expected,
        }
    }
}

struct Chart {
    seen: Vec<HashSet<Item>>,
    done: HashSet<(usize, usize, usize)>,
    matches: Vec<Vec<usize>>,
}

#[derive(Debug)]
enum Node {
    Leaf(usize),
    Inner(Rc<Inner>),
}

impl Clone for Node {
    fn clone(&self) -> Self {
        match self {
            Node::Leaf(t) => Node::Leaf(*t),
            Node::Inner(i) => Node::Inner(Rc::clone(i)),
        }
    }
}

#[derive(Debug)]
struct Inner {
    prod: usize,
    from: usize,
    to: usize,
    children: Vec<Node>,
}

type Trees = Rc<Vec<Rc<Inner>>>;

struct Forest<'a, 'g> {
    parser: &'a ChartParser<'g>,
    chart: &'a Chart,
    memo: HashMap<(usize, usize, usize), Trees>,
    active: HashSet<(usize, usize, usize)>,
    cap: usize,
}

impl Forest<'_, '_> {
    /// Parse trees of `nt` spanning tokens `from..to`, at most `cap` of them.
    fn trees(&mut self, nt: usize, from: usize, to: usize) -> Result<Trees, ParseError> {
        let key = (nt, from, to);
        if let Some(t) = self.memo.get(&key) {
            return Ok(Rc::clone(t));
        }
        if !self.active.insert(key) {
            return Err(ParseError::UnboundedAmbiguity);
        }
        let mut out = Vec::new();
        let prods = self.parser.by_lhs[nt].clone();
        'prods: for p in prods {
            let len = self.parser.rhs[p].len();
            if !self.chart.seen[to].contains(&Item::new(p, len, from)) {
                continue;
            }
            for children in self.sequences(p, len, from, to)? {
                out.push(Rc::new(Inner {
                    prod: p,
                    from,
                    to,
                    children,
                }));
                if out.len() >= self.cap {
                    break 'prods;
                }
            }
        }
        self.active.remove(&key);
        let out = Rc::new(out);
        self.memo.insert(key, Rc::clone(&out));
        Ok(out)
    }

    /// Child sequences for the first `dot` symbols of production `p`
    /// spanning `from..to`.
    fn sequences(
        &mut self,
        p: usize,
        dot: usize,
        from: usize,
        to: usize,
    ) -> Result<Vec<Vec<Node>>, ParseError> {
        if dot == 0 {
            return Ok(if from == to {
                vec![Vec::new()]
            } else {
                Vec::new()
            });
        }
        let mut out = Vec::new();
        match self.parser.rhs[p][dot - 1] {
            Sym::T(t) => {
                if to > from
                    && self.chart.matches[to - 1].contains(&t)
                    && self.chart.seen[to - 1].contains(&Item::new(p, dot - 1, from))
                {
                    for mut left in self.sequences(p, dot - 1, from, to - 1)? {
                        left.push(Node::Leaf(to - 1));
                        out.push(left);
                        if out.len() >= self.cap {
                            break;
                        }
                    }
                }
            }
            Sym::N(b) => {
                for mid in from..=to {
                    if !self.chart.seen[mid].contains(&Item::new(p, dot - 1, from))
                        || !self.chart.done.contains(&(b, mid, to))
                    {
                        continue;
                    }
                    let subs = self.trees(b, mid, to)?;
                    let lefts = self.sequences(p, dot - 1, from, mid)?;
                    for left in &lefts {
                        for sub in subs.iter() {
                            let mut seq = left.clone();
                            seq.push(Node::Inner(Rc::clone(sub)));
                            out.push(seq);
                            if out.len() >= self.cap {
                                return Ok(out);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{char_tokens, compile_grammar, word_tokens};

    fn ab_grammar() -> Grammar {
        compile_grammar("p1: S → a S\np2: S → b S\np3: S → ε\n").unwrap()
    }

    fn labels(traces: &[DerivationTrace]) -> Vec<Vec<&str>> {
        traces.iter().map(|t| t.labels()).collect()
    }

    #[test]
    fn ab_grammar_aab() {
        let traces = parse_traces(&ab_grammar(), &char_tokens("aab"), 64).unwrap();
        assert_eq!(labels(&traces), [["p1", "p1", "p2", "p3"]]);
    }

    #[test]
    fn ab_grammar_abab() {
        let traces = parse_traces(&ab_grammar(), &char_tokens("abab"), 64).unwrap();
        assert_eq!(labels(&traces), [["p1", "p2", "p1", "p2", "p3"]]);
    }

    #[test]
    fn ab_grammar_empty_input() {
        // Derivations of length ≤ 1 from S: only p3 reaches a terminal string.
        let traces = parse_traces(&ab_grammar(), &[], 64).unwrap();
        assert_eq!(labels(&traces), [["p3"]]);
    }

    #[test]
    fn non_member_is_empty_and_positioned() {
        let g = ab_grammar();
        assert!(parse_traces(&g, &char_tokens("abc"), 64)
            .unwrap()
            .is_empty());
        match ChartParser::new(&g).parse(&char_tokens("abc")) {
            Err(ParseError::NoParse { position, span, .. }) => {
                assert_eq!(position, 2);
                assert_eq!(span, Some(Span::new(2, 3)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ambiguous_grammar_enumerates_all_traces_in_order() {
        // E → E + E | x: "x+x+x" has two leftmost derivations.
        let g = compile_grammar("add: E → E \"+\" E\nx: E → x\n").unwrap();
        let traces = parse_traces(&g, &char_tokens("x+x+x"), 64).unwrap();
        assert_eq!(
            labels(&traces),
            [["add", "add", "x", "x", "x"], ["add", "x", "add", "x", "x"],]
        );
        for t in &traces {
            let form = t.replay(&g).unwrap();
            assert_eq!(form.iter().map(|s| s.name()).collect::<String>(), "x+x+x");
        }
    }

    #[test]
    fn budget_overflow_is_distinct_from_non_membership() {
        let g = compile_grammar("add: E → E \"+\" E\nx: E → x\n").unwrap();
        // Catalan(4) = 14 derivations.
        let err = parse_traces(&g, &char_tokens("x+x+x+x+x"), 10).unwrap_err();
        assert_eq!(err, ParseError::TraceBudgetExceeded { limit: 10 });
        assert_eq!(
            parse_traces(&g, &char_tokens("x+x+x+x+x"), 14)
                .unwrap()
                .len(),
            14
        );
    }

    #[test]
    fn cyclic_grammar_reports_unbounded_ambiguity() {
        let g = compile_grammar("loop: S → S\nx: S → x\n").unwrap();
        assert_eq!(
            parse_traces(&g, &char_tokens("x"), 64).unwrap_err(),
            ParseError::UnboundedAmbiguity
        );
    }

    #[test]
    fn nullable_middle_symbols() {
        let g =
            compile_grammar("s: S → A x B\na1: A → ε\na2: A → y\nb1: B → ε\nb2: B → C\nc: C → ε\n")
                .unwrap();
        let traces = parse_traces(&g, &char_tokens("x"), 64).unwrap();
        assert_eq!(
            labels(&traces),
            vec![vec!["s", "a1", "b1"], vec!["s", "a1", "b2", "c"]]
        );
    }

    #[test]
    fn parameter_and_span_on_events() {
        let g = compile_grammar("e: E → \"<\" Q \">\"\n2k: Q → qname(xmiName)\n").unwrap();
        let traces = parse_traces(&g, &word_tokens("< qname(Class) >"), 64).unwrap();
        assert_eq!(traces.len(), 1);
        let ev = &traces[0].events;
        assert_eq!(ev[1].to_string(), "2k(Class)");
        assert_eq!(ev[0].span, Some(Span::new(0, 16)));
        assert_eq!(ev[1].span, Some(Span::new(2, 14)));
    }

    #[test]
    fn alternate_start() {
        let g = compile_grammar("s: S → A A\na: A → x\n").unwrap();
        let p = ChartParser::new(&g).with_start("A").unwrap();
        assert_eq!(p.parse(&char_tokens("x")).unwrap()[0].labels(), ["a"]);
        assert!(matches!(
            ChartParser::new(&g).with_start("Z"),
            Err(ParseError::UnknownStart(_))
        ));
    }
}
