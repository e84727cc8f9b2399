use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use super::{classify_event, ControlError, EventClass, RuleError, Verdict};
use crate::grammar::{Grammar, ProductionEvent, Symbol};

/// Live configurations a run may hold before giving up.
pub const DEFAULT_CONFIG_BUDGET: usize = 100_000;

const Q0: usize = 0;
const Q: usize = 1;
const QF: usize = 2;
const BOTTOM: u32 = 0;

/// How a pushdown control accepts. For automata built by
/// [`PushdownControl::from_grammar`] the two modes accept the same language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Acceptance {
    #[default]
    FinalState,
    EmptyStack,
}

/// `from --input, pop / push--> to`. `push` lists the new stack top first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PdaTransition {
    pub from: usize,
    /// Class index consumed, or `None` for an ε-move.
    pub input: Option<usize>,
    pub pop: u32,
    pub to: usize,
    pub push: Vec<u32>,
}

/// A nondeterministic pushdown automaton over event classes.
///
/// States are `q0` (initial), `q` (working) and `qf` (final). Stack symbols
/// are the controlling grammar's symbols plus the bottom marker `Z0`.
#[derive(Debug, Clone)]
pub struct PushdownControl {
    alphabet: Vec<EventClass>,
    stack_names: Vec<String>,
    transitions: Vec<PdaTransition>,
    by_top: HashMap<(usize, u32), Vec<usize>>,
    acceptance: Acceptance,
    budget: usize,
}

impl PushdownControl {
    /// Builds the expand/match automaton of a context-free grammar whose
    /// terminals are class names of `alphabet`.
    ///
    /// Unproductive productions are dropped. Left-recursive grammars are
    /// refused, since expanding them never reaches an input symbol.
    pub fn from_grammar(
        g: &Grammar,
        alphabet: Vec<EventClass>,
        acceptance: Acceptance,
    ) -> Result<Self, RuleError> {
        if let Some(nt) = left_recursive(g) {
            return Err(RuleError::LeftRecursive(nt));
        }
        let mut stack_names = vec!["Z0".to_string()];
        let mut ids: HashMap<&str, u32> = HashMap::new();
        for c in &alphabet {
            ids.insert(c.name.as_str(), stack_names.len() as u32);
            stack_names.push(c.name.clone());
        }
        for nt in g.nonterminals() {
            if ids.contains_key(nt.as_str()) {
                return Err(RuleError::Grammar(
                    crate::grammar::GrammarError::SymbolClash(nt.clone()),
                ));
            }
            ids.insert(nt.as_str(), stack_names.len() as u32);
            stack_names.push(nt.clone());
        }

        let productive = g.productive();
        let mut transitions = vec![PdaTransition {
            from: Q0,
            input: None,
            pop: BOTTOM,
            to: Q,
            push: vec![ids[g.start()], BOTTOM],
        }];
        for p in g.productions() {
            let usable = p.rhs.iter().all(|s| match s {
                Symbol::Nonterminal(n) => productive.contains(n.as_str()),
                _ => true,
            });
            if !usable {
                continue;
            }
            let push = p
                .rhs
                .iter()
                .map(|s| {
                    if !s.is_nonterminal() && !alphabet.iter().any(|c| c.name == s.name()) {
                        return Err(RuleError::UndeclaredClass(s.name().to_string()));
                    }
                    Ok(ids[s.name()])
                })
                .collect::<Result<Vec<_>, _>>()?;
            transitions.push(PdaTransition {
                from: Q,
                input: None,
                pop: ids[p.lhs.as_str()],
                to: Q,
                push,
            });
        }
        for (i, c) in alphabet.iter().enumerate() {
            transitions.push(PdaTransition {
                from: Q,
                input: Some(i),
                pop: ids[c.name.as_str()],
                to: Q,
                push: Vec::new(),
            });
        }
        transitions.push(PdaTransition {
            from: Q,
            input: None,
            pop: BOTTOM,
            to: QF,
            push: Vec::new(),
        });

        let mut by_top: HashMap<(usize, u32), Vec<usize>> = HashMap::new();
        for (i, t) in transitions.iter().enumerate() {
            by_top.entry((t.from, t.pop)).or_default().push(i);
        }
        Ok(PushdownControl {
            alphabet,
            stack_names,
            transitions,
            by_top,
            acceptance,
            budget: DEFAULT_CONFIG_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn alphabet(&self) -> &[EventClass] {
        &self.alphabet
    }

    pub fn transitions(&self) -> &[PdaTransition] {
        &self.transitions
    }

    pub fn acceptance(&self) -> Acceptance {
        self.acceptance
    }

    pub fn stack_symbol(&self, id: u32) -> &str {
        &self.stack_names[id as usize]
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|c| c.name == name)
    }

    pub fn start_run(&self) -> PushdownRun<'_> {
        let mut run = PushdownRun {
            control: self,
            configs: BTreeSet::from([(Q0, vec![BOTTOM])]),
            consumed: 0,
            dead_at: None,
            error: None,
        };
        if let Err(e) = run.close() {
            run.error = Some(e);
        }
        run
    }

    /// Runs the automaton over a sequence of class names.
    pub fn accepts_classes<S: AsRef<str>>(&self, word: &[S]) -> Result<bool, ControlError> {
        let mut run = self.start_run();
        for a in word {
            match self.class_index(a.as_ref()) {
                Some(c) => run.step_class(c)?,
                None => return Ok(false),
            }
        }
        Ok(run.finish().is_accepted())
    }

    fn is_accepting(&self, state: usize, stack: &[u32]) -> bool {
        match self.acceptance {
            Acceptance::FinalState => state == QF,
            Acceptance::EmptyStack => stack.is_empty(),
        }
    }
}

impl fmt::Display for PdaTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let input = self.input.map_or("ε".to_string(), |c| c.to_string());
        write!(
            f,
            "{} -{}, {}/{:?}-> {}",
            self.from, input, self.pop, self.push, self.to
        )
    }
}

/// `(state, stack)` with the stack top at the end of the vector.
type Config = (usize, Vec<u32>);

/// An in-progress run of a [`PushdownControl`] over all nondeterministic
/// branches at once.
#[derive(Debug, Clone)]
pub struct PushdownRun<'a> {
    control: &'a PushdownControl,
    configs: BTreeSet<Config>,
    consumed: usize,
    dead_at: Option<usize>,
    error: Option<ControlError>,
}

impl<'a> PushdownRun<'a> {
    pub fn step(&mut self, e: &ProductionEvent) -> Result<(), ControlError> {
        if self.dead_at.is_some() {
            self.consumed += 1;
            return Ok(());
        }
        let c = classify_event(self.control.alphabet(), e).ok_or_else(|| {
            ControlError::Unclassifiable {
                index: self.consumed,
                event: e.to_string(),
            }
        })?;
        self.step_class(c)
    }

    /// Consumes one already-classified event.
    pub fn step_class(&mut self, c: usize) -> Result<(), ControlError> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        if self.dead_at.is_some() {
            self.consumed += 1;
            return Ok(());
        }
        let mut next = BTreeSet::new();
        for (state, stack) in &self.configs {
            let Some(&top) = stack.last() else { continue };
            for &t in self
                .control
                .by_top
                .get(&(*state, top))
                .into_iter()
                .flatten()
            {
                let t = &self.control.transitions[t];
                if t.input == Some(c) {
                    next.insert(apply(t, stack));
                }
            }
        }
        self.configs = next;
        self.close()?;
        if self.configs.is_empty() {
            self.dead_at = Some(self.consumed);
        }
        self.consumed += 1;
        Ok(())
    }

    /// ε-closure, keeping only configurations that can read input or accept.
    fn close(&mut self) -> Result<(), ControlError> {
        let budget = self.control.budget;
        let mut seen: HashSet<Config> = HashSet::new();
        let mut todo: Vec<Config> = std::mem::take(&mut self.configs).into_iter().collect();
        let mut kept = BTreeSet::new();
        while let Some(cfg) = todo.pop() {
            if !seen.insert(cfg.clone()) {
                continue;
            }
            if seen.len() > budget {
                return Err(ControlError::ConfigurationBudget {
                    index: self.consumed,
                    limit: budget,
                });
            }
            let (state, stack) = &cfg;
            let mut reads = false;
            if let Some(&top) = stack.last() {
                for &t in self
                    .control
                    .by_top
                    .get(&(*state, top))
                    .into_iter()
                    .flatten()
                {
                    let t = &self.control.transitions[t];
                    match t.input {
                        None => todo.push(apply(t, stack)),
                        Some(_) => reads = true,
                    }
                }
            }
            if reads || self.control.is_accepting(*state, stack) {
                kept.insert(cfg);
            }
        }
        self.configs = kept;
        Ok(())
    }

    pub fn is_dead(&self) -> bool {
        self.dead_at.is_some()
    }

    /// Number of live configurations.
    pub fn width(&self) -> usize {
        self.configs.len()
    }

    pub fn finish(&self) -> Verdict {
        match self.dead_at {
            Some(i) => Verdict::Rejected {
                first_dead_index: i,
            },
            None if self
                .configs
                .iter()
                .any(|(s, st)| self.control.is_accepting(*s, st)) =>
            {
                Verdict::Accepted
            }
            None => Verdict::Rejected {
                first_dead_index: self.consumed,
            },
        }
    }
}

fn apply(t: &PdaTransition, stack: &[u32]) -> Config {
    let mut s = stack[..stack.len() - 1].to_vec();
    s.extend(t.push.iter().rev());
    (t.to, s)
}

/// A nonterminal `A` with `A ⇒+ A β`, if any.
fn left_recursive(g: &Grammar) -> Option<String> {
    let nullable = g.nullable();
    // A → B when B can be the leftmost symbol of some sentential form of A
    // after erasing a nullable prefix.
    let mut first: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in g.productions() {
        for s in &p.rhs {
            match s {
                Symbol::Nonterminal(n) => {
                    first.entry(p.lhs.as_str()).or_default().insert(n.as_str());
                    if !nullable.contains(n.as_str()) {
                        break;
                    }
                }
                _ => break,
            }
        }
    }
    for a in g.nonterminals() {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack: Vec<&str> = first
            .get(a.as_str())
            .into_iter()
            .flatten()
            .copied()
            .collect();
        while let Some(b) = stack.pop() {
            if b == a {
                return Some(a.clone());
            }
            if seen.insert(b) {
                stack.extend(first.get(b).into_iter().flatten().copied());
            }
        }
    }
    None
}
