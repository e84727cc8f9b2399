use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::{classify_event, ControlError, EventClass, RuleError, Verdict};
use crate::grammar::{Grammar, ProductionEvent, Symbol};

/// A trimmed, minimal DFA over an alphabet of event classes.
///
/// Missing transitions (`None`) lead to an implicit rejecting sink. Every
/// explicit state can still reach acceptance, except the start state of an
/// automaton with an empty language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteControl {
    alphabet: Vec<EventClass>,
    state_names: Vec<String>,
    delta: Vec<Vec<Option<usize>>>,
    start: usize,
    accepting: Vec<bool>,
}

impl FiniteControl {
    /// Assembles an automaton from its parts.
    ///
    /// # Panics
    ///
    /// If the tables disagree in size or a transition points out of range.
    pub fn new(
        alphabet: Vec<EventClass>,
        state_names: Vec<String>,
        delta: Vec<Vec<Option<usize>>>,
        start: usize,
        accepting: Vec<bool>,
    ) -> Self {
        let n = state_names.len();
        assert!(start < n, "start state out of range");
        assert_eq!(delta.len(), n, "one transition row per state");
        assert_eq!(accepting.len(), n, "one acceptance flag per state");
        for row in &delta {
            assert_eq!(row.len(), alphabet.len(), "one transition per class");
            assert!(
                row.iter().flatten().all(|&t| t < n),
                "transition out of range"
            );
        }
        FiniteControl {
            alphabet,
            state_names,
            delta,
            start,
            accepting,
        }
    }

    /// Accepts every sequence over `alphabet`.
    pub fn universal(alphabet: Vec<EventClass>) -> Self {
        let row = vec![Some(0); alphabet.len()];
        FiniteControl::new(alphabet, vec!["q0".into()], vec![row], 0, vec![true])
    }

    /// Compiles a right-linear grammar whose terminals are class names of
    /// `alphabet`.
    pub fn from_right_linear(g: &Grammar, alphabet: Vec<EventClass>) -> Result<Self, RuleError> {
        let class_of: HashMap<&str, usize> = alphabet
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.as_str(), i))
            .collect();
        let nfa = Nfa::build(g, &class_of)?;
        let dfa = nfa.determinize(alphabet.len());
        Ok(dfa.trim().minimize(alphabet))
    }

    pub fn alphabet(&self) -> &[EventClass] {
        &self.alphabet
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.state_names[s]
    }

    /// States from which an accepting state is reachable.
    pub fn live_state_count(&self) -> usize {
        self.co_reachable().iter().filter(|&&b| b).count()
    }

    pub fn is_accepting(&self, s: usize) -> bool {
        self.accepting[s]
    }

    pub fn next(&self, s: usize, class: usize) -> Option<usize> {
        self.delta[s][class]
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|c| c.name == name)
    }

    /// Runs the automaton over a sequence of class names.
    pub fn accepts_classes<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let mut s = self.start;
        for a in word {
            let Some(c) = self.class_index(a.as_ref()) else {
                return false;
            };
            match self.delta[s][c] {
                Some(t) => s = t,
                None => return false,
            }
        }
        self.accepting[s]
    }

    pub fn start_run(&self) -> FiniteRun<'_> {
        self.run_from(self.start)
    }

    /// A run that begins in state `s` rather than the start state.
    pub fn run_from(&self, s: usize) -> FiniteRun<'_> {
        self.resume(s, 0)
    }

    /// A run in state `s` that has already consumed `consumed` events.
    pub fn resume(&self, s: usize, consumed: usize) -> FiniteRun<'_> {
        FiniteRun {
            control: self,
            state: s,
            consumed,
            dead_at: None,
        }
    }

    fn co_reachable(&self) -> Vec<bool> {
        let mut live = self.accepting.clone();
        loop {
            let mut changed = false;
            for s in 0..self.delta.len() {
                if !live[s] && self.delta[s].iter().flatten().any(|&t| live[t]) {
                    live[s] = true;
                    changed = true;
                }
            }
            if !changed {
                return live;
            }
        }
    }

    /// Redirects transitions into states that cannot reach acceptance to the
    /// sink and drops those states.
    fn trim(self) -> Self {
        let live = self.co_reachable();
        if !live[self.start] {
            let row = vec![None; self.alphabet.len()];
            return FiniteControl::new(self.alphabet, vec!["q0".into()], vec![row], 0, vec![false]);
        }
        let mut delta = self.delta;
        for row in &mut delta {
            for t in row.iter_mut() {
                if t.is_some_and(|t| !live[t]) {
                    *t = None;
                }
            }
        }
        FiniteControl { delta, ..self }.renumber_from_start()
    }

    /// Keeps only states reachable from the start, numbered in BFS order.
    fn renumber_from_start(self) -> Self {
        let mut order = vec![self.start];
        let mut index: HashMap<usize, usize> = HashMap::from([(self.start, 0)]);
        let mut i = 0;
        while i < order.len() {
            for t in self.delta[order[i]].iter().flatten() {
                if !index.contains_key(t) {
                    index.insert(*t, order.len());
                    order.push(*t);
                }
            }
            i += 1;
        }
        let delta = order
            .iter()
            .map(|&s| self.delta[s].iter().map(|t| t.map(|t| index[&t])).collect())
            .collect();
        FiniteControl {
            state_names: order.iter().map(|&s| self.state_names[s].clone()).collect(),
            accepting: order.iter().map(|&s| self.accepting[s]).collect(),
            delta,
            start: 0,
            alphabet: self.alphabet,
        }
    }

    /// Moore partition refinement; the sink is kept implicit.
    fn minimize(self, alphabet: Vec<EventClass>) -> Self {
        let n = self.delta.len();
        let mut block: Vec<usize> = self.accepting.iter().map(|&a| usize::from(a)).collect();
        loop {
            let mut ids: BTreeMap<(usize, Vec<Option<usize>>), usize> = BTreeMap::new();
            let mut next = vec![0; n];
            for s in 0..n {
                let sig = (
                    block[s],
                    self.delta[s].iter().map(|t| t.map(|t| block[t])).collect(),
                );
                let fresh = ids.len();
                next[s] = *ids.entry(sig).or_insert(fresh);
            }
            let stable = ids.len() == block.iter().collect::<BTreeSet<_>>().len();
            block = next;
            if stable {
                break;
            }
        }
        let blocks = block.iter().max().map_or(0, |m| m + 1);
        let mut rep = vec![usize::MAX; blocks];
        for s in (0..n).rev() {
            rep[block[s]] = s;
        }
        let mut names: Vec<Vec<&str>> = vec![Vec::new(); blocks];
        for s in 0..n {
            names[block[s]].push(&self.state_names[s]);
        }
        let merged = FiniteControl {
            state_names: names.iter().map(|ns| ns.join("|")).collect(),
            delta: rep
                .iter()
                .map(|&s| self.delta[s].iter().map(|t| t.map(|t| block[t])).collect())
                .collect(),
            accepting: rep.iter().map(|&s| self.accepting[s]).collect(),
            start: block[self.start],
            alphabet,
        };
        merged.renumber_from_start()
    }
}

/// Intersection of two finite controls over the refinement of their
/// alphabets.
pub fn intersect(a: &FiniteControl, b: &FiniteControl) -> FiniteControl {
    Product::new(&[a, b]).control
}

/// The synchronous product of several finite controls, remembering which
/// component states and classes each product state and class stands for.
#[derive(Debug, Clone)]
pub struct Product {
    pub control: FiniteControl,
    /// `components[s][i]`: state of control `i` in product state `s`.
    pub components: Vec<Vec<usize>>,
    /// `classes[c][i]`: class of control `i` refined by product class `c`.
    pub classes: Vec<Vec<usize>>,
}

impl Product {
    /// Builds the product of `controls`; only reachable states are kept.
    pub fn new(controls: &[&FiniteControl]) -> Self {
        // Refine alphabets: every non-empty meet of one class per control.
        let mut refined: Vec<(EventClass, Vec<usize>)> = vec![(
            EventClass {
                name: String::new(),
                include: super::Pattern::Any,
                exclude: Vec::new(),
            },
            Vec::new(),
        )];
        for c in controls {
            let mut next = Vec::new();
            for (class, idx) in &refined {
                for (j, other) in c.alphabet().iter().enumerate() {
                    if let Some(mut m) = class.meet(other) {
                        m.name = if idx.is_empty() {
                            other.name.clone()
                        } else {
                            format!("{}&{}", class.name, other.name)
                        };
                        let mut idx = idx.clone();
                        idx.push(j);
                        next.push((m, idx));
                    }
                }
            }
            refined = next;
        }
        let (alphabet, classes): (Vec<EventClass>, Vec<Vec<usize>>) = refined.into_iter().unzip();

        let start: Vec<usize> = controls.iter().map(|c| c.start()).collect();
        let mut components = vec![start.clone()];
        let mut index: HashMap<Vec<usize>, usize> = HashMap::from([(start, 0)]);
        let mut delta = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            let mut row = Vec::with_capacity(classes.len());
            for cls in &classes {
                let target: Option<Vec<usize>> = controls
                    .iter()
                    .zip(&components[s])
                    .zip(cls)
                    .map(|((c, &q), &a)| c.next(q, a))
                    .collect();
                row.push(target.map(|t| {
                    *index.entry(t.clone()).or_insert_with(|| {
                        components.push(t);
                        queue.push_back(components.len() - 1);
                        components.len() - 1
                    })
                }));
            }
            if delta.len() <= s {
                delta.resize(s + 1, Vec::new());
            }
            delta[s] = row;
        }
        let accepting = components
            .iter()
            .map(|qs| controls.iter().zip(qs).all(|(c, &q)| c.is_accepting(q)))
            .collect();
        let state_names = components
            .iter()
            .map(|qs| {
                let parts: Vec<&str> = controls
                    .iter()
                    .zip(qs)
                    .map(|(c, &q)| c.state_name(q))
                    .collect();
                format!("({})", parts.join(","))
            })
            .collect();
        Product {
            control: FiniteControl::new(alphabet, state_names, delta, 0, accepting),
            components,
            classes,
        }
    }
}

/// An in-progress run of a [`FiniteControl`].
#[derive(Debug, Clone)]
pub struct FiniteRun<'a> {
    control: &'a FiniteControl,
    state: usize,
    consumed: usize,
    dead_at: Option<usize>,
}

impl<'a> FiniteRun<'a> {
    pub fn step(&mut self, e: &ProductionEvent) -> Result<(), ControlError> {
        if self.dead_at.is_none() {
            let c = classify_event(self.control.alphabet(), e).ok_or_else(|| {
                ControlError::Unclassifiable {
                    index: self.consumed,
                    event: e.to_string(),
                }
            })?;
            self.step_class(c);
        } else {
            self.consumed += 1;
        }
        Ok(())
    }

    /// Consumes one already-classified event.
    pub fn step_class(&mut self, c: usize) {
        if self.dead_at.is_none() {
            match self.control.next(self.state, c) {
                Some(t) => self.state = t,
                None => self.dead_at = Some(self.consumed),
            }
        }
        self.consumed += 1;
    }

    pub fn state(&self) -> Option<usize> {
        self.dead_at.is_none().then_some(self.state)
    }

    pub fn is_dead(&self) -> bool {
        self.dead_at.is_some()
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn finish(&self) -> Verdict {
        match self.dead_at {
            Some(i) => Verdict::Rejected {
                first_dead_index: i,
            },
            None if self.control.is_accepting(self.state) => Verdict::Accepted,
            None => Verdict::Rejected {
                first_dead_index: self.consumed,
            },
        }
    }
}

/// NFA from a right-linear grammar: one state per nonterminal, chain states
/// for multi-terminal bodies and a single final state.
struct Nfa {
    names: Vec<String>,
    eps: Vec<Vec<usize>>,
    edges: Vec<Vec<(usize, usize)>>,
    start: usize,
    accepting: usize,
}

impl Nfa {
    fn build(g: &Grammar, class_of: &HashMap<&str, usize>) -> Result<Self, RuleError> {
        let mut names: Vec<String> = g.nonterminals().iter().cloned().collect();
        let state_of: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let accepting = names.len();
        names.push("F".into());
        let mut nfa = Nfa {
            eps: vec![Vec::new(); names.len()],
            edges: vec![Vec::new(); names.len()],
            start: state_of[g.start()],
            names,
            accepting,
        };
        for p in g.productions() {
            let (terms, tail) = match p.rhs.last() {
                Some(Symbol::Nonterminal(n)) => (&p.rhs[..p.rhs.len() - 1], state_of[n]),
                _ => (&p.rhs[..], accepting),
            };
            let mut at = state_of[&p.lhs];
            for (i, t) in terms.iter().enumerate() {
                if t.is_nonterminal() {
                    return Err(RuleError::Syntax {
                        line: 0,
                        message: format!("production `{}` is not right-linear", p.label),
                    });
                }
                let c = *class_of
                    .get(t.name())
                    .ok_or_else(|| RuleError::UndeclaredClass(t.name().to_string()))?;
                let to = if i + 1 == terms.len() {
                    tail
                } else {
                    nfa.add_state(format!("{}.{}", p.label, i + 1))
                };
                nfa.edges[at].push((c, to));
                at = to;
            }
            if terms.is_empty() {
                nfa.eps[at].push(tail);
            }
        }
        Ok(nfa)
    }

    fn add_state(&mut self, name: String) -> usize {
        self.names.push(name);
        self.eps.push(Vec::new());
        self.edges.push(Vec::new());
        self.names.len() - 1
    }

    fn closure(&self, set: &mut BTreeSet<usize>) {
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(s) = stack.pop() {
            for &t in &self.eps[s] {
                if set.insert(t) {
                    stack.push(t);
                }
            }
        }
    }

    fn determinize(&self, classes: usize) -> FiniteControl {
        let mut first = BTreeSet::from([self.start]);
        self.closure(&mut first);
        let mut sets = vec![first.clone()];
        let mut index: HashMap<BTreeSet<usize>, usize> = HashMap::from([(first, 0)]);
        let mut delta: Vec<Vec<Option<usize>>> = Vec::new();
        let mut i = 0;
        while i < sets.len() {
            let mut row = vec![None; classes];
            for (c, slot) in row.iter_mut().enumerate() {
                let mut next: BTreeSet<usize> = sets[i]
                    .iter()
                    .flat_map(|&s| self.edges[s].iter().filter(|e| e.0 == c).map(|e| e.1))
                    .collect();
                if next.is_empty() {
                    continue;
                }
                self.closure(&mut next);
                let fresh = sets.len();
                let id = *index.entry(next.clone()).or_insert(fresh);
                if id == fresh {
                    sets.push(next);
                }
                *slot = Some(id);
            }
            delta.push(row);
            i += 1;
        }
        let state_names = sets
            .iter()
            .map(|set| {
                let ns: Vec<&str> = set
                    .iter()
                    .filter(|&&s| s < self.accepting)
                    .map(|&s| self.names[s].as_str())
                    .collect();
                if ns.is_empty() {
                    "F".to_string()
                } else {
                    ns.join(",")
                }
            })
            .collect();
        FiniteControl {
            alphabet: Vec::new(),
            state_names,
            accepting: sets.iter().map(|s| s.contains(&self.accepting)).collect(),
            delta,
            start: 0,
        }
    }
}
