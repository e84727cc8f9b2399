use std::fmt;

use crate::grammar::ProductionEvent;

/// A basic matcher over production events.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pattern {
    Any,
    Label(String),
    LabelParam { label: String, parameter: String },
}

impl Pattern {
    pub fn matches(&self, e: &ProductionEvent) -> bool {
        match self {
            Pattern::Any => true,
            Pattern::Label(l) => e.label == *l,
            Pattern::LabelParam { label, parameter } => {
                e.label == *label && e.parameter.as_deref() == Some(parameter.as_str())
            }
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Pattern::Any => None,
            Pattern::Label(l) | Pattern::LabelParam { label: l, .. } => Some(l),
        }
    }

    /// Events matched by both patterns, if any.
    pub fn meet(&self, other: &Pattern) -> Option<Pattern> {
        if self.subsumed_by(other) {
            Some(self.clone())
        } else if other.subsumed_by(self) {
            Some(other.clone())
        } else {
            None
        }
    }

    /// Every event matched by `self` is matched by `other`.
    pub fn subsumed_by(&self, other: &Pattern) -> bool {
        match (self, other) {
            (_, Pattern::Any) => true,
            (Pattern::Any, _) => false,
            (Pattern::Label(a), Pattern::Label(b)) => a == b,
            (Pattern::LabelParam { label: a, .. }, Pattern::Label(b)) => a == b,
            (Pattern::Label(_), Pattern::LabelParam { .. }) => false,
            (
                Pattern::LabelParam {
                    label: a,
                    parameter: p,
                },
                Pattern::LabelParam {
                    label: b,
                    parameter: q,
                },
            ) => a == b && p == q,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Any => f.write_str("any"),
            Pattern::Label(l) => f.write_str(l),
            Pattern::LabelParam { label, parameter } => write!(f, "{label}(\"{parameter}\")"),
        }
    }
}

/// A named set of events: those matched by `include` and by none of
/// `exclude`.
///
/// Declared classes are an exact label (`x = 2e`), a label with a parameter
/// value (`c = 2k("Class")`), or the complement of everything else declared
/// (`D = other`). Intersecting alphabets produces classes with both an
/// include and an exclude part.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventClass {
    pub name: String,
    pub include: Pattern,
    pub exclude: Vec<Pattern>,
}

impl EventClass {
    pub fn exact(name: impl Into<String>, label: impl Into<String>) -> Self {
        EventClass {
            name: name.into(),
            include: Pattern::Label(label.into()),
            exclude: Vec::new(),
        }
    }

    pub fn with_parameter(
        name: impl Into<String>,
        label: impl Into<String>,
        parameter: impl Into<String>,
    ) -> Self {
        EventClass {
            name: name.into(),
            include: Pattern::LabelParam {
                label: label.into(),
                parameter: parameter.into(),
            },
            exclude: Vec::new(),
        }
    }

    /// The complement of the given declared classes.
    pub fn other<'a>(
        name: impl Into<String>,
        declared: impl IntoIterator<Item = &'a EventClass>,
    ) -> Self {
        EventClass {
            name: name.into(),
            include: Pattern::Any,
            exclude: declared.into_iter().map(|c| c.include.clone()).collect(),
        }
    }

    pub fn is_wildcard(&self) -> bool {
        self.include == Pattern::Any
    }

    pub fn matches(&self, e: &ProductionEvent) -> bool {
        self.include.matches(e) && !self.exclude.iter().any(|x| x.matches(e))
    }

    /// The class of events in both `self` and `other`, or `None` when the
    /// two are disjoint.
    pub fn meet(&self, other: &EventClass) -> Option<EventClass> {
        let include = self.include.meet(&other.include)?;
        let mut exclude: Vec<Pattern> =
            self.exclude.iter().chain(&other.exclude).cloned().collect();
        if exclude.iter().any(|x| include.subsumed_by(x)) {
            return None;
        }
        // Exclusions disjoint from the include part are dead weight.
        exclude.retain(|x| x.meet(&include).is_some());
        exclude.sort();
        exclude.dedup();
        Some(EventClass {
            name: format!("{}&{}", self.name, other.name),
            include,
            exclude,
        })
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_wildcard() && !self.exclude.is_empty() {
            return write!(f, "{} = other", self.name);
        }
        write!(f, "{} = {}", self.name, self.include)?;
        for x in &self.exclude {
            write!(f, " \\ {x}")?;
        }
        Ok(())
    }
}

/// Index of the class in `alphabet` that matches `e`. Classes in one
/// alphabet are disjoint, so at most one matches; `None` means the event lies
/// outside the rule's alphabet.
pub fn classify_event(alphabet: &[EventClass], e: &ProductionEvent) -> Option<usize> {
    alphabet.iter().position(|c| c.matches(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule1_alphabet() -> Vec<EventClass> {
        let c = EventClass::with_parameter("c", "2k", "Class");
        let g = EventClass::with_parameter("g", "2k", "Generalization");
        let d = EventClass::other("D", [&c, &g]);
        vec![c, g, d]
    }

    #[test]
    fn rule1_letters() {
        let a = rule1_alphabet();
        let name = |e: ProductionEvent| &a[classify_event(&a, &e).unwrap()].name;
        assert_eq!(name(ProductionEvent::with_parameter("2k", "Class")), "c");
        assert_eq!(
            name(ProductionEvent::with_parameter("2k", "Generalization")),
            "g"
        );
        assert_eq!(name(ProductionEvent::new("2e")), "D");
        // Parameter values are case-sensitive.
        assert_eq!(
            name(ProductionEvent::with_parameter("2k", "generalization")),
            "D"
        );
    }

    #[test]
    fn no_wildcard_leaves_events_unclassified() {
        let a = vec![EventClass::exact("p1", "p1")];
        assert_eq!(classify_event(&a, &ProductionEvent::new("p2")), None);
    }

    #[test]
    fn meet_of_wildcards_refines() {
        let a = rule1_alphabet();
        let pr = EventClass::with_parameter("pr", "2k", "Property");
        let c = EventClass::with_parameter("c", "2k", "Class");
        let d2 = EventClass::other("D", [&c, &pr]);
        // D ∩ pr = pr; c ∩ pr = ∅; g ∩ D' = g.
        assert_eq!(a[2].meet(&pr).unwrap().include, pr.include);
        assert!(a[0].meet(&pr).is_none());
        let g_d = a[1].meet(&d2).unwrap();
        assert!(g_d.matches(&ProductionEvent::with_parameter("2k", "Generalization")));
        assert!(g_d.exclude.is_empty());
        let dd = a[2].meet(&d2).unwrap();
        assert!(dd.matches(&ProductionEvent::new("2e")));
        assert!(!dd.matches(&ProductionEvent::with_parameter("2k", "Property")));
        assert!(!dd.matches(&ProductionEvent::with_parameter("2k", "Generalization")));
        // Excluding the whole label empties the class.
        let all_2k = EventClass::exact("k", "2k");
        let not_2k = EventClass::other("D", [&all_2k]);
        assert!(not_2k.meet(&c).is_none());
    }

    #[test]
    fn subsumption() {
        let any = Pattern::Any;
        let l = Pattern::Label("2k".into());
        let lp = Pattern::LabelParam {
            label: "2k".into(),
            parameter: "Class".into(),
        };
        assert!(lp.subsumed_by(&l) && l.subsumed_by(&any) && lp.subsumed_by(&any));
        assert!(!l.subsumed_by(&lp));
        assert_eq!(l.meet(&lp), Some(lp.clone()));
        assert_eq!(Pattern::Label("2e".into()).meet(&lp), None);
    }
}
