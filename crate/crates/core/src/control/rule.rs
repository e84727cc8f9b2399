//! Rule files.
//!
//! ```text
//! rule "R1-single-generalization"
//! description "a class has at most one generalization"
//! events
//!   c = 2k("Class")
//!   g = 2k("Generalization")
//!   D = other
//! accept = state            # or empty-stack; pushdown rules only
//! grammar
//!   S → c Qc | g S | D S | ε
//!   ...
//! ```
//!
//! Everything after `grammar` is grammar text whose terminals are the
//! declared class names.

use std::collections::BTreeSet;

use super::{
    Acceptance, Control, ControllingAutomaton, EventClass, FiniteControl, Pattern, PushdownControl,
    RuleError,
};
use crate::grammar::compile_grammar_with_terminals;

#[derive(PartialEq)]
enum Section {
    Header,
    Events,
}

/// Compiles rule source into a controlling automaton.
pub fn compile_rule(src: &str) -> Result<ControllingAutomaton, RuleError> {
    let mut rule_id = None;
    let mut description = String::new();
    let mut acceptance = Acceptance::FinalState;
    let mut declared: Vec<(usize, String, Option<Pattern>)> = Vec::new();
    let mut section = Section::Header;
    let mut grammar_from = None;

    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| RuleError::Syntax {
            line: line_no,
            message,
        };
        let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match word {
            "grammar" if rest.is_empty() => {
                grammar_from = Some(i + 1);
                break;
            }
            "events" if rest.is_empty() => section = Section::Events,
            "rule" => {
                rule_id = Some(quoted(rest).ok_or_else(|| err("expected `rule \"<id>\"`".into()))?)
            }
            "description" => {
                description =
                    quoted(rest).ok_or_else(|| err("expected `description \"...\"`".into()))?
            }
            _ if line.starts_with("accept") && line.contains('=') => {
                let value = line
                    .split_once('=')
                    .map(|(_, v)| v.trim())
                    .unwrap_or_default();
                acceptance = match value {
                    "state" => Acceptance::FinalState,
                    "empty-stack" => Acceptance::EmptyStack,
                    other => return Err(err(format!("unknown acceptance mode `{other}`"))),
                };
            }
            _ if section == Section::Events => {
                let (name, spec) = line
                    .split_once('=')
                    .ok_or_else(|| err("expected `<class> = <label>`".into()))?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                    return Err(err(format!("bad class name `{name}`")));
                }
                declared.push((
                    line_no,
                    name.to_string(),
                    parse_pattern(spec.trim()).map_err(err)?,
                ));
            }
            _ => return Err(err(format!("unexpected `{word}`"))),
        }
    }

    let rule_id = rule_id.ok_or(RuleError::Syntax {
        line: 1,
        message: "missing `rule \"<id>\"` header".into(),
    })?;
    let grammar_from = grammar_from.ok_or(RuleError::Syntax {
        line: src.lines().count().max(1),
        message: "missing `grammar` section".into(),
    })?;
    let alphabet = build_alphabet(declared)?;

    let names: BTreeSet<String> = alphabet.iter().map(|c| c.name.clone()).collect();
    let body: String = src
        .lines()
        .skip(grammar_from)
        .collect::<Vec<_>>()
        .join("\n");
    let grammar = compile_grammar_with_terminals(&body, &names, grammar_from)?;
    if let Some(t) = grammar
        .terminals()
        .iter()
        .find(|t| !names.contains(t.name()))
    {
        return Err(RuleError::UndeclaredClass(t.name().to_string()));
    }

    let control = if grammar.is_right_linear() {
        Control::Finite(FiniteControl::from_right_linear(&grammar, alphabet)?)
    } else {
        Control::Pushdown(PushdownControl::from_grammar(
            &grammar, alphabet, acceptance,
        )?)
    };
    Ok(ControllingAutomaton {
        rule_id,
        description,
        control,
        grammar: Some(grammar),
    })
}

fn build_alphabet(
    declared: Vec<(usize, String, Option<Pattern>)>,
) -> Result<Vec<EventClass>, RuleError> {
    let mut alphabet: Vec<EventClass> = Vec::new();
    let mut wildcard = None;
    for (_, name, pattern) in declared {
        if alphabet.iter().any(|c| c.name == name) || wildcard.as_ref() == Some(&name) {
            return Err(RuleError::DuplicateClass(name));
        }
        match pattern {
            None if wildcard.is_some() => return Err(RuleError::MultipleWildcards),
            None => wildcard = Some(name),
            Some(p) => {
                if let Some(c) = alphabet.iter().find(|c| c.include.meet(&p).is_some()) {
                    return Err(RuleError::NonDisjoint(c.name.clone(), name));
                }
                alphabet.push(EventClass {
                    name,
                    include: p,
                    exclude: Vec::new(),
                });
            }
        }
    }
    if let Some(name) = wildcard {
        let other = EventClass::other(name, alphabet.iter());
        alphabet.push(other);
    }
    Ok(alphabet)
}

/// `other`, `label` or `label("param")`. `None` stands for `other`.
fn parse_pattern(spec: &str) -> Result<Option<Pattern>, String> {
    if spec == "other" {
        return Ok(None);
    }
    let label_ok = |l: &str| {
        !l.is_empty()
            && l.chars()
                .all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '\'' | '*'))
    };
    if let Some(open) = spec.find('(') {
        let label = &spec[..open];
        let arg = spec[open + 1..]
            .strip_suffix(')')
            .and_then(|a| quoted(a.trim()))
            .ok_or_else(|| format!("expected `{label}(\"value\")`"))?;
        if !label_ok(label) {
            return Err(format!("bad production label `{label}`"));
        }
        return Ok(Some(Pattern::LabelParam {
            label: label.to_string(),
            parameter: arg,
        }));
    }
    if label_ok(spec) {
        Ok(Some(Pattern::Label(spec.to_string())))
    } else {
        Err(format!("bad production label `{spec}`"))
    }
}

fn quoted(s: &str) -> Option<String> {
    let inner = s.strip_prefix('"')?.strip_suffix('"')?;
    (!inner.contains('"')).then(|| inner.to_string())
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlKind, Verdict};
    use crate::grammar::DerivationTrace;

    const R1: &str = r#"
rule "single-gen"
events
  c = 2k("Class")   # a class
  g = 2k("Generalization")
  D = other
grammar
  S → c Qc | g S | D S | ε
  Qc → c Qc | g Qg | D Qc | ε
  Qg → c Qc | D Qg | ε
"#;

    #[test]
    fn compiles_finite_rule() {
        let r = compile_rule(R1).unwrap();
        assert_eq!(r.rule_id, "single-gen");
        assert_eq!(r.kind(), ControlKind::Finite);
        assert_eq!(r.finite().unwrap().live_state_count(), 3);
        assert_eq!(r.alphabet().len(), 3);
        let t = DerivationTrace::from_labels(&[
            "2k(Class)",
            "2e",
            "2k(Generalization)",
            "2k(Generalization)",
        ]);
        assert_eq!(
            r.accepts(&t).unwrap(),
            Verdict::Rejected {
                first_dead_index: 3
            }
        );
        assert!(r
            .accepts(&DerivationTrace::default())
            .unwrap()
            .is_accepted());
    }

    #[test]
    fn compiles_pushdown_rule() {
        let src = "rule \"nest\"\nevents\n  o = open\n  c = close\n  D = other\naccept = empty-stack\ngrammar\nS → o S c S | D S | ε\n";
        let r = compile_rule(src).unwrap();
        assert_eq!(r.kind(), ControlKind::Pushdown);
        assert_eq!(r.pushdown().unwrap().acceptance(), Acceptance::EmptyStack);
        let ok = DerivationTrace::from_labels(&["open", "x", "close"]);
        let bad = DerivationTrace::from_labels(&["open", "close", "close", "x"]);
        assert!(r.accepts(&ok).unwrap().is_accepted());
        assert_eq!(
            r.accepts(&bad).unwrap(),
            Verdict::Rejected {
                first_dead_index: 2
            }
        );
    }

    #[test]
    fn class_errors() {
        let dup = "rule \"x\"\nevents\n a = p\n a = q\ngrammar\nS → a\n";
        assert_eq!(
            compile_rule(dup).unwrap_err(),
            RuleError::DuplicateClass("a".into())
        );
        let overlap = "rule \"x\"\nevents\n a = 2k\n b = 2k(\"Class\")\ngrammar\nS → a\n";
        assert_eq!(
            compile_rule(overlap).unwrap_err(),
            RuleError::NonDisjoint("a".into(), "b".into())
        );
        let wild = "rule \"x\"\nevents\n a = other\n b = other\ngrammar\nS → a\n";
        assert_eq!(
            compile_rule(wild).unwrap_err(),
            RuleError::MultipleWildcards
        );
        let undeclared = "rule \"x\"\nevents\n a = p\ngrammar\nS → a b\n";
        assert_eq!(
            compile_rule(undeclared).unwrap_err(),
            RuleError::UndeclaredClass("b".into())
        );
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let e = compile_rule("rule \"x\"\nevents\n a p\ngrammar\nS → a\n").unwrap_err();
        assert!(matches!(e, RuleError::Syntax { line: 3, .. }));
        let e = compile_rule("events\n a = p\ngrammar\nS → a\n").unwrap_err();
        assert!(matches!(e, RuleError::Syntax { line: 1, .. }));
        let e = compile_rule("rule \"x\"\nevents\n a = p\ngrammar\nS → a →\n").unwrap_err();
        assert!(matches!(
            e,
            RuleError::Grammar(crate::grammar::GrammarError::Syntax { line: 5, .. })
        ));
    }

    #[test]
    fn bind_checks_labels_and_totality() {
        use crate::grammar::compile_grammar;
        let g = compile_grammar("p1: S → a S\np2: S → b S\np3: S → ε\n").unwrap();
        let partial =
            compile_rule("rule \"x\"\nevents\n a = p1\n b = p2\ngrammar\nS → a S | b S | ε\n")
                .unwrap();
        assert_eq!(
            partial.bind(&g).unwrap_err(),
            RuleError::NotTotal {
                rule: "x".into(),
                label: "p3".into()
            }
        );
        let unknown =
            compile_rule("rule \"x\"\nevents\n a = p9\n D = other\ngrammar\nS → a S | D S | ε\n")
                .unwrap();
        assert!(matches!(
            unknown.bind(&g),
            Err(RuleError::UnknownLabel { .. })
        ));
        let ok =
            compile_rule("rule \"x\"\nevents\n a = p1\n D = other\ngrammar\nS → a S | D S | ε\n")
                .unwrap();
        ok.bind(&g).unwrap();
    }
}
