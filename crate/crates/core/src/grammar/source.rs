//! Text format for grammars.
//!
//! ```text
//! # comment
//! start S                    # optional; defaults to the first left-hand side
//! p1: S → a S                # labeled production
//! 2f: IdAttribName → "xmi:id" | xmiIdAttribName   # expands to 2f_1, 2f_2
//! A → p2 A | p3 A | ε        # unlabeled: A.1, A.2, A.3
//! ```
//!
//! `→`, `->` and `::=` are accepted as arrows. Quoted or lowercase-initial
//! names are terminals, uppercase-initial names nonterminals, `name(param)`
//! a parameterized terminal, and `X*` desugars to a fresh nonterminal
//! `X* → ε | X X*`.

use std::collections::{BTreeSet, HashMap};

use super::{Grammar, GrammarError, LabeledProduction, Symbol};

/// Compiles grammar source text.
pub fn compile_grammar(src: &str) -> Result<Grammar, GrammarError> {
    compile_grammar_with_terminals(src, &BTreeSet::new(), 0)
}

/// Compiles grammar text where the names in `terminals` are terminals
/// regardless of case. `line_offset` is added to reported line numbers.
pub fn compile_grammar_with_terminals(
    src: &str,
    terminals: &BTreeSet<String>,
    line_offset: usize,
) -> Result<Grammar, GrammarError> {
    let mut builder = Builder::new(terminals);
    // A line starting with `|` continues the previous production.
    let mut pending: Option<(usize, String)> = None;
    for (i, line) in src.lines().enumerate() {
        let body = strip_comment(line);
        if body.trim().is_empty() {
            continue;
        }
        if body.trim_start().starts_with('|') {
            if let Some((_, text)) = &mut pending {
                text.push(' ');
                text.push_str(body.trim());
                continue;
            }
        }
        if let Some((n, text)) = pending.take() {
            builder.line(n, &text)?;
        }
        pending = Some((i + 1 + line_offset, body.to_string()));
    }
    if let Some((n, text)) = pending {
        builder.line(n, &text)?;
    }
    builder.finish()
}

struct Builder<'a> {
    terminals: &'a BTreeSet<String>,
    productions: Vec<LabeledProduction>,
    start: Option<String>,
    unlabeled: HashMap<String, usize>,
    starred: BTreeSet<String>,
}

#[derive(Debug)]
enum Item {
    Sym(Symbol),
    Star(Symbol),
    Epsilon,
}

impl<'a> Builder<'a> {
    fn new(terminals: &'a BTreeSet<String>) -> Self {
        Builder {
            terminals,
            productions: Vec::new(),
            start: None,
            unlabeled: HashMap::new(),
            starred: BTreeSet::new(),
        }
    }

    fn line(&mut self, line_no: usize, raw: &str) -> Result<(), GrammarError> {
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            return Ok(());
        }
        let err = |col: usize, msg: &str| GrammarError::Syntax {
            line: line_no,
            column: col,
            message: msg.to_string(),
        };
        let indent = line.len() - line.trim_start().len();
        let col_of = |byte: usize| line[..byte].chars().count() + 1;

        if let Some(rest) = trimmed.strip_prefix("start") {
            if rest.starts_with(char::is_whitespace) {
                let name = rest.trim();
                if !is_ident(name) {
                    return Err(err(
                        col_of(indent) + 6,
                        "expected a nonterminal after `start`",
                    ));
                }
                self.start = Some(name.to_string());
                return Ok(());
            }
        }

        let mut cur = Cursor {
            text: line,
            pos: indent,
        };
        let first = cur
            .ident()
            .ok_or_else(|| err(col_of(cur.pos), "expected a label or nonterminal"))?;
        cur.skip_ws();
        let (label, lhs) = if cur.peek() == Some(':') && !cur.rest().starts_with("::=") {
            cur.bump();
            cur.skip_ws();
            let lhs = cur
                .ident()
                .ok_or_else(|| err(col_of(cur.pos), "expected the left-hand nonterminal"))?;
            (Some(first), lhs)
        } else {
            (None, first)
        };
        if !lhs.starts_with(|c: char| c.is_uppercase()) || self.terminals.contains(&lhs) {
            return Err(err(col_of(indent), "left-hand side must be a nonterminal"));
        }
        cur.skip_ws();
        if !cur.eat("→") && !cur.eat("->") && !cur.eat("::=") {
            return Err(err(col_of(cur.pos), "expected `→`"));
        }

        let mut alternatives: Vec<Vec<Item>> = vec![Vec::new()];
        loop {
            cur.skip_ws();
            let Some(c) = cur.peek() else { break };
            let at = cur.pos;
            if c == '|' {
                cur.bump();
                alternatives.push(Vec::new());
                continue;
            }
            let sym = if c == '"' || c == '\'' {
                cur.bump();
                let body_start = cur.pos;
                while cur.peek().is_some_and(|d| d != c) {
                    cur.bump();
                }
                if cur.peek().is_none() {
                    return Err(err(col_of(at), "unterminated quoted terminal"));
                }
                let body = line[body_start..cur.pos].to_string();
                cur.bump();
                if body.is_empty() {
                    return Err(err(col_of(at), "empty quoted terminal"));
                }
                Item::Sym(Symbol::Terminal(body))
            } else if cur.eat("ε") {
                Item::Epsilon
            } else if let Some(name) = cur.ident() {
                if name == "eps" || name == "epsilon" {
                    Item::Epsilon
                } else if cur.peek() == Some('(') {
                    cur.bump();
                    let p_start = cur.pos;
                    while cur.peek().is_some_and(|d| d != ')') {
                        cur.bump();
                    }
                    if cur.peek().is_none() {
                        return Err(err(col_of(at), "unclosed parameter list"));
                    }
                    let param = line[p_start..cur.pos].trim().to_string();
                    cur.bump();
                    if param.is_empty() {
                        return Err(err(col_of(at), "empty parameter"));
                    }
                    Item::Sym(Symbol::param(name, param))
                } else if self.terminals.contains(&name) {
                    Item::Sym(Symbol::Terminal(name))
                } else if name.starts_with(|c: char| c.is_uppercase()) {
                    Item::Sym(Symbol::Nonterminal(name))
                } else {
                    Item::Sym(Symbol::Terminal(name))
                }
            } else {
                return Err(err(col_of(at), &format!("unexpected character `{c}`")));
            };
            let sym = if cur.peek() == Some('*') {
                cur.bump();
                match sym {
                    Item::Sym(s) => Item::Star(s),
                    _ => return Err(err(col_of(at), "`*` needs a symbol")),
                }
            } else {
                sym
            };
            alternatives.last_mut().unwrap().push(sym);
        }

        let count = alternatives.len();
        for (i, alt) in alternatives.into_iter().enumerate() {
            if alt.is_empty() {
                return Err(err(col_of(cur.pos), "empty alternative (write ε)"));
            }
            let label = match &label {
                Some(l) if count == 1 => l.clone(),
                Some(l) => format!("{l}_{}", i + 1),
                None => {
                    let n = self.unlabeled.entry(lhs.clone()).or_insert(0);
                    *n += 1;
                    format!("{lhs}.{n}")
                }
            };
            let mut rhs = Vec::new();
            for item in alt {
                match item {
                    Item::Epsilon => {}
                    Item::Sym(s) => rhs.push(s),
                    Item::Star(s) => rhs.push(self.star(s)),
                }
            }
            self.productions.push(LabeledProduction {
                label,
                lhs: lhs.clone(),
                rhs,
            });
        }
        Ok(())
    }

    /// `X*` ↦ fresh `X* → ε | X X*`.
    fn star(&mut self, s: Symbol) -> Symbol {
        let name = format!("{s}*");
        if self.starred.insert(name.clone()) {
            let nt = Symbol::Nonterminal(name.clone());
            self.productions.push(LabeledProduction {
                label: format!("{name}_1"),
                lhs: name.clone(),
                rhs: vec![],
            });
            self.productions.push(LabeledProduction {
                label: format!("{name}_2"),
                lhs: name.clone(),
                rhs: vec![s, nt.clone()],
            });
            nt
        } else {
            Symbol::Nonterminal(name)
        }
    }

    fn finish(self) -> Result<Grammar, GrammarError> {
        let start = match self.start {
            Some(s) => s,
            None => self
                .productions
                .first()
                .map(|p| p.lhs.clone())
                .ok_or(GrammarError::StartMissing)?,
        };
        Grammar::new(self.productions, start)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '"' | '\'') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '#') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.' || c == '\''
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_ident_char)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn rest(&self) -> &str {
        &self.text[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.bump();
        }
        (self.pos > start).then(|| self.text[start..self.pos].to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeled_choice_expands_with_index_suffix() {
        let g = compile_grammar("start L\n2l: L → \"xmi:idref\" refId | M\n2m: M → \"href\" uri\n")
            .unwrap();
        let labels: Vec<_> = g.labels().collect();
        assert_eq!(labels, ["2l_1", "2l_2", "2m"]);
        assert_eq!(
            g.production("2l_1").unwrap().rhs[0],
            Symbol::terminal("xmi:idref")
        );
    }

    #[test]
    fn unlabeled_alternatives_are_numbered_per_lhs() {
        let g = compile_grammar("S → p1 S | p3 S | p2 A\nA → p2 A | p3 A | ε\n").unwrap();
        let labels: Vec<_> = g.labels().collect();
        assert_eq!(labels, ["S.1", "S.2", "S.3", "A.1", "A.2", "A.3"]);
        assert!(g.production("A.3").unwrap().is_epsilon());
    }

    #[test]
    fn arrows_and_parameters() {
        let g = compile_grammar("2k: QName ::= qname(xmiName)\n").unwrap();
        assert_eq!(
            g.production("2k").unwrap().rhs,
            [Symbol::param("qname", "xmiName")]
        );
        let g = compile_grammar("p: S -> a").unwrap();
        assert_eq!(g.production("p").unwrap().rhs, [Symbol::terminal("a")]);
    }

    #[test]
    fn continuation_lines() {
        let g = compile_grammar("s: S → a S   # first\n   | b S\n\n   | ε\n").unwrap();
        assert_eq!(g.labels().collect::<Vec<_>>(), ["s_1", "s_2", "s_3"]);
    }

    #[test]
    fn star_desugars_once() {
        let g = compile_grammar("S → d* x d*").unwrap();
        assert_eq!(g.productions().len(), 3);
        assert!(g.production("d*_1").unwrap().is_epsilon());
        assert_eq!(
            g.production("d*_2").unwrap().rhs,
            [Symbol::terminal("d"), Symbol::nonterminal("d*")]
        );
        assert!(!g.is_right_linear());
    }

    #[test]
    fn declared_terminals_override_case() {
        let terms: BTreeSet<String> = ["D".to_string()].into();
        let g = compile_grammar_with_terminals("S → D S | ε", &terms, 0).unwrap();
        assert!(g.terminals().contains(&Symbol::terminal("D")));
        assert!(g.is_right_linear());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            compile_grammar("p: S → a\np: S → b"),
            Err(GrammarError::DuplicateLabel(l)) if l == "p"
        ));
        assert!(matches!(
            compile_grammar("p: S → a B"),
            Err(GrammarError::UndeclaredSymbol { symbol, .. }) if symbol == "B"
        ));
        assert_eq!(
            compile_grammar("# nothing\n"),
            Err(GrammarError::StartMissing)
        );
        assert_eq!(
            compile_grammar("start S\n"),
            Err(GrammarError::StartUnderivable("S".into()))
        );
        match compile_grammar("p: S → a\nq: S a") {
            Err(GrammarError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            compile_grammar("p: S → \"a"),
            Err(GrammarError::Syntax { .. })
        ));
        assert!(matches!(
            compile_grammar("p: s → a"),
            Err(GrammarError::Syntax { .. })
        ));
    }

    #[test]
    fn comments_respect_quotes() {
        let g = compile_grammar("p: S → \"#\" # trailing").unwrap();
        assert_eq!(g.production("p").unwrap().rhs, [Symbol::terminal("#")]);
    }
}
