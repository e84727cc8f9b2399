use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::Serialize;

use super::normalize::normalize_activity_order;
use super::token::tokenize_xmi;
use super::tree::{build_tree, strip_uml, ModelElement};
use super::{line_col, XmiError, XmiToken, XmiWarning};
use crate::grammar::{
    compile_grammar, ChartParser, DerivationTrace, Grammar, ParseError, ProductionEvent, Span,
    Symbol, Token, DEFAULT_MAX_TRACES,
};

/// Source of the XMI document grammar.
pub const UML_GRAMMAR_SOURCE: &str = include_str!("../../grammars/uml_xmi.grammar");

/// The XMI document grammar, compiled once.
pub fn uml_grammar() -> &'static Grammar {
    static GRAMMAR: OnceLock<Grammar> = OnceLock::new();
    GRAMMAR
        .get_or_init(|| compile_grammar(UML_GRAMMAR_SOURCE).expect("bundled XMI grammar compiles"))
}

/// Attributes whose values are always element references.
const REFERENCE_ATTRIBUTES: &[&str] = &[
    "annotatedElement",
    "association",
    "classifier",
    "client",
    "constrainedElement",
    "general",
    "importedElement",
    "importedPackage",
    "incoming",
    "inPartition",
    "memberEnd",
    "navigableOwnedEnd",
    "outgoing",
    "redefinedElement",
    "source",
    "specific",
    "supplier",
    "target",
    "type",
];

const WRAPPER: &str = "xmi:XMI";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XmiOptions {
    /// Reorder fork/join nodes and node edges before parsing.
    pub normalize: bool,
    pub max_traces: usize,
}

impl Default for XmiOptions {
    fn default() -> Self {
        XmiOptions {
            normalize: true,
            max_traces: DEFAULT_MAX_TRACES,
        }
    }
}

/// One element of the document, flattened for anchoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementRecord {
    pub qname: String,
    pub xmi_id: Option<String>,
    pub name: Option<String>,
    pub span: Span,
    pub parent: Option<usize>,
}

/// A parsed model with its derivation traces.
#[derive(Debug, Clone)]
pub struct XmiDocument {
    pub source: String,
    pub root: ModelElement,
    /// Grammar tokens in canonical attribute order.
    pub tokens: Vec<Token>,
    /// Leftmost derivations of `tokens`, canonically ordered; at least one.
    pub traces: Vec<DerivationTrace>,
    /// Elements in document preorder.
    pub elements: Vec<ElementRecord>,
    pub warnings: Vec<XmiWarning>,
    /// Start symbol used: `XMIObjectElement`, or `XMIElements` under an
    /// `xmi:XMI` wrapper.
    pub start: &'static str,
    by_token_start: HashMap<usize, usize>,
}

impl XmiDocument {
    /// The first trace in canonical order.
    pub fn trace(&self) -> &DerivationTrace {
        &self.traces[0]
    }

    /// Element owning the first token of `e`.
    pub fn event_element(&self, e: &ProductionEvent) -> Option<usize> {
        e.span
            .and_then(|s| self.by_token_start.get(&s.start).copied())
    }

    /// Nearest ancestor-or-self of `element` that has an `xmi:id`.
    pub fn identified(&self, element: usize) -> Option<usize> {
        self.ancestors(element)
            .find(|&i| self.elements[i].xmi_id.is_some())
    }

    /// Nearest ancestor-or-self with both a `name` and an `xmi:id`, falling
    /// back to [`identified`](Self::identified).
    pub fn named(&self, element: usize) -> Option<usize> {
        self.ancestors(element)
            .find(|&i| self.elements[i].xmi_id.is_some() && self.elements[i].name.is_some())
            .or_else(|| self.identified(element))
    }

    pub fn ancestors(&self, element: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(element), |&i| self.elements[i].parent)
    }

    pub fn element_by_id(&self, id: &str) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| e.xmi_id.as_deref() == Some(id))
    }

    pub fn line_col(&self, offset: usize) -> (usize, usize) {
        line_col(&self.source, offset)
    }
}

/// Tokenizes, normalizes (optionally) and parses a document.
pub fn load_xmi(src: &str, options: &XmiOptions) -> Result<XmiDocument, XmiError> {
    let tokens = tokenize_xmi(src)?;
    let mut root = build_tree(src, &tokens)?;
    let mut warnings = Vec::new();
    if options.normalize {
        let (normalized, notes) = normalize_activity_order(&root);
        root = normalized;
        warnings.extend(
            notes
                .into_iter()
                .map(|(span, msg)| XmiWarning::new(src, span, msg)),
        );
    }
    analyze(src, root, warnings, options.max_traces)
}

/// Parses a token stream from [`tokenize_xmi`] without normalization.
pub fn parse_xmi(src: &str, tokens: &[XmiToken]) -> Result<XmiDocument, XmiError> {
    let root = build_tree(src, tokens)?;
    analyze(src, root, Vec::new(), DEFAULT_MAX_TRACES)
}

fn analyze(
    src: &str,
    root: ModelElement,
    mut warnings: Vec<XmiWarning>,
    max_traces: usize,
) -> Result<XmiDocument, XmiError> {
    let ids: HashSet<&str> = root
        .walk()
        .iter()
        .filter_map(|e| e.xmi_id.as_deref())
        .collect();
    let mut lexer = Lexer {
        src,
        ids: &ids,
        tokens: Vec::new(),
        owners: Vec::new(),
        elements: Vec::new(),
        warnings: &mut warnings,
    };
    let wrapped = root.qname == WRAPPER;
    let start = if wrapped {
        let me = lexer.record(&root, None);
        for c in &root.children {
            lexer.element(c, Some(me));
        }
        "XMIElements"
    } else {
        lexer.element(&root, None);
        "XMIObjectElement"
    };
    let Lexer {
        tokens,
        owners,
        elements,
        ..
    } = lexer;
    if tokens.is_empty() {
        return Err(XmiError::malformed(
            src,
            root.span.start,
            "the XMI wrapper holds no model elements",
        ));
    }

    let parser = ChartParser::new(uml_grammar())
        .with_start(start)
        .map_err(XmiError::Derivation)?
        .max_traces(max_traces);
    let mut traces = parser.parse(&tokens).map_err(|e| match e {
        ParseError::NoParse {
            position,
            found,
            expected,
            ..
        } => {
            let offset = tokens.get(position).map_or(src.len(), |t| t.span.start);
            let (line, column) = line_col(src, offset);
            XmiError::NotInGrammar {
                offset,
                line,
                column,
                found,
                expected,
            }
        }
        other => XmiError::Derivation(other),
    })?;

    let by_token_start: HashMap<usize, usize> = tokens
        .iter()
        .zip(&owners)
        .map(|(t, &o)| (t.span.start, o))
        .collect();
    for trace in &mut traces {
        for e in &mut trace.events {
            let owner = e.span.and_then(|s| by_token_start.get(&s.start).copied());
            e.element_id = owner.and_then(|o| {
                std::iter::successors(Some(o), |&i| elements[i].parent)
                    .find_map(|i| elements[i].xmi_id.clone())
            });
        }
    }
    Ok(XmiDocument {
        source: src.to_string(),
        root,
        tokens,
        traces,
        elements,
        warnings,
        start,
        by_token_start,
    })
}

/// Maps elements to grammar tokens, one terminal per lexical token.
struct Lexer<'a> {
    src: &'a str,
    ids: &'a HashSet<&'a str>,
    tokens: Vec<Token>,
    owners: Vec<usize>,
    elements: Vec<ElementRecord>,
    warnings: &'a mut Vec<XmiWarning>,
}

impl Lexer<'_> {
    fn record(&mut self, e: &ModelElement, parent: Option<usize>) -> usize {
        self.elements.push(ElementRecord {
            qname: e.qname.clone(),
            xmi_id: e.xmi_id.clone(),
            name: e.name().map(str::to_string),
            span: e.span,
            parent,
        });
        self.elements.len() - 1
    }

    fn push(&mut self, symbol: Symbol, span: Span, owner: usize) {
        self.tokens.push(Token::new(symbol, span));
        self.owners.push(owner);
    }

    fn lit(&mut self, text: &str, span: Span, owner: usize) {
        self.push(Symbol::terminal(text), span, owner);
    }

    fn element(&mut self, e: &ModelElement, parent: Option<usize>) {
        let me = self.record(e, parent);
        self.lit("<", e.tags.open, me);
        self.push(Symbol::param("qname", strip_uml(&e.qname)), e.tags.name, me);

        let has_xmi_id = e.xmi_id.is_some();
        let rank = |name: &str| match name {
            "xmi:type" => 0,
            "xmi:id" => 1,
            "xmi:uuid" if !has_xmi_id => 1,
            _ => 2,
        };
        let mut attrs: Vec<_> = e.attributes.iter().collect();
        attrs.sort_by_key(|a| rank(&a.name));
        for a in attrs {
            match a.name.as_str() {
                "xmi:type" => {
                    self.lit("xmi:type", a.name_span, me);
                    self.push(
                        Symbol::param("qname", strip_uml(&a.value)),
                        a.value_span,
                        me,
                    );
                }
                "xmi:id" => {
                    self.lit("xmi:id", a.name_span, me);
                    self.lit("id", a.value_span, me);
                }
                "xmi:uuid" if !has_xmi_id => {
                    self.lit("xmiIdAttribName", a.name_span, me);
                    self.lit("id", a.value_span, me);
                }
                "xmi:idref" => {
                    self.lit("xmi:idref", a.name_span, me);
                    self.check_refs(&a.value, a.value_span, &a.name);
                    self.lit("refId", a.value_span, me);
                }
                "href" => {
                    self.lit("href", a.name_span, me);
                    self.lit("uriReference", a.value_span, me);
                }
                "nil" | "xsi:nil" if a.value == "true" => {
                    self.lit("nil", a.name_span, me);
                    self.lit("true", a.value_span, me);
                }
                name => {
                    self.lit("xmiName", a.name_span, me);
                    let kind = self.classify_value(name, &a.value, a.value_span);
                    self.lit(kind, a.value_span, me);
                }
            }
        }

        match &e.tags.close {
            None => self.lit("/>", e.tags.open_end, me),
            // `<a></a>` is read as `<a/>`; the grammar has no empty content.
            Some((_, _, end)) if e.text.is_none() && e.children.is_empty() => {
                self.lit("/>", e.tags.open_end.cover(end), me)
            }
            Some((open, name, end)) => {
                self.lit(">", e.tags.open_end, me);
                if let Some((_, span)) = &e.text {
                    self.lit("value", *span, me);
                }
                for c in &e.children {
                    self.element(c, Some(me));
                }
                self.lit("</", *open, me);
                self.push(Symbol::param("qname", strip_uml(&e.qname)), *name, me);
                self.lit(">", *end, me);
            }
        }
    }

    /// `refId` when every whitespace-separated part names an element,
    /// `uriReference` for URI-like values, `value` otherwise. Known
    /// reference attributes are always `refId`.
    fn classify_value(&mut self, name: &str, value: &str, span: Span) -> &'static str {
        let parts: Vec<&str> = value.split_whitespace().collect();
        if REFERENCE_ATTRIBUTES.contains(&name) && !parts.is_empty() {
            self.check_refs(value, span, name);
            "refId"
        } else if !parts.is_empty() && parts.iter().all(|p| self.ids.contains(p)) {
            "refId"
        } else if !value.contains(char::is_whitespace)
            && (value.contains('#') || value.contains("://"))
        {
            "uriReference"
        } else {
            "value"
        }
    }

    fn check_refs(&mut self, value: &str, span: Span, attr: &str) {
        for part in value.split_whitespace() {
            if !self.ids.contains(part) {
                self.warnings.push(XmiWarning::new(
                    self.src,
                    span,
                    format!("dangling reference `{part}` in `{attr}`"),
                ));
            }
        }
    }
}
