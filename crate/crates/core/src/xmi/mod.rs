//! XMI front end: tokenizer, element tree, and the document grammar that
//! turns a model into a leftmost derivation trace.

mod frontend;
mod normalize;
mod token;
mod tree;

use serde::Serialize;
use thiserror::Error;

use crate::grammar::{ParseError, Span};

pub use frontend::{
    load_xmi, parse_xmi, uml_grammar, ElementRecord, XmiDocument, XmiOptions, UML_GRAMMAR_SOURCE,
};
pub use normalize::normalize_activity_order;
pub use token::{tokenize_xmi, XmiToken, XmiTokenKind};
pub use tree::{build_tree, strip_uml, Attribute, ModelElement, TagSpans};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XmiError {
    #[error("{line}:{column}: malformed XML: {message}")]
    Malformed {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: model is not in the XMI grammar: unexpected {found}; expected one of: {}", expected.join(", "))]
    NotInGrammar {
        offset: usize,
        line: usize,
        column: usize,
        found: String,
        expected: Vec<String>,
    },
    #[error("{0}")]
    Derivation(ParseError),
}

impl XmiError {
    pub(crate) fn malformed(src: &str, offset: usize, message: &str) -> Self {
        let (line, column) = line_col(src, offset);
        XmiError::Malformed {
            offset,
            line,
            column,
            message: message.to_string(),
        }
    }

    /// Byte offset the error points at, if any.
    pub fn offset(&self) -> Option<usize> {
        match self {
            XmiError::Malformed { offset, .. } | XmiError::NotInGrammar { offset, .. } => {
                Some(*offset)
            }
            XmiError::Derivation(_) => None,
        }
    }
}

/// A non-fatal finding about a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XmiWarning {
    pub message: String,
    pub span: Span,
    pub line: usize,
    pub column: usize,
}

impl XmiWarning {
    pub(crate) fn new(src: &str, span: Span, message: impl Into<String>) -> Self {
        let (line, column) = line_col(src, span.start);
        XmiWarning {
            message: message.into(),
            span,
            line,
            column,
        }
    }
}

/// 1-based line and column (in characters) of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}

#[cfg(test)]
mod tests {
    use super::line_col;

    #[test]
    fn line_and_column() {
        let s = "ab\ncdé\nf";
        assert_eq!(line_col(s, 0), (1, 1));
        assert_eq!(line_col(s, 3), (2, 1));
        assert_eq!(line_col(s, 7), (2, 4));
        assert_eq!(line_col(s, 8), (3, 1));
        assert_eq!(line_col(s, 99), (3, 2));
    }
}
