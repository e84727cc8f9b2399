use thiserror::Error;

use super::{Grammar, Symbol};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeriveError {
    #[error("step {index}: no production labeled `{label}`")]
    UnknownLabel { index: usize, label: String },
    #[error("step {index}: sentential form has no nonterminal left to rewrite")]
    NoNonterminal { index: usize },
    #[error(
        "step {index}: `{label}` rewrites {expected}, but the leftmost nonterminal is {found}"
    )]
    NotApplicable {
        index: usize,
        label: String,
        expected: String,
        found: String,
    },
    #[error("step {index}: `{label}` needs a parameter value")]
    MissingParameter { index: usize, label: String },
    #[error("step {index}: `{label}` takes no parameter")]
    UnexpectedParameter { index: usize, label: String },
}

impl DeriveError {
    pub fn index(&self) -> usize {
        match self {
            DeriveError::UnknownLabel { index, .. }
            | DeriveError::NoNonterminal { index }
            | DeriveError::NotApplicable { index, .. }
            | DeriveError::MissingParameter { index, .. }
            | DeriveError::UnexpectedParameter { index, .. } => *index,
        }
    }
}

/// Applies each labeled production to the leftmost nonterminal of the current
/// sentential form, starting from the start symbol, and returns the final form.
///
/// A production whose body holds a parameterized terminal takes the actual
/// value from the step's parameter.
pub fn leftmost_derive<'a, I>(g: &Grammar, steps: I) -> Result<Vec<Symbol>, DeriveError>
where
    I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
{
    let mut form = vec![Symbol::nonterminal(g.start())];
    for (index, (label, param)) in steps.into_iter().enumerate() {
        let p = g
            .production(label)
            .ok_or_else(|| DeriveError::UnknownLabel {
                index,
                label: label.to_string(),
            })?;
        let at = form
            .iter()
            .position(Symbol::is_nonterminal)
            .ok_or(DeriveError::NoNonterminal { index })?;
        if form[at].name() != p.lhs {
            return Err(DeriveError::NotApplicable {
                index,
                label: label.to_string(),
                expected: p.lhs.clone(),
                found: form[at].name().to_string(),
            });
        }
        let body: Vec<Symbol> = match (p.param_terminal().is_some(), param) {
            (true, Some(value)) => p
                .rhs
                .iter()
                .map(|s| match s {
                    Symbol::Param { name, .. } => Symbol::param(name.clone(), value),
                    other => other.clone(),
                })
                .collect(),
            (true, None) => {
                return Err(DeriveError::MissingParameter {
                    index,
                    label: label.to_string(),
                })
            }
            (false, Some(_)) => {
                return Err(DeriveError::UnexpectedParameter {
                    index,
                    label: label.to_string(),
                })
            }
            (false, None) => p.rhs.clone(),
        };
        form.splice(at..=at, body);
    }
    Ok(form)
}
