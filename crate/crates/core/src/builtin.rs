//! The built-in rules and their configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::control::{compile_rule, ControllingAutomaton};

pub const SINGLE_GENERALIZATION: &str = "R1-single-generalization";
pub const MAX_ATTRIBUTES: &str = "R2-max-attributes";
pub const FORK_JOIN_BALANCE: &str = "R3-fork-join-balance";

/// Built-in rule ids, in check order.
pub const RULE_IDS: [&str; 3] = [SINGLE_GENERALIZATION, MAX_ATTRIBUTES, FORK_JOIN_BALANCE];

pub const SINGLE_GENERALIZATION_SOURCE: &str =
    include_str!("../rules/R1-single-generalization.rule");
pub const FORK_JOIN_BALANCE_SOURCE: &str = include_str!("../rules/R3-fork-join-balance.rule");

pub const DEFAULT_MAX_ATTRIBUTES: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("max_attributes must be at least 1")]
    ZeroAttributes,
    #[error("unknown built-in rule `{0}`")]
    UnknownRule(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleConfig {
    pub max_attributes: usize,
    pub enabled: BTreeSet<String>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            max_attributes: DEFAULT_MAX_ATTRIBUTES,
            enabled: RULE_IDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_attributes == 0 {
            return Err(ConfigError::ZeroAttributes);
        }
        match self
            .enabled
            .iter()
            .find(|id| !RULE_IDS.contains(&id.as_str()))
        {
            Some(id) => Err(ConfigError::UnknownRule(id.clone())),
            None => Ok(()),
        }
    }

    /// The enabled built-in rules, in [`RULE_IDS`] order.
    pub fn rules(&self) -> Result<Vec<ControllingAutomaton>, ConfigError> {
        self.validate()?;
        Ok(RULE_IDS
            .iter()
            .filter(|id| self.enabled.contains(**id))
            .filter_map(|id| builtin(id, self.max_attributes))
            .collect())
    }
}

/// A built-in rule by id.
pub fn builtin(id: &str, max_attributes: usize) -> Option<ControllingAutomaton> {
    match id {
        SINGLE_GENERALIZATION => Some(rule_single_generalization()),
        MAX_ATTRIBUTES => Some(rule_max_attributes(max_attributes)),
        FORK_JOIN_BALANCE => Some(rule_fork_join_balance()),
        _ => None,
    }
}

/// At most one generalization per class.
pub fn rule_single_generalization() -> ControllingAutomaton {
    compile_rule(SINGLE_GENERALIZATION_SOURCE).expect("bundled rule compiles")
}

/// At most `n` attributes per class.
///
/// # Panics
///
/// If `n` is zero.
pub fn rule_max_attributes(n: usize) -> ControllingAutomaton {
    compile_rule(&max_attributes_source(n)).expect("generated rule compiles")
}

/// Balanced ForkNode outgoing / JoinNode incoming edges.
pub fn rule_fork_join_balance() -> ControllingAutomaton {
    compile_rule(FORK_JOIN_BALANCE_SOURCE).expect("bundled rule compiles")
}

/// Rule source for [`rule_max_attributes`]. Counting starts at a class and
/// restarts at the next class or packaged element; state `Qn` has no
/// transition on a further property.
pub fn max_attributes_source(n: usize) -> String {
    assert!(n >= 1, "max_attributes must be at least 1");
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# Each class has at most {n} attributes: more than {n} property events"
    );
    let _ = writeln!(
        s,
        "# after a class event, with no class or packaged element in between,"
    );
    let _ = writeln!(
        s,
        "# are a violation. Generated; see `csys::builtin::max_attributes_source`."
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "rule \"{MAX_ATTRIBUTES}\"");
    let _ = writeln!(
        s,
        "description \"each class can have at most {n} attributes\""
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "events");
    let _ = writeln!(s, "  c  = 2k(\"Class\")");
    let _ = writeln!(s, "  pr = 2k(\"Property\")");
    let _ = writeln!(s, "  pe = 2k(\"packagedElement\")");
    let _ = writeln!(s, "  D  = other");
    let _ = writeln!(s);
    let _ = writeln!(s, "grammar");
    let _ = writeln!(s, "  S  → pe S | c Qc | pr S | D S | ε");
    let _ = writeln!(s, "  Qc → pe S | c Qc | pr Q1 | D Qc | ε");
    for i in 1..n {
        let _ = writeln!(s, "  Q{i} → pe S | c Qc | pr Q{} | D Q{i} | ε", i + 1);
    }
    let _ = writeln!(s, "  Q{n} → pe S | c Qc | D Q{n} | ε");
    s
}
