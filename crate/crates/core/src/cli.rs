//! The `csys` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::builtin::{builtin, DEFAULT_MAX_ATTRIBUTES, RULE_IDS};
use crate::control::{compile_rule, ControllingAutomaton};
use crate::grammar::compile_grammar;
use crate::report::{reports_to_json, CheckError, Checker, Report, ReportVerdict};
use crate::xmi::XmiOptions;

/// Directories searched for rule files, separated like `PATH`.
pub const RULE_PATH_VAR: &str = "CSYS_RULE_PATH";

/// Worker stack size; deep documents recurse deeply in the parser.
const WORKER_STACK: usize = 64 << 20;

#[derive(Debug, Parser)]
#[command(
    name = "csys",
    version,
    about = "Check models against controlled-grammar rules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check XMI files (or token files, with --grammar) against rules.
    Check(CheckArgs),
    /// List the built-in rules.
    Rules {
        #[arg(long, default_value_t = DEFAULT_MAX_ATTRIBUTES)]
        max_attrs: usize,
    },
}

#[derive(Debug, clap::Args)]
struct CheckArgs {
    #[arg(required = true, value_name = "FILE")]
    files: Vec<PathBuf>,
    /// Built-in rule id or rule file; repeatable. Defaults to all built-ins.
    #[arg(long = "rule", value_name = "ID|PATH")]
    rules: Vec<String>,
    /// Attribute limit for R2-max-attributes.
    #[arg(long, default_value_t = DEFAULT_MAX_ATTRIBUTES, value_name = "N")]
    max_attrs: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Include the production-label trace in each report.
    #[arg(long)]
    trace: bool,
    /// Check the document as written, without reordering fork/join nodes.
    #[arg(long)]
    no_normalize: bool,
    /// Treat inputs as whitespace-separated terminals of this grammar.
    #[arg(long, value_name = "FILE")]
    grammar: Option<PathBuf>,
    /// Report elapsed time as 0, for reproducible output.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

/// Runs the CLI with `argv` (including the program name) and returns the
/// exit code: 0 all pass, 1 some violation, 2 usage or processing error.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match cli.command {
        Command::Rules { max_attrs } => {
            for id in RULE_IDS {
                if let Some(r) = builtin(id, max_attrs.max(1)) {
                    let _ = writeln!(out, "{id}\t{}\t{}", r.kind(), r.description);
                }
            }
            0
        }
        Command::Check(args) => match check(&args) {
            Ok(reports) => {
                let _ = match args.format {
                    Format::Structured => writeln!(out, "{}", reports_to_json(&reports)),
                    Format::Text => reports
                        .iter()
                        .try_for_each(|r| write!(out, "{}", r.to_text())),
                };
                exit_code(&reports)
            }
            Err(e) => {
                let _ = writeln!(err, "csys: {e}");
                2
            }
        },
    }
}

fn exit_code(reports: &[Report]) -> i32 {
    if reports.iter().any(|r| r.verdict == ReportVerdict::Error) {
        2
    } else if reports.iter().any(|r| r.verdict == ReportVerdict::Fail) {
        1
    } else {
        0
    }
}

fn check(args: &CheckArgs) -> Result<Vec<Report>, CheckError> {
    if args.max_attrs == 0 {
        return Err(crate::builtin::ConfigError::ZeroAttributes.into());
    }
    let search = rule_search_path();
    let rules = if args.rules.is_empty() {
        RULE_IDS
            .iter()
            .filter_map(|id| builtin(id, args.max_attrs))
            .collect()
    } else {
        args.rules
            .iter()
            .map(|spec| resolve_rule(spec, args.max_attrs, &search))
            .collect::<Result<Vec<_>, _>>()?
    };
    let checker = match &args.grammar {
        Some(path) => {
            let src = read(path)?;
            let grammar = compile_grammar(&src).map_err(|e| CheckError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            Checker::with_grammar(grammar, rules)?
        }
        None => Checker::new(
            rules,
            XmiOptions {
                normalize: !args.no_normalize,
                ..XmiOptions::default()
            },
        )?,
    }
    .with_trace(args.trace);

    let pool = rayon::ThreadPoolBuilder::new()
        .stack_size(WORKER_STACK)
        .build()
        .map_err(|e| CheckError::Io {
            path: "<thread pool>".into(),
            message: e.to_string(),
        })?;
    // `collect` keeps argument order.
    let reports = pool.install(|| {
        args.files
            .par_iter()
            .map(|f| checker.check_path(f))
            .collect::<Vec<_>>()
    });
    Ok(if args.no_timing {
        reports.into_iter().map(Report::without_timing).collect()
    } else {
        reports
    })
}

fn rule_search_path() -> Vec<PathBuf> {
    std::env::var_os(RULE_PATH_VAR)
        .map(|v| std::env::split_paths(&v).collect())
        .unwrap_or_default()
}

/// A built-in id, a rule file path, or a file name found in `search`
/// (with or without the `.rule` extension).
pub fn resolve_rule(
    spec: &str,
    max_attrs: usize,
    search: &[PathBuf],
) -> Result<ControllingAutomaton, CheckError> {
    if let Some(rule) = builtin(spec, max_attrs) {
        return Ok(rule);
    }
    let found = std::iter::once(PathBuf::from(spec))
        .chain(
            search
                .iter()
                .flat_map(|d| [d.join(spec), d.join(format!("{spec}.rule"))]),
        )
        .find(|p| p.is_file())
        .ok_or_else(|| CheckError::Io {
            path: spec.to_string(),
            message: format!(
                "not a built-in rule ({}) and no such rule file",
                RULE_IDS.join(", ")
            ),
        })?;
    let src = read(&found)?;
    compile_rule(&src).map_err(|error| CheckError::Rule {
        name: found.display().to_string(),
        error,
    })
}

fn read(path: &Path) -> Result<String, CheckError> {
    std::fs::read_to_string(path).map_err(|e| CheckError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(
            std::iter::once("csys").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run(&["check"]);
        assert_eq!(code, 2);
        assert!(err.contains("Usage"));
        assert_eq!(run(&["check", "x.xmi", "--format", "yaml"]).0, 2);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn unknown_rule_exits_2() {
        let (code, _, err) = run(&["check", "x.xmi", "--rule", "no-such-rule"]);
        assert_eq!(code, 2);
        assert!(err.contains("no-such-rule"));
    }

    #[test]
    fn lists_rules() {
        let (code, out, _) = run(&["rules"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 3);
    }

    #[test]
    fn search_path_lookup() {
        let dir = std::env::temp_dir().join(format!("csys-rules-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("mine.rule"),
            "rule \"mine\"\nevents\n D = other\ngrammar\nS → D S | ε\n",
        )
        .unwrap();
        let r = resolve_rule("mine", 30, std::slice::from_ref(&dir)).unwrap();
        assert_eq!(r.rule_id, "mine");
        assert!(resolve_rule("other", 30, std::slice::from_ref(&dir)).is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }
}
