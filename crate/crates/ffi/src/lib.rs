//! C interface to `csys`.
//!
//! Handles are opaque and owned by the caller: every `*_new`/`csys_check_*`
//! result must be released with the matching `*_free`. Functions returning
//! [`CsysStatus`] record a message for [`csys_last_error`] on failure.
//! Handles are not thread-safe; use one checker per thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use csys::builtin::{builtin, DEFAULT_MAX_ATTRIBUTES, RULE_IDS};
use csys::control::{compile_rule, ControllingAutomaton};
use csys::report::{reports_to_json, Checker, Report, ReportVerdict};
use csys::xmi::XmiOptions;

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsysStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    UnknownRule = 3,
    InvalidRule = 4,
    InvalidConfig = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsysVerdict {
    Pass = 0,
    Fail = 1,
    /// The input could not be read or parsed; see the JSON report.
    Error = 2,
}

/// A rule set plus options. Opaque.
pub struct CsysChecker {
    builtins: Vec<String>,
    custom: Vec<ControllingAutomaton>,
    max_attributes: usize,
    normalize: bool,
    cached: Option<Checker>,
}

/// The result of checking one input. Opaque.
pub struct CsysReport {
    report: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: CsysStatus, msg: impl Into<String>) -> CsysStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`CsysStatus::Panic`].
fn guard(f: impl FnOnce() -> CsysStatus) -> CsysStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(CsysStatus::Panic, "internal error"))
}

unsafe fn utf8<'a>(s: *const c_char, what: &str) -> Result<&'a str, CsysStatus> {
    if s.is_null() {
        return Err(fail(CsysStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        fail(
            CsysStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

impl CsysChecker {
    fn checker(&mut self) -> Result<&Checker, String> {
        if self.cached.is_none() {
            let ids: Vec<&str> = if self.builtins.is_empty() && self.custom.is_empty() {
                RULE_IDS.to_vec()
            } else {
                self.builtins.iter().map(String::as_str).collect()
            };
            let mut rules: Vec<_> = ids
                .iter()
                .filter_map(|id| builtin(id, self.max_attributes))
                .collect();
            rules.extend(self.custom.iter().cloned());
            let options = XmiOptions {
                normalize: self.normalize,
                ..XmiOptions::default()
            };
            self.cached = Some(Checker::new(rules, options).map_err(|e| e.to_string())?);
        }
        Ok(self.cached.as_ref().expect("just built"))
    }

    fn check(
        &mut self,
        out: *mut *mut CsysReport,
        f: impl FnOnce(&Checker) -> Report,
    ) -> CsysStatus {
        if out.is_null() {
            return fail(CsysStatus::NullArgument, "out is NULL");
        }
        match self.checker() {
            Ok(c) => {
                let report = f(c);
                unsafe { *out = Box::into_raw(Box::new(CsysReport { report })) };
                CsysStatus::Ok
            }
            Err(e) => fail(CsysStatus::InvalidRule, e),
        }
    }
}

/// A checker with no rules selected; it checks all built-in rules until a
/// rule is added.
#[no_mangle]
pub extern "C" fn csys_checker_new() -> *mut CsysChecker {
    Box::into_raw(Box::new(CsysChecker {
        builtins: Vec::new(),
        custom: Vec::new(),
        max_attributes: DEFAULT_MAX_ATTRIBUTES,
        normalize: true,
        cached: None,
    }))
}

/// # Safety
/// `checker` must come from [`csys_checker_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn csys_checker_free(checker: *mut CsysChecker) {
    if !checker.is_null() {
        drop(Box::from_raw(checker));
    }
}

/// Adds a built-in rule by id, e.g. `"R1-single-generalization"`.
///
/// # Safety
/// `checker` must be a live handle; `id` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csys_checker_add_builtin(
    checker: *mut CsysChecker,
    id: *const c_char,
) -> CsysStatus {
    guard(|| {
        let Some(c) = checker.as_mut() else {
            return fail(CsysStatus::NullArgument, "checker is NULL");
        };
        let id = match utf8(id, "id") {
            Ok(s) => s,
            Err(st) => return st,
        };
        if !RULE_IDS.contains(&id) {
            return fail(
                CsysStatus::UnknownRule,
                format!("unknown built-in rule `{id}`"),
            );
        }
        if !c.builtins.iter().any(|b| b == id) {
            c.builtins.push(id.to_string());
            c.cached = None;
        }
        CsysStatus::Ok
    })
}

/// Compiles and adds a rule from rule-file source text.
///
/// # Safety
/// `checker` must be a live handle; `source` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csys_checker_add_rule_source(
    checker: *mut CsysChecker,
    source: *const c_char,
) -> CsysStatus {
    guard(|| {
        let Some(c) = checker.as_mut() else {
            return fail(CsysStatus::NullArgument, "checker is NULL");
        };
        let src = match utf8(source, "source") {
            Ok(s) => s,
            Err(st) => return st,
        };
        match compile_rule(src) {
            Ok(rule) => {
                c.custom.push(rule);
                c.cached = None;
                CsysStatus::Ok
            }
            Err(e) => fail(CsysStatus::InvalidRule, e.to_string()),
        }
    })
}

/// Attribute limit for `R2-max-attributes`; must be at least 1.
///
/// # Safety
/// `checker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csys_checker_set_max_attributes(
    checker: *mut CsysChecker,
    n: usize,
) -> CsysStatus {
    let Some(c) = checker.as_mut() else {
        return fail(CsysStatus::NullArgument, "checker is NULL");
    };
    if n == 0 {
        return fail(
            CsysStatus::InvalidConfig,
            "max_attributes must be at least 1",
        );
    }
    c.max_attributes = n;
    c.cached = None;
    CsysStatus::Ok
}

/// Whether activity content is reordered before checking (default on).
///
/// # Safety
/// `checker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csys_checker_set_normalize(
    checker: *mut CsysChecker,
    on: bool,
) -> CsysStatus {
    let Some(c) = checker.as_mut() else {
        return fail(CsysStatus::NullArgument, "checker is NULL");
    };
    c.normalize = on;
    c.cached = None;
    CsysStatus::Ok
}

/// Checks the XMI file at `path`. Unreadable or malformed files still
/// produce a report, with verdict [`CsysVerdict::Error`].
///
/// # Safety
/// `checker` must be a live handle, `path` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csys_check_file(
    checker: *mut CsysChecker,
    path: *const c_char,
    out: *mut *mut CsysReport,
) -> CsysStatus {
    guard(|| {
        let Some(c) = checker.as_mut() else {
            return fail(CsysStatus::NullArgument, "checker is NULL");
        };
        let path = match utf8(path, "path") {
            Ok(s) => s,
            Err(st) => return st,
        };
        c.check(out, |k| k.check_path(Path::new(path)))
    })
}

/// Checks XMI text; `name` labels the report.
///
/// # Safety
/// `checker` must be a live handle, `name` and `source` NUL-terminated
/// strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csys_check_str(
    checker: *mut CsysChecker,
    name: *const c_char,
    source: *const c_char,
    out: *mut *mut CsysReport,
) -> CsysStatus {
    guard(|| {
        let Some(c) = checker.as_mut() else {
            return fail(CsysStatus::NullArgument, "checker is NULL");
        };
        let (name, src) = match (utf8(name, "name"), utf8(source, "source")) {
            (Ok(n), Ok(s)) => (n, s),
            (Err(st), _) | (_, Err(st)) => return st,
        };
        c.check(out, |k| k.check_source(name, src))
    })
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csys_report_verdict(report: *const CsysReport) -> CsysVerdict {
    match report.as_ref().map(|r| r.report.verdict) {
        Some(ReportVerdict::Pass) => CsysVerdict::Pass,
        Some(ReportVerdict::Fail) => CsysVerdict::Fail,
        Some(ReportVerdict::Error) | None => CsysVerdict::Error,
    }
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csys_report_violation_count(report: *const CsysReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.violations.len())
}

/// The report as `{"reports":[...]}` JSON; free with [`csys_string_free`].
/// Returns NULL if `report` is NULL.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csys_report_to_json(report: *const CsysReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => {
            let json = reports_to_json(std::slice::from_ref(&r.report));
            CString::new(json).map_or(ptr::null_mut(), CString::into_raw)
        }
        None => {
            set_error("report is NULL");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `report` must come from a `csys_check_*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn csys_report_free(report: *mut CsysReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn csys_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn csys_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
