//! C interface to the curvature classifier.
//!
//! Metrics and reports are opaque handles owned by the caller and released with
//! the matching `_free` function. Every fallible call returns a [`CartanStatus`];
//! on failure a message is available from [`cartan_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cartan_core::cli::{self, CliError, CommandKind, Format, RunConfig};
use cartan_core::geometry::Depth;
use cartan_core::metric::FinslerMetric;
use cartan_core::report;
use cartan_core::zoo::{build, builtin};

/// Result of an API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartanStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Bad option or unknown built-in name.
    Usage = 3,
    /// The metric could not be parsed or built.
    Metric = 4,
    /// No sample point lies in the metric's domain.
    NoPoints = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartanCommand {
    Classify = 0,
    Verify = 1,
    Diagram = 2,
    Oracle = 3,
}

/// Derivative depth. `Default` picks second, or first for the oracle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartanDepth {
    Default = 0,
    Base = 1,
    First = 2,
    Second = 3,
}

/// Run options. Tolerances that are zero take their default value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CartanOptions {
    pub points: u32,
    pub seed: u64,
    pub order: u32,
    pub depth: CartanDepth,
    pub eps_fit: f64,
    pub eps_deg: f64,
    pub eps_form: f64,
    pub eps_gram: f64,
}

/// A built Finsler metric.
pub struct CartanMetric {
    metric: FinslerMetric,
    kappa: f64,
}

/// A finished run: canonical JSON report and the command-line exit code it maps to.
pub struct CartanReport {
    json: CString,
    exit_code: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn guarded(f: impl FnOnce() -> Result<(), (CartanStatus, String)>) -> CartanStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CartanStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            CartanStatus::Panic
        }
    }
}

fn cli_status(e: CliError) -> (CartanStatus, String) {
    let status = match e {
        CliError::Usage(_) | CliError::Io(_) => CartanStatus::Usage,
        CliError::Metric(_) => CartanStatus::Metric,
        CliError::NoPoints(_) => CartanStatus::NoPoints,
    };
    (status, e.to_string())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (CartanStatus, String)> {
    if s.is_null() {
        return Err((CartanStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (CartanStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn null_out<T>(out: *mut *mut T) -> Result<(), (CartanStatus, String)> {
    if out.is_null() {
        Err((CartanStatus::NullArgument, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn cartan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cartan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Options matching the command-line defaults.
#[no_mangle]
pub extern "C" fn cartan_options_default() -> CartanOptions {
    CartanOptions {
        points: 8,
        seed: 0,
        order: 8,
        depth: CartanDepth::Default,
        eps_fit: 0.0,
        eps_deg: 0.0,
        eps_form: 0.0,
        eps_gram: 0.0,
    }
}

/// Builds a built-in metric such as `"randers"` in dimension `n`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cartan_metric_builtin(name: *const c_char, n: u32, kappa: f64, out: *mut *mut CartanMetric) -> CartanStatus {
    guarded(|| {
        null_out(out)?;
        let name = read_str(name, "name")?;
        let spec = builtin(name, n as usize, kappa).map_err(|e| (CartanStatus::Usage, e.to_string()))?;
        let metric = build(&spec).map_err(|e| (CartanStatus::Usage, e.to_string()))?;
        *out = Box::into_raw(Box::new(CartanMetric { metric, kappa }));
        Ok(())
    })
}

/// Parses and builds a metric from the text of a metric file.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cartan_metric_parse(source: *const c_char, out: *mut *mut CartanMetric) -> CartanStatus {
    guarded(|| {
        null_out(out)?;
        let src = read_str(source, "source")?;
        let metric = cli::metric_from_source(src).map_err(cli_status)?;
        *out = Box::into_raw(Box::new(CartanMetric { metric, kappa: 1.0 }));
        Ok(())
    })
}

/// Dimension of the base manifold, or 0 for a null handle.
///
/// # Safety
/// `metric` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cartan_metric_dim(metric: *const CartanMetric) -> u32 {
    metric.as_ref().map_or(0, |m| m.metric.dim() as u32)
}

/// # Safety
/// `metric` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cartan_metric_free(metric: *mut CartanMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

fn resolve(kind: CommandKind, handle: &CartanMetric, o: &CartanOptions) -> Result<RunConfig, CliError> {
    let m = &handle.metric;
    let pick = |v: f64| if v == 0.0 { None } else { Some(v) };
    let args = cli::RunArgs {
        metric: m.label().to_string(),
        n: m.dim(),
        kappa: handle.kappa,
        points: o.points as usize,
        seed: o.seed,
        order: o.order as usize,
        depth: match o.depth {
            CartanDepth::Default => None,
            CartanDepth::Base => Some(Depth::Base),
            CartanDepth::First => Some(Depth::First),
            CartanDepth::Second => Some(Depth::Second),
        },
        eps_fit: pick(o.eps_fit),
        eps_deg: pick(o.eps_deg),
        eps_form: pick(o.eps_form),
        eps_gram: pick(o.eps_gram),
        out: None,
        format: Format::Json,
    };
    RunConfig::resolve(kind, &args)
}

/// Runs a command on `metric`. `options` may be null for defaults.
///
/// A finished run returns `Ok` even when the report flags a violation; check
/// [`cartan_report_exit_code`].
///
/// # Safety
/// `metric` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cartan_run(
    metric: *const CartanMetric,
    command: CartanCommand,
    options: *const CartanOptions,
    out: *mut *mut CartanReport,
) -> CartanStatus {
    guarded(|| {
        null_out(out)?;
        let handle = metric.as_ref().ok_or((CartanStatus::NullArgument, "metric is null".to_string()))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| cartan_options_default());
        let kind = match command {
            CartanCommand::Classify => CommandKind::Classify,
            CartanCommand::Verify => CommandKind::Verify,
            CartanCommand::Diagram => CommandKind::Diagram,
            CartanCommand::Oracle => CommandKind::Oracle,
        };
        let cfg = resolve(kind, handle, &opts).map_err(cli_status)?;
        let outcome = cli::execute_on(&handle.metric, kind, &cfg).map_err(cli_status)?;
        let json = CString::new(report::canonical_json(&outcome.report)).expect("JSON has no NUL bytes");
        *out = Box::into_raw(Box::new(CartanReport { json, exit_code: outcome.code }));
        Ok(())
    })
}

/// Report as canonical JSON, owned by the handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cartan_report_json(report: *const CartanReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Exit code the command line would return for this report, or -1 for null.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cartan_report_exit_code(report: *const CartanReport) -> i32 {
    report.as_ref().map_or(-1, |r| r.exit_code)
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cartan_report_free(report: *mut CartanReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
