//! C ABI for the simulator.
//!
//! All functions return a [`GnnsimStatus`] code (or a plain value for
//! infallible accessors) and communicate failure detail through
//! [`gnnsim_last_error_message`]. Handles are opaque; every `*_new`/`*_load`
//! has a matching `*_free`, and passing NULL where a handle is required
//! yields `InvalidArgument` rather than a crash.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gnnsim::experiment::{ExperimentConfig, RunSummary};
use gnnsim::{Error, Graph};

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Result codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnnsimStatus {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    Config = 3,
    Graph = 4,
    Simulation = 5,
    Internal = 6,
}

fn status_of(err: &Error) -> GnnsimStatus {
    match err {
        Error::Io { .. } => GnnsimStatus::Io,
        Error::Config(_) | Error::Quant(_) | Error::Shape(_) => GnnsimStatus::Config,
        Error::EdgeList { .. } | Error::Graph(_) => GnnsimStatus::Graph,
        Error::Contract(_) | Error::Deadlock { .. } => GnnsimStatus::Simulation,
    }
}

fn guard<F: FnOnce() -> GnnsimStatus>(f: F) -> GnnsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            GnnsimStatus::Internal
        }
    }
}

/// Copies the last error message for this thread into `buf` (NUL
/// terminated, truncating). Returns the full message length in bytes,
/// excluding the terminator. `buf` may be NULL to query the length.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes when non-NULL.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let copy = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), copy);
            *buf.add(copy) = 0;
        }
        bytes.len()
    })
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, GnnsimStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is NULL"));
        return Err(GnnsimStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        GnnsimStatus::InvalidArgument
    })
}

/// Opaque graph handle.
pub struct GnnsimGraph {
    inner: Graph,
}

/// Loads a whitespace-separated edge list (`src dst [weight]` per line,
/// `#` comments) into a CSR graph.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_graph_load(
    path: *const c_char,
    num_nodes: usize,
    undirected: bool,
    out: *mut *mut GnnsimGraph,
) -> GnnsimStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return GnnsimStatus::InvalidArgument;
        }
        let path = match cstr_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match gnnsim::load_edge_list(Path::new(path), num_nodes, undirected) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(GnnsimGraph { inner: g }));
                GnnsimStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Generates a power-law workload graph (degrees in `[1, max_degree]`,
/// exponent `gamma`), deterministic for a given seed.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_graph_generate_power_law(
    num_nodes: usize,
    gamma: f64,
    max_degree: usize,
    seed: u64,
    out: *mut *mut GnnsimGraph,
) -> GnnsimStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return GnnsimStatus::InvalidArgument;
        }
        match gnnsim::generate_power_law_graph(num_nodes, gamma, max_degree, seed) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(GnnsimGraph { inner: g }));
                GnnsimStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `graph` must be a live handle from this library (or NULL, returning 0).
#[no_mangle]
pub unsafe extern "C" fn gnnsim_graph_num_nodes(graph: *const GnnsimGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    (*graph).inner.num_nodes()
}

/// # Safety
/// `graph` must be a live handle from this library (or NULL, returning 0).
#[no_mangle]
pub unsafe extern "C" fn gnnsim_graph_num_edges(graph: *const GnnsimGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    (*graph).inner.num_edges()
}

/// # Safety
/// `graph` must be a live handle from this library (or NULL, returning 0).
#[no_mangle]
pub unsafe extern "C" fn gnnsim_graph_mean_degree(graph: *const GnnsimGraph) -> f64 {
    if graph.is_null() {
        return 0.0;
    }
    (*graph).inner.degree_stats().mean
}

/// # Safety
/// `graph` must be NULL or a handle not yet freed; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_graph_free(graph: *mut GnnsimGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Opaque run-report handle; one summary row per executed scheduler policy.
pub struct GnnsimReport {
    summaries: Vec<RunSummary>,
}

/// Parses an experiment config file, runs it, and returns the summaries.
/// When `out_dir` is non-NULL the usual report files (summary.csv,
/// per_node.csv, config.resolved) are written there.
///
/// # Safety
/// `config_path` must be NUL-terminated; `out_dir` may be NULL; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_run_config_file(
    config_path: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut GnnsimReport,
) -> GnnsimStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return GnnsimStatus::InvalidArgument;
        }
        let path = match cstr_arg(config_path, "config_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let cfg = match ExperimentConfig::load(Path::new(path)) {
            Ok(c) => c,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        let result = if out_dir.is_null() {
            gnnsim::experiment::execute(&cfg)
        } else {
            match cstr_arg(out_dir, "out_dir") {
                Ok(dir) => gnnsim::experiment::run_to_dir(&cfg, Path::new(dir)),
                Err(s) => return s,
            }
        };
        match result {
            Ok(artifacts) => {
                *out = Box::into_raw(Box::new(GnnsimReport {
                    summaries: artifacts.summaries,
                }));
                GnnsimStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `report` must be a live handle from this library (or NULL, returning 0).
#[no_mangle]
pub unsafe extern "C" fn gnnsim_report_num_runs(report: *const GnnsimReport) -> usize {
    if report.is_null() {
        return 0;
    }
    (*report).summaries.len()
}

/// # Safety
/// `report` must be a live handle; out-of-range `run` returns 0.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_report_total_cycles(
    report: *const GnnsimReport,
    run: usize,
) -> u64 {
    if report.is_null() {
        return 0;
    }
    (*report).summaries.get(run).map_or(0, |s| s.total_cycles)
}

/// # Safety
/// `report` must be a live handle; out-of-range `run` returns 0.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_report_latency_ms(
    report: *const GnnsimReport,
    run: usize,
) -> f64 {
    if report.is_null() {
        return 0.0;
    }
    (*report)
        .summaries
        .get(run)
        .map_or(0.0, |s| s.latency_ms_at_clock)
}

/// # Safety
/// `report` must be a live handle; out-of-range `run` returns 0.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_report_nodes_per_ms(
    report: *const GnnsimReport,
    run: usize,
) -> f64 {
    if report.is_null() {
        return 0.0;
    }
    (*report).summaries.get(run).map_or(0.0, |s| s.nodes_per_ms)
}

/// Copies the functional output hash of run `run` into `buf` (NUL
/// terminated, truncating). Returns the hash length in bytes.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes when non-NULL.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_report_output_hash(
    report: *const GnnsimReport,
    run: usize,
    buf: *mut c_char,
    len: usize,
) -> usize {
    if report.is_null() {
        return 0;
    }
    let Some(summary) = (*report).summaries.get(run) else {
        return 0;
    };
    let bytes = summary.output_hash.as_bytes();
    if !buf.is_null() && len > 0 {
        let copy = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), copy);
        *buf.add(copy) = 0;
    }
    bytes.len()
}

/// # Safety
/// `report` must be NULL or a handle not yet freed; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gnnsim_report_free(report: *mut GnnsimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn err_text() -> String {
        let mut buf = vec![0u8; 256];
        unsafe { gnnsim_last_error_message(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
        let c = unsafe { CStr::from_ptr(buf.as_ptr().cast::<c_char>()) };
        c.to_string_lossy().into_owned()
    }

    #[test]
    fn generate_query_free_graph() {
        let mut graph: *mut GnnsimGraph = ptr::null_mut();
        let status = unsafe { gnnsim_graph_generate_power_law(100, 2.0, 10, 7, &mut graph) };
        assert_eq!(status, GnnsimStatus::Ok);
        assert!(!graph.is_null());
        unsafe {
            assert_eq!(gnnsim_graph_num_nodes(graph), 100);
            assert!(gnnsim_graph_num_edges(graph) >= 100);
            assert!(gnnsim_graph_mean_degree(graph) >= 1.0);
            gnnsim_graph_free(graph);
        }
    }

    #[test]
    fn load_missing_file_reports_io_error() {
        let path = CString::new("/nonexistent/edges.txt").unwrap();
        let mut graph: *mut GnnsimGraph = ptr::null_mut();
        let status = unsafe { gnnsim_graph_load(path.as_ptr(), 4, true, &mut graph) };
        assert_eq!(status, GnnsimStatus::Io);
        assert!(graph.is_null());
        assert!(err_text().contains("/nonexistent/edges.txt"));
    }

    #[test]
    fn null_arguments_are_invalid_not_fatal() {
        let mut graph: *mut GnnsimGraph = ptr::null_mut();
        let status = unsafe { gnnsim_graph_load(ptr::null(), 4, true, &mut graph) };
        assert_eq!(status, GnnsimStatus::InvalidArgument);
        unsafe {
            assert_eq!(gnnsim_graph_num_nodes(ptr::null()), 0);
            gnnsim_graph_free(ptr::null_mut());
            gnnsim_report_free(ptr::null_mut());
        }
    }

    #[test]
    fn bad_generator_arguments_report_graph_error() {
        let mut graph: *mut GnnsimGraph = ptr::null_mut();
        let status = unsafe { gnnsim_graph_generate_power_law(4, 2.0, 10, 0, &mut graph) };
        assert_eq!(status, GnnsimStatus::Graph);
        assert!(err_text().contains("max_degree"));
    }

    #[test]
    fn run_config_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("exp.ini");
        std::fs::write(
            &config_path,
            "[graph]\nnodes = 32\nmax_degree = 6\n\n[model]\nkind = gin\nin_features = 4\nhidden_features = 4\nout_features = 4\n\n[run]\nseed = 5\n",
        )
        .unwrap();
        let c_path = CString::new(config_path.to_str().unwrap()).unwrap();

        let mut report: *mut GnnsimReport = ptr::null_mut();
        let status =
            unsafe { gnnsim_run_config_file(c_path.as_ptr(), ptr::null(), &mut report) };
        assert_eq!(status, GnnsimStatus::Ok, "error: {}", err_text());
        unsafe {
            assert_eq!(gnnsim_report_num_runs(report), 1);
            assert!(gnnsim_report_total_cycles(report, 0) > 0);
            assert!(gnnsim_report_latency_ms(report, 0) > 0.0);
            let mut buf = vec![0u8; 64];
            let len = gnnsim_report_output_hash(
                report,
                0,
                buf.as_mut_ptr().cast::<c_char>(),
                buf.len(),
            );
            assert_eq!(len, 16);
            gnnsim_report_free(report);
        }
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header = include_str!("../include/gnnsim.h");
        for symbol in [
            "gnnsim_graph_load",
            "gnnsim_graph_generate_power_law",
            "gnnsim_graph_free",
            "gnnsim_run_config_file",
            "gnnsim_report_total_cycles",
            "gnnsim_report_free",
            "gnnsim_last_error_message",
            "typedef struct GnnsimGraph GnnsimGraph;",
            "typedef struct GnnsimReport GnnsimReport;",
        ] {
            assert!(header.contains(symbol), "header is missing {symbol}");
        }
    }
}
