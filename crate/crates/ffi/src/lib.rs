//! C ABI surface for the recursive QAOA MaxCut/QUBO solver. Handles are
//! opaque pointers; every fallible call returns a status code and records
//! a thread-local message retrievable via `qaoa2_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use qaoa2::graph::{parse_edge_list, parse_qubo, qubo_to_maxcut, WeightedGraph};
use qaoa2::partition::Partitioner;
use qaoa2::sim::NoiseSpec;
use qaoa2::solver::{recursive_solve, HeuristicStrategy, SolveConfig, SolveReport};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QaoaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    SolveError = 5,
}

/// Opaque parsed problem instance.
pub struct QaoaGraph {
    graph: WeightedGraph,
}

/// Opaque solve result.
pub struct QaoaReport {
    report: SolveReport,
}

/// Solver options mirrored as a plain C struct; get defaults from
/// `qaoa2_solve_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QaoaSolveOptions {
    /// Subgraph qubit budget (maximum nodes per partition).
    pub max_nodes: usize,
    /// QAOA circuit depth.
    pub p: usize,
    /// Gradient steps per subgraph angle optimization.
    pub steps: usize,
    /// Angle optimization learning rate.
    pub lr: f64,
    /// Measurement shots per subgraph readout.
    pub shots: usize,
    pub seed: u64,
    /// Nonzero: brute-force the final recursion level instead of QAOA.
    pub exact_merge: bool,
    /// Nonzero: optimize angles on shot-sampled expectations.
    pub shot_noise_opt: bool,
    /// Bit-phase flip probability applied to readout samples.
    pub readout_p: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let c = CString::new(message.to_string()).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn qaoa2_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn read_utf8<'a>(s: *const c_char) -> Result<&'a str, QaoaStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(QaoaStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|e| {
        set_error(format!("invalid UTF-8: {e}"));
        QaoaStatus::InvalidUtf8
    })
}

/// Default solver options (qubit budget 10, depth 1, 20 steps, lr 0.01,
/// 1000 shots, seed 42, noiseless).
#[no_mangle]
pub extern "C" fn qaoa2_solve_options_default() -> QaoaSolveOptions {
    let cfg = SolveConfig::default();
    QaoaSolveOptions {
        max_nodes: cfg.max_nodes,
        p: cfg.p,
        steps: cfg.steps,
        lr: cfg.lr,
        shots: cfg.shots,
        seed: cfg.seed,
        exact_merge: false,
        shot_noise_opt: false,
        readout_p: 0.0,
    }
}

/// Parse a weighted edge-list instance ("N M" header plus 1-based
/// `u v w` lines). On success writes a graph handle to `out`; release it
/// with `qaoa2_graph_free`.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qaoa2_graph_parse_edge_list(
    text: *const c_char,
    out: *mut *mut QaoaGraph,
) -> QaoaStatus {
    if out.is_null() {
        set_error("null output pointer");
        return QaoaStatus::NullPointer;
    }
    let text = match read_utf8(text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    match parse_edge_list(text) {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(QaoaGraph { graph }));
            QaoaStatus::Ok
        }
        Err(e) => {
            set_error(e);
            QaoaStatus::ParseError
        }
    }
}

/// Parse a QUBO instance ("n" header plus `i j q` triplets) and reduce it
/// to weighted MaxCut on n+1 nodes. Writes the graph handle to `out` and,
/// if `offset_out` is non-null, the constant such that
/// objective = offset - cut.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qaoa2_graph_parse_qubo(
    text: *const c_char,
    out: *mut *mut QaoaGraph,
    offset_out: *mut f64,
) -> QaoaStatus {
    if out.is_null() {
        set_error("null output pointer");
        return QaoaStatus::NullPointer;
    }
    let text = match read_utf8(text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let parsed = parse_qubo(text).and_then(|q| qubo_to_maxcut(&q));
    match parsed {
        Ok((graph, offset)) => {
            if !offset_out.is_null() {
                *offset_out = offset;
            }
            *out = Box::into_raw(Box::new(QaoaGraph { graph }));
            QaoaStatus::Ok
        }
        Err(e) => {
            set_error(e);
            QaoaStatus::ParseError
        }
    }
}

/// Node count of a graph handle; 0 for null.
#[no_mangle]
pub extern "C" fn qaoa2_graph_num_nodes(graph: *const QaoaGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    unsafe { (*graph).graph.num_nodes() }
}

/// Release a graph handle. Null is ignored.
#[no_mangle]
pub extern "C" fn qaoa2_graph_free(graph: *mut QaoaGraph) {
    if !graph.is_null() {
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// Solve an instance with one of the baseline partitioners ("random",
/// "modularity", "boundary", "kl"). On success writes a report handle to
/// `out`; release it with `qaoa2_report_free`.
///
/// # Safety
/// All pointers must be valid; `partitioner` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qaoa2_solve(
    graph: *const QaoaGraph,
    options: *const QaoaSolveOptions,
    partitioner: *const c_char,
    out: *mut *mut QaoaReport,
) -> QaoaStatus {
    if graph.is_null() || options.is_null() || out.is_null() {
        set_error("null argument");
        return QaoaStatus::NullPointer;
    }
    let name = match read_utf8(partitioner) {
        Ok(n) => n,
        Err(status) => return status,
    };
    let which: Partitioner = match name.parse() {
        Ok(Partitioner::Gen) => {
            set_error("the \"gen\" partitioner needs a trained model; use the library API");
            return QaoaStatus::InvalidArgument;
        }
        Ok(w) => w,
        Err(e) => {
            set_error(e);
            return QaoaStatus::InvalidArgument;
        }
    };
    let opts = &*options;
    let cfg = SolveConfig {
        max_nodes: opts.max_nodes,
        p: opts.p,
        steps: opts.steps,
        lr: opts.lr,
        shots: opts.shots,
        seed: opts.seed,
        exact_merge: opts.exact_merge,
        noise: NoiseSpec {
            shots: if opts.shot_noise_opt { Some(opts.shots) } else { None },
            readout_bitphase_p: opts.readout_p,
        },
        ..SolveConfig::default()
    };
    if let Err(e) = cfg.validate() {
        set_error(e);
        return QaoaStatus::InvalidArgument;
    }
    match recursive_solve(&(*graph).graph, &HeuristicStrategy(which), &cfg) {
        Ok(report) => {
            *out = Box::into_raw(Box::new(QaoaReport { report }));
            QaoaStatus::Ok
        }
        Err(e) => {
            set_error(e);
            QaoaStatus::SolveError
        }
    }
}

/// Cut value of a solve report; NaN for null.
#[no_mangle]
pub extern "C" fn qaoa2_report_cut(report: *const QaoaReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    unsafe { (*report).report.cut }
}

/// Number of spins in a solve report; 0 for null.
#[no_mangle]
pub extern "C" fn qaoa2_report_num_spins(report: *const QaoaReport) -> usize {
    if report.is_null() {
        return 0;
    }
    unsafe { (*report).report.spins.len() }
}

/// Copy the spin assignment (+1/-1 per node) into `buffer`, which must
/// hold exactly `qaoa2_report_num_spins` entries.
///
/// # Safety
/// `buffer` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qaoa2_report_spins(
    report: *const QaoaReport,
    buffer: *mut i8,
    len: usize,
) -> QaoaStatus {
    if report.is_null() || buffer.is_null() {
        set_error("null argument");
        return QaoaStatus::NullPointer;
    }
    let spins = &(*report).report.spins.0;
    if len != spins.len() {
        set_error(format!("buffer holds {len} entries, report has {}", spins.len()));
        return QaoaStatus::InvalidArgument;
    }
    for (i, &s) in spins.iter().enumerate() {
        *buffer.add(i) = s;
    }
    QaoaStatus::Ok
}

/// Serialize the full report to a JSON string. Returns null on failure;
/// release the string with `qaoa2_string_free`.
#[no_mangle]
pub extern "C" fn qaoa2_report_to_json(report: *const QaoaReport) -> *mut c_char {
    if report.is_null() {
        set_error("null report");
        return ptr::null_mut();
    }
    let json = match serde_json::to_string(unsafe { &(*report).report }) {
        Ok(j) => j,
        Err(e) => {
            set_error(e);
            return ptr::null_mut();
        }
    };
    match CString::new(json) {
        Ok(c) => c.into_raw(),
        Err(e) => {
            set_error(e);
            ptr::null_mut()
        }
    }
}

/// Release a report handle. Null is ignored.
#[no_mangle]
pub extern "C" fn qaoa2_report_free(report: *mut QaoaReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must have been returned by `qaoa2_report_to_json`.
#[no_mangle]
pub unsafe extern "C" fn qaoa2_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    const TOY: &str = "4 4\n1 2 1.0\n2 3 1.0\n3 4 1.0\n1 4 1.0\n";

    #[test]
    fn parse_solve_and_free_through_the_c_surface() {
        let text = CString::new(TOY).unwrap();
        let mut graph: *mut QaoaGraph = ptr::null_mut();
        let status = unsafe { qaoa2_graph_parse_edge_list(text.as_ptr(), &mut graph) };
        assert_eq!(status, QaoaStatus::Ok);
        assert_eq!(qaoa2_graph_num_nodes(graph), 4);

        let mut opts = qaoa2_solve_options_default();
        opts.steps = 10;
        let method = CString::new("kl").unwrap();
        let mut report: *mut QaoaReport = ptr::null_mut();
        let status = unsafe { qaoa2_solve(graph, &opts, method.as_ptr(), &mut report) };
        assert_eq!(status, QaoaStatus::Ok);
        // the 4-cycle has optimal cut 4 and fits one subgraph
        assert_eq!(qaoa2_report_cut(report), 4.0);
        assert_eq!(qaoa2_report_num_spins(report), 4);
        let mut spins = [0i8; 4];
        let status = unsafe { qaoa2_report_spins(report, spins.as_mut_ptr(), 4) };
        assert_eq!(status, QaoaStatus::Ok);
        assert!(spins.iter().all(|&s| s == 1 || s == -1));

        let json = qaoa2_report_to_json(report);
        assert!(!json.is_null());
        let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap();
        assert!(text.contains("\"cut\":4.0"));
        unsafe { qaoa2_string_free(json) };
        qaoa2_report_free(report);
        qaoa2_graph_free(graph);
    }

    #[test]
    fn error_paths_set_codes_and_messages() {
        let bad = CString::new("not a graph").unwrap();
        let mut graph: *mut QaoaGraph = ptr::null_mut();
        let status = unsafe { qaoa2_graph_parse_edge_list(bad.as_ptr(), &mut graph) };
        assert_eq!(status, QaoaStatus::ParseError);
        let msg = unsafe { CStr::from_ptr(qaoa2_last_error()) }.to_str().unwrap();
        assert!(!msg.is_empty());

        let status = unsafe { qaoa2_graph_parse_edge_list(ptr::null(), &mut graph) };
        assert_eq!(status, QaoaStatus::NullPointer);

        // unsupported partitioner through the C surface
        let text = CString::new(TOY).unwrap();
        let status = unsafe { qaoa2_graph_parse_edge_list(text.as_ptr(), &mut graph) };
        assert_eq!(status, QaoaStatus::Ok);
        let opts = qaoa2_solve_options_default();
        let gen = CString::new("gen").unwrap();
        let mut report: *mut QaoaReport = ptr::null_mut();
        let status = unsafe { qaoa2_solve(graph, &opts, gen.as_ptr(), &mut report) };
        assert_eq!(status, QaoaStatus::InvalidArgument);
        qaoa2_graph_free(graph);

        // spin buffer length mismatch
        assert_eq!(qaoa2_report_num_spins(ptr::null()), 0);
        assert!(qaoa2_report_cut(ptr::null()).is_nan());
    }

    #[test]
    fn qubo_roundtrip_offset_identity() {
        let text = CString::new("2\n1 1 -1.0\n2 2 -1.0\n1 2 2.0\n").unwrap();
        let mut graph: *mut QaoaGraph = ptr::null_mut();
        let mut offset = f64::NAN;
        let status = unsafe { qaoa2_graph_parse_qubo(text.as_ptr(), &mut graph, &mut offset) };
        assert_eq!(status, QaoaStatus::Ok);
        assert_eq!(qaoa2_graph_num_nodes(graph), 3); // auxiliary node added
        assert!(offset.is_finite());
        qaoa2_graph_free(graph);
    }
}
