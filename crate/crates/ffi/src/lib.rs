//! C ABI for the micky library.
//!
//! Every function returns a [`MickyStatus`]; results come back through out
//! pointers. On failure the out pointers are left untouched and a message is
//! available from [`micky_last_error_message`] on the calling thread.
//!
//! Handles are opaque. Free each one exactly once with its matching
//! `*_free` function. Strings returned by the library must be released with
//! [`micky_string_free`].
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access the function
//! performs. Input strings must be NUL-terminated UTF-8. Enum arguments
//! must hold one of their declared values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use micky_core::evalharness::{knee_point, replicate, run_method, Knee, KneeInputs, MethodRun, MethodSpec};
use micky_core::synth::{gen_matrix, SynthSpec};
use micky_core::{load_matrix, Budget, Error, ObjectiveKind, PerfMatrix, PolicySpec, RewardMode};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MickyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NotFound = 4,
    NumericError = 5,
    IoError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MickyObjective {
    ExecutionTime = 0,
    OperationalCost = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MickyPolicy {
    Ucb1 = 0,
    EpsilonGreedy = 1,
    Softmax = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MickyRewardMode {
    Online = 0,
    Oracle = 1,
}

/// Written by [`micky_knee_point`] when the collective choice never loses.
pub const MICKY_KNEE_NEVER: u64 = u64::MAX;

/// Opaque performance matrix.
pub struct MickyMatrix(Arc<PerfMatrix>);

/// Opaque result of one optimizer run.
pub struct MickyRun {
    matrix: Arc<PerfMatrix>,
    label: String,
    run: MethodRun,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MickyStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Validation(_) | Error::Parse(_) | Error::EmptyBudget | Error::DimensionMismatch { .. } => {
                MickyStatus::InvalidArgument
            }
            Error::Lookup { .. } | Error::NoPulledArm => MickyStatus::NotFound,
            Error::NonPsdKernel => MickyStatus::NumericError,
            Error::Io(_) => MickyStatus::IoError,
            _ => MickyStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(MickyStatus::InvalidArgument, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> MickyStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MickyStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            MickyStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(MickyStatus::NullPointer, format!("{name} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(MickyStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s).map(CString::into_raw).map_err(|_| Failure(MickyStatus::DataError, "string contains NUL".into()))
}

fn objective(o: MickyObjective) -> ObjectiveKind {
    match o {
        MickyObjective::ExecutionTime => ObjectiveKind::ExecutionTime,
        MickyObjective::OperationalCost => ObjectiveKind::OperationalCost,
    }
}

fn check_index(i: usize, n: usize, kind: &'static str) -> FfiResult<()> {
    if i >= n {
        return Err(Error::Lookup { kind, id: i.to_string() }.into());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn micky_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn micky_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a matrix from the text of `configs.csv` and `measurements.csv`.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_load_csv(
    configs_csv: *const c_char,
    measurements_csv: *const c_char,
    objective_kind: MickyObjective,
    out: *mut *mut MickyMatrix,
) -> MickyStatus {
    guard(|| {
        let configs = str_arg(configs_csv, "configs_csv")?;
        let measurements = str_arg(measurements_csv, "measurements_csv")?;
        let m = load_matrix(configs, measurements, objective(objective_kind))?;
        write_out(out, Box::into_raw(Box::new(MickyMatrix(Arc::new(m)))), "out")
    })
}

/// Loads `configs.csv` and `measurements.csv` from a directory.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_load_dir(
    dir: *const c_char,
    objective_kind: MickyObjective,
    out: *mut *mut MickyMatrix,
) -> MickyStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let m = PerfMatrix::load_dir(Path::new(dir), objective(objective_kind))?;
        write_out(out, Box::into_raw(Box::new(MickyMatrix(Arc::new(m)))), "out")
    })
}

/// Generates a synthetic matrix. `spec_json` may be null for the default
/// generator settings; missing fields take their defaults. The planted
/// config id is written to `planted` when it is not null.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_synth_generate(
    spec_json: *const c_char,
    out: *mut *mut MickyMatrix,
    planted: *mut *mut c_char,
) -> MickyStatus {
    guard(|| {
        let spec = if spec_json.is_null() {
            SynthSpec::default()
        } else {
            serde_json::from_str(str_arg(spec_json, "spec_json")?)?
        };
        if out.is_null() {
            return Err(null("out"));
        }
        let (m, id) = gen_matrix(&spec)?;
        if !planted.is_null() {
            planted.write(c_string(id)?);
        }
        write_out(out, Box::into_raw(Box::new(MickyMatrix(Arc::new(m)))), "out")
    })
}

/// # Safety
/// `matrix` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_free(matrix: *mut MickyMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_n_workloads(matrix: *const MickyMatrix, out: *mut usize) -> MickyStatus {
    guard(|| write_out(out, ref_arg(matrix, "matrix")?.0.n_workloads(), "out"))
}

/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_n_configs(matrix: *const MickyMatrix, out: *mut usize) -> MickyStatus {
    guard(|| write_out(out, ref_arg(matrix, "matrix")?.0.n_configs(), "out"))
}

/// Objective value of workload `w` on config `s`.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_objective(
    matrix: *const MickyMatrix,
    w: usize,
    s: usize,
    out: *mut f64,
) -> MickyStatus {
    guard(|| {
        let m = &ref_arg(matrix, "matrix")?.0;
        check_index(w, m.n_workloads(), "workload index")?;
        check_index(s, m.n_configs(), "config index")?;
        write_out(out, m.objective_at(w, s), "out")
    })
}

/// Objective of `s` on `w` divided by the best objective for `w`.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_normalized_performance(
    matrix: *const MickyMatrix,
    w: usize,
    s: usize,
    out: *mut f64,
) -> MickyStatus {
    guard(|| {
        let m = &ref_arg(matrix, "matrix")?.0;
        check_index(w, m.n_workloads(), "workload index")?;
        check_index(s, m.n_configs(), "config index")?;
        write_out(out, m.normalized_performance_at(w, s), "out")
    })
}

/// Id of config `s`, as a string the caller frees.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_config_id(
    matrix: *const MickyMatrix,
    s: usize,
    out: *mut *mut c_char,
) -> MickyStatus {
    guard(|| {
        let m = &ref_arg(matrix, "matrix")?.0;
        check_index(s, m.n_configs(), "config index")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, c_string(m.configs()[s].id.clone())?, "out")
    })
}

/// Id of workload `w`, as a string the caller frees.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_matrix_workload_id(
    matrix: *const MickyMatrix,
    w: usize,
    out: *mut *mut c_char,
) -> MickyStatus {
    guard(|| {
        let m = &ref_arg(matrix, "matrix")?.0;
        check_index(w, m.n_workloads(), "workload index")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, c_string(m.workloads()[w].clone())?, "out")
    })
}

/// Runs the collective optimizer. `policy_param` is epsilon for
/// epsilon-greedy, the temperature for softmax, and ignored for UCB1.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn micky_run_micky(
    matrix: *const MickyMatrix,
    policy: MickyPolicy,
    policy_param: f64,
    alpha: u32,
    beta: f64,
    reward_mode: MickyRewardMode,
    seed: u64,
    out: *mut *mut MickyRun,
) -> MickyStatus {
    guard(|| {
        let policy = match policy {
            MickyPolicy::Ucb1 => PolicySpec::Ucb1,
            MickyPolicy::EpsilonGreedy => PolicySpec::epsilon_greedy(policy_param)?,
            MickyPolicy::Softmax => PolicySpec::softmax(policy_param)?,
        };
        let reward_mode = match reward_mode {
            MickyRewardMode::Online => RewardMode::Online,
            MickyRewardMode::Oracle => RewardMode::Oracle,
        };
        let method = MethodSpec::Micky { policy, budget: Budget::new(alpha, beta)?, reward_mode };
        run_into(matrix, &method, seed, out)
    })
}

/// Runs any method described as JSON, e.g. `{"kind":"cherrypick"}` or
/// `{"kind":"random-k","k":4}`.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_run_method(
    matrix: *const MickyMatrix,
    method_json: *const c_char,
    seed: u64,
    out: *mut *mut MickyRun,
) -> MickyStatus {
    guard(|| {
        let method: MethodSpec = serde_json::from_str(str_arg(method_json, "method_json")?)?;
        run_into(matrix, &method, seed, out)
    })
}

unsafe fn run_into(
    matrix: *const MickyMatrix,
    method: &MethodSpec,
    seed: u64,
    out: *mut *mut MickyRun,
) -> FfiResult<()> {
    let m = &ref_arg(matrix, "matrix")?.0;
    if out.is_null() {
        return Err(null("out"));
    }
    let run = run_method(method, m, seed)?;
    let handle = MickyRun { matrix: Arc::clone(m), label: method.label(), run };
    write_out(out, Box::into_raw(Box::new(handle)), "out")
}

/// # Safety
/// `run` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn micky_run_free(run: *mut MickyRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Total measurements the run made.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_run_cost(run: *const MickyRun, out: *mut u64) -> MickyStatus {
    guard(|| write_out(out, ref_arg(run, "run")?.run.cost(), "out"))
}

/// Config index recommended for workload `w`. For collective runs this is
/// the exemplar for every workload.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_run_chosen(run: *const MickyRun, w: usize, out: *mut usize) -> MickyStatus {
    guard(|| {
        let r = ref_arg(run, "run")?;
        let n = r.matrix.n_workloads();
        check_index(w, n, "workload index")?;
        write_out(out, r.run.chosen(n)[w], "out")
    })
}

/// Run outcome as JSON, as a string the caller frees.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_run_to_json(run: *const MickyRun, out: *mut *mut c_char) -> MickyStatus {
    guard(|| {
        let r = ref_arg(run, "run")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, c_string(r.run.to_json(&r.matrix, &r.label)?)?, "out")
    })
}

/// Replicates a method `n_reps` times with seeds `base_seed + i` and writes
/// the aggregate report as JSON.
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_replicate(
    matrix: *const MickyMatrix,
    method_json: *const c_char,
    n_reps: usize,
    base_seed: u64,
    out_json: *mut *mut c_char,
) -> MickyStatus {
    guard(|| {
        let m = &ref_arg(matrix, "matrix")?.0;
        let method: MethodSpec = serde_json::from_str(str_arg(method_json, "method_json")?)?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let exp = replicate(&method, m, n_reps, base_seed)?;
        write_out(out_json, c_string(serde_json::to_string(&exp.report)?)?, "out_json")
    })
}

/// Smallest recurrence count at which a per-workload optimizer pays off,
/// or [`MICKY_KNEE_NEVER`].
///
/// # Safety
/// See the crate-level safety notes.
#[no_mangle]
pub unsafe extern "C" fn micky_knee_point(delta_p: f64, savings: f64, ratio: f64, out: *mut u64) -> MickyStatus {
    guard(|| {
        let k = match knee_point(&KneeInputs::new(delta_p, savings, ratio))? {
            Knee::Never => MICKY_KNEE_NEVER,
            Knee::After(k) => k,
        };
        write_out(out, k, "out")
    })
}
