//! C ABI for softquant.
//!
//! Every fallible function returns an [`SqStatus`]; on failure a message is
//! available from [`sq_last_error`] on the calling thread. Runs are opaque
//! [`SqRun`] handles created by `sq_run_from_*` and released with
//! [`sq_run_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use softquant::experiment::{self, parse_recipes, Recipe, RunOutcome};
use softquant::oracle::{closed_form_value, DiscreteInstance};
use softquant::softmin::{hard_assignment, smooth_min, softmin, Regularization, WeightedValues};
use softquant::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    NotExecuted = 4,
    BufferTooSmall = 5,
    Runtime = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: SqStatus, msg: impl Into<String>) -> SqStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> SqStatus {
    let status = match e {
        Error::InvalidConfig(_) | Error::InvalidSource(_) | Error::InvalidDistance(_) => {
            SqStatus::InvalidConfig
        }
        Error::Io(_) | Error::NoConvergence { .. } => SqStatus::Runtime,
        _ => SqStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> SqStatus) -> SqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SqStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(SqStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable values.
unsafe fn input<'a>(ptr: *const f64, len: usize, name: &str) -> Result<&'a [f64], SqStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(fail(SqStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, SqStatus> {
    if ptr.is_null() {
        return Err(fail(SqStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(SqStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn weighted(values: &[f64], weights: &[f64]) -> Result<WeightedValues, SqStatus> {
    WeightedValues::new(values.to_vec(), weights.to_vec()).map_err(from_error)
}

fn regularization(lambda: f64) -> Result<Regularization, SqStatus> {
    Regularization::new(lambda).map_err(from_error)
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(SqStatus::NullPointer, concat!(stringify!($p), " is null"));
        }
    };
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library from the
/// same thread.
#[no_mangle]
pub extern "C" fn sq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Smooth minimum of `n` values under probability weights; `lambda = 0`
/// gives the minimum over positively weighted values.
///
/// # Safety
/// `values` and `weights` must point to `n` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn sq_smooth_min(
    values: *const f64,
    weights: *const f64,
    n: usize,
    lambda: f64,
    out: *mut f64,
) -> SqStatus {
    guard(|| {
        out_ptr!(out);
        let v = try_status!(input(values, n, "values"));
        let w = try_status!(input(weights, n, "weights"));
        let wv = try_status!(weighted(v, w));
        let reg = try_status!(regularization(lambda));
        *out = smooth_min(&wv, reg);
        SqStatus::Ok
    })
}

/// Gibbs density `sigma_j` of `n` values, written to `out[0..n]`. Requires
/// `lambda > 0`.
///
/// # Safety
/// `values` and `weights` must point to `n` doubles, `out` to `n` writable ones.
#[no_mangle]
pub unsafe extern "C" fn sq_softmin(
    values: *const f64,
    weights: *const f64,
    n: usize,
    lambda: f64,
    out: *mut f64,
) -> SqStatus {
    guard(|| {
        out_ptr!(out);
        let v = try_status!(input(values, n, "values"));
        let w = try_status!(input(weights, n, "weights"));
        let wv = try_status!(weighted(v, w));
        let reg = try_status!(regularization(lambda));
        let sigma = try_status!(softmin(&wv, reg).map_err(from_error));
        slice::from_raw_parts_mut(out, n).copy_from_slice(&sigma);
        SqStatus::Ok
    })
}

/// Index of the smallest positively weighted value, lowest index on ties.
///
/// # Safety
/// `values` and `weights` must point to `n` doubles, `out` to one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn sq_hard_assignment(
    values: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut usize,
) -> SqStatus {
    guard(|| {
        out_ptr!(out);
        let v = try_status!(input(values, n, "values"));
        let w = try_status!(input(weights, n, "weights"));
        let wv = try_status!(weighted(v, w));
        *out = hard_assignment(&wv);
        SqStatus::Ok
    })
}

/// Optimal value of the regularized transport problem between `p` (length
/// `n`) and reference weights `q` (length `m`) for the row-major `n x m`
/// cost matrix.
///
/// # Safety
/// Pointers must reference `n`, `m` and `n * m` doubles; `out` one double.
#[no_mangle]
pub unsafe extern "C" fn sq_closed_form_value(
    p: *const f64,
    n: usize,
    q: *const f64,
    m: usize,
    cost: *const f64,
    lambda: f64,
    out: *mut f64,
) -> SqStatus {
    guard(|| {
        out_ptr!(out);
        let Some(nm) = n.checked_mul(m) else {
            return fail(SqStatus::InvalidArgument, "n * m overflows");
        };
        let p = try_status!(input(p, n, "p"));
        let q = try_status!(input(q, m, "q"));
        let c = try_status!(input(cost, nm, "cost"));
        let inst = try_status!(
            DiscreteInstance::new(p.to_vec(), q.to_vec(), c.to_vec(), lambda).map_err(from_error)
        );
        *out = closed_form_value(&inst);
        SqStatus::Ok
    })
}

/// One optimizer run at a fixed lambda and seed.
pub struct SqRun {
    recipe: Recipe,
    lambda: f64,
    seed: u64,
    outcome: Option<RunOutcome>,
}

fn new_run(mut recipe: Recipe, lambda: f64, seed: u64, iterations: u64) -> Result<SqRun, SqStatus> {
    if iterations > 0 {
        recipe.base.iterations = iterations;
        recipe.base.snapshot_every = 0;
    }
    recipe.lambdas = vec![lambda];
    recipe.replicates = 1;
    recipe.base.seed = seed;
    recipe.validate().map_err(from_error)?;
    Ok(SqRun {
        recipe,
        lambda,
        seed,
        outcome: None,
    })
}

/// # Safety
/// `out` must be a valid pointer.
unsafe fn emit(run: Result<SqRun, SqStatus>, out: *mut *mut SqRun) -> SqStatus {
    match run {
        Ok(r) => {
            *out = Box::into_raw(Box::new(r));
            SqStatus::Ok
        }
        Err(s) => s,
    }
}

/// Creates a run from a built-in recipe. `iterations = 0` keeps the
/// recipe's budget.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sq_run_from_recipe(
    name: *const c_char,
    lambda: f64,
    seed: u64,
    iterations: u64,
    out: *mut *mut SqRun,
) -> SqStatus {
    guard(|| {
        out_ptr!(out);
        *out = ptr::null_mut();
        let name = try_status!(text(name, "name"));
        let Some(recipe) = experiment::builtin(name) else {
            return fail(SqStatus::InvalidConfig, format!("unknown recipe {name:?}"));
        };
        emit(new_run(recipe, lambda, seed, iterations), out)
    })
}

/// Creates a run from the first recipe of a TOML recipe document.
/// `iterations = 0` keeps the document's budget.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sq_run_from_toml(
    toml: *const c_char,
    lambda: f64,
    seed: u64,
    iterations: u64,
    out: *mut *mut SqRun,
) -> SqStatus {
    guard(|| {
        out_ptr!(out);
        *out = ptr::null_mut();
        let doc = try_status!(text(toml, "toml"));
        let recipes = try_status!(parse_recipes(doc).map_err(from_error));
        let recipe = recipes
            .into_iter()
            .next()
            .expect("parser returns at least one recipe");
        emit(new_run(recipe, lambda, seed, iterations), out)
    })
}

/// Runs the optimizer; calling it again recomputes the same result.
///
/// # Safety
/// `run` must come from `sq_run_from_*` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn sq_run_execute(run: *mut SqRun) -> SqStatus {
    guard(|| {
        out_ptr!(run);
        let run = &mut *run;
        let center = try_status!(run.recipe.center().map_err(from_error));
        let outcome =
            try_status!(
                experiment::run_single(&run.recipe, run.lambda, run.seed, &center)
                    .map_err(from_error)
            );
        run.outcome = Some(outcome);
        SqStatus::Ok
    })
}

/// # Safety
/// `run` must be null or a live handle.
unsafe fn executed<'a>(run: *const SqRun) -> Result<&'a RunOutcome, SqStatus> {
    if run.is_null() {
        return Err(fail(SqStatus::NullPointer, "run is null"));
    }
    (*run)
        .outcome
        .as_ref()
        .ok_or_else(|| fail(SqStatus::NotExecuted, "run has not been executed"))
}

/// Number of atoms `m` and dimension `d` of the run.
///
/// # Safety
/// `run` must be a live handle; `m` and `dim` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sq_run_shape(
    run: *const SqRun,
    m: *mut usize,
    dim: *mut usize,
) -> SqStatus {
    guard(|| {
        out_ptr!(run);
        out_ptr!(m);
        out_ptr!(dim);
        let cfg = &(*run).recipe.base;
        *m = cfg.m;
        *dim = cfg.source.dim();
        SqStatus::Ok
    })
}

/// Final atom locations, row-major `m x d`, into `buf` of length `len`.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sq_run_locations(
    run: *const SqRun,
    buf: *mut f64,
    len: usize,
) -> SqStatus {
    guard(|| {
        out_ptr!(buf);
        let outcome = try_status!(executed(run));
        let flat: Vec<f64> = outcome
            .trajectory
            .final_state
            .locations()
            .iter()
            .flatten()
            .copied()
            .collect();
        if len < flat.len() {
            return fail(
                SqStatus::BufferTooSmall,
                format!("need {} doubles", flat.len()),
            );
        }
        slice::from_raw_parts_mut(buf, flat.len()).copy_from_slice(&flat);
        SqStatus::Ok
    })
}

/// Final atom weights into `buf` of length `len`.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sq_run_weights(run: *const SqRun, buf: *mut f64, len: usize) -> SqStatus {
    guard(|| {
        out_ptr!(buf);
        let outcome = try_status!(executed(run));
        let w = outcome.trajectory.final_state.weights();
        if len < w.len() {
            return fail(
                SqStatus::BufferTooSmall,
                format!("need {} doubles", w.len()),
            );
        }
        slice::from_raw_parts_mut(buf, w.len()).copy_from_slice(w);
        SqStatus::Ok
    })
}

/// Number of distinct final locations at the recipe's merge radius.
///
/// # Safety
/// `run` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sq_run_distinct_count(run: *const SqRun, out: *mut usize) -> SqStatus {
    guard(|| {
        out_ptr!(out);
        *out = try_status!(executed(run)).record.distinct_count;
        SqStatus::Ok
    })
}

/// Final objective at the run's lambda on the evaluation sample.
///
/// # Safety
/// `run` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sq_run_objective(run: *const SqRun, out: *mut f64) -> SqStatus {
    guard(|| {
        out_ptr!(out);
        *out = try_status!(executed(run)).record.final_objective_at_lambda;
        SqStatus::Ok
    })
}

/// Releases a run; null is ignored.
///
/// # Safety
/// `run` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sq_run_free(run: *mut SqRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
