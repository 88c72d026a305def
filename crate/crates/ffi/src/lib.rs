//! C interface to the mapomdp planners.
//!
//! Every function returns a [`MapStatus`]; results travel through out
//! pointers. Handles are opaque and owned by the caller, who releases them
//! with the matching `*_free` function. After a failure,
//! [`map_last_error`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mapomdp::baseline::{plan_baseline, BaselinePlanner};
use mapomdp::modified_mdp::{self, GridMode, PlanConfig, PlanError, Planner};
use mapomdp::oracle::OracleError;
use mapomdp::pomdp::{load_pomdp, parse_pomdp, BeliefState, LoadOptions, ModelError, PomdpModel};

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// An argument was out of range or a string was not UTF-8.
    InvalidArgument = 2,
    /// The model text or JSON could not be parsed or failed validation.
    InvalidModel = 3,
    /// A state cap or expansion budget was exceeded.
    LimitExceeded = 4,
    /// Reading a file failed.
    Io = 5,
    /// Numerical failure while planning.
    PlanFailed = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// A loaded POMDP.
pub struct MapModel {
    inner: PomdpModel,
}

/// A policy on the coefficient grid.
pub struct MapPlanner {
    inner: Planner,
    num_states: usize,
    actions: Vec<String>,
}

/// A policy on the belief-simplex grid.
pub struct MapBaseline {
    inner: BaselinePlanner,
    num_states: usize,
    actions: Vec<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MapStatus, String);

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Io { .. } => MapStatus::Io,
            _ => MapStatus::InvalidModel,
        };
        Failure(status, e.to_string())
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let status = match e {
            PlanError::StateCap { .. } => MapStatus::LimitExceeded,
            PlanError::Mesh(_) | PlanError::Delta(_) => MapStatus::InvalidArgument,
            _ => MapStatus::PlanFailed,
        };
        Failure(status, e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let status = match e {
            OracleError::Budget { .. } => MapStatus::LimitExceeded,
            OracleError::Slack { .. } => MapStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> MapStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MapStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            MapStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure(MapStatus::NullPointer, "null pointer argument".into())
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(MapStatus::InvalidArgument, message.into())
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(null)
}

unsafe fn as_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string is not UTF-8"))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

unsafe fn belief(probs: *const f64, len: usize, num_states: usize) -> Result<BeliefState, Failure> {
    if probs.is_null() {
        return Err(null());
    }
    if len != num_states {
        return Err(invalid(format!("belief has {len} entries, model has {num_states} states")));
    }
    let v = std::slice::from_raw_parts(probs, len).to_vec();
    BeliefState::new(v).map_err(|e| invalid(e.to_string()))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| invalid("string contains a nul byte"))?;
    put(out, c.into_raw())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn map_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn map_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn map_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a model from a `.POMDP` file, or a JSON model when the path ends
/// in `.json`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_model_load(path: *const c_char, out: *mut *mut MapModel) -> MapStatus {
    guard(|| {
        let path = Path::new(as_str(path)?);
        let inner = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure(MapStatus::Io, format!("{}: {e}", path.display())))?;
            PomdpModel::from_json_str(&text)?
        } else {
            load_pomdp(path, LoadOptions::default())?
        };
        put(out, boxed(MapModel { inner }))
    })
}

/// Parses a model from `.POMDP` text.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_model_parse(text: *const c_char, out: *mut *mut MapModel) -> MapStatus {
    guard(|| {
        let inner = parse_pomdp(as_str(text)?, LoadOptions::default())?;
        put(out, boxed(MapModel { inner }))
    })
}

/// Parses a model from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_model_from_json(json: *const c_char, out: *mut *mut MapModel) -> MapStatus {
    guard(|| {
        let inner = PomdpModel::from_json_str(as_str(json)?)?;
        put(out, boxed(MapModel { inner }))
    })
}

/// Serializes a model to JSON; free the result with [`map_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_model_to_json(model: *const MapModel, out: *mut *mut c_char) -> MapStatus {
    guard(|| put_string(out, as_ref(model)?.inner.to_json_string()))
}

/// Number of states, actions and observations, and the discount factor.
/// Any of the out pointers may be null.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn map_model_shape(
    model: *const MapModel,
    states: *mut usize,
    actions: *mut usize,
    observations: *mut usize,
    discount: *mut f64,
) -> MapStatus {
    guard(|| {
        let m = &as_ref(model)?.inner;
        if !states.is_null() {
            states.write(m.num_states());
        }
        if !actions.is_null() {
            actions.write(m.num_actions());
        }
        if !observations.is_null() {
            observations.write(m.num_observations());
        }
        if !discount.is_null() {
            discount.write(m.discount());
        }
        Ok(())
    })
}

/// Releases a model. Planners built from it stay valid.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn map_model_free(model: *mut MapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds and solves the coefficient-grid MDP at mesh `epsilon`.
/// `state_cap` of zero keeps the default cap; `full_grid` enumerates the
/// whole lattice instead of the reachable part.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_plan(
    model: *const MapModel,
    epsilon: f64,
    vi_tol: f64,
    state_cap: usize,
    full_grid: bool,
    out: *mut *mut MapPlanner,
) -> MapStatus {
    guard(|| {
        let m = &as_ref(model)?.inner;
        if !(vi_tol.is_finite() && vi_tol > 0.0) {
            return Err(invalid(format!("vi_tol must be positive, got {vi_tol}")));
        }
        let mut cfg = PlanConfig::new(epsilon, vi_tol);
        if state_cap > 0 {
            cfg.grid.state_cap = state_cap;
        }
        if full_grid {
            cfg.grid.mode = GridMode::Full;
        }
        let inner = modified_mdp::plan(m, cfg)?;
        put(
            out,
            boxed(MapPlanner {
                inner,
                num_states: m.num_states(),
                actions: m.actions().to_vec(),
            }),
        )
    })
}

/// Rank of the basis, number of grid states and value at the start belief.
/// Any of the out pointers may be null.
///
/// # Safety
/// `planner` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn map_planner_summary(
    planner: *const MapPlanner,
    rank: *mut usize,
    grid_size: *mut usize,
    initial_value: *mut f64,
) -> MapStatus {
    guard(|| {
        let p = &as_ref(planner)?.inner;
        if !rank.is_null() {
            rank.write(p.spanner.rank());
        }
        if !grid_size.is_null() {
            grid_size.write(p.result.grid_size());
        }
        if !initial_value.is_null() {
            initial_value.write(p.result.value_at_initial());
        }
        Ok(())
    })
}

/// Action for the belief `probs[0..len]`.
///
/// # Safety
/// `planner` must be a live handle, `probs` must point to `len` doubles and
/// `action` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_planner_act(
    planner: *const MapPlanner,
    probs: *const f64,
    len: usize,
    action: *mut usize,
) -> MapStatus {
    guard(|| {
        let p = as_ref(planner)?;
        let b = belief(probs, len, p.num_states)?;
        put(action, p.inner.act(&b))
    })
}

/// Policy table as JSON; free the result with [`map_string_free`].
///
/// # Safety
/// `planner` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_planner_policy_json(planner: *const MapPlanner, out: *mut *mut c_char) -> MapStatus {
    guard(|| {
        let p = as_ref(planner)?;
        let json = serde_json::to_string(&p.inner.result.to_json(&p.actions)).map_err(|e| invalid(e.to_string()))?;
        put_string(out, json)
    })
}

/// # Safety
/// `planner` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn map_planner_free(planner: *mut MapPlanner) {
    if !planner.is_null() {
        drop(Box::from_raw(planner));
    }
}

/// Builds and solves the simplex-grid MDP; `1/delta` must be an integer.
/// `state_cap` of zero means no cap.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_baseline_plan(
    model: *const MapModel,
    delta: f64,
    vi_tol: f64,
    state_cap: usize,
    out: *mut *mut MapBaseline,
) -> MapStatus {
    guard(|| {
        let m = &as_ref(model)?.inner;
        if !(vi_tol.is_finite() && vi_tol > 0.0) {
            return Err(invalid(format!("vi_tol must be positive, got {vi_tol}")));
        }
        let cap = (state_cap > 0).then_some(state_cap);
        let inner = plan_baseline(m, delta, vi_tol, cap)?;
        put(
            out,
            boxed(MapBaseline {
                inner,
                num_states: m.num_states(),
                actions: m.actions().to_vec(),
            }),
        )
    })
}

/// Number of lattice points and value at the start belief; either out
/// pointer may be null.
///
/// # Safety
/// `baseline` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn map_baseline_summary(
    baseline: *const MapBaseline,
    grid_size: *mut usize,
    initial_value: *mut f64,
) -> MapStatus {
    guard(|| {
        let p = &as_ref(baseline)?.inner;
        if !grid_size.is_null() {
            grid_size.write(p.result.grid_size());
        }
        if !initial_value.is_null() {
            initial_value.write(p.result.value_at_initial());
        }
        Ok(())
    })
}

/// Action for the belief `probs[0..len]`.
///
/// # Safety
/// As [`map_planner_act`].
#[no_mangle]
pub unsafe extern "C" fn map_baseline_act(
    baseline: *const MapBaseline,
    probs: *const f64,
    len: usize,
    action: *mut usize,
) -> MapStatus {
    guard(|| {
        let p = as_ref(baseline)?;
        let b = belief(probs, len, p.num_states)?;
        put(action, p.inner.act(&b))
    })
}

/// Policy table as JSON; free the result with [`map_string_free`].
///
/// # Safety
/// `baseline` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn map_baseline_policy_json(baseline: *const MapBaseline, out: *mut *mut c_char) -> MapStatus {
    guard(|| {
        let p = as_ref(baseline)?;
        let json = serde_json::to_string(&p.inner.result.to_json(&p.actions)).map_err(|e| invalid(e.to_string()))?;
        put_string(out, json)
    })
}

/// # Safety
/// `baseline` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn map_baseline_free(baseline: *mut MapBaseline) {
    if !baseline.is_null() {
        drop(Box::from_raw(baseline));
    }
}

/// Optimal finite-horizon value at `probs[0..len]` with horizon chosen so
/// the truncation error is at most `slack`. `budget` of zero keeps the
/// default expansion budget.
///
/// # Safety
/// `model` must be a live handle, `probs` must point to `len` doubles and
/// `value` must be writable; `action` may be null.
#[no_mangle]
pub unsafe extern "C" fn map_oracle_value(
    model: *const MapModel,
    probs: *const f64,
    len: usize,
    slack: f64,
    budget: u64,
    value: *mut f64,
    action: *mut usize,
) -> MapStatus {
    use mapomdp::oracle::{horizon_for_slack, Oracle, OracleConfig};
    guard(|| {
        let m = &as_ref(model)?.inner;
        let b = belief(probs, len, m.num_states())?;
        if value.is_null() {
            return Err(null());
        }
        let horizon = horizon_for_slack(m.discount(), slack)?;
        let mut cfg = OracleConfig::default();
        if budget > 0 {
            cfg.budget = budget;
        }
        let (v, a) = Oracle::new(m, cfg).exact_value(&b, horizon)?;
        value.write(v);
        if !action.is_null() {
            action.write(a);
        }
        Ok(())
    })
}
