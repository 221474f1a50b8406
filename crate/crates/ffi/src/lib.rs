//! C interface to the planning pipeline.
//!
//! Domains and scenes are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns an
//! [`HpStatus`]; on failure a description is available from
//! [`hp_last_error`] on the same thread until the next failing call.
//! Strings returned through out-parameters must be released with
//! [`hp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use houseplan::pddl::{self, Domain};
use houseplan::pipeline::{self, PipelineError, PipelineOptions};
use houseplan::reward::{CompletionLabel, RewardBreakdown};
use houseplan::scene_graph::{self, SceneGraph};

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A domain, scene or policy output failed to parse.
    Parse = 3,
    /// Parsed fine, but some subtask has no plan.
    Infeasible = 4,
    /// An argument was outside its allowed range.
    InvalidArgument = 5,
    /// Internal failure; the library caught a panic.
    Internal = 6,
}

/// Opaque planning domain.
pub struct HpDomain(Domain);

/// Opaque scene graph.
pub struct HpScene(SceneGraph);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: HpStatus, msg: impl Into<String>) -> HpStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> HpStatus) -> HpStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(HpStatus::Internal, "internal failure"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, HpStatus> {
    if p.is_null() {
        return Err(fail(HpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The built-in household domain.
#[no_mangle]
pub extern "C" fn hp_domain_household() -> *mut HpDomain {
    Box::into_raw(Box::new(HpDomain(Domain::household())))
}

/// Parses a domain from PDDL text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hp_domain_parse(text: *const c_char, out: *mut *mut HpDomain) -> HpStatus {
    guard(|| {
        if out.is_null() {
            return fail(HpStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let text = match read_str(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match pddl::parse_domain(text) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(HpDomain(d)));
                HpStatus::Ok
            }
            Err(e) => fail(HpStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `domain` must come from this library and not have been freed. Null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn hp_domain_free(domain: *mut HpDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Parses a scene graph from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hp_scene_parse(json: *const c_char, out: *mut *mut HpScene) -> HpStatus {
    guard(|| {
        if out.is_null() {
            return fail(HpStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let json = match read_str(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match scene_graph::parse_scene_graph(json) {
            Ok(sg) => {
                *out = Box::into_raw(Box::new(HpScene(sg)));
                HpStatus::Ok
            }
            Err(e) => fail(HpStatus::Parse, e.to_string()),
        }
    })
}

/// Number of nodes in the scene, or 0 for null.
///
/// # Safety
/// `scene` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hp_scene_node_count(scene: *const HpScene) -> usize {
    scene.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `scene` must come from this library and not have been freed. Null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn hp_scene_free(scene: *mut HpScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Solves a policy output (trace and subgoal blocks) subtask by subtask
/// with default search settings. On `Ok` or `Infeasible`, `*plan_out`
/// receives the composed plan listing, which for an infeasible run covers
/// the subtasks solved before the failure.
///
/// # Safety
/// Handles must be live, `output` NUL-terminated, `plan_out` valid.
#[no_mangle]
pub unsafe extern "C" fn hp_solve(
    domain: *const HpDomain,
    scene: *const HpScene,
    output: *const c_char,
    plan_out: *mut *mut c_char,
) -> HpStatus {
    guard(|| {
        if plan_out.is_null() {
            return fail(HpStatus::NullArgument, "plan_out is null");
        }
        *plan_out = ptr::null_mut();
        let (Some(domain), Some(scene)) = (domain.as_ref(), scene.as_ref()) else {
            return fail(HpStatus::NullArgument, "domain or scene is null");
        };
        let text = match read_str(output, "output") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let parsed = match pipeline::parse_output(text) {
            Ok(o) => o,
            Err(e) => return fail(HpStatus::Parse, e.to_string()),
        };
        match pipeline::solve_sequence(&scene.0, &parsed, &domain.0, &PipelineOptions::default()) {
            Ok(r) => {
                *plan_out = into_c_string(pipeline::write_composed(&r));
                match &r.failure {
                    None => HpStatus::Ok,
                    Some(f) => fail(HpStatus::Infeasible, format!("subtask {}: {}", f.k, f.reason)),
                }
            }
            Err(e @ PipelineError::Output(_)) => fail(HpStatus::Parse, e.to_string()),
            Err(e) => fail(HpStatus::Infeasible, e.to_string()),
        }
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reward for a feasibility flag and a completion label
/// (0 = Bad, 1 = Normal, 2 = Good).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hp_reward(feasible: bool, label: u32, out: *mut f64) -> HpStatus {
    guard(|| {
        if out.is_null() {
            return fail(HpStatus::NullArgument, "out is null");
        }
        let label = match label {
            0 => CompletionLabel::Bad,
            1 => CompletionLabel::Normal,
            2 => CompletionLabel::Good,
            other => return fail(HpStatus::InvalidArgument, format!("unknown label {other}")),
        };
        *out = RewardBreakdown::new(feasible, label).reward;
        HpStatus::Ok
    })
}
