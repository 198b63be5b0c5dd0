//! C ABI over the fillinglab core. Every call returns an `FlStatus`; the
//! message of the last failure on the calling thread is available from
//! `fl_last_error`. Handles are opaque and freed by their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fillinglab::cusped::{CuspedSpace, CuspedVertex};
use fillinglab::graph::{BallSnapshot, UNREACHED};
use fillinglab::group::{FillingSpec, GroupContext};
use fillinglab::quotient::{QuotientContextFull, DEFAULT_CERTIFY_RADIUS};
use fillinglab::scenario::{run_scenario, to_json, RunReport, Scenario};
use fillinglab::LabError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    UnknownFixture = 4,
    Budget = 5,
    Precondition = 6,
    OutOfRange = 7,
    Io = 8,
    Internal = 9,
}

/// A group fixture.
pub struct FlGroup {
    ctx: GroupContext,
}

/// A ball in the cusped space of a group.
pub struct FlBall {
    ball: BallSnapshot<CuspedVertex>,
}

/// The report of a scenario run.
pub struct FlReport {
    report: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: FlStatus, msg: impl Into<String>) -> FlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn status_of(e: &LabError) -> FlStatus {
    match e {
        LabError::Parse { .. } | LabError::UnknownGenerator(_) => FlStatus::Parse,
        LabError::UnknownFixture(_) => FlStatus::UnknownFixture,
        LabError::MemoryBudget { .. }
        | LabError::OrbitBudget(_)
        | LabError::SimplexBudget(_)
        | LabError::EnumerationBudget(_) => FlStatus::Budget,
        LabError::NotInBall | LabError::Uncertified(..) | LabError::EmptySphere(_) => FlStatus::OutOfRange,
        LabError::Io(_) => FlStatus::Io,
        LabError::Stage { source, .. } => status_of(source),
        _ => FlStatus::Precondition,
    }
}

fn guard(f: impl FnOnce() -> Result<(), FlStatus>) -> FlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(FlStatus::Internal, "panic inside fillinglab"),
    }
}

fn lab<T>(r: fillinglab::Result<T>) -> Result<T, FlStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, FlStatus> {
    if p.is_null() {
        return Err(fail(FlStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(FlStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, FlStatus> {
    p.as_ref().ok_or_else(|| fail(FlStatus::NullPointer, "null handle"))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), FlStatus> {
    if out.is_null() {
        return Err(fail(FlStatus::NullPointer, "null output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`) and returns its full length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn fl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads a named fixture (`FIX1`, `FIX2`, `FIX3`, `TREE`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_group_new(name: *const c_char, out: *mut *mut FlGroup) -> FlStatus {
    guard(|| {
        let ctx = lab(GroupContext::fixture(text(name)?))?;
        put(out, Box::into_raw(Box::new(FlGroup { ctx })))
    })
}

/// # Safety
/// `group` must come from `fl_group_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_group_free(group: *mut FlGroup) {
    if !group.is_null() {
        drop(Box::from_raw(group));
    }
}

/// Number of peripheral factors of the group.
///
/// # Safety
/// `group` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_group_peripherals(group: *const FlGroup, out: *mut usize) -> FlStatus {
    guard(|| put(out, deref(group)?.ctx.peripheral.len()))
}

/// Truncation depth of the `index`-th peripheral after filling along
/// `slopes` (one per peripheral).
///
/// # Safety
/// `slopes` must point to `count` integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_truncation_depth(
    group: *const FlGroup,
    slopes: *const i64,
    count: usize,
    index: usize,
    out: *mut u32,
) -> FlStatus {
    guard(|| {
        let g = deref(group)?;
        if slopes.is_null() && count > 0 {
            return Err(fail(FlStatus::NullPointer, "null slopes"));
        }
        let ns = if count == 0 { &[][..] } else { std::slice::from_raw_parts(slopes, count) };
        let spec = lab(FillingSpec::slopes(&g.ctx, ns))?;
        let q = lab(QuotientContextFull::new(&g.ctx, &spec, DEFAULT_CERTIFY_RADIUS))?;
        let p = *g.ctx.peripheral.get(index).ok_or_else(|| fail(FlStatus::OutOfRange, "peripheral index"))?;
        put(out, q.t_c(p).unwrap_or(0))
    })
}

/// Ball of radius `radius` around the identity of the cusped space.
///
/// # Safety
/// `group` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_ball_new(group: *const FlGroup, radius: u32, out: *mut *mut FlBall) -> FlStatus {
    guard(|| {
        let g = deref(group)?;
        let ball = lab(CuspedSpace::combinatorial(g.ctx.clone()).ball(CuspedVertex::identity(), radius))?;
        put(out, Box::into_raw(Box::new(FlBall { ball })))
    })
}

/// # Safety
/// `ball` must come from `fl_ball_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_ball_free(ball: *mut FlBall) {
    if !ball.is_null() {
        drop(Box::from_raw(ball));
    }
}

/// # Safety
/// `ball` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_ball_len(ball: *const FlBall, out: *mut usize) -> FlStatus {
    guard(|| put(out, deref(ball)?.ball.len()))
}

/// Distance inside the ball between vertices `i` and `j`.
///
/// # Safety
/// `ball` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_ball_distance(ball: *const FlBall, i: usize, j: usize, out: *mut u32) -> FlStatus {
    guard(|| {
        let b = &deref(ball)?.ball;
        if i >= b.len() || j >= b.len() {
            return Err(fail(FlStatus::OutOfRange, "vertex index"));
        }
        let d = b.row(i)[j];
        if d == UNREACHED {
            return Err(fail(FlStatus::OutOfRange, "vertices not connected inside the ball"));
        }
        put(out, d)
    })
}

/// Runs a scenario given as config text.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_scenario_run(config: *const c_char, out: *mut *mut FlReport) -> FlStatus {
    guard(|| {
        let sc = lab(Scenario::parse(text(config)?, None))?;
        let report = lab(run_scenario(&sc))?;
        put(out, Box::into_raw(Box::new(FlReport { report })))
    })
}

/// The report as JSON, timings left out. Free with `fl_string_free`.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_report_json(report: *const FlReport, out: *mut *mut c_char) -> FlStatus {
    guard(|| {
        let mut r = deref(report)?.report.clone();
        r.timings.clear();
        let s = lab(to_json(&r))?;
        let c = CString::new(s).map_err(|_| fail(FlStatus::Internal, "NUL inside JSON"))?;
        put(out, c.into_raw())
    })
}

/// # Safety
/// `report` must come from `fl_scenario_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_report_free(report: *mut FlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
