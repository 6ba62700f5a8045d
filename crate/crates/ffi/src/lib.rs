//! C ABI for `stochquad`.
//!
//! Objects are opaque handles created by `*_new` / `*_load` and released
//! with the matching `*_free`. Every fallible call returns an [`SqStatus`];
//! on failure, [`sq_last_error_message`] describes the most recent error on
//! the calling thread. Output pointers are written only on success unless a
//! function documents otherwise.
//!
//! Points are passed as `dim` consecutive doubles.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use stochquad::drm::Problem;
use stochquad::geometry::Point;
use stochquad::net::{self, NetworkParameters};
use stochquad::quadrature::{GlobalRule, RuleId};
use stochquad::rng::{purpose, substream, Stream};
use stochquad::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqStatus {
    Ok = 0,
    InvalidArgument = 1,
    ResourceExhausted = 2,
    NonFinite = 3,
    Io = 4,
    Format = 5,
    NullPointer = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A rule on its uniform mesh, with its own random stream.
pub struct SqGlobalRule {
    inner: GlobalRule,
    rng: Stream,
}

/// Trial-network parameters.
pub struct SqNetwork {
    inner: NetworkParameters,
}

/// Integrand callback: `x` points to `dim` coordinates.
pub type SqIntegrand = Option<extern "C" fn(x: *const f64, dim: u32, user_data: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: SqStatus, msg: impl Into<String>) -> SqStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> SqStatus {
    let status = match e {
        Error::InvalidArgument(_) => SqStatus::InvalidArgument,
        Error::ResourceExhausted { .. } => SqStatus::ResourceExhausted,
        Error::NonFinite { .. } => SqStatus::NonFinite,
        Error::Io { .. } => SqStatus::Io,
        Error::Format { .. } => SqStatus::Format,
    };
    fail(status, e.to_string())
}

/// Run `f`, turning panics into `SqStatus::Panic`.
fn guard(f: impl FnOnce() -> SqStatus) -> SqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SqStatus::Panic, "internal panic"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $( if $p.is_null() {
            return fail(SqStatus::NullPointer, concat!("null pointer: ", stringify!($p)));
        } )+
    };
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, SqStatus> {
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SqStatus::InvalidArgument, "string is not valid UTF-8"))
}

fn to_point(x: &[f64]) -> Point {
    let mut p = [0.0; 3];
    p[..x.len()].copy_from_slice(x);
    p
}

/// Length in bytes of the last error message, excluding the terminator.
#[no_mangle]
pub extern "C" fn sq_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copy the last error message into `buf` (NUL-terminated, truncated to
/// `len − 1` bytes). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn sq_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create `rule_id` (e.g. `"p2tri"`) on the uniform mesh with `n` cells per
/// axis (`n` points for `"mc"`), drawing from the stream of `seed`.
#[no_mangle]
pub unsafe extern "C" fn sq_global_rule_new(
    rule_id: *const c_char,
    dim: u32,
    n: usize,
    seed: u64,
    out: *mut *mut SqGlobalRule,
) -> SqStatus {
    non_null!(rule_id, out);
    guard(|| {
        let id: RuleId = match read_str(rule_id).map(str::parse) {
            Ok(Ok(id)) => id,
            Ok(Err(e)) => return from_error(e),
            Err(s) => return s,
        };
        match GlobalRule::new(id, dim as usize, n) {
            Ok(inner) => {
                let handle = Box::new(SqGlobalRule {
                    inner,
                    rng: substream(seed, purpose::TRAIN),
                });
                *out = Box::into_raw(handle);
                SqStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a rule handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sq_global_rule_free(rule: *mut SqGlobalRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Nodes per global draw.
#[no_mangle]
pub unsafe extern "C" fn sq_global_rule_points(rule: *const SqGlobalRule, out: *mut usize) -> SqStatus {
    non_null!(rule, out);
    *out = (*rule).inner.points();
    SqStatus::Ok
}

/// Spatial dimension of the rule.
#[no_mangle]
pub unsafe extern "C" fn sq_global_rule_dim(rule: *const SqGlobalRule, out: *mut u32) -> SqStatus {
    non_null!(rule, out);
    *out = (*rule).inner.rule.dim() as u32;
    SqStatus::Ok
}

/// One stochastic estimate of `∫_{[0,1]^d} f`.
#[no_mangle]
pub unsafe extern "C" fn sq_global_rule_integrate(
    rule: *mut SqGlobalRule,
    f: SqIntegrand,
    user_data: *mut c_void,
    out: *mut f64,
) -> SqStatus {
    non_null!(rule, out);
    let Some(f) = f else {
        return fail(SqStatus::NullPointer, "null pointer: f");
    };
    guard(|| {
        let h = &mut *rule;
        let d = h.inner.rule.dim();
        let call = |x: &Point| f(x.as_ptr(), d as u32, user_data);
        match h.inner.integrate(call, &mut h.rng) {
            Ok(v) => {
                *out = v;
                SqStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Draw one global sample into caller buffers: `nodes` holds
/// `capacity × dim` doubles, `weights` holds `capacity`. `written` receives
/// the node count; if it exceeds `capacity`, nothing is drawn and
/// `SQ_STATUS_BUFFER_TOO_SMALL` is returned.
#[no_mangle]
pub unsafe extern "C" fn sq_global_rule_sample(
    rule: *mut SqGlobalRule,
    nodes: *mut f64,
    weights: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> SqStatus {
    non_null!(rule, nodes, weights, written);
    guard(|| {
        let h = &mut *rule;
        let count = h.inner.points();
        *written = count;
        if count > capacity {
            return fail(SqStatus::BufferTooSmall, format!("need room for {count} nodes"));
        }
        let d = h.inner.rule.dim();
        match h.inner.sample(&mut h.rng) {
            Ok(s) => {
                for (j, (x, w)) in s.nodes.iter().zip(&s.weights).enumerate() {
                    ptr::copy_nonoverlapping(x.as_ptr(), nodes.add(j * d), d);
                    *weights.add(j) = *w;
                }
                SqStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Freshly initialised `d → 30 → 30 → 30 → 1` network.
#[no_mangle]
pub unsafe extern "C" fn sq_network_new(dim: u32, seed: u64, out: *mut *mut SqNetwork) -> SqStatus {
    non_null!(out);
    guard(|| {
        let mut rng = substream(seed, purpose::INIT);
        match NetworkParameters::for_dim(dim as usize, &mut rng) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SqNetwork { inner }));
                SqStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Load parameters saved as `.json` or binary.
#[no_mangle]
pub unsafe extern "C" fn sq_network_load(path: *const c_char, out: *mut *mut SqNetwork) -> SqStatus {
    non_null!(path, out);
    guard(|| {
        let p = match read_str(path) {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        match NetworkParameters::load(&p) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SqNetwork { inner }));
                SqStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn sq_network_save(net: *const SqNetwork, path: *const c_char) -> SqStatus {
    non_null!(net, path);
    guard(|| {
        let p = match read_str(path) {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        match (*net).inner.save(&p) {
            Ok(()) => SqStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Release a network handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sq_network_free(net: *mut SqNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sq_network_parameter_count(net: *const SqNetwork, out: *mut usize) -> SqStatus {
    non_null!(net, out);
    *out = (*net).inner.parameter_count();
    SqStatus::Ok
}

/// `u(x)` and, if `grad` is non-null, `∇u(x)` (`dim` doubles).
#[no_mangle]
pub unsafe extern "C" fn sq_network_evaluate(
    net: *const SqNetwork,
    x: *const f64,
    u: *mut f64,
    grad: *mut f64,
) -> SqStatus {
    non_null!(net, x, u);
    guard(|| {
        let p = &(*net).inner;
        let d = p.dim();
        let e = net::evaluate(p, &to_point(std::slice::from_raw_parts(x, d)));
        *u = e.u;
        if !grad.is_null() {
            ptr::copy_nonoverlapping(e.grad_u.as_ptr(), grad, d);
        }
        SqStatus::Ok
    })
}

/// Stochastic loss `Σ wⱼ(½|∇u|² + f u)` on one draw of `rule`, and its
/// parameter gradient written to `grad` (`sq_network_parameter_count` doubles;
/// may be null).
#[no_mangle]
pub unsafe extern "C" fn sq_network_loss(
    net: *const SqNetwork,
    rule: *mut SqGlobalRule,
    loss: *mut f64,
    grad: *mut f64,
) -> SqStatus {
    non_null!(net, rule, loss);
    guard(|| {
        let p = &(*net).inner;
        let h = &mut *rule;
        if h.inner.rule.dim() != p.dim() {
            return fail(SqStatus::InvalidArgument, "rule and network dimensions differ");
        }
        let problem = match Problem::new(p.dim()) {
            Ok(pr) => pr,
            Err(e) => return from_error(e),
        };
        let sample = match h.inner.sample(&mut h.rng) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        match net::grad_wrt_parameters(p, &sample.nodes, &sample.weights, |x| problem.forcing(x)) {
            Ok((l, g)) => {
                *loss = l;
                if !grad.is_null() {
                    ptr::copy_nonoverlapping(g.as_ptr(), grad, g.len());
                }
                SqStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Minimum of the continuum loss, `−½‖∇u*‖²`, for the manufactured problem.
#[no_mangle]
pub unsafe extern "C" fn sq_exact_loss_minimum(dim: u32, out: *mut f64) -> SqStatus {
    non_null!(out);
    match Problem::new(dim as usize) {
        Ok(p) => {
            *out = p.exact_loss_minimum();
            SqStatus::Ok
        }
        Err(e) => from_error(e),
    }
}
