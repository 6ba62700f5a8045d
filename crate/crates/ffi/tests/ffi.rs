use std::ffi::{c_void, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use stochquad_ffi::*;

extern "C" fn linear(x: *const f64, dim: u32, _: *mut c_void) -> f64 {
    let x = unsafe { std::slice::from_raw_parts(x, dim as usize) };
    1.0 + x.iter().sum::<f64>()
}

extern "C" fn not_a_number(_: *const f64, _: u32, _: *mut c_void) -> f64 {
    f64::NAN
}

extern "C" fn count_calls(_: *const f64, _: u32, user: *mut c_void) -> f64 {
    unsafe { *(user as *mut usize) += 1 };
    0.0
}

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { sq_last_error_message(buf.as_mut_ptr() as *mut _, buf.len()) };
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

fn new_rule(id: &str, dim: u32, n: usize, seed: u64) -> *mut SqGlobalRule {
    let id = CString::new(id).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { sq_global_rule_new(id.as_ptr(), dim, n, seed, &mut out) },
        SqStatus::Ok
    );
    out
}

#[test]
fn rule_lifecycle_and_integration() {
    let rule = new_rule("p1tet", 3, 2, 3);
    unsafe {
        let mut points = 0;
        assert_eq!(sq_global_rule_points(rule, &mut points), SqStatus::Ok);
        assert_eq!(points, 2 * 2 * 2 * 5 * 4);
        let mut dim = 0;
        sq_global_rule_dim(rule, &mut dim);
        assert_eq!(dim, 3);
        let mut q = 0.0;
        assert_eq!(
            sq_global_rule_integrate(rule, Some(linear), ptr::null_mut(), &mut q),
            SqStatus::Ok
        );
        assert!((q - 2.5).abs() < 1e-12);
        let mut calls = 0usize;
        sq_global_rule_integrate(rule, Some(count_calls), &mut calls as *mut usize as *mut c_void, &mut q);
        assert_eq!(calls, points);
        sq_global_rule_free(rule);
    }
}

#[test]
fn same_seed_same_draws() {
    let (a, b) = (new_rule("p2tet", 3, 1, 9), new_rule("p2tet", 3, 1, 9));
    let mut na = vec![0.0; 65 * 3];
    let mut nb = na.clone();
    let (mut wa, mut wb) = (vec![0.0; 65], vec![0.0; 65]);
    let mut written = 0;
    unsafe {
        assert_eq!(
            sq_global_rule_sample(a, na.as_mut_ptr(), wa.as_mut_ptr(), 65, &mut written),
            SqStatus::Ok
        );
        sq_global_rule_sample(b, nb.as_mut_ptr(), wb.as_mut_ptr(), 65, &mut written);
        sq_global_rule_free(a);
        sq_global_rule_free(b);
    }
    assert_eq!(written, 65);
    assert_eq!(na, nb);
    assert_eq!(wa, wb);
}

#[test]
fn errors_set_status_and_message() {
    let id = CString::new("nope").unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(
            sq_global_rule_new(id.as_ptr(), 1, 4, 0, &mut out),
            SqStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert!(last_error().contains("unknown rule"));
        assert_eq!(
            sq_global_rule_new(ptr::null(), 1, 4, 0, &mut out),
            SqStatus::NullPointer
        );

        let rule = new_rule("p0", 1, 4, 0);
        let mut q = 7.0;
        assert_eq!(
            sq_global_rule_integrate(rule, Some(not_a_number), ptr::null_mut(), &mut q),
            SqStatus::NonFinite
        );
        assert_eq!(q, 7.0);
        assert_eq!(
            sq_global_rule_integrate(rule, None, ptr::null_mut(), &mut q),
            SqStatus::NullPointer
        );
        let mut written = 0;
        let mut buf = [0.0; 2];
        assert_eq!(
            sq_global_rule_sample(rule, buf.as_mut_ptr(), buf.as_mut_ptr(), 2, &mut written),
            SqStatus::BufferTooSmall
        );
        assert_eq!(written, 4);
        let mut m = 0.0;
        assert_eq!(sq_exact_loss_minimum(4, &mut m), SqStatus::InvalidArgument);
        sq_global_rule_free(rule);
        sq_global_rule_free(ptr::null_mut());
        sq_network_free(ptr::null_mut());
    }
    // truncated copy stays NUL-terminated
    let mut small = [1i8; 4];
    let full = unsafe { sq_last_error_message(small.as_mut_ptr() as *mut _, 4) };
    assert!(full > 3);
    assert_eq!(small[3], 0);
}

#[test]
fn network_round_trip_and_loss() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("net.bin").to_str().unwrap()).unwrap();
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(sq_network_new(1, 4, &mut net), SqStatus::Ok);
        let mut count = 0;
        sq_network_parameter_count(net, &mut count);
        assert_eq!(count, 1951);
        assert_eq!(sq_network_save(net, path.as_ptr()), SqStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(sq_network_load(path.as_ptr(), &mut back), SqStatus::Ok);
        let x = [0.3];
        let (mut u1, mut u2) = (0.0, 0.0);
        let mut g = [0.0];
        sq_network_evaluate(net, x.as_ptr(), &mut u1, g.as_mut_ptr());
        sq_network_evaluate(back, x.as_ptr(), &mut u2, ptr::null_mut());
        assert_eq!(u1, u2);
        assert!(g[0].is_finite());

        let rule = new_rule("p1", 1, 8, 2);
        let mut loss = 0.0;
        let mut grad = vec![0.0; count];
        assert_eq!(sq_network_loss(net, rule, &mut loss, grad.as_mut_ptr()), SqStatus::Ok);
        assert!(loss.is_finite() && grad.iter().any(|v| *v != 0.0));
        let rule2 = new_rule("p1tri", 2, 2, 2);
        assert_eq!(
            sq_network_loss(net, rule2, &mut loss, ptr::null_mut()),
            SqStatus::InvalidArgument
        );

        let missing = CString::new(dir.path().join("missing.json").to_str().unwrap()).unwrap();
        assert_eq!(sq_network_load(missing.as_ptr(), &mut back), SqStatus::Io);
        sq_network_free(net);
        sq_network_free(back);
        sq_global_rule_free(rule);
        sq_global_rule_free(rule2);
    }
}

#[test]
fn exact_loss_minimum_is_exposed() {
    let mut m = 0.0;
    assert_eq!(unsafe { sq_exact_loss_minimum(1, &mut m) }, SqStatus::Ok);
    assert!((m + 3.857_188_988_488_065).abs() < 1e-10);
}

/// Compile the C smoke program against the generated header and static library.
#[test]
fn c_program_links_against_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libstochquad_ffi.a");
    assert!(lib.is_file(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("run cc");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "smoke exited with {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
