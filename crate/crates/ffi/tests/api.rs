use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use causal_cert_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cc_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn switch_handle_lifecycle() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cc_process_switch(0.0, &mut p) }, CcStatus::Ok);
    assert!(!p.is_null());
    let (mut parties, mut dim) = (0, 0);
    assert_eq!(unsafe { cc_process_shape(p, &mut parties, &mut dim) }, CcStatus::Ok);
    assert_eq!((parties, dim), (4, 64));
    let mut v = CcValidity::default();
    assert_eq!(unsafe { cc_process_validate(p, &mut v) }, CcStatus::Ok);
    assert!(v.valid);
    assert!((v.trace - 8.0).abs() < 1e-12);
    assert_eq!(last_error(), "");
    unsafe { cc_process_free(p) };
    unsafe { cc_process_free(ptr::null_mut()) };
}

#[test]
fn load_bundled_and_missing_files() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/white_noise.json");
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cc_process_load(c.as_ptr(), &mut p) }, CcStatus::Ok);
    let mut v = CcValidity::default();
    assert_eq!(unsafe { cc_process_validate(p, &mut v) }, CcStatus::Ok);
    assert!(v.valid);
    unsafe { cc_process_free(p) };

    let missing = CString::new("/nonexistent/process.json").unwrap();
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { cc_process_load(missing.as_ptr(), &mut q) }, CcStatus::Io);
    assert!(q.is_null());
    assert!(last_error().contains("io error"));
}

#[test]
fn null_and_invalid_arguments() {
    assert_eq!(unsafe { cc_process_switch(0.0, ptr::null_mut()) }, CcStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cc_process_switch(-1.0, &mut p) }, CcStatus::InvalidArgument);
    assert_eq!(unsafe { cc_process_load(ptr::null(), &mut p) }, CcStatus::NullPointer);
    let mut v = CcValidity::default();
    assert_eq!(unsafe { cc_process_validate(ptr::null(), &mut v) }, CcStatus::NullPointer);
    let bad = CcSolveOptions {
        tol: 1e-7,
        max_iter: 100,
        alpha: 2.5,
    };
    let mut verdict = CcSeparability::Undecided;
    let mut ev = 0.0;
    assert_eq!(unsafe { cc_check_sep_switch(0.0, &bad, &mut verdict, &mut ev) }, CcStatus::InvalidArgument);
}

#[test]
fn separability_verdicts() {
    let mut verdict = CcSeparability::Undecided;
    let mut ev = 0.0;
    assert_eq!(unsafe { cc_check_sep_switch(0.0, ptr::null(), &mut verdict, &mut ev) }, CcStatus::Ok);
    assert_eq!(verdict, CcSeparability::InfeasibleWithCertificate);
    assert!(ev > 0.0);
    assert_eq!(unsafe { cc_check_sep_switch(0.7, ptr::null(), &mut verdict, &mut ev) }, CcStatus::Ok);
    assert_eq!(verdict, CcSeparability::Feasible);
    assert!(ev < 1e-7);
}

#[test]
fn threshold_bracket() {
    let mut iv = CcInterval::default();
    assert_eq!(unsafe { cc_switch_threshold(0.0, 1.0, 1e-2, ptr::null(), &mut iv) }, CcStatus::Ok);
    let target = 2.0 - 2f64.sqrt();
    assert!(iv.lo <= target && target <= iv.hi && iv.hi - iv.lo <= 1e-2);
    assert!(!iv.widened && iv.probes > 0);
    assert_eq!(unsafe { cc_switch_threshold(0.7, 1.0, 1e-2, ptr::null(), &mut iv) }, CcStatus::Precondition);
}

#[test]
fn chsh_reference() {
    let (mut v, mut b) = (0.0, 0.0);
    assert_eq!(unsafe { cc_extended_chsh_reference(&mut v, &mut b) }, CcStatus::Ok);
    assert!((v - 6.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(b, 6.0);
    assert_eq!(unsafe { cc_extended_chsh_reference(&mut v, ptr::null_mut()) }, CcStatus::Ok);
}

const C_CLIENT: &str = r#"#include "causal_cert.h"

int main(void) {
    CcProcess *p = NULL;
    CcValidity v;
    if (cc_process_switch(0.0, &p) != CC_STATUS_OK) {
        return 1;
    }
    CcStatus s = cc_process_validate(p, &v);
    cc_process_free(p);
    return s == CC_STATUS_OK && v.valid ? 0 : 1;
}
"#;

#[test]
fn header_declares_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/causal_cert.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "cc_process_switch",
        "cc_process_load",
        "cc_process_free",
        "cc_process_validate",
        "cc_switch_threshold",
        "cc_check_sep_switch",
        "cc_extended_chsh_reference",
        "cc_last_error_message",
        "CC_STATUS_NULL_POINTER",
    ] {
        assert!(text.contains(f), "{} missing from header", f);
    }
    // A C compiler is optional; syntax-check the header when one is present.
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(&src, C_CLIENT).unwrap();
    match std::process::Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(header.parent().unwrap()).arg(&src).output() {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(_) => {
            eprintln!("no C compiler found; header checks skipped");
            return;
        }
    }
    // Link against the static library built alongside this test and run the client.
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(Path::parent).map(|d| d.join("libcausal_cert_ffi.a"));
    let Some(lib) = lib.filter(|l| l.exists()) else {
        eprintln!("static library not found; link check skipped");
        return;
    };
    let bin = dir.path().join("use_header");
    let o = std::process::Command::new("cc")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::process::Command::new(&bin).status().unwrap().success());
}
