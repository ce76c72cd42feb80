use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tsp_ffi::*;

fn tensor(m: usize, n: usize, l: usize, f: impl Fn(usize) -> f64) -> *mut TspTensor {
    let data: Vec<f64> = (0..m * n * l).map(f).collect();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { tsp_tensor_new(m, n, l, data.as_ptr(), data.len(), &mut out) }, TspStatus::Ok);
    out
}

fn entries(t: *const TspTensor) -> Vec<f64> {
    let (mut m, mut n, mut l) = (0, 0, 0);
    unsafe {
        assert_eq!(tsp_tensor_dims(t, &mut m, &mut n, &mut l), TspStatus::Ok);
        let mut buf = vec![0.0; m * n * l];
        assert_eq!(tsp_tensor_copy(t, buf.as_mut_ptr(), buf.len()), TspStatus::Ok);
        buf
    }
}

#[test]
fn tprod_matches_the_library() {
    let a = tensor(3, 2, 4, |i| (i as f64 * 0.37).sin());
    let b = tensor(2, 2, 4, |i| (i as f64 * 0.11).cos());
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(tsp_tprod(a, b, &mut c), TspStatus::Ok);
        let direct = tsp::algebra::tprod_oracle(
            &tsp::io::read_tensor(&*tensor_bytes(a)).unwrap(),
            &tsp::io::read_tensor(&*tensor_bytes(b)).unwrap(),
        )
        .unwrap();
        let got = entries(c);
        let (m, n, l) = direct.dims();
        for i in 0..m {
            for j in 0..n {
                for k in 0..l {
                    assert!((got[(i * n + j) * l + k] - direct.get(i, j, k)).abs() < 1e-12);
                }
            }
        }
        tsp_tensor_free(a);
        tsp_tensor_free(b);
        tsp_tensor_free(c);
    }
}

fn tensor_bytes(t: *const TspTensor) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.tns").to_str().unwrap()).unwrap();
    unsafe { assert_eq!(tsp_tensor_save(t, path.as_ptr()), TspStatus::Ok) };
    std::fs::read(dir.path().join("t.tns")).unwrap()
}

#[test]
fn solve_recovers_the_solution_and_reports_errors() {
    let a = tensor(8, 3, 3, |i| ((i * 7 + 3) % 11) as f64 - 5.0 + (i as f64).sin());
    let x = tensor(3, 2, 3, |i| i as f64 + 1.0);
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(tsp_tprod(a, x, &mut b), TspStatus::Ok);
        let method = CString::new("ATSP-PR-II").unwrap();
        let sketch = CString::new("fourier-row").unwrap();
        let mut o = tsp_solve_options_default();
        o.method = method.as_ptr();
        o.sketch = sketch.as_ptr();
        o.tol = 1e-10;
        let mut s = ptr::null_mut();
        assert_eq!(tsp_solve(a, b, x, &o, &mut s), TspStatus::Ok);
        let (mut iters, mut eps, mut conv) = (0usize, 1.0, false);
        assert_eq!(tsp_solution_summary(s, &mut iters, &mut eps, &mut conv), TspStatus::Ok);
        assert!(conv && eps < 1e-10 && iters > 0);
        let mut sol = ptr::null_mut();
        assert_eq!(tsp_solution_x(s, &mut sol), TspStatus::Ok);
        let (want, got) = (entries(x), entries(sol));
        assert!(want.iter().zip(&got).all(|(w, g)| (w - g).abs() < 1e-8));

        let bad = CString::new("NOPE").unwrap();
        o.method = bad.as_ptr();
        let mut s2 = ptr::null_mut();
        assert_eq!(tsp_solve(a, b, x, &o, &mut s2), TspStatus::InvalidArgument);
        assert!(s2.is_null());
        let msg = CStr::from_ptr(tsp_last_error()).to_str().unwrap();
        assert!(msg.contains("NOPE"), "{msg}");
        assert_eq!(tsp_solve(ptr::null(), b, x, &o, &mut s2), TspStatus::NullPointer);
        assert_eq!(tsp_tprod(x, x, &mut s2.cast()), TspStatus::DimensionMismatch);

        let mut json = ptr::null_mut();
        let mut o = tsp_solve_options_default();
        o.seed = 3;
        assert_eq!(tsp_rate_report_json(a, &o, 500, &mut json), TspStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert!(v["delta_p_sq"].as_f64().unwrap() > 0.0);
        tsp_string_free(json);

        for t in [a, x, b, sol] {
            tsp_tensor_free(t);
        }
        tsp_solution_free(s);
    }
}

#[test]
fn short_buffers_are_rejected() {
    let a = tensor(2, 2, 2, |i| i as f64);
    let mut buf = [0.0; 7];
    unsafe {
        assert_eq!(tsp_tensor_copy(a, buf.as_mut_ptr(), 7), TspStatus::BufferTooSmall);
        tsp_tensor_free(a);
    }
}

/// Compiles the C smoke program against the generated header and static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let libdir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = libdir.join("libtsp_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
