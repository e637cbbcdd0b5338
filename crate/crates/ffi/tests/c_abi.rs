use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use entroscope_ffi::*;

fn ctx(bits: u32) -> *mut EntroscopeContext {
    let c = entroscope_context_new(bits);
    assert!(!c.is_null());
    c
}

fn last_error() -> String {
    let p = entroscope_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

#[test]
fn quad_entropy_round_trip() {
    let c = ctx(53);
    let mut out = EntroscopeEntropy::default();
    let code = unsafe { entroscope_quad_entropy(c, -2.0, &mut out) };
    assert_eq!(code, ENTROSCOPE_OK);
    assert!((out.value - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(out.error_radius > 0.0);
    unsafe { entroscope_context_free(c) };
}

#[test]
fn matches_library_directly() {
    let c = ctx(53);
    let mut out = EntroscopeEntropy::default();
    for a in [-1.9, -1.7548776662466927, -1.5, -1.3] {
        assert_eq!(unsafe { entroscope_quad_entropy(c, a, &mut out) }, ENTROSCOPE_OK);
        let direct = entroscope::entropy::quad_entropy_ctx(a, &entroscope::PrecisionContext::native()).unwrap();
        assert_eq!(out.value, direct.value);
        assert_eq!(out.superattracting, direct.superattracting);
    }
    unsafe { entroscope_context_free(c) };
}

#[test]
fn status_codes() {
    assert!(entroscope_context_new(7).is_null());
    assert!(last_error().contains("precision"));
    let c = ctx(53);
    let mut out = EntroscopeEntropy::default();
    assert_eq!(
        unsafe { entroscope_quad_entropy(c, 0.5, &mut out) },
        ENTROSCOPE_OUT_OF_RANGE
    );
    assert_eq!(
        unsafe { entroscope_quad_entropy(c, -1.5, ptr::null_mut()) },
        ENTROSCOPE_NULL_POINTER
    );
    assert_eq!(
        unsafe { entroscope_quad_entropy(ptr::null(), -1.5, &mut out) },
        ENTROSCOPE_NULL_POINTER
    );
    assert_eq!(
        unsafe { entroscope_tent_entropy(2.5, &mut out) },
        ENTROSCOPE_OUT_OF_RANGE
    );
    assert_eq!(
        unsafe { entroscope_context_set_depth(c, 0) },
        ENTROSCOPE_INVALID_ARGUMENT
    );
    unsafe { entroscope_context_free(c) };
    unsafe { entroscope_context_free(ptr::null_mut()) };
}

#[test]
fn tent_entropy_is_log_slope() {
    let mut out = EntroscopeEntropy::default();
    assert_eq!(unsafe { entroscope_tent_entropy(1.5, &mut out) }, ENTROSCOPE_OK);
    assert!((out.value - 1.5f64.ln()).abs() < 1e-15);
}

#[test]
fn kneading_buffer_protocol() {
    let c = ctx(53);
    let mut written = 0usize;
    let code = unsafe { entroscope_kneading(c, -2.0, 6, ptr::null_mut(), 0, &mut written) };
    assert_eq!(code, ENTROSCOPE_BUFFER_TOO_SMALL);
    assert_eq!(written, 6);
    let mut buf = vec![0 as std::ffi::c_char; written + 1];
    let code = unsafe { entroscope_kneading(c, -2.0, 6, buf.as_mut_ptr(), buf.len(), &mut written) };
    assert_eq!(code, ENTROSCOPE_OK);
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert_eq!(s, "LRRRRR");
    unsafe { entroscope_context_free(c) };
}

#[test]
fn lyapunov_at_chebyshev() {
    let c = ctx(53);
    let mut out = EntroscopeLyapunov::default();
    assert_eq!(unsafe { entroscope_lyapunov(c, -2.0, 200, &mut out) }, ENTROSCOPE_OK);
    assert!((out.last - 4f64.ln()).abs() < 1e-9);
    assert!(out.converged);
    unsafe { entroscope_context_free(c) };
}

#[test]
fn window_lookup() {
    let mut w = EntroscopeWindow::default();
    let mut found = false;
    assert_eq!(
        unsafe { entroscope_detect_window(-1.76, 6, &mut w, &mut found) },
        ENTROSCOPE_OK
    );
    assert!(found);
    assert_eq!(w.period, 3);
    assert!(w.left < -1.76 && -1.76 < w.right);
    assert_eq!(
        unsafe { entroscope_detect_window(-1.76, 6, &mut w, ptr::null_mut()) },
        ENTROSCOPE_NULL_POINTER
    );
}

#[test]
fn cascade_handle() {
    let c = ctx(53);
    let mut table = ptr::null_mut();
    assert_eq!(unsafe { entroscope_cascade_new(c, 4, &mut table) }, ENTROSCOPE_OK);
    assert_eq!(unsafe { entroscope_cascade_rows(table) }, 5);
    let (mut hi, mut lo) = (0.0, 0.0);
    assert_eq!(
        unsafe { entroscope_cascade_row(table, 0, &mut hi, &mut lo) },
        ENTROSCOPE_OK
    );
    assert_eq!(hi, -2.0);
    assert_eq!(
        unsafe { entroscope_cascade_row(table, 1, &mut hi, &mut lo) },
        ENTROSCOPE_OK
    );
    // first band merging: a³ + 2a² + 2a + 2 = 0
    assert!((hi * hi * hi + 2.0 * hi * hi + 2.0 * hi + 2.0).abs() < 1e-13);
    assert_eq!(
        unsafe { entroscope_cascade_row(table, 5, &mut hi, &mut lo) },
        ENTROSCOPE_INVALID_ARGUMENT
    );
    let mut acc = EntroscopeAccumulation::default();
    assert_eq!(
        unsafe { entroscope_cascade_accumulation(table, &mut acc) },
        ENTROSCOPE_OK
    );
    assert!((acc.value + 1.401155).abs() < 1e-3);
    unsafe { entroscope_cascade_free(table) };
    assert_eq!(unsafe { entroscope_cascade_rows(ptr::null()) }, 0);
    unsafe { entroscope_context_free(c) };
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_lists_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/entroscope.h")).unwrap();
    let src = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 12);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct EntroscopeContext EntroscopeContext;"));
    assert!(header.contains("#define ENTROSCOPE_OK 0"));
}

fn static_lib() -> Option<PathBuf> {
    // test binaries live in <target>/<profile>/deps
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libentroscope_ffi.a");
    lib.exists().then_some(lib)
}

fn have(tool: &str) -> bool {
    Command::new(tool)
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_and_runs() {
    if !have("cc") {
        eprintln!("skipping: no C compiler");
        return;
    }
    let include = crate_dir().join("include");
    let source = crate_dir().join("tests/c/smoke.c");
    let syntax = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&source)
        .status()
        .unwrap();
    assert!(syntax.success(), "header does not compile as C99");
    let Some(lib) = static_lib() else {
        eprintln!("skipping link step: static library not built");
        return;
    };
    let out_dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let exe = out_dir.join("entroscope_smoke");
    let build = Command::new("cc")
        .args(["-std=c99", "-I"])
        .arg(&include)
        .arg(&source)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(build.success(), "linking against the static library failed");
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    let (value, kneading) = stdout.trim().split_once(' ').unwrap();
    assert!((value.parse::<f64>().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(kneading, "LRRR");
}
