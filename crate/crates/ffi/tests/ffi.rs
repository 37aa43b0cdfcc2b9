use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use hma_ffi::*;

const FLAT: &str = r#"
name = "ffi_flat"
n = 2
[grid]
sizes = [8, 8, 8, 8]
[metric]
family = "flat_kahler"
[f]
normalization = "raw"
[[f.modes]]
k = [1, 0, 0, 0]
cos = 0.1
"#;

fn last_error() -> String {
    let p = hma_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn problem(text: &str) -> *mut HmaProblem {
    let toml = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { hma_problem_from_toml(toml.as_ptr(), &mut p) }, HmaStatus::Ok);
    p
}

#[test]
fn solve_round_trip() {
    let p = problem(FLAT);
    unsafe {
        assert_eq!(hma_problem_dimension(p), 2);
        assert_eq!(hma_problem_point_count(p), 4096);
        let mut s = ptr::null_mut();
        assert_eq!(hma_solve(p, 0.0, &mut s), HmaStatus::Ok);
        let mut stats = HmaSolveStats::default();
        assert_eq!(hma_solution_stats(s, &mut stats), HmaStatus::Ok);
        assert!(stats.final_residual <= 1e-10);
        assert_eq!(stats.phi_sup, 0.0);
        assert_eq!(stats.point_count, 4096);

        let mut phi = vec![f64::NAN; stats.point_count];
        assert_eq!(hma_solution_phi(s, phi.as_mut_ptr(), phi.len()), HmaStatus::Ok);
        assert!(phi.iter().all(|v| v.is_finite() && *v <= 0.0));
        assert_eq!(
            hma_solution_phi(s, phi.as_mut_ptr(), phi.len() - 1),
            HmaStatus::BufferTooSmall
        );
        assert!(last_error().contains("buffer"));

        let mut json = ptr::null_mut();
        let filter = CString::new("measure_bound,ricci_identity").unwrap();
        assert_eq!(hma_diagnose(p, s, filter.as_ptr(), &mut json), HmaStatus::Ok);
        let lines = CStr::from_ptr(json).to_str().unwrap().lines().count();
        assert_eq!(lines, 2);
        hma_string_free(json);

        hma_solution_free(s);
        hma_problem_free(p);
    }
}

#[test]
fn config_errors_carry_status_and_message() {
    let bad = FLAT.replace("[8, 8, 8, 8]", "[8, 7, 8, 8]");
    let toml = CString::new(bad).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { hma_problem_from_toml(toml.as_ptr(), &mut p) }, HmaStatus::Config);
    assert!(p.is_null());
    assert!(last_error().contains("grid.sizes"));

    let path = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_eq!(unsafe { hma_problem_load(path.as_ptr(), &mut p) }, HmaStatus::Io);
}

#[test]
fn null_handles_are_rejected() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hma_solve(ptr::null(), 0.0, &mut s) }, HmaStatus::NullPointer);
    assert_eq!(unsafe { hma_problem_from_toml(ptr::null(), &mut ptr::null_mut()) }, HmaStatus::NullPointer);
    assert_eq!(unsafe { hma_problem_point_count(ptr::null()) }, 0);
    unsafe {
        hma_problem_free(ptr::null_mut());
        hma_solution_free(ptr::null_mut());
        hma_string_free(ptr::null_mut());
    }
}

#[test]
fn gauduchon_of_flat_metric_is_zero() {
    let p = problem(FLAT);
    let mut u = vec![1.0; 4096];
    let mut residual = f64::NAN;
    unsafe {
        assert_eq!(hma_gauduchon(p, 0.0, u.as_mut_ptr(), u.len(), &mut residual), HmaStatus::Ok);
        hma_problem_free(p);
    }
    assert!(residual <= 1e-10);
    assert!(u.iter().all(|v| v.abs() <= 1e-12));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/hma.h");
    let src = format!("#include \"{header}\"\nint main(void) {{ return HMA_STATUS_OK; }}\n");
    let dir = std::env::temp_dir().join(format!("hma-ffi-header-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let c = dir.join("check.c");
    std::fs::write(&c, src).unwrap();
    let Ok(out) = Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg(&c).output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
