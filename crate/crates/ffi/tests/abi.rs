use std::ffi::{CStr, CString};
use std::ptr;

use softquant_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sq_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn softmin_functions() {
    let v = [3.0, 1.0, 1.0, 2.0];
    let w = [0.25; 4];
    let mut s = f64::NAN;
    let mut idx = usize::MAX;
    let mut sigma = [0.0; 4];
    unsafe {
        assert_eq!(
            sq_smooth_min(v.as_ptr(), w.as_ptr(), 4, 0.0, &mut s),
            SqStatus::Ok
        );
        assert_eq!(s, 1.0);
        assert_eq!(
            sq_hard_assignment(v.as_ptr(), w.as_ptr(), 4, &mut idx),
            SqStatus::Ok
        );
        assert_eq!(idx, 1);
        assert_eq!(
            sq_softmin(v.as_ptr(), w.as_ptr(), 4, 2.0, sigma.as_mut_ptr()),
            SqStatus::Ok
        );
    }
    let total: f64 = sigma.iter().zip(w).map(|(a, b)| a * b).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(last_error().is_empty());
}

#[test]
fn errors_are_reported() {
    let v = [1.0, 2.0];
    let mut s = 0.0;
    unsafe {
        assert_eq!(
            sq_smooth_min(ptr::null(), v.as_ptr(), 2, 1.0, &mut s),
            SqStatus::NullPointer
        );
        assert!(last_error().contains("values"));
        let bad = [0.7, 0.7];
        assert_eq!(
            sq_smooth_min(v.as_ptr(), bad.as_ptr(), 2, 1.0, &mut s),
            SqStatus::InvalidArgument
        );
        assert!(last_error().contains("sum"));
        let w = [0.5, 0.5];
        assert_eq!(
            sq_smooth_min(v.as_ptr(), w.as_ptr(), 2, -1.0, &mut s),
            SqStatus::InvalidArgument
        );
        assert_eq!(
            sq_smooth_min(v.as_ptr(), w.as_ptr(), 2, 1.0, ptr::null_mut()),
            SqStatus::NullPointer
        );
    }
}

#[test]
fn closed_form_matches_core() {
    let p = [0.3, 0.7];
    let q = [0.5, 0.5];
    let c = [0.0, 1.0, 1.0, 0.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            sq_closed_form_value(p.as_ptr(), 2, q.as_ptr(), 2, c.as_ptr(), 0.5, &mut out),
            SqStatus::Ok
        );
    }
    let inst =
        softquant::oracle::DiscreteInstance::new(p.to_vec(), q.to_vec(), c.to_vec(), 0.5).unwrap();
    assert_eq!(out, softquant::oracle::closed_form_value(&inst));
}

#[test]
fn run_handle_from_toml() {
    let doc = CString::new(
        r#"
[[recipe]]
name = "square"
lambdas = [0.0]
m = 3
[recipe.source]
kind = "uniform_box"
lo = [0.0, 0.0]
hi = [1.0, 1.0]
"#,
    )
    .unwrap();
    let mut run = ptr::null_mut();
    let (mut m, mut d, mut count) = (0, 0, 0);
    let mut locs = [0.0; 6];
    let mut w = [0.0; 3];
    let mut obj = f64::NAN;
    unsafe {
        assert_eq!(
            sq_run_from_toml(doc.as_ptr(), 5.0, 2, 3000, &mut run),
            SqStatus::Ok
        );
        assert_eq!(sq_run_shape(run, &mut m, &mut d), SqStatus::Ok);
        assert_eq!((m, d), (3, 2));
        assert_eq!(
            sq_run_weights(run, w.as_mut_ptr(), 3),
            SqStatus::NotExecuted
        );
        assert_eq!(sq_run_execute(run), SqStatus::Ok);
        assert_eq!(sq_run_locations(run, locs.as_mut_ptr(), 6), SqStatus::Ok);
        assert_eq!(sq_run_weights(run, w.as_mut_ptr(), 3), SqStatus::Ok);
        assert_eq!(sq_run_distinct_count(run, &mut count), SqStatus::Ok);
        assert_eq!(sq_run_objective(run, &mut obj), SqStatus::Ok);
        sq_run_free(run);
    }
    assert!(locs.iter().all(|x| (0.0..=1.0).contains(x)));
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert!((1..=3).contains(&count));
    assert!(obj.is_finite());

    let bad = CString::new("[[recipe]]\nname = 1\n").unwrap();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(
            sq_run_from_toml(bad.as_ptr(), 1.0, 1, 0, &mut run),
            SqStatus::InvalidConfig
        );
    }
    assert!(run.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(sq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
