use std::ffi::{CStr, CString};
use std::ptr;

use semiiv_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = siv_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn simulate(model: SivModel, c: f64, n: usize, seed: u64) -> *mut SivDataset {
    let mut ds = ptr::null_mut();
    let st = unsafe { siv_simulate(model, c, n, seed, false, &mut ds) };
    assert_eq!(st, SivStatus::Ok);
    assert!(!ds.is_null());
    ds
}

#[test]
fn linear_double_round_trip() {
    let ds = simulate(SivModel::DoubleInstrument, 1.0, 200, 3);
    assert_eq!(unsafe { siv_dataset_n_rows(ds) }, 200);
    let (z1, z2, x, y) = (cs("Z1"), cs("Z2"), cs("X"), cs("Y"));
    let mut report = ptr::null_mut();
    let st = unsafe { siv_linear_double_test(ds, z1.as_ptr(), z2.as_ptr(), x.as_ptr(), y.as_ptr(), ptr::null(), &mut report) };
    assert_eq!(st, SivStatus::Ok);
    let mut accepted = true;
    assert_eq!(unsafe { siv_report_decision(report, &mut accepted) }, SivStatus::Ok);
    assert!(!accepted);
    let json = unsafe { siv_report_to_json(report) };
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"schema_version\": 1"));
    assert!(text.contains("\"kind\": \"linear-double-instrument\""));
    unsafe {
        siv_string_free(json);
        siv_report_free(report);
        siv_dataset_free(ds);
    }
}

#[test]
fn manual_dataset_and_semi_test() {
    let n = 120;
    let z: Vec<f64> = (0..n).map(|i| 5.0 * i as f64 / n as f64).collect();
    let x: Vec<f64> = z.iter().enumerate().map(|(i, v)| v * v + ((i * 7919) % 13) as f64 / 13.0).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 2.0 * v + 1.0 + ((i * 104729) % 17) as f64 / 17.0).collect();
    let ds = siv_dataset_new();
    for (name, col) in [("Z", &z), ("X", &x), ("Y", &y)] {
        let name = cs(name);
        assert_eq!(unsafe { siv_dataset_add_column(ds, name.as_ptr(), col.as_ptr(), col.len()) }, SivStatus::Ok);
    }
    let mut cfg = siv_config_default();
    cfg.bootstrap_replicates = 100;
    cfg.seed = 5;
    let (zn, xn, yn) = (cs("Z"), cs("X"), cs("Y"));
    let mut report = ptr::null_mut();
    let st = unsafe { siv_semi_instrument_test(ds, zn.as_ptr(), xn.as_ptr(), yn.as_ptr(), &cfg, &mut report) };
    assert_eq!(st, SivStatus::Ok, "{}", last_error());
    let mut accepted = false;
    assert_eq!(unsafe { siv_report_decision(report, &mut accepted) }, SivStatus::Ok);
    unsafe {
        siv_report_free(report);
        siv_dataset_free(ds);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let ds = simulate(SivModel::SingleInstrument, 0.0, 100, 1);
    let (w, x, y) = (cs("W"), cs("X"), cs("Y"));
    let mut report = ptr::null_mut();
    let st = unsafe { siv_semi_instrument_test(ds, w.as_ptr(), x.as_ptr(), y.as_ptr(), ptr::null(), &mut report) };
    assert_eq!(st, SivStatus::MissingColumn);
    assert!(report.is_null());
    assert!(last_error().contains("`W`"));

    let st = unsafe { siv_semi_instrument_test(ds, ptr::null(), x.as_ptr(), y.as_ptr(), ptr::null(), &mut report) };
    assert_eq!(st, SivStatus::NullPointer);

    let mut cfg = siv_config_default();
    cfg.span = 0.0;
    let z = cs("Z");
    let st = unsafe { siv_semi_instrument_test(ds, z.as_ptr(), x.as_ptr(), y.as_ptr(), &cfg, &mut report) };
    assert_eq!(st, SivStatus::InvalidInput);

    let bad = [1.0, f64::NAN];
    let name = cs("bad");
    let fresh = siv_dataset_new();
    assert_eq!(unsafe { siv_dataset_add_column(fresh, name.as_ptr(), bad.as_ptr(), 2) }, SivStatus::InvalidInput);
    assert_eq!(unsafe { siv_dataset_add_column(ptr::null_mut(), name.as_ptr(), bad.as_ptr(), 2) }, SivStatus::NullPointer);

    let missing = cs("/nonexistent/file.csv");
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { siv_dataset_from_csv(missing.as_ptr(), &mut out) }, SivStatus::Io);
    assert!(out.is_null());

    // A successful call clears the previous message.
    let mut ok = ptr::null_mut();
    assert_eq!(unsafe { siv_simulate(SivModel::SingleInstrument, 0.0, 10, 1, true, &mut ok) }, SivStatus::Ok);
    assert!(siv_last_error_message().is_null());
    unsafe {
        siv_dataset_free(ok);
        siv_dataset_free(fresh);
        siv_dataset_free(ds);
        siv_report_free(ptr::null_mut());
        siv_string_free(ptr::null_mut());
    }
}

#[test]
fn csv_errors_report_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "Z,X,Y\n1,2,3\n4,,6\n").unwrap();
    let p = cs(path.to_str().unwrap());
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { siv_dataset_from_csv(p.as_ptr(), &mut out) }, SivStatus::Csv);
    let msg = last_error();
    assert!(msg.contains("row 3") && msg.contains("`X`"), "{msg}");
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/semiiv.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(status.success());
}
