use std::ffi::{CStr, CString};
use std::ptr;

use skewersim_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sk_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(sk_version()) }.to_str().unwrap();
    assert_eq!(v, skewersim::VERSION);
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        assert_eq!(sk_policy_load(ptr::null(), ptr::null_mut()), SkStatus::NullPointer);
        assert!(last_error().contains("path"));
        let mut m = SkMetrics::default();
        assert_eq!(
            sk_run_plate(ptr::null(), ptr::null_mut(), 0, 3, &mut m),
            SkStatus::NullPointer
        );
        sk_policy_free(ptr::null_mut());
        sk_plate_free(ptr::null_mut());
        sk_plate_spec_free(ptr::null_mut());
        assert_eq!(sk_plate_item_count(ptr::null()), 0);
    }
}

#[test]
fn missing_checkpoint_is_io_error() {
    let path = CString::new("/nonexistent/policy.json").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { sk_policy_load(path.as_ptr(), &mut p) }, SkStatus::Io);
    assert!(p.is_null());
    assert!(last_error().contains("nonexistent"));
}

#[test]
fn checkpoint_round_trip_keeps_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.json");
    let model = skewersim::policy::PolicyModel::seeded(skewersim::policy::PolicyMode::HapticOnly, 4);
    model.checkpoint(4, serde_json::json!({})).save(&file).unwrap();
    let trace: Vec<f64> = (0..SK_TRACE_LEN).map(|i| i as f64 * 0.1).collect();
    unsafe {
        let c = CString::new(file.to_str().unwrap()).unwrap();
        let mut loaded = ptr::null_mut();
        assert_eq!(sk_policy_load(c.as_ptr(), &mut loaded), SkStatus::Ok);
        let mut fresh = ptr::null_mut();
        assert_eq!(sk_policy_new(SkMode::HapticOnly, 4, &mut fresh), SkStatus::Ok);
        let mut mode = SkMode::Multimodal;
        assert_eq!(sk_policy_mode(loaded, &mut mode), SkStatus::Ok);
        assert_eq!(mode, SkMode::HapticOnly);
        let mut out = [SkPrimitive::VerticalSkewer; 2];
        let mut probs = [[0.0; 2]; 2];
        for (k, h) in [loaded, fresh].into_iter().enumerate() {
            let s = sk_policy_infer(
                h,
                ptr::null(),
                0,
                trace.as_ptr(),
                trace.len(),
                &mut out[k],
                probs[k].as_mut_ptr(),
            );
            assert_eq!(s, SkStatus::Ok, "{}", last_error());
        }
        assert_eq!(out[0], out[1]);
        assert_eq!(probs[0], probs[1]);
        assert!((probs[0][0] + probs[0][1] - 1.0).abs() < 1e-12);
        sk_policy_free(loaded);
        sk_policy_free(fresh);
    }
}

#[test]
fn wrong_lengths_and_missing_inputs_are_rejected() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(sk_policy_new(SkMode::Multimodal, 1, &mut p), SkStatus::Ok);
        let mut out = SkPrimitive::VerticalSkewer;
        let short = vec![0.5; 10];
        assert_eq!(
            sk_policy_infer(
                p,
                short.as_ptr(),
                short.len(),
                ptr::null(),
                0,
                &mut out,
                ptr::null_mut()
            ),
            SkStatus::InvalidArgument
        );
        let img = vec![0.5; SK_IMAGE_SIZE * SK_IMAGE_SIZE * 3];
        assert_eq!(
            sk_policy_infer(p, img.as_ptr(), img.len(), ptr::null(), 0, &mut out, ptr::null_mut()),
            SkStatus::InvalidArgument
        );
        assert!(last_error().contains("trace"));
        sk_policy_free(p);
    }
}

#[test]
fn gradcheck_through_the_handle() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(sk_policy_new(SkMode::HapticOnly, 2, &mut p), SkStatus::Ok);
        let mut err = 1.0;
        assert_eq!(sk_policy_gradcheck(p, 3, &mut err), SkStatus::Ok);
        assert!(err < 1e-4, "{err}");
        sk_policy_free(p);
    }
}

#[test]
fn oracle_clears_an_evaluation_plate() {
    unsafe {
        assert_eq!(sk_evaluation_plate_count(), 6);
        let mut spec = ptr::null_mut();
        assert_eq!(sk_plate_spec_evaluation(2, &mut spec), SkStatus::Ok);
        let mut plate = ptr::null_mut();
        assert_eq!(sk_plate_spawn(spec, 7, &mut plate), SkStatus::Ok);
        assert_eq!(sk_plate_item_count(plate), 10);
        let mut m = SkMetrics::default();
        assert_eq!(sk_run_plate(spec, ptr::null_mut(), 7, 3, &mut m), SkStatus::Ok);
        assert!(m.items_acquired >= 9 && m.total_attempts >= m.items_acquired);
        let fails = m.miss + m.drop + m.unstable + m.damage + m.detection;
        assert_eq!(m.items_acquired + fails, m.total_attempts);
        assert_eq!(sk_run_plate(spec, ptr::null_mut(), 7, 0, &mut m), SkStatus::Config);
        assert_eq!(sk_plate_spec_evaluation(6, &mut spec), SkStatus::InvalidArgument);
        sk_plate_free(plate);
        sk_plate_spec_free(spec);
    }
}

#[test]
fn plate_spec_from_json_checks_archetypes() {
    let good = CString::new(r#"{"label":"x","archetypes":[{"name":"banana","count":2}],"plate_radius":0.12}"#).unwrap();
    let bad = CString::new(r#"{"label":"x","archetypes":[{"name":"durian","count":2}],"plate_radius":0.12}"#).unwrap();
    let junk = CString::new("{").unwrap();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(sk_plate_spec_from_json(good.as_ptr(), &mut s), SkStatus::Ok);
        sk_plate_spec_free(s);
        assert_eq!(sk_plate_spec_from_json(bad.as_ptr(), &mut s), SkStatus::Config);
        assert!(last_error().contains("durian"));
        assert_eq!(sk_plate_spec_from_json(junk.as_ptr(), &mut s), SkStatus::Checkpoint);
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/skewersim.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "sk_last_error",
        "sk_policy_load",
        "sk_policy_infer",
        "sk_run_plate",
        "SK_STATUS_OK",
        "SK_TRACE_LEN 26",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Syntax-check with the system C compiler when one is installed.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
