use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use hydrosense::checkpoint::Checkpoint;
use hydrosense::dataio::{ColumnStats, FeatureCatalog, FeatureEntry, FeatureGroup, Standardizer};
use hydrosense::ealstm::{backward, forward, EaLstmParams};
use hydrosense_ffi::*;

fn stats(name: &str) -> ColumnStats {
    ColumnStats {
        name: name.into(),
        mean: 0.0,
        std: 1.0,
    }
}

fn write_checkpoint(dir: &Path) -> (CString, EaLstmParams) {
    let params = EaLstmParams::init(4, 2, 3, 11);
    let catalog = FeatureCatalog::new(vec![
        FeatureEntry::new("a", FeatureGroup::Soil),
        FeatureEntry::new("b", FeatureGroup::Climate),
    ])
    .unwrap();
    let standardizer = Standardizer {
        static_stats: vec![stats("a"), stats("b")],
        dynamic_stats: vec![stats("p"), stats("t1"), stats("t2")],
        discharge_stats: vec![stats("x")],
    };
    let ck = Checkpoint::new(params.clone(), 5, catalog, standardizer).unwrap();
    let path = dir.join("m.ckpt");
    std::fs::write(&path, ck.to_text().unwrap()).unwrap();
    (CString::new(path.to_str().unwrap()).unwrap(), params)
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(hs_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(hs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn load_predict_and_gradient_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let (path, params) = write_checkpoint(dir.path());
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { hs_model_load(path.as_ptr(), &mut m) },
        HsStatus::Ok
    );
    assert!(!m.is_null());

    let (mut h, mut ns, mut nd, mut l) = (0, 0, 0, 0);
    assert_eq!(
        unsafe { hs_model_dims(m, &mut h, &mut ns, &mut nd, &mut l) },
        HsStatus::Ok
    );
    assert_eq!((h, ns, nd, l), (4, 2, 3, 5));
    assert_eq!(
        unsafe { hs_model_dims(m, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), &mut l) },
        HsStatus::Ok
    );

    let x_s = [0.3, -1.2];
    let x_d: Vec<f64> = (0..15).map(|k| (k as f64 * 0.7).sin()).collect();
    let (expected, cache) = forward(&params, &x_s, &x_d).unwrap();
    let expected_grad = backward(&cache, &params, 1.0).unwrap().d_xs;

    let mut y = f64::NAN;
    let status = unsafe { hs_model_predict(m, x_s.as_ptr(), 2, x_d.as_ptr(), 5, 3, &mut y) };
    assert_eq!(status, HsStatus::Ok);
    assert_eq!(y.to_bits(), expected.to_bits());

    let mut g = [0.0; 2];
    let mut y2 = 0.0;
    let status = unsafe {
        hs_model_static_gradient(
            m,
            x_s.as_ptr(),
            2,
            x_d.as_ptr(),
            5,
            3,
            &mut y2,
            g.as_mut_ptr(),
        )
    };
    assert_eq!(status, HsStatus::Ok);
    assert_eq!(y2.to_bits(), expected.to_bits());
    assert_eq!(g.to_vec(), expected_grad);

    let status = unsafe { hs_model_predict(m, x_s.as_ptr(), 3, x_d.as_ptr(), 5, 3, &mut y) };
    assert_eq!(status, HsStatus::InvalidArgument);
    assert!(last_error().contains("static"), "{}", last_error());

    let status = unsafe { hs_model_predict(m, ptr::null(), 2, x_d.as_ptr(), 5, 3, &mut y) };
    assert_eq!(status, HsStatus::NullPointer);

    let mut bad = x_d.clone();
    bad[7] = f64::NAN;
    let status = unsafe { hs_model_predict(m, x_s.as_ptr(), 2, bad.as_ptr(), 5, 3, &mut y) };
    assert_eq!(status, HsStatus::Numeric);

    unsafe { hs_model_free(m) };
    unsafe { hs_model_free(ptr::null_mut()) };
}

#[test]
fn load_failures_report_status_and_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("nope.ckpt").to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    let status = unsafe { hs_model_load(missing.as_ptr(), &mut m) };
    assert_ne!(status, HsStatus::Ok);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let garbage = dir.path().join("bad.ckpt");
    std::fs::write(&garbage, "not a checkpoint\n").unwrap();
    let garbage = CString::new(garbage.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { hs_model_load(garbage.as_ptr(), &mut m) },
        HsStatus::Parse
    );

    assert_eq!(
        unsafe { hs_model_load(ptr::null(), &mut m) },
        HsStatus::NullPointer
    );
    assert_eq!(
        unsafe {
            hs_model_dims(
                ptr::null(),
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
            )
        },
        HsStatus::NullPointer
    );
}

#[test]
fn percentiles_and_normalization() {
    let q: Vec<f64> = (1..=100).map(f64::from).collect();
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(
        unsafe { hs_flow_percentiles(q.as_ptr(), q.len(), &mut lo, &mut hi) },
        HsStatus::Ok
    );
    assert_eq!((lo, hi), (5.95, 95.05));
    assert_eq!(
        unsafe { hs_flow_percentiles(q.as_ptr(), 10, &mut lo, &mut hi) },
        HsStatus::Degenerate
    );

    let v = [2.0, 4.0, 3.0];
    let mut out = [9.0; 3];
    let mut flag = -1;
    assert_eq!(
        unsafe { hs_normalize_unit(v.as_ptr(), 3, out.as_mut_ptr(), &mut flag) },
        HsStatus::Ok
    );
    assert_eq!((out, flag), ([0.0, 1.0, 0.5], 0));
    let c = [7.0; 3];
    assert_eq!(
        unsafe { hs_normalize_unit(c.as_ptr(), 3, out.as_mut_ptr(), &mut flag) },
        HsStatus::Ok
    );
    assert_eq!((out, flag), ([0.0; 3], 1));
    assert_eq!(
        unsafe { hs_normalize_unit(v.as_ptr(), 0, out.as_mut_ptr(), &mut flag) },
        HsStatus::InvalidArgument
    );
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hydrosense.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "hs_model_load",
        "hs_model_static_gradient",
        "hs_normalize_unit",
        "HS_STATUS_PANIC",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"hydrosense.h\"\nint main(void) { HsModel *m = 0; return hs_model_load(\"x\", &m) == HS_STATUS_OK; }\n",
    )
    .unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let result = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(header.parent().unwrap())
            .arg(&src)
            .output();
        match result {
            Ok(out) => assert!(
                out.status.success(),
                "{compiler}: {}",
                String::from_utf8_lossy(&out.stderr)
            ),
            Err(e) => eprintln!("skipping {compiler}: {e}"),
        }
    }
}
