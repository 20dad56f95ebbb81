use std::path::{Path, PathBuf};

use hydrosense::dataio::{
    generate_synthetic, load_basin, load_dataset, write_dataset, DatasetLayout, FeatureCatalog,
    FeatureGroup, Standardizer, SynthConfig,
};
use hydrosense::Error;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn three_day() -> (PathBuf, FeatureCatalog) {
    let root = fixtures().join("three_day");
    let catalog = FeatureCatalog::load(root.join("catalog.csv")).unwrap();
    (root, catalog)
}

fn load_with(
    forcing: &Path,
    discharge: &Path,
    attributes: &Path,
) -> hydrosense::Result<hydrosense::dataio::BasinRecord> {
    let (_, catalog) = three_day();
    load_basin(forcing, discharge, attributes, &catalog, "b01")
}

#[test]
fn three_day_fixture_loads() {
    let (root, catalog) = three_day();
    let layout = DatasetLayout::new(&root);
    assert_eq!(catalog.entry(0).group, FeatureGroup::Topography);
    let b = load_basin(
        layout.forcing("b01"),
        layout.discharge("b01"),
        layout.attributes(),
        &catalog,
        "b01",
    )
    .unwrap();
    assert_eq!(b.len(), 3);
    assert_eq!(b.id(), "b01");
    // Catalog order, not attribute-table column order.
    assert_eq!(b.static_features(), &[812.5, 0.18, 1.25]);
    assert_eq!(b.dynamic_names(), &["prcp", "tmax", "tmin"]);
    assert_eq!(b.forcing().row(1), &[12.25, 6.0, 0.5]);
    assert_eq!(b.discharge(), &[0.8, 2.6, 1.9]);
    assert_eq!(b.start().to_string(), "2001-03-01");
    assert_eq!(b.end().to_string(), "2001-03-03");
}

#[test]
fn missing_attribute_names_the_feature() {
    let (root, _) = three_day();
    let layout = DatasetLayout::new(&root);
    let err = load_with(
        &layout.forcing("b01"),
        &layout.discharge("b01"),
        &fixtures().join("bad/attributes_missing_clay.csv"),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("clay_frac"), "{msg}");
    assert!(msg.contains("attributes_missing_clay.csv"), "{msg}");
}

#[test]
fn date_gap_names_the_missing_date() {
    let (root, _) = three_day();
    let layout = DatasetLayout::new(&root);
    let err = load_with(
        &fixtures().join("bad/forcing_gap.csv"),
        &layout.discharge("b01"),
        &layout.attributes(),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("2001-03-02"), "{msg}");
    assert!(msg.contains("forcing_gap.csv:3"), "{msg}");
}

#[test]
fn negative_discharge_names_file_and_line() {
    let (root, _) = three_day();
    let layout = DatasetLayout::new(&root);
    let err = load_with(
        &layout.forcing("b01"),
        &fixtures().join("bad/discharge_negative.csv"),
        &layout.attributes(),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("discharge_negative.csv:3"), "{msg}");
    assert!(msg.contains("negative"), "{msg}");
}

#[test]
fn missing_value_is_rejected_not_imputed() {
    let (root, _) = three_day();
    let layout = DatasetLayout::new(&root);
    let err = load_with(
        &fixtures().join("bad/forcing_missing_value.csv"),
        &layout.discharge("b01"),
        &layout.attributes(),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("forcing_missing_value.csv:3"), "{msg}");
    assert!(msg.contains("prcp"), "{msg}");
}

#[test]
fn mismatched_date_ranges_are_rejected() {
    let (root, _) = three_day();
    let layout = DatasetLayout::new(&root);
    let err = load_with(
        &layout.forcing("b01"),
        &fixtures().join("bad/discharge_shifted.csv"),
        &layout.attributes(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Load { .. }), "{err}");
}

#[test]
fn missing_file_is_a_load_error() {
    let (root, _) = three_day();
    let layout = DatasetLayout::new(&root);
    let err = load_with(
        &layout.forcing("zz"),
        &layout.discharge("b01"),
        &layout.attributes(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("zz.csv"), "{err}");
}

#[test]
fn synthetic_dataset_round_trips_through_csv() {
    let cfg = SynthConfig {
        basins: 4,
        days: 800,
        ..SynthConfig::default()
    };
    let (basins, catalog) = generate_synthetic(&cfg, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &catalog, &basins).unwrap();

    let forcing_files = std::fs::read_dir(dir.path().join("forcing"))
        .unwrap()
        .count();
    assert_eq!(forcing_files, 4);
    assert!(dir.path().join("attributes.csv").is_file());

    let catalog_back = FeatureCatalog::load(dir.path().join("catalog.csv")).unwrap();
    assert_eq!(catalog_back, catalog);
    let loaded = load_dataset(dir.path(), &catalog_back).unwrap();
    assert_eq!(loaded.len(), basins.len());
    for (a, b) in loaded.iter().zip(&basins) {
        assert_eq!(a.id(), b.id());
        assert_eq!(a.start(), b.start());
        // `{}` formatting of f64 round-trips exactly.
        assert_eq!(a.static_features(), b.static_features());
        assert_eq!(a.forcing(), b.forcing());
        assert_eq!(a.discharge(), b.discharge());
        a.check_min_length(365).unwrap();
    }
}

#[test]
fn standardizer_fit_on_synthetic_pool_is_centered_and_invertible() {
    let cfg = SynthConfig {
        basins: 5,
        days: 400,
        ..SynthConfig::default()
    };
    let (basins, catalog) = generate_synthetic(&cfg, 9).unwrap();
    let s = Standardizer::fit(&basins, &catalog, None).unwrap();
    let z: Vec<_> = basins.iter().map(|b| s.apply(b).unwrap()).collect();

    for k in 0..catalog.len() {
        let col: Vec<f64> = z.iter().map(|b| b.x_s[k]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-12, "static {k} mean {mean}");
        assert!((var - 1.0).abs() < 1e-12, "static {k} var {var}");
    }
    for j in 0..3 {
        let col: Vec<f64> = z
            .iter()
            .flat_map(|b| (0..b.len()).map(move |d| b.forcing.get(d, j)))
            .collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-10, "dynamic {j} mean {mean}");
    }
    for (b, zb) in basins.iter().zip(&z) {
        let back = s.inverse_static(&zb.x_s);
        for (x, y) in back.iter().zip(b.static_features()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        let target = zb.target.as_ref().unwrap();
        for (d, q) in b.discharge().iter().enumerate().step_by(37) {
            let q_back = s.destandardize_discharge(b.id(), target[d]).unwrap();
            assert!((q_back - q).abs() <= 1e-12 * q.abs().max(1.0));
        }
    }
}
