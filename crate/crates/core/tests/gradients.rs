mod common;

use chrono::{Days, NaiveDate};
use common::{central, fd_check_sequence, random_problem, FdReport};
use hydrosense::dataio::{
    generate_synthetic, ColumnStats, FeatureCatalog, FeatureEntry, FeatureGroup, StandardizedBasin,
    Standardizer, SynthConfig,
};
use hydrosense::ealstm::{forward, EaLstmParams};
use hydrosense::numcore::{Matrix, SeededRng};
use hydrosense::sensitivity::{basin_sensitivity, daily_static_gradients, run_pipeline, Regime};
use hydrosense::{DateRange, Error};

#[test]
fn backward_matches_finite_differences_on_several_shapes() {
    for (seed, h, n_s, n_d, t) in [
        (1, 3, 2, 1, 5),
        (2, 8, 5, 3, 16),
        (3, 5, 1, 4, 30),
        (4, 1, 1, 1, 1),
    ] {
        let (p, x_s, x_d) = random_problem(seed, h, n_s, n_d, t);
        let mut report = FdReport::default();
        fd_check_sequence(&p, &x_s, &x_d, &mut report);
        assert!(
            report.failures.is_empty(),
            "shape {:?}: {:?}",
            (h, n_s, n_d, t),
            &report.failures[..report.failures.len().min(5)]
        );
        assert_eq!(report.checked, p.num_values() + n_s + t * n_d);
    }
}

fn date(k: usize) -> NaiveDate {
    "2010-01-01".parse::<NaiveDate>().unwrap() + Days::new(k as u64)
}

fn fixture_basin(n_s: usize, days: usize, seed: u64) -> StandardizedBasin {
    let mut rng = SeededRng::new(seed);
    StandardizedBasin {
        id: format!("fx{seed}"),
        start: date(0),
        x_s: (0..n_s).map(|_| rng.normal()).collect(),
        forcing: Matrix::from_vec(days, 3, (0..days * 3).map(|_| rng.normal()).collect()).unwrap(),
        target: None,
    }
}

#[test]
fn daily_static_gradients_match_finite_differences() {
    let (p, _, _) = random_problem(7, 6, 4, 3, 1);
    let lookback = 12;
    let basin = fixture_basin(4, 40, 9);
    let range = DateRange::new(date(11), date(39)).unwrap();
    let grads = daily_static_gradients(&p, &basin, lookback, &range).unwrap();
    assert_eq!((grads.rows(), grads.cols()), (29, 4));
    let mut report = FdReport::default();
    for d in 0..grads.rows() {
        let end = 11 + d;
        let window = basin.forcing.row_block(end + 1 - lookback, end + 1);
        let mut xs = basin.x_s.clone();
        for k in 0..4 {
            let fd = central(&mut xs, k, &mut |v| forward(&p, v, window).unwrap().0);
            report.check(|| format!("day {d} feature {k}"), grads.get(d, k), fd);
        }
    }
    assert!(report.failures.is_empty(), "{:?}", report.failures);
}

#[test]
fn zero_input_gate_column_gives_zero_gradient_column() {
    let (mut p, _, _) = random_problem(8, 5, 3, 3, 1);
    for r in 0..5 {
        p.w_i.set(r, 1, 0.0);
    }
    let basin = fixture_basin(3, 50, 2);
    let grads = daily_static_gradients(&p, &basin, 10, &DateRange::new(date(9), date(49)).unwrap())
        .unwrap();
    for d in 0..grads.rows() {
        assert_eq!(grads.get(d, 1), 0.0);
        assert_ne!(grads.get(d, 0), 0.0);
    }
}

#[test]
fn doubling_the_head_doubles_every_gradient() {
    let (p, _, _) = random_problem(9, 4, 3, 3, 1);
    let mut doubled = p.clone();
    doubled.head_w.iter_mut().for_each(|w| *w *= 2.0);
    doubled.head_b *= 2.0;
    let basin = fixture_basin(3, 30, 4);
    let range = DateRange::new(date(7), date(29)).unwrap();
    let a = daily_static_gradients(&p, &basin, 8, &range).unwrap();
    let b = daily_static_gradients(&doubled, &basin, 8, &range).unwrap();
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        // Scaling by two is exact in binary floating point.
        assert_eq!(2.0 * x, *y);
    }
}

#[test]
fn non_finite_input_reports_the_day() {
    let (p, _, _) = random_problem(10, 4, 2, 3, 1);
    let mut basin = fixture_basin(2, 30, 5);
    basin.forcing.set(20, 1, f64::NAN);
    let err = daily_static_gradients(&p, &basin, 5, &DateRange::new(date(4), date(29)).unwrap())
        .unwrap_err();
    match err {
        Error::DayFault { date: d, .. } => assert_eq!(d, date(20)),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn range_without_full_lookback_is_rejected() {
    let (p, _, _) = random_problem(11, 4, 2, 3, 1);
    let basin = fixture_basin(2, 30, 5);
    assert!(
        daily_static_gradients(&p, &basin, 10, &DateRange::new(date(5), date(29)).unwrap())
            .is_err()
    );
}

/// Standardizer with identity static/dynamic statistics and real
/// per-basin discharge statistics.
fn identity_standardizer(
    catalog: &FeatureCatalog,
    basins: &[hydrosense::dataio::BasinRecord],
) -> Standardizer {
    let unit = |name: &str| ColumnStats {
        name: name.to_string(),
        mean: 0.0,
        std: 1.0,
    };
    Standardizer {
        static_stats: catalog.names().map(unit).collect(),
        dynamic_stats: ["prcp", "tmax", "tmin"].into_iter().map(unit).collect(),
        discharge_stats: basins
            .iter()
            .map(|b| {
                let q = b.discharge();
                let mean = q.iter().sum::<f64>() / q.len() as f64;
                let std =
                    (q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / q.len() as f64).sqrt();
                ColumnStats {
                    name: b.id().to_string(),
                    mean,
                    std,
                }
            })
            .collect(),
    }
}

#[test]
fn pipeline_null_feature_and_identical_basins() {
    let cfg = SynthConfig {
        basins: 3,
        days: 500,
        ..SynthConfig::default()
    };
    let (basins, catalog) = generate_synthetic(&cfg, 1).unwrap();
    let catalog = catalog
        .with_entry(FeatureEntry::new("null_feature", FeatureGroup::Vegetation))
        .unwrap();
    let basins: Vec<_> = basins
        .iter()
        .map(|b| {
            let mut x = b.static_features().to_vec();
            x.push(0.42);
            b.with_static_features(x).unwrap()
        })
        .collect();
    let n_s = catalog.len();
    let mut p = EaLstmParams::init(6, n_s, 3, 3);
    for r in 0..6 {
        p.w_i.set(r, n_s - 1, 0.0);
    }
    let std = identity_standardizer(&catalog, &basins);
    let out = run_pipeline(&p, &std, &basins, 20, None, &catalog).unwrap();
    assert_eq!(out.reports.len(), 6);
    for r in &out.reports {
        assert_eq!(r.raw_mean_abs_grad[n_s - 1], 0.0);
        assert_ne!(r.top_feature, "null_feature");
    }

    // A basin duplicated under the same id yields the same reports.
    let (a, _) = basin_sensitivity(&p, &std, &basins[1], 20, None, &catalog).unwrap();
    let (b, _) = basin_sensitivity(&p, &std, &basins[1], 20, None, &catalog).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].regime, Regime::Low);
    assert_eq!(a[1].regime, Regime::High);
}

#[test]
fn constant_discharge_basin_is_excluded_not_fatal() {
    let cfg = SynthConfig {
        basins: 2,
        days: 400,
        ..SynthConfig::default()
    };
    let (mut basins, catalog) = generate_synthetic(&cfg, 2).unwrap();
    let flat = &basins[1];
    basins[1] = hydrosense::dataio::BasinRecord::new(
        flat.id(),
        flat.static_features().to_vec(),
        flat.dynamic_names().to_vec(),
        flat.forcing().clone(),
        vec![1.5; flat.len()],
        flat.start(),
    )
    .unwrap();
    let mut std = identity_standardizer(&catalog, &basins[..1]);
    std.discharge_stats.push(ColumnStats {
        name: basins[1].id().to_string(),
        mean: 1.5,
        std: 1.0,
    });
    let p = EaLstmParams::init(4, catalog.len(), 3, 5);
    let out = run_pipeline(&p, &std, &basins, 15, None, &catalog).unwrap();
    assert_eq!(out.reports.len(), 2);
    assert_eq!(out.exclusions.len(), 1);
    assert_eq!(out.exclusions[0].basin_id, basins[1].id());
    assert_eq!(out.exclusions[0].regime, None);
    assert!(out.summary.regimes.iter().all(|s| s.basins == 1));
}
