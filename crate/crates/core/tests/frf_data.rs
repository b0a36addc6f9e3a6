mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::horner;
use fdlpv_core::frf::closed_loop_to_plant_with_threshold;
use fdlpv_core::{
    closed_loop_to_plant, etfe_estimate, load_dataset, save_dataset, Error, FrequencyGrid, FrfDataset, FrfResponse,
    RationalTf, SchedulingGrid, TimeRecord, Window,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn dataset(values: &[Vec<Vec<Complex64>>], omegas: Vec<f64>, points: Vec<f64>) -> FrfDataset {
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid = Arc::new(FrequencyGrid::new(omegas, None).unwrap());
    let sched = SchedulingGrid::new(points, (lo, hi)).unwrap();
    let channels: Vec<String> = (0..values[0].len()).map(|i| format!("ch{i}")).collect();
    let responses = values
        .iter()
        .map(|group| group.iter().map(|v| FrfResponse::new(v.clone(), grid.clone()).unwrap()).collect())
        .collect();
    FrfDataset::new(grid, sched, channels, responses).unwrap()
}

/// Bin frequencies `2 pi k / n` for `k in 1..n/2`.
fn bins(n: usize, step: usize) -> Arc<FrequencyGrid> {
    let omegas = (1..n / 2).step_by(step).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    Arc::new(FrequencyGrid::new(omegas, None).unwrap())
}

fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn three_point_dataset_round_trips_through_csv_and_json() {
    let omegas: Vec<f64> = (1..=1000).map(|k| k as f64 * PI / 1000.0).collect();
    let values: Vec<Vec<Vec<Complex64>>> = (0..3)
        .map(|pi| {
            (0..2)
                .map(|ci| omegas.iter().map(|w| c((w * (pi + 1) as f64).cos(), ci as f64 - w.sin())).collect())
                .collect()
        })
        .collect();
    let ds = dataset(&values, omegas, vec![30.0, 40.0, 50.0]);
    let dir = tempfile::tempdir().unwrap();
    for name in ["data.csv", "data.json"] {
        let path = dir.path().join(name);
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, ds, "{name}");
        assert_eq!(back.scheduling().len(), 3);
    }
    // 3000 rows per channel in the CSV form, plus the header.
    let text = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let rows = text.lines().skip(1).filter(|l| l.starts_with("ch0,")).count();
    assert_eq!(rows, 3000);
}

#[test]
fn block_with_a_different_grid_is_a_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let mut text = String::from("channel,p,omega,re,im\n");
    for w in [0.1, 0.2, 0.3] {
        text.push_str(&format!("G,30,{w},1,0\n"));
    }
    for w in [0.1, 0.25, 0.3] {
        text.push_str(&format!("G,40,{w},1,0\n"));
    }
    std::fs::write(&path, text).unwrap();
    match load_dataset(&path) {
        Err(Error::GridMismatch(msg)) => assert!(msg.contains("bad.csv:5"), "{msg}"),
        other => panic!("expected grid mismatch, got {other:?}"),
    }
}

#[test]
fn malformed_rows_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("channel,p,omega,re,im\nG,30,0.1,1,0\nG,30,0.2,oops,0\n", ":3"),
        ("channel,p,omega,re,im\nG,30,0.2,1,0\nG,30,0.1,1,0\n", ":3"),
        ("chan,p,omega,re,im\nG,30,0.2,1,0\n", ":1"),
        ("channel,p,omega,re,im\n", ":1"),
    ];
    for (i, (text, loc)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("case{i}.csv"));
        std::fs::write(&path, text).unwrap();
        match load_dataset(&path) {
            Err(Error::Parse { location, .. }) => assert!(location.ends_with(loc), "case {i}: {location}"),
            other => panic!("case {i}: expected parse error, got {other:?}"),
        }
    }
    assert!(matches!(load_dataset(&dir.path().join("absent.csv")), Err(Error::Io { .. })));
}

#[test]
fn missing_operating_point_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("partial.csv");
    std::fs::write(&path, "channel,p,omega,re,im\nS,30,0.1,1,0\nS,40,0.1,1,0\nSG,30,0.1,1,0\n").unwrap();
    assert!(matches!(load_dataset(&path), Err(Error::GridMismatch(_))));
}

#[test]
fn dataset_without_channels_cannot_be_built() {
    let grid = Arc::new(FrequencyGrid::new(vec![0.1], None).unwrap());
    let sched = SchedulingGrid::new(vec![30.0], (30.0, 50.0)).unwrap();
    assert!(FrfDataset::new(grid, sched, vec![], vec![vec![]]).is_err());
}

#[test]
fn impulse_in_and_out_gives_unit_response() {
    let n = 256;
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    let rec = TimeRecord::new(x, 1.0, "u").unwrap();
    let grid = bins(n, 1);
    let r = etfe_estimate(&rec, &rec, &grid, Window::Rectangular, 1).unwrap();
    for v in r.values() {
        assert!((v - c(1.0, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn one_sample_delay_gives_exponential_response() {
    let n = 512;
    let u = white(n, 7);
    // Circular delay, so the relation is exact at every bin.
    let y: Vec<f64> = (0..n).map(|k| u[(k + n - 1) % n]).collect();
    let grid = bins(n, 1);
    let r = etfe_estimate(
        &TimeRecord::new(u, 1.0, "u").unwrap(),
        &TimeRecord::new(y, 1.0, "y").unwrap(),
        &grid,
        Window::Rectangular,
        1,
    )
    .unwrap();
    for (v, &w) in r.values().iter().zip(grid.omegas()) {
        assert!((v - Complex64::from_polar(1.0, -w)).norm() < 1e-10, "omega {w}");
    }
}

#[test]
fn periodic_record_through_second_order_filter() {
    let period = 1024;
    let periods = 4;
    let tf = RationalTf::new(vec![0.2, 0.1], vec![1.0, -1.2, 0.52], 1.0).unwrap();
    let one = white(period, 11);
    // One extra leading period brings the filter into periodic steady state.
    let u: Vec<f64> = (0..period * (periods + 1)).map(|k| one[k % period]).collect();
    let y = tf.filter(&u);
    let (u, y) = (u[period..].to_vec(), y[period..].to_vec());
    let grid = bins(period, 3);
    let r = etfe_estimate(
        &TimeRecord::new(u, 1.0, "u").unwrap(),
        &TimeRecord::new(y, 1.0, "y").unwrap(),
        &grid,
        Window::Rectangular,
        periods,
    )
    .unwrap();
    for (v, &w) in r.values().iter().zip(grid.omegas()) {
        let z = Complex64::from_polar(1.0, w);
        let truth = horner(tf.num(), z) / horner(tf.den(), z);
        assert!((v - truth).norm() / truth.norm() < 1e-6, "omega {w}");
    }
}

#[test]
fn hann_window_estimate_is_close_for_long_records() {
    let n = 1 << 16;
    let tf = RationalTf::new(vec![0.5], vec![1.0, -0.6], 1.0).unwrap();
    let u = white(n, 5);
    let y = tf.filter(&u);
    let grid = Arc::new(FrequencyGrid::linspace(0.05, 3.0, 40, None).unwrap());
    let r = etfe_estimate(
        &TimeRecord::new(u, 1.0, "u").unwrap(),
        &TimeRecord::new(y, 1.0, "y").unwrap(),
        &grid,
        Window::Hann,
        32,
    )
    .unwrap();
    let truth = FrfResponse::new(tf.freq_response(grid.omegas()), grid.clone()).unwrap();
    assert!(r.max_relative_error(&truth, |_| true) < 0.02);
}

#[test]
fn etfe_rejects_inconsistent_records() {
    let a = TimeRecord::new(vec![1.0; 64], 1.0, "u").unwrap();
    let b = TimeRecord::new(vec![1.0; 63], 1.0, "y").unwrap();
    let other_rate = TimeRecord::new(vec![1.0; 64], 2.0, "y").unwrap();
    let grid = bins(64, 1);
    assert!(etfe_estimate(&a, &b, &grid, Window::Rectangular, 1).is_err());
    assert!(etfe_estimate(&a, &other_rate, &grid, Window::Rectangular, 1).is_err());
    assert!(etfe_estimate(&a, &a, &grid, Window::Rectangular, 5).is_err());
    assert!(TimeRecord::new(vec![f64::NAN], 1.0, "x").is_err());
    assert!(TimeRecord::new(vec![1.0], 0.0, "x").is_err());
}

#[test]
fn unexcited_frequencies_are_listed() {
    let n = 64;
    // A pure tone at bin 4 leaves every other bin without excitation.
    let u: Vec<f64> = (0..n).map(|k| (2.0 * PI * 4.0 * k as f64 / n as f64).cos()).collect();
    let rec = TimeRecord::new(u, 1.0, "u").unwrap();
    match etfe_estimate(&rec, &rec, &bins(n, 1), Window::Rectangular, 1) {
        Err(Error::NoExcitation(ws)) => assert_eq!(ws.len(), n / 2 - 2),
        other => panic!("expected missing excitation, got {other:?}"),
    }
}

#[test]
fn constant_sensitivity_returns_the_process_sensitivity() {
    let grid = bins(64, 1);
    let g = c(0.3, -1.1);
    let sens = FrfResponse::constant(c(1.0, 0.0), grid.clone()).unwrap();
    let ps = FrfResponse::constant(g, grid).unwrap();
    let plant = closed_loop_to_plant(&sens, &ps).unwrap();
    assert!(plant.values().iter().all(|v| *v == g));
}

#[test]
fn plant_recovered_from_analytic_closed_loop() {
    // G = 0.5 / (z - 0.9) with K0 = 1.
    let grid = Arc::new(FrequencyGrid::logspace(1e-3, PI, 300, None).unwrap());
    let g: Vec<Complex64> = grid.unit_circle().iter().map(|z| 0.5 / (z - 0.9)).collect();
    let s: Vec<Complex64> = g.iter().map(|g| 1.0 / (1.0 + g)).collect();
    let sg: Vec<Complex64> = g.iter().zip(&s).map(|(g, s)| g * s).collect();
    let plant = closed_loop_to_plant(
        &FrfResponse::new(s, grid.clone()).unwrap(),
        &FrfResponse::new(sg, grid.clone()).unwrap(),
    )
    .unwrap();
    for (est, truth) in plant.values().iter().zip(&g) {
        assert!((est - truth).norm() / truth.norm() < 1e-12);
    }
}

#[test]
fn small_sensitivity_is_reported_per_frequency() {
    let grid = Arc::new(FrequencyGrid::new(vec![0.1, 0.2, 0.3, 0.4], None).unwrap());
    let sens = FrfResponse::new(vec![c(1.0, 0.0), c(1e-10, 0.0), c(0.5, 0.0), c(0.0, 1e-9)], grid.clone()).unwrap();
    let ps = FrfResponse::constant(c(1.0, 0.0), grid.clone()).unwrap();
    match closed_loop_to_plant(&sens, &ps) {
        Err(Error::SmallSensitivity(ws)) => assert_eq!(ws, vec![0.2, 0.4]),
        other => panic!("expected small-sensitivity error, got {other:?}"),
    }
    assert!(closed_loop_to_plant_with_threshold(&sens, &ps, 1e-12).is_ok());
    let other_grid = Arc::new(FrequencyGrid::new(vec![0.1, 0.2, 0.3, 0.5], None).unwrap());
    let ps2 = FrfResponse::constant(c(1.0, 0.0), other_grid).unwrap();
    assert!(matches!(closed_loop_to_plant(&sens, &ps2), Err(Error::GridMismatch(_))));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1e-6..1e-6f64, Just(0.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn save_then_load_is_bit_exact(
        n_points in 1usize..4,
        n_channels in 1usize..3,
        n_freq in 1usize..12,
        seed in any::<u64>(),
        raw in proptest::collection::vec(finite(), 0..8),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut omegas: Vec<f64> = (0..n_freq).map(|_| rng.random_range(1e-4..PI)).collect();
        omegas.sort_by(f64::total_cmp);
        omegas.dedup();
        let points: Vec<f64> = (0..n_points).map(|i| 30.0 + 7.3 * i as f64).collect();
        let mut k = 0;
        let values: Vec<Vec<Vec<Complex64>>> = (0..n_points).map(|_| (0..n_channels).map(|_| {
            omegas.iter().map(|_| {
                k += 1;
                let extra = raw.get(k % raw.len().max(1)).copied().unwrap_or(0.0);
                c(rng.random_range(-10.0..10.0) + extra, rng.random::<f64>() * 1e-3)
            }).collect()
        }).collect()).collect();
        let ds = dataset(&values, omegas, points);
        let dir = tempfile::tempdir().unwrap();
        for name in ["d.csv", "d.json"] {
            let path = dir.path().join(name);
            save_dataset(&ds, &path).unwrap();
            prop_assert_eq!(&load_dataset(&path).unwrap(), &ds);
        }
    }

    #[test]
    fn plant_recovery_inverts_closed_loop_formation(
        g_re in -50.0..50.0f64, g_im in -50.0..50.0f64, k_re in -5.0..5.0f64, k_im in -5.0..5.0f64,
    ) {
        let g = c(g_re, g_im);
        let s = 1.0 / (1.0 + g * c(k_re, k_im));
        prop_assume!(s.norm().is_finite() && s.norm() > 1e-6);
        let grid = Arc::new(FrequencyGrid::new(vec![0.5], None).unwrap());
        let plant = closed_loop_to_plant(
            &FrfResponse::constant(s, grid.clone()).unwrap(),
            &FrfResponse::constant(g * s, grid).unwrap(),
        ).unwrap();
        prop_assert!((plant.values()[0] - g).norm() <= 1e-10 * g.norm().max(1.0));
    }
}
