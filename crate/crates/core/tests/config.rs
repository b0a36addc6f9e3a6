use std::f64::consts::PI;
use std::path::PathBuf;

use fdlpv_core::config::{PipelineConfig, PlantSource, CONFIG_VERSION};
use fdlpv_core::{workflow, Channel, Error, RationalTf, SchedulingKind};
use proptest::prelude::*;

const FS: f64 = 200.0;

fn config_error(text: &str) -> String {
    match PipelineConfig::from_toml(text) {
        Err(Error::Config(m)) => m,
        other => panic!("expected a configuration error for {text:?}, got {other:?}"),
    }
}

#[test]
fn empty_document_gives_the_defaults() {
    let cfg = PipelineConfig::from_toml("").unwrap();
    assert_eq!(cfg, PipelineConfig::default());
    assert_eq!(cfg.version, CONFIG_VERSION);
    assert_eq!(cfg.plant.source, PlantSource::Surrogate);
    assert_eq!(cfg.plant.points, vec![30.0, 40.0, 50.0]);
    assert_eq!(cfg.dataset_path(), PathBuf::from("out/dataset.csv"));
    assert_eq!(cfg.controller_path(), PathBuf::from("out/controller.json"));
}

#[test]
fn documented_example_parses() {
    let text = r#"
version = 1
seed = 7

[paths]
output_dir = "out"

[plant]
source = "surrogate"
points = [30.0, 40.0, 50.0]

[estimation]
samples = 65536
periods = 4
frequencies = 512

[obf]
pole = 0.7
order_n = 5
order_d = 5

[scheduling]
kind = "affine"
degree = 1

[weights.S]
domain = "s"
num = [0.6667, 4.712]
den = [1.0, 0.004712]

[weights.SG]
num = [1.0]
den = [1.0]

[weights.KS]
num = [0.1]
den = [1.0]

[weights.T]
num = [0.5]
den = [1.0]
"#;
    let cfg = PipelineConfig::from_toml(text).unwrap();
    assert_eq!(cfg.seed, 7);
    let w = cfg.weights(FS).unwrap();
    let tustin = RationalTf::tustin(&[0.6667, 4.712], &[1.0, 0.004712], FS).unwrap();
    let omegas = [1e-3, 0.1, 1.0, 3.0];
    let grid = fdlpv_core::FrequencyGrid::new(omegas.to_vec(), Some(FS)).unwrap();
    let got = w.get(Channel::S).eval(&grid).unwrap();
    for (a, b) in got.iter().zip(tustin.freq_response(&omegas)) {
        assert!((a - b).norm() < 1e-12 * b.norm());
    }
    let ks = w.get(Channel::KS).eval(&grid).unwrap();
    assert!(ks.iter().all(|v| (v.re - 0.1).abs() < 1e-15 && v.im == 0.0));
}

#[test]
fn toml_round_trip_preserves_a_modified_config() {
    let mut cfg = PipelineConfig::default();
    cfg.seed = 99;
    cfg.plant.points = vec![25.0, 35.0];
    cfg.obf.order_n = 3;
    cfg.obf.order_d = 4;
    cfg.synthesis.lti = true;
    cfg.synthesis.eps = Some(1e-6);
    cfg.estimation.segments = Some(8);
    let text = cfg.to_toml().unwrap();
    assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
}

#[test]
fn unknown_keys_are_rejected_in_every_section() {
    for text in ["typo = 1", "[plant]\npoint = [30.0]", "[obf]\norder = 4", "[synthesis]\ngama_max = 10.0"] {
        config_error(text);
    }
}

#[test]
fn invalid_values_are_reported_by_name() {
    let cases = [
        ("version = 2", "version"),
        ("[plant]\npoints = []", "plant.points"),
        ("[estimation]\nsamples = 1000\nperiods = 3", "periods"),
        ("[estimation]\nsegments = 7", "segments"),
        ("[estimation]\nfrequencies = 1", "estimation.frequencies"),
        ("[obf]\npole = 1.0", "obf.pole"),
        ("[obf]\norder_n = 6\norder_d = 5", "obf.order_d"),
        ("[synthesis]\ngamma_min = 10.0\ngamma_max = 1.0", "gamma_min"),
        ("[synthesis]\nbezout_tolerance = 0.0", "bezout_tolerance"),
        ("[analysis]\nmultiplier_pole = -1.5", "analysis.multiplier_pole"),
        ("[scenario]\nduration_s = 0.0", "scenario.duration_s"),
        ("[controller0]\ndomain = \"w\"\nnum = [1.0]\nden = [1.0]", "controller0"),
    ];
    for (text, needle) in cases {
        let m = config_error(text);
        assert!(m.contains(needle), "{text:?}: message {m:?} does not mention {needle}");
    }
}

#[test]
fn load_prefixes_errors_with_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[obf]\npole = 2.0\n").unwrap();
    match PipelineConfig::load(&path) {
        Err(Error::Config(m)) => assert!(m.starts_with(&path.display().to_string()), "{m}"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(PipelineConfig::load(&dir.path().join("missing.toml")).is_err());
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "seed = 3\n").unwrap();
    assert_eq!(PipelineConfig::load(&good).unwrap().seed, 3);
}

#[test]
fn derived_options_follow_the_config() {
    let cfg = PipelineConfig::from_toml(
        "seed = 11\n[estimation]\nsamples = 4096\nperiods = 2\nfrequencies = 64\nf_min_hz = 0.1\n\
         [synthesis]\nlti = true\nintegral_action = false\ntolerance = 0.01\n[obf]\npole = 0.6\norder_n = 2\norder_d = 3\n",
    )
    .unwrap();
    let est = cfg.estimation_options();
    assert_eq!((est.n_samples, est.segments, est.experiment.periods, est.experiment.seed), (4096, 2, 2, 11));
    let design = cfg.design_options();
    assert_eq!((design.scheduling_kind, design.scheduling_degree), (SchedulingKind::Constant, 0));
    assert_eq!((design.order_n, design.order_d, design.basis_pole), (2, 3, 0.6));
    assert!(!design.synthesis.integral_action);
    assert_eq!(design.synthesis.tolerance, 0.01);
    let grid = cfg.frequency_grid(FS).unwrap();
    assert_eq!(grid.len(), 64);
    assert!((grid.omegas()[0] - 2.0 * PI * 0.1 / FS).abs() < 1e-15);
    assert!((grid.omegas()[63] - PI).abs() < 1e-12);
    let analysis = cfg.analysis_options();
    assert_eq!(analysis.multiplier_order, cfg.analysis.multiplier_order);
}

#[test]
fn defaults_reproduce_the_built_in_pipeline() {
    let cfg = PipelineConfig::default();
    let k0 = cfg.controller0(FS).unwrap();
    assert_eq!(k0, workflow::default_controller0(FS).unwrap());
    let grid = cfg.frequency_grid(FS).unwrap();
    assert_eq!(grid.omegas(), workflow::default_grid(512, FS).unwrap().omegas());
    assert_eq!(cfg.weights(FS).unwrap(), workflow::default_weights(FS).unwrap());
    assert_eq!(cfg.design_options(), workflow::DesignOptions::default());
}

#[test]
fn full_scale_preset_keeps_the_config_valid() {
    let mut cfg = PipelineConfig::default();
    cfg.apply_full_scale();
    assert_eq!((cfg.estimation.samples, cfg.estimation.frequencies), (240_000, 1000));
    cfg.validate().unwrap();
}

proptest! {
    #[test]
    fn valid_configs_round_trip(
        seed in any::<u64>(),
        order_n in 0usize..6,
        extra in 0usize..3,
        pole in -0.95f64..0.95,
        points in proptest::collection::vec(20.0f64..60.0, 1..5),
    ) {
        let mut cfg = PipelineConfig::default();
        cfg.seed = seed;
        cfg.obf.order_n = order_n;
        cfg.obf.order_d = order_n + extra;
        cfg.obf.pole = pole;
        cfg.plant.points = points;
        let back = PipelineConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
