mod common;

use wei_core::experiments::{
    build_dataset, measure_latency, run_csi_experiment, run_pl_benchmark, CsiConfig, CsiMethod, Dataset, DatasetConfig, PlBenchConfig,
};
use wei_core::geometry::{generate_rx_set, RxLayout};
use wei_core::neuralnet::{build_model, ModelInput, ModelSpec, TrainConfig};
use wei_core::wei::Step;
use wei_core::Error;

use common::random_scene;

fn small_dataset(steps: &[Step]) -> Dataset {
    let scene = random_scene(6);
    let rx = generate_rx_set(&scene, &RxLayout::Uniform { count: 200 }, 1.5, 7).unwrap();
    let cfg = DatasetConfig { raster_dims: (32, 32), ..DatasetConfig::default() };
    build_dataset(&scene, &rx, steps, &cfg, 8).unwrap()
}

fn quick_train() -> TrainConfig {
    TrainConfig { epochs: 5, ..TrainConfig::default() }
}

#[test]
fn latency_is_stable_and_ordered() {
    let s4 = build_model::<f32>(&ModelSpec::for_step(Step::S4, 3, None, 1).unwrap()).unwrap();
    let s1 = build_model::<f32>(&ModelSpec::for_step(Step::S1, 3, Some((128, 128)), 1).unwrap()).unwrap();
    let x = [0.1f32, -0.4, 0.9];
    let raster = vec![0.5f32; 128 * 128];
    let run_s4 = || measure_latency(|| s4.forward(&ModelInput { raster: None, features: &x }), 1000).unwrap();
    let (a, b) = (run_s4(), run_s4());
    assert!(a.max(b) / a.min(b) < 1.5, "S4 medians {a} and {b}");
    let t1 = measure_latency(|| s1.forward(&ModelInput { raster: Some(&raster), features: &x }), 200).unwrap();
    assert!(a < t1 && b < t1, "S4 {a}/{b} vs S1 {t1}");
}

#[test]
fn pl_benchmark_report_is_complete_and_reproducible() {
    let ds = small_dataset(&Step::ALL);
    let cfg = PlBenchConfig { train: quick_train(), model_seed: 3, latency_reps: 100 };
    let (a, predictors) = run_pl_benchmark(&ds, &cfg).unwrap();
    assert_eq!(a.steps.len(), 4);
    assert_eq!(predictors.len(), 4);
    for (r, step) in a.steps.iter().zip(Step::ALL) {
        assert_eq!(r.step, step);
        assert!(r.latency_s > 0.0 && r.test_mse >= 0.0 && r.test_mse.is_finite());
    }
    assert_eq!(a.test_count, ds.split.test.len());
    let (b, _) = run_pl_benchmark(&ds, &cfg).unwrap();
    let mse = |r: &wei_core::experiments::PlBenchReport| r.steps.iter().map(|s| s.test_mse.to_bits()).collect::<Vec<_>>();
    assert_eq!(mse(&a), mse(&b));
    assert_eq!(a.config_hash, b.config_hash);
}

#[test]
fn pl_benchmark_needs_every_step() {
    let ds = small_dataset(&[Step::S3, Step::S4]);
    let cfg = PlBenchConfig { train: quick_train(), ..PlBenchConfig::default() };
    assert!(matches!(run_pl_benchmark(&ds, &cfg), Err(Error::InvalidConfig(_))));
}

#[test]
fn csi_report_is_consistent() {
    let ds = small_dataset(&[Step::S2, Step::S4]);
    let cfg = CsiConfig { ratios: vec![0.0625, 0.25, 1.0], snr_db: None, train: quick_train(), ..CsiConfig::default() };
    let report = run_csi_experiment(&ds, &cfg).unwrap();
    assert_eq!(report.curves.len(), 3);
    for method in CsiMethod::ALL {
        let curve = report.curve(method);
        assert_eq!(curve.points.len(), 3);
        assert!(curve.nmse_at(1.0).unwrap() <= -60.0, "{method}: {:?}", curve.points);
        let first = curve.points.iter().find(|p| p.nmse_db <= cfg.target_nmse_db).map(|p| p.ratio);
        assert_eq!(curve.min_ratio, first);
        assert_eq!(report.min_ratio(method).ok(), first);
    }
    let again = run_csi_experiment(&ds, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
    let csv = report.to_csv();
    assert!(csv.starts_with("method,ratio,nmse_db\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn unreachable_target_is_reported() {
    let ds = small_dataset(&[Step::S2, Step::S4]);
    let cfg = CsiConfig { ratios: vec![0.03125], target_nmse_db: -80.0, train: quick_train(), ..CsiConfig::default() };
    let report = run_csi_experiment(&ds, &cfg).unwrap();
    for method in CsiMethod::ALL {
        assert!(matches!(report.min_ratio(method), Err(Error::TargetUnreachable(_))));
    }
}
