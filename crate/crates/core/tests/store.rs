mod common;

use std::fs;
use std::path::Path;

use wei_core::experiments::{build_dataset, Dataset, DatasetConfig};
use wei_core::geometry::{generate_rx_set, RxLayout};
use wei_core::store::{load_dataset, read_manifest, save_dataset, DATASET_FORMAT, MANIFEST_FILE, RASTER_FILE, RECORDS_FILE, SCENE_FILE};
use wei_core::wei::Step;
use wei_core::Error;

use common::random_scene;

fn small_dataset(steps: &[Step]) -> Dataset {
    let scene = random_scene(2);
    let rx = generate_rx_set(&scene, &RxLayout::Uniform { count: 120 }, 1.5, 3).unwrap();
    let cfg = DatasetConfig { raster_dims: (32, 32), ..DatasetConfig::default() };
    build_dataset(&scene, &rx, steps, &cfg, 4).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap()).map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())).collect();
    out.sort();
    out
}

#[test]
fn round_trip_is_lossless_and_byte_stable() {
    let ds = small_dataset(&Step::ALL);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let manifest = save_dataset(a.path(), &ds).unwrap();
    assert_eq!(manifest.link_count, 120);
    assert_eq!(manifest.steps, Step::ALL.to_vec());
    assert_eq!(manifest.format_version, DATASET_FORMAT);

    let loaded = load_dataset(a.path()).unwrap();
    assert_eq!(loaded, ds);
    save_dataset(b.path(), &loaded).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, [MANIFEST_FILE, RASTER_FILE, RECORDS_FILE, SCENE_FILE]);
    assert_eq!(fa, fb);
}

#[test]
fn rebuilding_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    save_dataset(a.path(), &small_dataset(&Step::ALL)).unwrap();
    save_dataset(b.path(), &small_dataset(&Step::ALL)).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
}

#[test]
fn datasets_without_s1_have_no_raster() {
    let ds = small_dataset(&[Step::S3, Step::S4]);
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &ds).unwrap();
    assert!(!dir.path().join(RASTER_FILE).exists());
    assert_eq!(load_dataset(dir.path()).unwrap(), ds);
}

#[test]
fn truncated_records_report_an_offset() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &small_dataset(&Step::ALL)).unwrap();
    let path = dir.path().join(RECORDS_FILE);
    let bytes = fs::read(&path).unwrap();
    let cut = bytes.len() / 2;
    fs::write(&path, &bytes[..cut]).unwrap();
    match load_dataset(dir.path()) {
        Err(Error::Corrupt { offset, .. }) => assert!(offset <= bytes.len() as u64),
        other => panic!("expected Corrupt, got {other:?}"),
    }
}

#[test]
fn flipped_byte_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &small_dataset(&Step::ALL)).unwrap();
    let path = dir.path().join(RECORDS_FILE);
    let mut bytes = fs::read(&path).unwrap();
    let mid = bytes.len() / 3;
    bytes[mid] ^= 0x40;
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Corrupt { .. })));
}

#[test]
fn future_format_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &small_dataset(&Step::ALL)).unwrap();
    let path = dir.path().join(MANIFEST_FILE);
    let mut manifest: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    manifest["format_version"] = serde_json::json!(DATASET_FORMAT + 1);
    fs::write(&path, serde_json::to_vec(&manifest).unwrap()).unwrap();
    for result in [read_manifest(dir.path()).map(|_| ()), load_dataset(dir.path()).map(|_| ())] {
        match result {
            Err(Error::VersionMismatch { expected, found }) => assert_eq!((expected, found), (DATASET_FORMAT, DATASET_FORMAT + 1)),
            other => panic!("expected VersionMismatch, got {other:?}"),
        }
    }
}
