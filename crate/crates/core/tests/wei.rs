mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;

use wei_core::geometry::{rasterize_heightmap, Point3};
use wei_core::propagation::{fspl, knife_edge_loss, trace_paths, PathKind, TraceConfig};
use wei_core::wei::{
    data_quantity, distance_sentinel, effective_scatterers, extract, extract_s3, extract_s4, knowledge, semantics, Step, WeiPayload,
    NO_REFLECTION_DB,
};

use common::oracles::brute_force_effective_set;
use common::{boxed, empty_scene, random_links};

#[test]
fn effective_set_matches_brute_force() {
    let mut counts = [0usize; 4];
    for (scene, rx) in random_links(500, 500, 25) {
        let set = effective_scatterers(&scene, scene.tx, rx);
        let expected = brute_force_effective_set(&scene, scene.tx, rx);
        assert_eq!(set.members, expected, "rx {rx:?} in scene {}", scene.seed);
        assert!(set.blockers().all(|b| set.contains(b)));
        for (_, r) in &set.members {
            counts[0] += r.blocker as usize;
            counts[1] += r.fresnel as usize;
            counts[2] += r.reflector as usize;
            counts[3] += r.leg_blocker as usize;
        }
    }
    assert!(counts.iter().all(|&c| c > 0), "reason counts {counts:?}");
}

#[test]
fn blockage_zero_iff_line_of_sight() {
    let mut los = 0;
    for (scene, rx) in random_links(600, 400, 40) {
        let s3 = semantics(&scene, scene.tx, rx);
        let direct = &trace_paths(&scene, scene.tx, rx, &TraceConfig::default())[0];
        assert_eq!(s3.blockage == 0.0, direct.kind == PathKind::LoS);
        los += (direct.kind == PathKind::LoS) as usize;
    }
    assert!(los > 0 && los < 400);
}

#[test]
fn block_equals_penetration_gap() {
    for (scene, rx) in random_links(700, 400, 40) {
        let k = knowledge(&scene, scene.tx, rx);
        let direct = &trace_paths(&scene, scene.tx, rx, &TraceConfig::default())[0];
        let gap = direct.loss - fspl(scene.tx.distance(rx), scene.carrier_freq);
        assert!((k.block - gap).abs() < 1e-9, "block {} vs gap {gap}", k.block);
    }
}

#[test]
fn removing_outsiders_keeps_s3_and_s4() {
    let mut removed = 0;
    for (scene, rx) in random_links(800, 300, 30) {
        let set = effective_scatterers(&scene, scene.tx, rx);
        let mut reduced = scene.clone();
        reduced.buildings = scene.buildings.iter().enumerate().filter(|(i, _)| set.contains(*i)).map(|(_, b)| *b).collect();
        removed += scene.buildings.len() - reduced.buildings.len();
        assert_eq!(extract_s3(&scene, scene.tx, rx), extract_s3(&reduced, scene.tx, rx));
        assert_eq!(extract_s4(&scene, scene.tx, rx), extract_s4(&reduced, scene.tx, rx));
    }
    assert!(removed > 0);
}

#[test]
fn hand_built_blocker() {
    let mut scene = empty_scene(Point3::new(0.0, 0.0, 10.0));
    scene.buildings.push(boxed([20.0, -5.0, 0.0], [30.0, 5.0, 20.0], 10.0, 5.0));
    let rx = Point3::new(55.0, 0.0, 10.0);
    let s3 = semantics(&scene, scene.tx, rx);
    assert_abs_diff_eq!(s3.volume, 2000.0, epsilon = 1e-9);
    assert_abs_diff_eq!(s3.distance, 30.0, epsilon = 1e-6);
    assert_abs_diff_eq!(s3.blockage, 10.0, epsilon = 1e-9);
    let k = knowledge(&scene, scene.tx, rx);
    assert_abs_diff_eq!(k.block, 100.0, epsilon = 1e-9);
    let lambda = scene.wavelength();
    let nu = 10.0 * (2.0 * 55.0 / (lambda * 25.0 * 30.0)).sqrt();
    assert_abs_diff_eq!(k.diffr, knife_edge_loss(nu), epsilon = 1e-9);
    assert_eq!(k.refl, NO_REFLECTION_DB);
}

#[test]
fn empty_scene_sentinels() {
    let scene = empty_scene(Point3::new(0.0, 0.0, 30.0));
    let rx = Point3::new(40.0, 30.0, 1.5);
    let s3 = semantics(&scene, scene.tx, rx);
    assert_eq!((s3.volume, s3.distance, s3.blockage), (0.0, distance_sentinel(&scene), 0.0));
    let k = knowledge(&scene, scene.tx, rx);
    assert_eq!((k.refl, k.diffr, k.block), (NO_REFLECTION_DB, 0.0, 0.0));
}

#[test]
fn quantities_and_purity() {
    let links = random_links(900, 60, 60);
    let scene = &links[0].0;
    let raster = Arc::new(rasterize_heightmap(scene, 128, 128).unwrap());
    for step in Step::ALL {
        let forward: Vec<_> = links.iter().map(|(_, rx)| extract(step, scene, *rx, &raster)).collect();
        let backward: Vec<_> = links.iter().rev().map(|(_, rx)| extract(step, scene, *rx, &raster)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        for rec in &forward {
            assert_eq!(rec.quantity(), data_quantity(step, scene.buildings.len(), (128, 128)));
            if let WeiPayload::S4 { diffr, block, .. } = rec.payload {
                assert!(diffr >= 0.0 && block >= 0.0);
            }
        }
    }
    assert_eq!(data_quantity(Step::S1, 10, (128, 128)), 16_387);
    assert_eq!(data_quantity(Step::S1, 10, (499, 402)), 200_601);
    assert_eq!(data_quantity(Step::S2, 10, (128, 128)), 10);
}
