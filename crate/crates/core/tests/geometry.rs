mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::Rng;

use wei_core::geometry::{
    first_fresnel_radius, generate_scene, rasterize_heightmap, ray_chord_length, segment_box_distance, Building, Point3, SceneConfig,
};
use wei_core::Error;

use common::oracles::ray_march_chord;
use common::{boxed, random_point, rng};

#[test]
fn chord_matches_ray_march() {
    let mut r = rng(11);
    let mut hits = 0;
    for i in 0..1000 {
        let lo = random_point(&mut r, -3.0, 1.0);
        let size = Point3::new(r.gen_range(0.2..3.0), r.gen_range(0.2..3.0), r.gen_range(0.2..3.0));
        let b = Building::new(lo, lo + size, 1.0, 0.0);
        let p1 = random_point(&mut r, -5.0, 5.0);
        // Every other segment is aimed through an interior point.
        let p2 = if i % 2 == 0 {
            let c = lo + Point3::new(size.x * r.gen_range(0.0..1.0), size.y * r.gen_range(0.0..1.0), size.z * r.gen_range(0.0..1.0));
            p1 + (c - p1) * r.gen_range(1.0..2.5)
        } else {
            random_point(&mut r, -5.0, 5.0)
        };
        let exact = ray_chord_length(p1, p2, &b);
        let marched = ray_march_chord(p1, p2, &b, 1e-4);
        assert!((exact - marched).abs() < 1e-3, "chord {exact} vs march {marched} for {p1:?} -> {p2:?} in {b:?}");
        if exact > 0.0 {
            hits += 1;
        }
    }
    assert!(hits > 200, "only {hits} of 1000 segments intersect");
}

#[test]
fn generated_buildings_do_not_overlap() {
    let scene = generate_scene(&SceneConfig::default(), 1).unwrap();
    assert_eq!(scene.buildings.len(), 10);
    for (i, a) in scene.buildings.iter().enumerate() {
        for b in &scene.buildings[i + 1..] {
            let apart = a.max_corner.x <= b.min_corner.x
                || b.max_corner.x <= a.min_corner.x
                || a.max_corner.y <= b.min_corner.y
                || b.max_corner.y <= a.min_corner.y;
            assert!(apart, "{a:?} overlaps {b:?}");
        }
        assert!(a.min_corner.x >= 0.0 && a.max_corner.x <= 200.0);
        assert!(a.min_corner.y >= 0.0 && a.max_corner.y <= 200.0);
        assert_eq!(a.min_corner.z, scene.ground_z);
    }
}

#[test]
fn scene_generation_is_deterministic() {
    let cfg = SceneConfig::default();
    let a = serde_json::to_vec(&generate_scene(&cfg, 42).unwrap()).unwrap();
    let b = serde_json::to_vec(&generate_scene(&cfg, 42).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_vec(&generate_scene(&cfg, 43).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn overcrowded_extent_is_infeasible() {
    let cfg = SceneConfig { building_count: 200, footprint: [40.0, 60.0], ..SceneConfig::default() };
    match generate_scene(&cfg, 1) {
        Err(Error::PlacementInfeasible { placed, requested, .. }) => {
            assert_eq!(requested, 200);
            assert!(placed < 200);
        }
        other => panic!("expected PlacementInfeasible, got {other:?}"),
    }
}

#[test]
fn fresnel_closed_form() {
    assert_abs_diff_eq!(first_fresnel_radius(50.0, 50.0, 0.1), 1.58114, epsilon = 1e-5);
    assert_abs_diff_eq!(first_fresnel_radius(100.0, 100.0, 0.1), 2.23607, epsilon = 1e-5);
    assert_eq!(first_fresnel_radius(0.0, 100.0, 0.1), 0.0);
}

#[test]
fn axis_aligned_chord() {
    let b = boxed([-1.0, -1.0, 0.0], [1.0, 1.0, 2.0], 1.0, 0.0);
    assert_abs_diff_eq!(ray_chord_length(Point3::new(-2.0, 0.0, 1.0), Point3::new(2.0, 0.0, 1.0), &b), 2.0, epsilon = 1e-12);
    assert_eq!(ray_chord_length(Point3::new(-2.0, 5.0, 1.0), Point3::new(2.0, 5.0, 1.0), &b), 0.0);
}

#[test]
fn segment_distance_matches_sampling() {
    let mut r = rng(5);
    for _ in 0..200 {
        let lo = random_point(&mut r, -3.0, 1.0);
        let b = Building::new(lo, lo + Point3::new(1.5, 2.0, 1.0), 1.0, 0.0);
        let p1 = random_point(&mut r, -6.0, 6.0);
        let p2 = random_point(&mut r, -6.0, 6.0);
        let exact = segment_box_distance(p1, p2, &b);
        let box_dist = |p: Point3| {
            (0..3)
                .map(|i| {
                    let v = p.axis(i);
                    let c = v.clamp(b.min_corner.axis(i), b.max_corner.axis(i));
                    (v - c).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        };
        let sampled = (0..=20_000).map(|k| box_dist(p1.lerp(p2, k as f64 / 20_000.0))).fold(f64::INFINITY, f64::min);
        assert!(exact.distance <= sampled + 1e-12);
        assert!(sampled - exact.distance < 1e-3, "{} vs {}", exact.distance, sampled);
        assert_abs_diff_eq!(box_dist(p1.lerp(p2, exact.t)), exact.distance, epsilon = 1e-9);
    }
}

#[test]
fn raster_marks_building_tops() {
    let scene = generate_scene(&SceneConfig::default(), 3).unwrap();
    let raster = rasterize_heightmap(&scene, 64, 64).unwrap();
    assert_eq!(raster.len(), 64 * 64);
    let max = raster.data.iter().copied().fold(0.0f32, f32::max);
    assert_abs_diff_eq!(max as f64, scene.max_building_height() - scene.ground_z, epsilon = 1e-4);
    assert!(raster.data.iter().all(|v| *v >= 0.0));
}

fn coord() -> impl Strategy<Value = f64> {
    -20.0..20.0f64
}

fn point() -> impl Strategy<Value = Point3> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn building() -> impl Strategy<Value = Building> {
    (point(), 0.1..10.0f64, 0.1..10.0f64, 0.1..10.0f64)
        .prop_map(|(lo, dx, dy, dz)| Building::new(lo, lo + Point3::new(dx, dy, dz), 1.0, 0.0))
}

proptest! {
    #[test]
    fn chord_is_symmetric_and_bounded(p1 in point(), p2 in point(), b in building()) {
        let ab = ray_chord_length(p1, p2, &b);
        let ba = ray_chord_length(p2, p1, &b);
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ab >= 0.0);
        prop_assert!(ab <= p1.distance(p2) + 1e-9);
        prop_assert!(ab <= b.min_corner.distance(b.max_corner) + 1e-9);
    }

    #[test]
    fn fresnel_is_symmetric_and_grows_with_wavelength(d1 in 0.1..1e4f64, d2 in 0.1..1e4f64, l in 1e-3..1.0f64, k in 1.01..10.0f64) {
        let r = first_fresnel_radius(d1, d2, l);
        prop_assert!((r - first_fresnel_radius(d2, d1, l)).abs() <= 1e-12 * r.max(1.0));
        prop_assert!(first_fresnel_radius(d1, d2, l * k) > r);
        prop_assert!(r <= 0.5 * ((d1 + d2) * l).sqrt() + 1e-12);
    }
}
