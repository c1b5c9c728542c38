#![allow(dead_code)]

pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wei_core::geometry::{generate_rx_set, generate_scene, Building, Extent, Point3, RxLayout, Scene, SceneConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scene config with the transmitter either on a distant site or inside
/// the area, alternating with the seed.
pub fn scene_config(seed: u64) -> SceneConfig {
    let mut cfg = SceneConfig::default();
    if seed % 2 == 1 {
        cfg.tx_xy = [100.0, 100.0];
        cfg.tx_height = 25.0;
    }
    cfg
}

pub fn random_scene(seed: u64) -> Scene {
    generate_scene(&scene_config(seed), seed).expect("default placement succeeds")
}

/// `count` links spread over `count.div_ceil(per_scene)` random scenes.
pub fn random_links(seed: u64, count: usize, per_scene: usize) -> Vec<(Scene, Point3)> {
    let mut out = Vec::with_capacity(count);
    let mut s = seed;
    while out.len() < count {
        let scene = random_scene(s);
        let n = per_scene.min(count - out.len());
        let rx = generate_rx_set(&scene, &RxLayout::Uniform { count: n }, 1.5, s ^ 0x5eed).unwrap();
        out.extend(rx.points.into_iter().map(|p| (scene.clone(), p)));
        s += 1;
    }
    out
}

pub fn empty_scene(tx: Point3) -> Scene {
    Scene {
        buildings: vec![],
        tx,
        ground_z: 0.0,
        extent: Extent::new([-500.0, -500.0], [500.0, 500.0]),
        carrier_freq: 3.5e9,
        seed: 0,
    }
}

pub fn boxed(min: [f64; 3], max: [f64; 3], att: f64, refl: f64) -> Building {
    Building::new(min.into(), max.into(), att, refl)
}

pub fn random_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point3 {
    Point3::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}
