//! Independent reference implementations used as test oracles.

use wei_core::geometry::{first_fresnel_radius, Building, Point3, Scene};
use wei_core::wei::Reasons;

/// Chord estimate by marching midpoints at a fixed step.
pub fn ray_march_chord(p1: Point3, p2: Point3, b: &Building, step: f64) -> f64 {
    let len = p1.distance(p2);
    let n = (len / step).ceil() as usize;
    let h = len / n as f64;
    let inside = (0..n).filter(|&k| b.contains(p1.lerp(p2, (k as f64 + 0.5) / n as f64))).count();
    inside as f64 * h
}

/// Exact slab chord, written independently of the library.
pub fn chord(p1: Point3, p2: Point3, b: &Building) -> f64 {
    let d = p2 - p1;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..3 {
        let (o, di, lo, hi) = (p1.axis(i), d.axis(i), b.min_corner.axis(i), b.max_corner.axis(i));
        if di == 0.0 {
            if o <= lo || o >= hi {
                return 0.0;
            }
        } else {
            let (a, c) = ((lo - o) / di, (hi - o) / di);
            t0 = t0.max(a.min(c));
            t1 = t1.min(a.max(c));
        }
    }
    let len = (t1 - t0).max(0.0) * d.norm();
    if len < 1e-9 {
        0.0
    } else {
        len
    }
}

pub fn box_distance(p: Point3, b: &Building) -> f64 {
    (0..3)
        .map(|i| {
            let v = p.axis(i);
            (v - v.clamp(b.min_corner.axis(i), b.max_corner.axis(i))).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance to a convex box is convex along a segment: golden-section search.
fn closest_t(p1: Point3, p2: Point3, b: &Building) -> f64 {
    let f = |t: f64| box_distance(p1.lerp(p2, t), b);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Specular point on each facade plane from the ratio of plane distances,
/// kept when both ends face the facade and the point lies on the rectangle.
fn specular_points(b: &Building, tx: Point3, rx: Point3) -> Vec<Point3> {
    let mut out = Vec::new();
    for axis in 0..2 {
        for (coord, outward) in [(b.min_corner.axis(axis), -1.0), (b.max_corner.axis(axis), 1.0)] {
            let dt = (tx.axis(axis) - coord) * outward;
            let dr = (rx.axis(axis) - coord) * outward;
            if dt <= 0.0 || dr <= 0.0 {
                continue;
            }
            let p = tx.lerp(rx, dt / (dt + dr)).with_axis(axis, coord);
            let other = 1 - axis;
            let on_face = p.axis(other) >= b.min_corner.axis(other)
                && p.axis(other) <= b.max_corner.axis(other)
                && p.z >= b.min_corner.z
                && p.z <= b.max_corner.z;
            if on_face {
                out.push(p);
            }
        }
    }
    out
}

pub fn brute_force_effective_set(scene: &Scene, tx: Point3, rx: Point3) -> Vec<(usize, Reasons)> {
    let lambda = scene.wavelength();
    let link = tx.distance(rx);
    let mut reasons = vec![Reasons::default(); scene.buildings.len()];
    let mut legs = Vec::new();
    for (i, b) in scene.buildings.iter().enumerate() {
        reasons[i].blocker = chord(tx, rx, b) > 0.0;
        let t = closest_t(tx, rx, b);
        let radius = first_fresnel_radius(t * link, (1.0 - t) * link, lambda);
        reasons[i].fresnel = box_distance(tx.lerp(rx, t), b) < radius;
        for p in specular_points(b, tx, rx) {
            reasons[i].reflector = true;
            legs.push(p);
        }
    }
    for p in legs {
        let crossed: Vec<usize> =
            (0..scene.buildings.len()).filter(|&j| chord(tx, p, &scene.buildings[j]) > 0.0 || chord(p, rx, &scene.buildings[j]) > 0.0).collect();
        for j in crossed {
            reasons[j].leg_blocker = true;
        }
    }
    reasons.into_iter().enumerate().filter(|(_, r)| r.any()).collect()
}
