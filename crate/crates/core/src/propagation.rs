//! Ground-truth channel oracle.
//!
//! `trace_paths` enumerates the direct ray (line of sight or penetration),
//! image-method specular reflections off vertical facades up to second
//! order, and a single rooftop knife-edge diffraction over the dominant
//! blocker. The path set feeds both large-scale path loss and the
//! small-scale CSI grid.

use std::f64::consts::PI;
use std::io::{self, Read, Write};

use num_complex::{Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_chord_length, Building, Extent, Facade, Point3, Scene, CHORD_EPS};
use crate::seed::derive_seed;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space path loss in dB.
pub fn fspl(distance: f64, freq: f64) -> f64 {
    20.0 * (4.0 * PI * distance * freq / SPEED_OF_LIGHT).log10()
}

/// Fresnel-Kirchhoff diffraction parameter for an edge `h` meters above
/// the direct ray (negative when the ray clears the edge).
pub fn diffraction_parameter(h: f64, d1: f64, d2: f64, wavelength: f64) -> f64 {
    h * (2.0 * (d1 + d2) / (wavelength * d1 * d2)).sqrt()
}

/// Single knife-edge loss approximation, dB.
pub fn knife_edge_loss(nu: f64) -> f64 {
    if nu > -0.78 {
        let x = nu - 0.1;
        6.9 + 20.0 * ((x * x + 1.0).sqrt() + x).log10()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    LoS,
    Reflection(u8),
    Diffraction,
    Penetration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub kind: PathKind,
    /// Total loss in dB, free-space spreading included.
    pub loss: f64,
    /// Propagation delay, seconds.
    pub delay: f64,
    /// Arrival azimuth at the receiver, radians.
    pub azimuth: f64,
    /// Carrier phase in `[0, 2π)`.
    pub phase: f64,
    /// Interaction points (facade hits, rooftop edge), receiver side first.
    pub via: Vec<Point3>,
}

impl PathComponent {
    pub fn length(&self) -> f64 {
        self.delay * SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    /// Highest specular reflection order, 0..=2.
    pub max_reflection_order: u8,
    /// Non-direct components weaker than the strongest by more than this
    /// many dB are dropped.
    pub retention_db: f64,
    pub diffraction: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { max_reflection_order: 2, retention_db: 40.0, diffraction: true }
    }
}

fn carrier_phase(length: f64, wavelength: f64) -> f64 {
    let phase = 2.0 * PI * length.rem_euclid(wavelength) / wavelength;
    if phase >= 2.0 * PI {
        0.0
    } else {
        phase
    }
}

fn arrival_azimuth(rx: Point3, from: Point3) -> f64 {
    (from.y - rx.y).atan2(from.x - rx.x)
}

/// Parameter interval `[t0, t1]` of `p1 -> p2` strictly inside `b`.
pub(crate) fn box_interval(p1: Point3, p2: Point3, b: &Building) -> Option<(f64, f64)> {
    let d = p2 - p1;
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for i in 0..3 {
        let o = p1.axis(i);
        let di = d.axis(i);
        let (lo, hi) = (b.min_corner.axis(i), b.max_corner.axis(i));
        if di.abs() < 1e-15 {
            if o <= lo || o >= hi {
                return None;
            }
            continue;
        }
        let (mut a, mut c) = ((lo - o) / di, (hi - o) / di);
        if a > c {
            std::mem::swap(&mut a, &mut c);
        }
        t0 = t0.max(a);
        t1 = t1.min(c);
        if t0 >= t1 {
            return None;
        }
    }
    ((t1 - t0) * d.norm() >= CHORD_EPS).then_some((t0, t1))
}

/// Total penetration loss (dB) along a segment, summed over all buildings.
pub fn penetration_loss(scene: &Scene, a: Point3, b: Point3) -> f64 {
    scene.buildings.iter().map(|bl| ray_chord_length(a, b, bl) * bl.attenuation_per_meter).sum()
}

/// A first-order specular reflection found by the image method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderReflection {
    pub building: usize,
    pub facade: usize,
    pub point: Point3,
    /// Unfolded path length tx -> point -> rx.
    pub length: f64,
    /// Spreading plus the building's reflection loss.
    pub loss: f64,
    /// Penetration loss accumulated along tx -> point and point -> rx.
    pub leg_loss: f64,
}

impl FirstOrderReflection {
    pub fn total_loss(&self) -> f64 {
        self.loss + self.leg_loss
    }
}

/// All geometrically valid first-order reflections: tx and rx on the outer
/// side of a facade and the specular point inside the facade rectangle.
/// Buildings crossed by either leg attenuate the path but do not invalidate it.
pub fn first_order_reflections(scene: &Scene, tx: Point3, rx: Point3) -> Vec<FirstOrderReflection> {
    let mut out = Vec::new();
    for (bi, b) in scene.buildings.iter().enumerate() {
        for (fi, f) in b.facades().iter().enumerate() {
            if let Some(point) = reflect_once(f, tx, rx) {
                let length = f.mirror(tx).distance(rx);
                out.push(FirstOrderReflection {
                    building: bi,
                    facade: fi,
                    point,
                    length,
                    loss: fspl(length, scene.carrier_freq) + b.reflection_loss,
                    leg_loss: penetration_loss(scene, tx, point) + penetration_loss(scene, point, rx),
                });
            }
        }
    }
    out
}

fn reflect_once(f: &Facade, tx: Point3, rx: Point3) -> Option<Point3> {
    if !f.faces(tx) || !f.faces(rx) {
        return None;
    }
    f.hit(f.mirror(tx), rx)
}

/// The blocker with the largest diffraction parameter over the direct ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantEdge {
    pub building: usize,
    pub nu: f64,
    /// Rooftop point above the ray, at the middle of the blocked chord.
    pub edge: Point3,
}

pub fn dominant_blocker(scene: &Scene, tx: Point3, rx: Point3) -> Option<DominantEdge> {
    let d = tx.distance(rx);
    let lambda = scene.wavelength();
    let mut best: Option<DominantEdge> = None;
    for (i, b) in scene.buildings.iter().enumerate() {
        let Some((t0, t1)) = box_interval(tx, rx, b) else { continue };
        let tm = 0.5 * (t0 + t1);
        let on_ray = tx.lerp(rx, tm);
        let h = b.top() - on_ray.z;
        let (d1, d2) = (tm * d, (1.0 - tm) * d);
        if d1 <= 0.0 || d2 <= 0.0 {
            continue;
        }
        let nu = diffraction_parameter(h, d1, d2, lambda);
        if best.map_or(true, |e| nu > e.nu) {
            best = Some(DominantEdge { building: i, nu, edge: Point3::new(on_ray.x, on_ray.y, b.top()) });
        }
    }
    best
}

/// Enumerates propagation paths for one link.
///
/// Output order: the direct component first, then reflections by ascending
/// delay, then the rooftop diffraction.
pub fn trace_paths(scene: &Scene, tx: Point3, rx: Point3, cfg: &TraceConfig) -> Vec<PathComponent> {
    let freq = scene.carrier_freq;
    let lambda = scene.wavelength();
    let component = |kind, loss, length: f64, via: Vec<Point3>| {
        let toward = via.first().copied().unwrap_or(tx);
        PathComponent {
            kind,
            loss,
            delay: length / SPEED_OF_LIGHT,
            azimuth: arrival_azimuth(rx, toward),
            phase: carrier_phase(length, lambda),
            via,
        }
    };

    let direct_len = tx.distance(rx);
    let blockage = penetration_loss(scene, tx, rx);
    let direct_kind = if blockage > 0.0 { PathKind::Penetration } else { PathKind::LoS };
    let direct = component(direct_kind, fspl(direct_len, freq) + blockage, direct_len, Vec::new());

    let mut reflections = Vec::new();
    if cfg.max_reflection_order >= 1 {
        for r in first_order_reflections(scene, tx, rx) {
            reflections.push(component(PathKind::Reflection(1), r.total_loss(), r.length, vec![r.point]));
        }
    }
    if cfg.max_reflection_order >= 2 {
        let facades: Vec<(usize, Facade)> =
            scene.buildings.iter().enumerate().flat_map(|(i, b)| b.facades().into_iter().map(move |f| (i, f))).collect();
        for &(b1, f1) in &facades {
            if !f1.faces(tx) {
                continue;
            }
            let img1 = f1.mirror(tx);
            for &(b2, f2) in &facades {
                if b1 == b2 || !f2.faces(rx) {
                    continue;
                }
                let img2 = f2.mirror(img1);
                let Some(p2) = f2.hit(img2, rx) else { continue };
                let Some(p1) = f1.hit(img1, p2) else { continue };
                if !f2.faces(p1) || !f1.faces(p2) {
                    continue;
                }
                let length = img2.distance(rx);
                let legs = penetration_loss(scene, tx, p1) + penetration_loss(scene, p1, p2) + penetration_loss(scene, p2, rx);
                let loss = fspl(length, freq)
                    + scene.buildings[b1].reflection_loss
                    + scene.buildings[b2].reflection_loss
                    + legs;
                reflections.push(component(PathKind::Reflection(2), loss, length, vec![p2, p1]));
            }
        }
    }
    reflections.sort_by(|a, b| a.delay.total_cmp(&b.delay));

    let diffraction = if cfg.diffraction && direct_kind == PathKind::Penetration {
        dominant_blocker(scene, tx, rx).map(|e| {
            let length = tx.distance(e.edge) + e.edge.distance(rx);
            component(PathKind::Diffraction, fspl(length, freq) + knife_edge_loss(e.nu), length, vec![e.edge])
        })
    } else {
        None
    };

    let mut out = Vec::with_capacity(2 + reflections.len());
    out.push(direct);
    out.extend(reflections);
    out.extend(diffraction);
    let strongest = out.iter().map(|c| c.loss).fold(f64::INFINITY, f64::min);
    let cutoff = strongest + cfg.retention_db;
    let mut first = true;
    out.retain(|c| std::mem::replace(&mut first, false) || c.loss <= cutoff);
    out
}

/// Non-coherent power sum of the components plus the shadow term, dB.
pub fn path_loss(components: &[PathComponent], shadow: f64) -> f64 {
    path_loss_from_losses(components.iter().map(|c| c.loss), shadow)
}

pub fn path_loss_from_losses(losses: impl IntoIterator<Item = f64> + Clone, shadow: f64) -> f64 {
    let floor = losses.clone().into_iter().fold(f64::INFINITY, f64::min);
    let sum: f64 = losses.into_iter().map(|l| 10f64.powf(-(l - floor) / 10.0)).sum();
    floor - 10.0 * sum.log10() + shadow
}

/// Spatially correlated Gaussian shadowing field.
///
/// Node values on a regular grid (spacing `decorr / 4`) are a separable
/// first-order autoregressive field, so node correlation is
/// `exp(-(|dx| + |dy|) / decorr)`. Off-node values are bilinear blends
/// renormalized by their exact variance, which keeps the marginal standard
/// deviation at `sigma` everywhere. The field is immutable once built.
#[derive(Debug, Clone)]
pub struct ShadowField {
    sigma: f64,
    origin: [f64; 2],
    spacing: f64,
    rho: f64,
    nx: usize,
    ny: usize,
    nodes: Vec<f64>,
}

impl ShadowField {
    pub fn new(scene_seed: u64, extent: &Extent, sigma: f64, decorr: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(decorr > 0.0) {
            return Err(Error::InvalidConfig("shadowing needs sigma >= 0 and decorr > 0".into()));
        }
        let spacing = decorr / 4.0;
        let nx = (extent.width() / spacing).ceil() as usize + 3;
        let ny = (extent.depth() / spacing).ceil() as usize + 3;
        let origin = [extent.min[0] - spacing, extent.min[1] - spacing];
        let rho = (-spacing / decorr).exp();
        let innov = (1.0 - rho * rho).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene_seed, "shadow"));
        let mut nodes: Vec<f64> = (0..nx * ny).map(|_| StandardNormal.sample(&mut rng)).collect();
        for j in 0..ny {
            for i in 1..nx {
                nodes[j * nx + i] = rho * nodes[j * nx + i - 1] + innov * nodes[j * nx + i];
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                nodes[j * nx + i] = rho * nodes[(j - 1) * nx + i] + innov * nodes[j * nx + i];
            }
        }
        Ok(Self { sigma, origin, spacing, rho, nx, ny, nodes })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sample(&self, p: Point3) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let gx = ((p.x - self.origin[0]) / self.spacing).clamp(0.0, (self.nx - 1) as f64 - 1e-9);
        let gy = ((p.y - self.origin[1]) / self.spacing).clamp(0.0, (self.ny - 1) as f64 - 1e-9);
        let (i, j) = (gx.floor() as usize, gy.floor() as usize);
        let (fx, fy) = (gx - i as f64, gy - j as f64);
        let wx = [1.0 - fx, fx];
        let wy = [1.0 - fy, fy];
        let mut value = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            for (a, wxa) in wx.iter().enumerate() {
                value += wxa * wyb * self.nodes[(j + b) * self.nx + i + a];
            }
        }
        // Var of the blend for separable correlation factorizes per axis.
        let axis_var = |w: [f64; 2]| w[0] * w[0] + w[1] * w[1] + 2.0 * self.rho * w[0] * w[1];
        self.sigma * value / (axis_var(wx) * axis_var(wy)).sqrt()
    }
}

/// Shadowing value at `rx` for the field seeded by `scene_seed`.
pub fn shadow_sample(field: &ShadowField, rx: Point3) -> f64 {
    field.sample(rx)
}

/// Uniform linear array with half-wavelength spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    pub count: usize,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self { count: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmConfig {
    pub subcarriers: usize,
    /// Subcarrier spacing, Hz.
    pub spacing: f64,
    pub center_freq: f64,
    /// Measure delays from the earliest arriving component, as a receiver
    /// synchronized to the first arrival would.
    pub sync_to_first_arrival: bool,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self { subcarriers: 64, spacing: 120e3, center_freq: 3.5e9, sync_to_first_arrival: true }
    }
}

impl OfdmConfig {
    /// Baseband offset of subcarrier `n`.
    pub fn offset(&self, n: usize) -> f64 {
        (n as f64 - (self.subcarriers / 2) as f64) * self.spacing
    }
}

/// Complex channel response, antenna-major `[antennas × subcarriers]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiGrid {
    pub antennas: usize,
    pub subcarriers: usize,
    pub data: Vec<Complex32>,
}

impl CsiGrid {
    pub fn zeros(antennas: usize, subcarriers: usize) -> Self {
        Self { antennas, subcarriers, data: vec![Complex32::new(0.0, 0.0); antennas * subcarriers] }
    }

    pub fn get(&self, m: usize, n: usize) -> Complex32 {
        self.data[m * self.subcarriers + n]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.data.iter().map(|h| h.norm_sqr() as f64).sum()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for h in &self.data {
            buf.extend_from_slice(&h.re.to_le_bytes());
            buf.extend_from_slice(&h.im.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from<R: Read>(r: &mut R, antennas: usize, subcarriers: usize) -> io::Result<Self> {
        let mut buf = vec![0u8; 8 * antennas * subcarriers];
        r.read_exact(&mut buf)?;
        let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        let data = buf.chunks_exact(8).map(|c| Complex32::new(f(&c[..4]), f(&c[4..]))).collect();
        Ok(Self { antennas, subcarriers, data })
    }
}

/// `H[m, n] = Σ_k g_k · e^{-j2π f_n τ_k} · e^{jπ m sin φ_k} · e^{jθ_k}`.
pub fn synthesize_csi(components: &[PathComponent], array: &AntennaConfig, grid: &OfdmConfig) -> CsiGrid {
    let reference = if grid.sync_to_first_arrival {
        components.iter().map(|c| c.delay).fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let reference = if reference.is_finite() { reference } else { 0.0 };
    let mut out = CsiGrid::zeros(array.count, grid.subcarriers);
    let mut acc = vec![Complex64::new(0.0, 0.0); array.count * grid.subcarriers];
    for c in components {
        let gain = 10f64.powf(-c.loss / 20.0);
        let tau = c.delay - reference;
        let steer = PI * c.azimuth.sin();
        for m in 0..array.count {
            let spatial = Complex64::from_polar(gain, steer * m as f64 + c.phase);
            for n in 0..grid.subcarriers {
                let freq = Complex64::from_polar(1.0, -2.0 * PI * grid.offset(n) * tau);
                acc[m * grid.subcarriers + n] += spatial * freq;
            }
        }
    }
    for (o, a) in out.data.iter_mut().zip(&acc) {
        *o = Complex32::new(a.re as f32, a.im as f32);
    }
    out
}

/// Oracle output for one link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTruth {
    pub components: Vec<PathComponent>,
    pub pl: f64,
    pub shadow: f64,
    pub csi: CsiGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub trace: TraceConfig,
    pub shadow_sigma: f64,
    pub shadow_decorr: f64,
    pub antennas: AntennaConfig,
    pub ofdm: OfdmConfig,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            trace: TraceConfig::default(),
            shadow_sigma: 2.0,
            shadow_decorr: 25.0,
            antennas: AntennaConfig::default(),
            ofdm: OfdmConfig::default(),
        }
    }
}

/// Runs the oracle for one receiver.
pub fn channel_truth(scene: &Scene, rx: Point3, cfg: &ChannelConfig, shadow: &ShadowField) -> ChannelTruth {
    let components = trace_paths(scene, scene.tx, rx, &cfg.trace);
    let shadow_db = shadow.sample(rx);
    let pl = path_loss(&components, shadow_db);
    let csi = synthesize_csi(&components, &cfg.antennas, &cfg.ofdm);
    ChannelTruth { components, pl, shadow: shadow_db, csi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn empty_scene() -> Scene {
        Scene {
            buildings: vec![],
            tx: Point3::new(0.0, 0.0, 30.0),
            ground_z: 0.0,
            extent: Extent::new([-200.0, -200.0], [200.0, 200.0]),
            carrier_freq: 3.5e9,
            seed: 0,
        }
    }

    #[test]
    fn fspl_values() {
        let f = SPEED_OF_LIGHT / 0.1;
        assert_abs_diff_eq!(fspl(1.0, f), 41.984, epsilon = 1e-3);
        assert_abs_diff_eq!(fspl(100.0, f), 81.984, epsilon = 1e-3);
        assert_abs_diff_eq!(fspl(20.0, 2.4e9) - fspl(10.0, 2.4e9), 6.0206, epsilon = 1e-4);
    }

    #[test]
    fn diffraction_parameter_values() {
        assert_eq!(diffraction_parameter(0.0, 10.0, 20.0, 0.1), 0.0);
        assert_abs_diff_eq!(diffraction_parameter(1.0, 100.0, 100.0, 0.1), 0.63246, epsilon = 1e-5);
        assert!(diffraction_parameter(-2.0, 10.0, 20.0, 0.1) < 0.0);
    }

    #[test]
    fn knife_edge_values() {
        assert_abs_diff_eq!(knife_edge_loss(0.0), 6.03, epsilon = 0.01);
        assert_abs_diff_eq!(knife_edge_loss(1.0), 13.93, epsilon = 0.01);
        assert!(knife_edge_loss(-0.78) == 0.0);
        assert_abs_diff_eq!(knife_edge_loss(-0.7799999), 0.004, epsilon = 0.01);
        assert_eq!(knife_edge_loss(-3.0), 0.0);
    }

    #[test]
    fn path_loss_combination() {
        assert_abs_diff_eq!(path_loss_from_losses([80.0], 0.0), 80.0, epsilon = 1e-12);
        assert_abs_diff_eq!(path_loss_from_losses([80.0, 80.0], 0.0), 76.9897, epsilon = 1e-4);
        assert_abs_diff_eq!(path_loss_from_losses([80.0, 95.0], 1.5), 80.0 - 10.0 * (1.0 + 10f64.powf(-1.5)).log10() + 1.5, epsilon = 1e-12);
    }

    #[test]
    fn empty_scene_is_free_space() {
        let s = empty_scene();
        let rx = Point3::new(80.0, 30.0, 1.5);
        let comps = trace_paths(&s, s.tx, rx, &TraceConfig::default());
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].kind, PathKind::LoS);
        assert_eq!(path_loss(&comps, 0.0), fspl(s.tx.distance(rx), s.carrier_freq));
    }

    #[test]
    fn wall_penetration_and_roof_diffraction() {
        let mut s = empty_scene();
        // 1 m thick wall across the x axis between tx and rx
        s.buildings.push(Building::new(Point3::new(49.5, -50.0, 0.0), Point3::new(50.5, 50.0, 20.0), 10.0, 6.0));
        s.tx = Point3::new(0.0, 0.0, 10.0);
        let rx = Point3::new(100.0, 0.0, 10.0);
        let comps = trace_paths(&s, s.tx, rx, &TraceConfig::default());
        assert_eq!(comps[0].kind, PathKind::Penetration);
        assert_abs_diff_eq!(comps[0].loss, fspl(100.0, s.carrier_freq) + 10.0, epsilon = 1e-9);
        let diff = comps.last().unwrap();
        assert_eq!(diff.kind, PathKind::Diffraction);
        let over = 2.0 * (50.0f64.powi(2) + 10.0f64.powi(2)).sqrt();
        let nu = diffraction_parameter(10.0, 50.0, 50.0, s.wavelength());
        assert_abs_diff_eq!(diff.loss, fspl(over, s.carrier_freq) + knife_edge_loss(nu), epsilon = 1e-9);
        assert_abs_diff_eq!(diff.length(), over, epsilon = 1e-6);
    }

    #[test]
    fn retention_drops_weak_components_but_keeps_direct() {
        let mut s = empty_scene();
        s.tx = Point3::new(0.0, 0.0, 10.0);
        s.buildings.push(Building::new(Point3::new(40.0, -50.0, 0.0), Point3::new(60.0, 50.0, 20.0), 10.0, 0.0));
        let rx = Point3::new(100.0, 0.0, 5.0);
        let comps = trace_paths(&s, s.tx, rx, &TraceConfig { retention_db: 10.0, ..Default::default() });
        // the 200 dB penetration path is kept, being the direct component
        assert_eq!(comps[0].kind, PathKind::Penetration);
        let strongest = comps.iter().map(|c| c.loss).fold(f64::INFINITY, f64::min);
        assert!(comps[1..].iter().all(|c| c.loss <= strongest + 10.0));
    }

    #[test]
    fn phases_are_in_range() {
        let s = empty_scene();
        for k in 0..50 {
            let rx = Point3::new(3.0 + k as f64 * 1.37, 10.0, 1.5);
            let c = &trace_paths(&s, s.tx, rx, &TraceConfig::default())[0];
            assert!((0.0..2.0 * PI).contains(&c.phase));
            assert_abs_diff_eq!(c.delay * SPEED_OF_LIGHT, s.tx.distance(rx), epsilon = 1e-9);
        }
    }

    #[test]
    fn shadow_zero_sigma_and_determinism() {
        let ext = Extent::new([0.0, 0.0], [100.0, 100.0]);
        let f = ShadowField::new(3, &ext, 0.0, 25.0).unwrap();
        assert_eq!(f.sample(Point3::new(10.0, 10.0, 1.5)), 0.0);
        let a = ShadowField::new(3, &ext, 2.0, 25.0).unwrap();
        let b = ShadowField::new(3, &ext, 2.0, 25.0).unwrap();
        let p = Point3::new(33.3, 71.2, 1.5);
        assert_eq!(a.sample(p), b.sample(p));
        assert!(ShadowField::new(3, &ext, 2.0, 0.0).is_err());
    }

    #[test]
    fn single_component_csi_magnitude() {
        let c = PathComponent { kind: PathKind::LoS, loss: 60.0, delay: 3e-7, azimuth: 0.4, phase: 1.0, via: vec![] };
        let h = synthesize_csi(&[c], &AntennaConfig::default(), &OfdmConfig { sync_to_first_arrival: false, ..Default::default() });
        for v in &h.data {
            assert_abs_diff_eq!(v.norm(), 1e-3, epsilon = 1e-9);
        }
    }

    #[test]
    fn csi_encoding_layout() {
        let mut g = CsiGrid::zeros(2, 2);
        g.data[1] = Complex32::new(1.0, -2.0);
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 32);
        assert_eq!(&buf[8..16], &[0, 0, 128, 63, 0, 0, 0, 192]);
        assert_eq!(CsiGrid::read_from(&mut buf.as_slice(), 2, 2).unwrap(), g);
    }
}
