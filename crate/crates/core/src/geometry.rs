//! Scene construction and the geometric predicates shared by the channel
//! oracle and the environment-information extractors.
//!
//! Buildings are axis-aligned boxes standing on a flat ground plane. All
//! lengths are meters.

use std::io::{self, Read, Write};
use std::ops::{Add, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of placement attempts before `generate_scene` gives up.
pub const PLACEMENT_BUDGET: usize = 10_000;

/// Chords shorter than this are treated as grazing contact.
pub const CHORD_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn with_axis(mut self, i: usize, v: f64) -> Self {
        match i {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
        self
    }

    pub fn lerp(self, o: Self, t: f64) -> Self {
        self + (o - self) * t
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

impl Add for Point3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Horizontal rectangle `[min, max]` in the x/y plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Extent {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn depth(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.depth())
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn is_valid(&self) -> bool {
        self.min[0] < self.max[0] && self.min[1] < self.max[1] && self.min.iter().chain(&self.max).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub min_corner: Point3,
    pub max_corner: Point3,
    /// Penetration loss in dB per meter of chord.
    pub attenuation_per_meter: f64,
    /// Loss added per specular bounce off one of the facades, dB.
    pub reflection_loss: f64,
}

impl Building {
    pub fn new(min_corner: Point3, max_corner: Point3, attenuation_per_meter: f64, reflection_loss: f64) -> Self {
        Self { min_corner, max_corner, attenuation_per_meter, reflection_loss }
    }

    pub fn is_valid(&self) -> bool {
        self.min_corner.x < self.max_corner.x
            && self.min_corner.y < self.max_corner.y
            && self.min_corner.z < self.max_corner.z
            && self.attenuation_per_meter > 0.0
            && self.reflection_loss >= 0.0
    }

    pub fn centroid(&self) -> Point3 {
        self.min_corner.lerp(self.max_corner, 0.5)
    }

    pub fn volume(&self) -> f64 {
        let d = self.max_corner - self.min_corner;
        d.x * d.y * d.z
    }

    pub fn top(&self) -> f64 {
        self.max_corner.z
    }

    /// Strict interior test; points on a face are outside.
    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|i| p.axis(i) > self.min_corner.axis(i) && p.axis(i) < self.max_corner.axis(i))
    }

    pub fn overlaps_xy(&self, o: &Building) -> bool {
        self.min_corner.x < o.max_corner.x
            && o.min_corner.x < self.max_corner.x
            && self.min_corner.y < o.max_corner.y
            && o.min_corner.y < self.max_corner.y
    }

    pub fn footprint_contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_corner.x && x <= self.max_corner.x && y >= self.min_corner.y && y <= self.max_corner.y
    }

    /// The four vertical facades, in the fixed order -x, +x, -y, +y.
    pub fn facades(&self) -> [Facade; 4] {
        let (lo, hi) = (self.min_corner, self.max_corner);
        [
            Facade { axis: 0, coord: lo.x, outward: -1.0, lo, hi },
            Facade { axis: 0, coord: hi.x, outward: 1.0, lo, hi },
            Facade { axis: 1, coord: lo.y, outward: -1.0, lo, hi },
            Facade { axis: 1, coord: hi.y, outward: 1.0, lo, hi },
        ]
    }
}

/// A vertical rectangle on the plane `axis == coord`, facing `outward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facade {
    pub axis: usize,
    pub coord: f64,
    pub outward: f64,
    lo: Point3,
    hi: Point3,
}

impl Facade {
    /// Mirror image of `p` across the facade plane.
    pub fn mirror(&self, p: Point3) -> Point3 {
        p.with_axis(self.axis, 2.0 * self.coord - p.axis(self.axis))
    }

    /// True when `p` is strictly on the outer side of the facade.
    pub fn faces(&self, p: Point3) -> bool {
        (p.axis(self.axis) - self.coord) * self.outward > 0.0
    }

    /// Intersection of segment `a -> b` with the facade plane, if the
    /// crossing point lies inside the facade rectangle.
    pub fn hit(&self, a: Point3, b: Point3) -> Option<Point3> {
        let da = a.axis(self.axis) - self.coord;
        let db = b.axis(self.axis) - self.coord;
        if da * db >= 0.0 {
            return None;
        }
        let t = da / (da - db);
        let p = a.lerp(b, t).with_axis(self.axis, self.coord);
        let other = 1 - self.axis;
        let inside = p.axis(other) >= self.lo.axis(other)
            && p.axis(other) <= self.hi.axis(other)
            && p.z >= self.lo.z
            && p.z <= self.hi.z;
        inside.then_some(p)
    }

    pub fn normal(&self) -> Point3 {
        Point3::default().with_axis(self.axis, self.outward)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub buildings: Vec<Building>,
    pub tx: Point3,
    pub ground_z: f64,
    pub extent: Extent,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    pub seed: u64,
}

impl Scene {
    pub fn wavelength(&self) -> f64 {
        crate::propagation::SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn max_building_height(&self) -> f64 {
        self.buildings.iter().map(|b| b.top() - self.ground_z).fold(0.0, f64::max)
    }

    /// Checks every structural invariant of a scene.
    pub fn validate(&self) -> Result<()> {
        if !self.extent.is_valid() {
            return Err(Error::InvalidScene("extent is empty or non-finite".into()));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(Error::InvalidScene("carrier frequency must be positive".into()));
        }
        if !(self.tx.z > self.ground_z) {
            return Err(Error::InvalidScene("tx must be above ground".into()));
        }
        for (i, b) in self.buildings.iter().enumerate() {
            if !b.is_valid() {
                return Err(Error::InvalidScene(format!("building {i} has invalid corners or materials")));
            }
            if b.min_corner.z != self.ground_z {
                return Err(Error::InvalidScene(format!("building {i} does not sit on the ground")));
            }
            if !self.extent.contains_xy(b.min_corner.x, b.min_corner.y) || !self.extent.contains_xy(b.max_corner.x, b.max_corner.y) {
                return Err(Error::InvalidScene(format!("building {i} leaves the extent")));
            }
            if b.contains(self.tx) {
                return Err(Error::InvalidScene(format!("tx lies inside building {i}")));
            }
            for (j, o) in self.buildings.iter().enumerate().skip(i + 1) {
                if b.overlaps_xy(o) {
                    return Err(Error::InvalidScene(format!("buildings {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// A receiver location is valid when it is inside the extent, above
    /// ground and outside every building.
    pub fn is_valid_rx(&self, p: Point3) -> bool {
        self.extent.contains_xy(p.x, p.y) && p.z > self.ground_z && !self.buildings.iter().any(|b| b.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub extent: Extent,
    pub building_count: usize,
    /// Footprint side length range `[min, max]`, meters.
    pub footprint: [f64; 2],
    /// Building height range above ground, meters.
    pub height: [f64; 2],
    pub attenuation_per_meter: [f64; 2],
    pub reflection_loss: [f64; 2],
    /// Horizontal tx position; it may lie outside the extent (a distant
    /// rooftop site serving the area).
    pub tx_xy: [f64; 2],
    /// Tx mount height above ground.
    pub tx_height: f64,
    /// No building footprint may come closer than this to the tx mast.
    pub tx_clearance: f64,
    pub ground_z: f64,
    pub carrier_freq: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            extent: Extent::new([0.0, 0.0], [200.0, 200.0]),
            building_count: 10,
            footprint: [14.0, 32.0],
            height: [10.0, 45.0],
            attenuation_per_meter: [0.8, 3.0],
            reflection_loss: [3.0, 9.0],
            tx_xy: [100.0, -300.0],
            tx_height: 40.0,
            tx_clearance: 8.0,
            ground_z: 0.0,
            carrier_freq: 3.5e9,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: &[f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !self.extent.is_valid() {
            return bad("scene.extent must have min < max");
        }
        if !range_ok(&self.footprint) || self.footprint[0] <= 0.0 {
            return bad("scene.footprint must be a positive [min, max] range");
        }
        if !range_ok(&self.height) || self.height[0] <= 0.0 {
            return bad("scene.height must be a positive [min, max] range");
        }
        if !range_ok(&self.attenuation_per_meter) || self.attenuation_per_meter[0] <= 0.0 {
            return bad("scene.attenuation_per_meter must be a positive range");
        }
        if !range_ok(&self.reflection_loss) || self.reflection_loss[0] < 0.0 {
            return bad("scene.reflection_loss must be a non-negative range");
        }
        if !(self.tx_height > 0.0) {
            return bad("scene.tx_height must be positive");
        }
        if !self.tx_xy.iter().all(|v| v.is_finite()) {
            return bad("scene.tx_xy must be finite");
        }
        if !(self.carrier_freq > 0.0) {
            return bad("scene.carrier_freq must be positive");
        }
        if self.footprint[1] > self.extent.width().min(self.extent.depth()) {
            return bad("scene.footprint exceeds the extent");
        }
        Ok(())
    }
}

fn sample_range(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Builds a scene by rejection-sampling non-overlapping buildings.
///
/// The result is a pure function of `(config, seed)`.
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = config.extent;
    let tx = Point3::new(config.tx_xy[0], config.tx_xy[1], config.ground_z + config.tx_height);
    let mut buildings: Vec<Building> = Vec::with_capacity(config.building_count);
    let mut attempts = 0;
    while buildings.len() < config.building_count {
        if attempts == PLACEMENT_BUDGET {
            return Err(Error::PlacementInfeasible {
                placed: buildings.len(),
                requested: config.building_count,
                attempts,
            });
        }
        attempts += 1;
        let sx = sample_range(&mut rng, config.footprint);
        let sy = sample_range(&mut rng, config.footprint);
        let h = sample_range(&mut rng, config.height);
        let x0 = sample_range(&mut rng, [ext.min[0], ext.max[0] - sx]);
        let y0 = sample_range(&mut rng, [ext.min[1], ext.max[1] - sy]);
        let att = sample_range(&mut rng, config.attenuation_per_meter);
        let refl = sample_range(&mut rng, config.reflection_loss);
        let b = Building::new(
            Point3::new(x0, y0, config.ground_z),
            Point3::new(x0 + sx, y0 + sy, config.ground_z + h),
            att,
            refl,
        );
        let near_tx = {
            let dx = (tx.x - tx.x.clamp(b.min_corner.x, b.max_corner.x)).abs();
            let dy = (tx.y - tx.y.clamp(b.min_corner.y, b.max_corner.y)).abs();
            dx.hypot(dy) < config.tx_clearance || b.footprint_contains(tx.x, tx.y)
        };
        if near_tx || buildings.iter().any(|o| o.overlaps_xy(&b)) {
            continue;
        }
        buildings.push(b);
    }
    let scene = Scene { buildings, tx, ground_z: config.ground_z, extent: ext, carrier_freq: config.carrier_freq, seed };
    debug_assert!(scene.validate().is_ok());
    Ok(scene)
}

/// Length of the part of segment `p1 -> p2` inside box `b` (slab method).
pub fn ray_chord_length(p1: Point3, p2: Point3, b: &Building) -> f64 {
    let d = p2 - p1;
    let len = d.norm();
    if len == 0.0 {
        return 0.0;
    }
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for i in 0..3 {
        let o = p1.axis(i);
        let di = d.axis(i);
        let (lo, hi) = (b.min_corner.axis(i), b.max_corner.axis(i));
        if di.abs() < 1e-15 {
            if o <= lo || o >= hi {
                return 0.0;
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
            return 0.0;
        }
    }
    let chord = (t1 - t0) * len;
    if chord < CHORD_EPS {
        0.0
    } else {
        chord
    }
}

/// Radius of the first Fresnel zone at distances `d1`, `d2` from the ends.
pub fn first_fresnel_radius(d1: f64, d2: f64, wavelength: f64) -> f64 {
    let total = d1 + d2;
    if d1 <= 0.0 || d2 <= 0.0 || total <= 0.0 {
        return 0.0;
    }
    (wavelength * d1 * d2 / total).sqrt()
}

/// Closest approach between segment `p1 -> p2` and box `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestApproach {
    /// Segment parameter in `[0, 1]` of the closest point.
    pub t: f64,
    pub distance: f64,
}

/// Exact minimum distance from a segment to a box.
///
/// The squared distance is a sum of per-axis clamped quadratics in `t`; it
/// is a single quadratic between consecutive slab crossings, so minimizing
/// each piece analytically gives the global minimum.
pub fn segment_box_distance(p1: Point3, p2: Point3, b: &Building) -> ClosestApproach {
    let d = p2 - p1;
    let mut knots = vec![0.0, 1.0];
    for i in 0..3 {
        let di = d.axis(i);
        if di.abs() > 1e-15 {
            for bound in [b.min_corner.axis(i), b.max_corner.axis(i)] {
                let t = (bound - p1.axis(i)) / di;
                if t > 0.0 && t < 1.0 {
                    knots.push(t);
                }
            }
        }
    }
    knots.sort_by(|a, b| a.total_cmp(b));
    let dist2 = |t: f64| {
        let p = p1 + d * t;
        (0..3)
            .map(|i| {
                let v = p.axis(i);
                let e = (b.min_corner.axis(i) - v).max(v - b.max_corner.axis(i)).max(0.0);
                e * e
            })
            .sum::<f64>()
    };
    let mut best = ClosestApproach { t: 0.0, distance: f64::INFINITY };
    let mut consider = |t: f64| {
        let v = dist2(t);
        if v < best.distance {
            best = ClosestApproach { t, distance: v };
        }
    };
    for w in knots.windows(2) {
        let (a, c) = (w[0], w[1]);
        consider(a);
        if c - a < 1e-15 {
            continue;
        }
        // Within (a, c) each axis is either inside its slab or strictly
        // below/above it; the active axes give a quadratic q(t) = A t² + B t + C.
        let mid = 0.5 * (a + c);
        let pm = p1 + d * mid;
        let (mut qa, mut qb) = (0.0, 0.0);
        for i in 0..3 {
            let v = pm.axis(i);
            let bound = if v < b.min_corner.axis(i) {
                b.min_corner.axis(i)
            } else if v > b.max_corner.axis(i) {
                b.max_corner.axis(i)
            } else {
                continue;
            };
            let o = p1.axis(i) - bound;
            let di = d.axis(i);
            qa += di * di;
            qb += 2.0 * o * di;
        }
        if qa > 0.0 {
            let t = -qb / (2.0 * qa);
            if t > a && t < c {
                consider(t);
            }
        }
    }
    consider(1.0);
    best.distance = best.distance.sqrt();
    best
}

/// Row-major height raster; row 0 is the `min[1]` edge of the extent.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn encoded_len(&self) -> usize {
        8 + 4 * self.data.len()
    }

    /// Writes `u32 width, u32 height` then the cells as LE `f32`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(4 * self.data.len());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from<R: Read>(r: &mut R) -> io::Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let width = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let height = u32::from_le_bytes(word) as usize;
        let cells = width
            .checked_mul(height)
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "raster dims overflow"))?;
        let mut buf = vec![0u8; 4 * cells];
        r.read_exact(&mut buf)?;
        let data = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Self { width, height, data })
    }
}

/// Top-view height image: each cell holds the tallest roof (above ground)
/// covering the cell center, 0 where no building stands.
pub fn rasterize_heightmap(scene: &Scene, width: usize, height: usize) -> Result<Raster> {
    if width < 8 || height < 8 {
        return Err(Error::InvalidConfig(format!("raster must be at least 8x8, got {width}x{height}")));
    }
    let ext = scene.extent;
    let dx = ext.width() / width as f64;
    let dy = ext.depth() / height as f64;
    let mut data = vec![0.0f32; width * height];
    for b in &scene.buildings {
        let h = (b.top() - scene.ground_z) as f32;
        // Cell centers inside the footprint: min <= min_x + (c + 0.5) dx <= max.
        let c0 = ((b.min_corner.x - ext.min[0]) / dx - 0.5).ceil().max(0.0) as usize;
        let c1 = ((b.max_corner.x - ext.min[0]) / dx - 0.5).floor();
        let r0 = ((b.min_corner.y - ext.min[1]) / dy - 0.5).ceil().max(0.0) as usize;
        let r1 = ((b.max_corner.y - ext.min[1]) / dy - 0.5).floor();
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        let c1 = (c1 as usize).min(width - 1);
        let r1 = (r1 as usize).min(height - 1);
        for r in r0..=r1 {
            let cy = ext.min[1] + (r as f64 + 0.5) * dy;
            for c in c0..=c1 {
                let cx = ext.min[0] + (c as f64 + 0.5) * dx;
                if b.footprint_contains(cx, cy) {
                    let cell = &mut data[r * width + c];
                    *cell = cell.max(h);
                }
            }
        }
    }
    Ok(Raster { width, height, data })
}

/// How receiver points are laid out over the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RxLayout {
    /// Regular `nx × ny` grid over the extent (cell centers); points that
    /// fall inside buildings are dropped.
    Grid { nx: usize, ny: usize },
    /// `count` points drawn uniformly over the free area.
    Uniform { count: usize },
    /// Points spaced `step` meters apart along a polyline of `[x, y]`
    /// waypoints; points inside buildings are dropped.
    Trajectory { waypoints: Vec<[f64; 2]>, step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxSet {
    pub points: Vec<Point3>,
    pub layout: RxLayout,
}

/// Clearance kept between receivers and building walls.
const RX_WALL_MARGIN: f64 = 0.5;

fn rx_is_clear(scene: &Scene, p: Point3) -> bool {
    scene.is_valid_rx(p)
        && !scene.buildings.iter().any(|b| {
            p.x > b.min_corner.x - RX_WALL_MARGIN
                && p.x < b.max_corner.x + RX_WALL_MARGIN
                && p.y > b.min_corner.y - RX_WALL_MARGIN
                && p.y < b.max_corner.y + RX_WALL_MARGIN
                && p.z < b.max_corner.z + RX_WALL_MARGIN
        })
}

pub fn generate_rx_set(scene: &Scene, layout: &RxLayout, rx_height: f64, seed: u64) -> Result<RxSet> {
    if !(rx_height > 0.0) {
        return Err(Error::InvalidConfig("rx height must be positive".into()));
    }
    let ext = scene.extent;
    let z = scene.ground_z + rx_height;
    let points = match layout {
        RxLayout::Grid { nx, ny } => {
            if *nx == 0 || *ny == 0 {
                return Err(Error::InvalidConfig("rx grid must be non-empty".into()));
            }
            let mut pts = Vec::with_capacity(nx * ny);
            for j in 0..*ny {
                for i in 0..*nx {
                    let x = ext.min[0] + (i as f64 + 0.5) * ext.width() / *nx as f64;
                    let y = ext.min[1] + (j as f64 + 0.5) * ext.depth() / *ny as f64;
                    pts.push(Point3::new(x, y, z));
                }
            }
            pts.retain(|p| rx_is_clear(scene, *p));
            pts
        }
        RxLayout::Uniform { count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::with_capacity(*count);
            let budget = count.saturating_mul(1000).max(PLACEMENT_BUDGET);
            let mut tries = 0;
            while pts.len() < *count {
                if tries == budget {
                    return Err(Error::PlacementInfeasible { placed: pts.len(), requested: *count, attempts: tries });
                }
                tries += 1;
                let p = Point3::new(rng.gen_range(ext.min[0]..=ext.max[0]), rng.gen_range(ext.min[1]..=ext.max[1]), z);
                if rx_is_clear(scene, p) {
                    pts.push(p);
                }
            }
            pts
        }
        RxLayout::Trajectory { waypoints, step } => {
            if !(*step > 0.0) || waypoints.is_empty() {
                return Err(Error::InvalidConfig("trajectory needs waypoints and a positive step".into()));
            }
            let mut pts = vec![Point3::new(waypoints[0][0], waypoints[0][1], z)];
            for w in waypoints.windows(2) {
                let a = Point3::new(w[0][0], w[0][1], z);
                let b = Point3::new(w[1][0], w[1][1], z);
                let n = (a.distance(b) / step).ceil().max(1.0) as usize;
                pts.extend((1..=n).map(|k| a.lerp(b, k as f64 / n as f64)));
            }
            pts.retain(|p| rx_is_clear(scene, *p));
            pts
        }
    };
    Ok(RxSet { points, layout: layout.clone() })
}
