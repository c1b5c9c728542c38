//! Wireless environment information (WEI) extractors.
//!
//! Four progressively refined views of the environment around one link:
//!
//! * **S1** sensing data: the top-view height raster plus the rx position.
//! * **S2** features: distance from every building centroid to the rx.
//! * **S3** semantics: volume, nearest distance and geometric blockage of
//!   the effective scatterers only.
//! * **S4** knowledge: the dominant first-order propagation effects in dB
//!   (best reflection gain, rooftop diffraction loss, penetration loss).
//!
//! Each step carries a fixed number of values per receiver, shrinking from
//! `W·H + 3` down to 3.

use std::fmt;
use std::io::{self, Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{first_fresnel_radius, ray_chord_length, rasterize_heightmap, segment_box_distance, Point3, Raster, Scene};
use crate::propagation::{dominant_blocker, first_order_reflections, fspl, knife_edge_loss};
use crate::Result;

/// Reflection advantage reported when no facade offers a specular path.
pub const NO_REFLECTION_DB: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Step {
    S1,
    S2,
    S3,
    S4,
}

impl Step {
    pub const ALL: [Step; 4] = [Step::S1, Step::S2, Step::S3, Step::S4];

    pub fn tag(self) -> u8 {
        match self {
            Step::S1 => 1,
            Step::S2 => 2,
            Step::S3 => 3,
            Step::S4 => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.tag() == tag)
    }

    pub fn index(self) -> usize {
        self.tag() as usize - 1
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.tag())
    }
}

/// Values each step contributes per receiver.
pub fn data_quantity(step: Step, building_count: usize, raster_dims: (usize, usize)) -> usize {
    match step {
        Step::S1 => raster_dims.0 * raster_dims.1 + 3,
        Step::S2 => building_count,
        Step::S3 | Step::S4 => 3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeiPayload {
    /// The raster is identical for every receiver of a scene and is shared.
    S1 { raster: Arc<Raster>, rx_xyz: [f32; 3] },
    S2 { distances: Vec<f32> },
    S3 { volume: f32, distance: f32, blockage: f32 },
    S4 { refl: f32, diffr: f32, block: f32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeiRecord {
    pub payload: WeiPayload,
}

impl WeiRecord {
    pub fn step(&self) -> Step {
        match self.payload {
            WeiPayload::S1 { .. } => Step::S1,
            WeiPayload::S2 { .. } => Step::S2,
            WeiPayload::S3 { .. } => Step::S3,
            WeiPayload::S4 { .. } => Step::S4,
        }
    }

    pub fn quantity(&self) -> usize {
        match &self.payload {
            WeiPayload::S1 { raster, .. } => raster.len() + 3,
            WeiPayload::S2 { distances } => distances.len(),
            WeiPayload::S3 { .. } | WeiPayload::S4 { .. } => 3,
        }
    }

    /// Flat feature vector; for S1 only the receiver coordinates.
    pub fn vector(&self) -> Vec<f32> {
        match &self.payload {
            WeiPayload::S1 { rx_xyz, .. } => rx_xyz.to_vec(),
            WeiPayload::S2 { distances } => distances.clone(),
            WeiPayload::S3 { volume, distance, blockage } => vec![*volume, *distance, *blockage],
            WeiPayload::S4 { refl, diffr, block } => vec![*refl, *diffr, *block],
        }
    }

    pub fn raster(&self) -> Option<&Raster> {
        match &self.payload {
            WeiPayload::S1 { raster, .. } => Some(raster),
            _ => None,
        }
    }

    /// Tag byte followed by the payload as little-endian `f32`; S1 embeds
    /// its raster in the geometry raster format ahead of the coordinates.
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&[self.step().tag()])?;
        if let Some(r) = self.raster() {
            r.write_to(w)?;
        }
        write_f32s(w, &self.vector())
    }

    /// Inverse of [`WeiRecord::write_to`]; S2 needs the building count.
    pub fn read_from<R: Read>(r: &mut R, building_count: usize) -> io::Result<Self> {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let step = Step::from_tag(tag[0])
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("unknown WEI step tag {}", tag[0])))?;
        let raster = if step == Step::S1 { Some(Arc::new(Raster::read_from(r)?)) } else { None };
        let n = match step {
            Step::S2 => building_count,
            _ => 3,
        };
        let values = read_f32s(r, n)?;
        Ok(Self::from_parts(step, &values, raster))
    }

    /// Rebuilds a record from its flat vector (see [`WeiRecord::vector`]).
    pub fn from_parts(step: Step, values: &[f32], raster: Option<Arc<Raster>>) -> Self {
        let payload = match step {
            Step::S1 => WeiPayload::S1 {
                raster: raster.expect("S1 records need a raster"),
                rx_xyz: [values[0], values[1], values[2]],
            },
            Step::S2 => WeiPayload::S2 { distances: values.to_vec() },
            Step::S3 => WeiPayload::S3 { volume: values[0], distance: values[1], blockage: values[2] },
            Step::S4 => WeiPayload::S4 { refl: values[0], diffr: values[1], block: values[2] },
        };
        Self { payload }
    }
}

pub fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(4 * values.len());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_f32s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f32>> {
    let mut buf = vec![0u8; 4 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn extract_s1(scene: &Scene, rx: Point3, raster_dims: (usize, usize)) -> Result<WeiRecord> {
    let raster = Arc::new(rasterize_heightmap(scene, raster_dims.0, raster_dims.1)?);
    Ok(s1_with_raster(raster, rx))
}

/// S1 record reusing an already rasterized scene.
pub fn s1_with_raster(raster: Arc<Raster>, rx: Point3) -> WeiRecord {
    WeiRecord { payload: WeiPayload::S1 { raster, rx_xyz: [rx.x as f32, rx.y as f32, rx.z as f32] } }
}

pub fn extract_s2(scene: &Scene, rx: Point3) -> WeiRecord {
    let distances = scene.buildings.iter().map(|b| b.centroid().distance(rx) as f32).collect();
    WeiRecord { payload: WeiPayload::S2 { distances } }
}

/// Why a building counts as an effective scatterer for a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Reasons {
    /// The direct ray passes through it.
    pub blocker: bool,
    /// It intrudes into the first Fresnel zone of the direct ray.
    pub fresnel: bool,
    /// One of its facades hosts a first-order specular reflection.
    pub reflector: bool,
    /// It attenuates a leg of some first-order reflection.
    pub leg_blocker: bool,
}

impl Reasons {
    pub fn any(&self) -> bool {
        self.blocker || self.fresnel || self.reflector || self.leg_blocker
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EffectiveScattererSet {
    /// Ascending building indices with their reasons.
    pub members: Vec<(usize, Reasons)>,
}

impl EffectiveScattererSet {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|(i, _)| *i)
    }

    pub fn blockers(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().filter(|(_, r)| r.blocker).map(|(i, _)| *i)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.iter().any(|(i, _)| *i == index)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn effective_scatterers(scene: &Scene, tx: Point3, rx: Point3) -> EffectiveScattererSet {
    let lambda = scene.wavelength();
    let link = tx.distance(rx);
    let mut reasons = vec![Reasons::default(); scene.buildings.len()];
    for (i, b) in scene.buildings.iter().enumerate() {
        reasons[i].blocker = ray_chord_length(tx, rx, b) > 0.0;
        let approach = segment_box_distance(tx, rx, b);
        let radius = first_fresnel_radius(approach.t * link, (1.0 - approach.t) * link, lambda);
        reasons[i].fresnel = approach.distance < radius;
    }
    for r in first_order_reflections(scene, tx, rx) {
        reasons[r.building].reflector = true;
        if r.leg_loss > 0.0 {
            for (i, b) in scene.buildings.iter().enumerate() {
                if ray_chord_length(tx, r.point, b) > 0.0 || ray_chord_length(r.point, rx, b) > 0.0 {
                    reasons[i].leg_blocker = true;
                }
            }
        }
    }
    EffectiveScattererSet { members: reasons.into_iter().enumerate().filter(|(_, r)| r.any()).collect() }
}

/// S3 semantics in full precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Semantics {
    pub volume: f64,
    pub distance: f64,
    pub blockage: f64,
}

/// Nearest-scatterer distance reported when the effective set is empty.
pub fn distance_sentinel(scene: &Scene) -> f64 {
    2.0 * scene.extent.diagonal()
}

pub fn semantics(scene: &Scene, tx: Point3, rx: Point3) -> Semantics {
    let set = effective_scatterers(scene, tx, rx);
    let mut out = Semantics { volume: 0.0, distance: distance_sentinel(scene), blockage: 0.0 };
    for i in set.indices() {
        let b = &scene.buildings[i];
        out.volume += b.volume();
        out.distance = out.distance.min(b.centroid().distance(rx));
        out.blockage += ray_chord_length(tx, rx, b);
    }
    out
}

pub fn extract_s3(scene: &Scene, tx: Point3, rx: Point3) -> WeiRecord {
    let s = semantics(scene, tx, rx);
    WeiRecord { payload: WeiPayload::S3 { volume: s.volume as f32, distance: s.distance as f32, blockage: s.blockage as f32 } }
}

/// S4 knowledge in full precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knowledge {
    /// Best first-order reflection, including penetration along its legs,
    /// relative to free space over the direct distance, dB (usually negative).
    pub refl: f64,
    /// Rooftop knife-edge loss over the dominant blocker, dB.
    pub diffr: f64,
    /// Penetration loss of the direct ray, dB.
    pub block: f64,
}

pub fn knowledge(scene: &Scene, tx: Point3, rx: Point3) -> Knowledge {
    let free = fspl(tx.distance(rx), scene.carrier_freq);
    let refl = first_order_reflections(scene, tx, rx)
        .iter()
        .map(|r| free - r.total_loss())
        .fold(NO_REFLECTION_DB, f64::max);
    let diffr = dominant_blocker(scene, tx, rx).map_or(0.0, |e| knife_edge_loss(e.nu));
    let block = scene.buildings.iter().map(|b| ray_chord_length(tx, rx, b) * b.attenuation_per_meter).sum();
    Knowledge { refl, diffr, block }
}

pub fn extract_s4(scene: &Scene, tx: Point3, rx: Point3) -> WeiRecord {
    let k = knowledge(scene, tx, rx);
    WeiRecord { payload: WeiPayload::S4 { refl: k.refl as f32, diffr: k.diffr as f32, block: k.block as f32 } }
}

/// Extracts one step; S1 uses the shared raster.
pub fn extract(step: Step, scene: &Scene, rx: Point3, raster: &Arc<Raster>) -> WeiRecord {
    match step {
        Step::S1 => s1_with_raster(raster.clone(), rx),
        Step::S2 => extract_s2(scene, rx),
        Step::S3 => extract_s3(scene, scene.tx, rx),
        Step::S4 => extract_s4(scene, scene.tx, rx),
    }
}
