//! On-disk dataset layout.
//!
//! A dataset directory holds `manifest.json`, `scene.json`, `records.bin`
//! and, when S1 is present, `raster.bin`. Bulk data is little-endian; the
//! manifest records the byte offset of every link so a damaged file can be
//! reported precisely.
//!
//! Per-link record layout in `records.bin`:
//!
//! ```text
//! rx            3 × f64
//! pl, shadow    2 × f64
//! components    u32 count, then per component:
//!                 kind u8, reflection order u8,
//!                 loss, delay, azimuth, phase  4 × f64,
//!                 via count u8, via points     3·count × f64
//! csi           antennas × subcarriers × (re f32, im f32)
//! wei           one record per dataset step (S1 stores only its tag and
//!               coordinates; its raster lives in raster.bin)
//! ```

use std::fs;
use std::io::{self, Read};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Dataset, DatasetConfig, LinkRecord, Split};
use crate::geometry::{Point3, Raster, Scene};
use crate::propagation::{ChannelTruth, CsiGrid, PathComponent, PathKind};
use crate::seed::fingerprint;
use crate::wei::{distance_sentinel, write_f32s, Step, WeiRecord, NO_REFLECTION_DB};

pub const DATASET_FORMAT: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENE_FILE: &str = "scene.json";
pub const RECORDS_FILE: &str = "records.bin";
pub const RASTER_FILE: &str = "raster.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentinels {
    pub no_reflection_db: f64,
    pub empty_set_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub link_count: usize,
    pub steps: Vec<Step>,
    pub building_count: usize,
    pub antennas: usize,
    pub subcarriers: usize,
    pub scene: FileEntry,
    pub raster: Option<FileEntry>,
    pub records: FileEntry,
    /// Byte offset of each link inside the records file.
    pub link_offsets: Vec<u64>,
    pub config: DatasetConfig,
    pub config_hash: String,
    /// SHA-256 of the records file.
    pub records_hash: String,
    pub sentinels: Sentinels,
    pub seed: u64,
    pub scene_seed: u64,
    pub split: Split,
}

pub fn scene_to_json(scene: &Scene) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(scene)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    fs::write(path, scene_to_json(scene)?)?;
    Ok(())
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let scene: Scene = serde_json::from_slice(&fs::read(path)?)?;
    scene.validate()?;
    Ok(scene)
}

/// Hash of everything that determines the dataset contents.
pub fn dataset_config_hash(config: &DatasetConfig, steps: &[Step], seed: u64, scene_json: &[u8]) -> Result<String> {
    let mut bytes = serde_json::to_vec(&(config, steps, seed))?;
    bytes.extend_from_slice(scene_json);
    Ok(fingerprint(&bytes))
}

fn kind_code(kind: PathKind) -> (u8, u8) {
    match kind {
        PathKind::LoS => (0, 0),
        PathKind::Reflection(order) => (1, order),
        PathKind::Diffraction => (2, 0),
        PathKind::Penetration => (3, 0),
    }
}

fn put_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode_link(buf: &mut Vec<u8>, rec: &LinkRecord) -> io::Result<()> {
    put_f64s(buf, &[rec.rx.x, rec.rx.y, rec.rx.z, rec.truth.pl, rec.truth.shadow]);
    buf.extend_from_slice(&(rec.truth.components.len() as u32).to_le_bytes());
    for c in &rec.truth.components {
        let (kind, order) = kind_code(c.kind);
        buf.extend_from_slice(&[kind, order]);
        put_f64s(buf, &[c.loss, c.delay, c.azimuth, c.phase]);
        buf.push(c.via.len() as u8);
        for p in &c.via {
            put_f64s(buf, &[p.x, p.y, p.z]);
        }
    }
    rec.truth.csi.write_to(buf)?;
    for w in &rec.wei {
        if w.step() == Step::S1 {
            buf.push(Step::S1.tag());
            write_f32s(buf, &w.vector())?;
        } else {
            w.write_to(buf)?;
        }
    }
    Ok(())
}

/// Serializes the records file and returns it with per-link offsets.
pub fn encode_records(ds: &Dataset) -> Result<(Vec<u8>, Vec<u64>)> {
    let mut buf = Vec::new();
    let mut offsets = Vec::with_capacity(ds.records.len());
    for rec in &ds.records {
        offsets.push(buf.len() as u64);
        encode_link(&mut buf, rec)?;
    }
    Ok((buf, offsets))
}

/// Writes the dataset directory; returns the manifest written.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let scene_json = scene_to_json(&ds.scene)?;
    let (records, link_offsets) = encode_records(ds)?;
    let raster = match &ds.raster {
        Some(r) => {
            let mut bytes = Vec::with_capacity(r.encoded_len());
            r.write_to(&mut bytes)?;
            fs::write(dir.join(RASTER_FILE), &bytes)?;
            Some(FileEntry { file: RASTER_FILE.into(), bytes: bytes.len() as u64 })
        }
        None => None,
    };
    fs::write(dir.join(SCENE_FILE), &scene_json)?;
    fs::write(dir.join(RECORDS_FILE), &records)?;
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT,
        link_count: ds.records.len(),
        steps: ds.steps.clone(),
        building_count: ds.building_count(),
        antennas: ds.config.channel.antennas.count,
        subcarriers: ds.config.channel.ofdm.subcarriers,
        scene: FileEntry { file: SCENE_FILE.into(), bytes: scene_json.len() as u64 },
        raster,
        records: FileEntry { file: RECORDS_FILE.into(), bytes: records.len() as u64 },
        link_offsets,
        config: ds.config.clone(),
        config_hash: dataset_config_hash(&ds.config, &ds.steps, ds.seed, &scene_json)?,
        records_hash: fingerprint(&records),
        sentinels: Sentinels { no_reflection_db: NO_REFLECTION_DB, empty_set_distance_m: distance_sentinel(&ds.scene) },
        seed: ds.seed,
        scene_seed: ds.scene.seed,
        split: ds.split.clone(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Byte cursor that reports failures with their absolute offset.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt { offset: self.pos as u64, reason: reason.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.corrupt(format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64s<const N: usize>(&mut self, what: &str) -> Result<[f64; N]> {
        let raw = self.take(8 * N, what)?;
        Ok(std::array::from_fn(|i| f64::from_le_bytes(raw[8 * i..8 * i + 8].try_into().expect("8 bytes"))))
    }

    /// Runs a `Read`-based decoder over the remaining bytes.
    fn decode<T>(&mut self, what: &str, f: impl FnOnce(&mut &'a [u8]) -> io::Result<T>) -> Result<T> {
        let mut rest = &self.bytes[self.pos..];
        let before = rest.len();
        match f(&mut rest) {
            Ok(v) => {
                self.pos += before - rest.len();
                Ok(v)
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(self.corrupt(format!("truncated {what}"))),
            Err(e) => Err(self.corrupt(format!("bad {what}: {e}"))),
        }
    }
}

fn decode_kind(c: &Cursor<'_>, kind: u8, order: u8) -> Result<PathKind> {
    match (kind, order) {
        (0, 0) => Ok(PathKind::LoS),
        (1, 1..=2) => Ok(PathKind::Reflection(order)),
        (2, 0) => Ok(PathKind::Diffraction),
        (3, 0) => Ok(PathKind::Penetration),
        _ => Err(c.corrupt(format!("unknown path kind ({kind}, {order})"))),
    }
}

fn decode_link(c: &mut Cursor<'_>, m: &DatasetManifest, raster: Option<&Arc<Raster>>) -> Result<LinkRecord> {
    let [x, y, z, pl, shadow] = c.f64s::<5>("link header")?;
    let count = c.u32("component count")? as usize;
    let mut components = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let at = c.pos;
        let (kind, order) = (c.u8("path kind")?, c.u8("path kind")?);
        let kind = decode_kind(&Cursor { bytes: c.bytes, pos: at }, kind, order)?;
        let [loss, delay, azimuth, phase] = c.f64s::<4>("path component")?;
        let n_via = c.u8("via count")? as usize;
        let mut via = Vec::with_capacity(n_via);
        for _ in 0..n_via {
            let [px, py, pz] = c.f64s::<3>("via point")?;
            via.push(Point3::new(px, py, pz));
        }
        components.push(PathComponent { kind, loss, delay, azimuth, phase, via });
    }
    let csi = c.decode("CSI grid", |r| CsiGrid::read_from(r, m.antennas, m.subcarriers))?;
    let mut wei = Vec::with_capacity(m.steps.len());
    for &step in &m.steps {
        let at = c.pos;
        let rec = if step == Step::S1 {
            let tag = c.u8("WEI tag")?;
            let values = c.decode("S1 coordinates", |r| crate::wei::read_f32s(r, 3))?;
            if tag != Step::S1.tag() {
                return Err(Error::Corrupt { offset: at as u64, reason: format!("expected WEI tag 1, found {tag}") });
            }
            let raster = raster.ok_or_else(|| Error::Corrupt { offset: at as u64, reason: "S1 record without raster".into() })?;
            WeiRecord::from_parts(Step::S1, &values, Some(raster.clone()))
        } else {
            c.decode("WEI record", |r| WeiRecord::read_from(r, m.building_count))?
        };
        if rec.step() != step {
            return Err(Error::Corrupt { offset: at as u64, reason: format!("expected WEI step {step}, found {}", rec.step()) });
        }
        wei.push(rec);
    }
    Ok(LinkRecord { rx: Point3::new(x, y, z), truth: ChannelTruth { components, pl, shadow, csi }, wei })
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let bytes = fs::read(dir.join(MANIFEST_FILE))?;
    // Check the version before the full schema so older layouts fail cleanly.
    #[derive(Deserialize)]
    struct Version {
        format_version: u32,
    }
    let v: Version = serde_json::from_slice(&bytes)?;
    if v.format_version != DATASET_FORMAT {
        return Err(Error::VersionMismatch { expected: DATASET_FORMAT, found: v.format_version });
    }
    Ok(serde_json::from_slice(&bytes)?)
}

fn read_sized(dir: &Path, entry: &FileEntry) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    fs::File::open(dir.join(&entry.file))?.read_to_end(&mut bytes)?;
    if bytes.len() as u64 != entry.bytes {
        return Err(Error::Corrupt {
            offset: bytes.len().min(entry.bytes as usize) as u64,
            reason: format!("{} holds {} bytes, manifest expects {}", entry.file, bytes.len(), entry.bytes),
        });
    }
    Ok(bytes)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let m = read_manifest(dir)?;
    if m.link_offsets.len() != m.link_count {
        return Err(Error::InvalidConfig("manifest link offsets disagree with the link count".into()));
    }
    let scene_json = read_sized(dir, &m.scene)?;
    let scene: Scene = serde_json::from_slice(&scene_json)?;
    scene.validate()?;
    if scene.buildings.len() != m.building_count {
        return Err(Error::InvalidConfig("manifest building count disagrees with the scene".into()));
    }
    let raster = match &m.raster {
        Some(entry) => {
            let bytes = read_sized(dir, entry)?;
            let mut c = Cursor { bytes: &bytes, pos: 0 };
            Some(Arc::new(c.decode("raster", |r| Raster::read_from(r))?))
        }
        None if m.steps.contains(&Step::S1) => return Err(Error::InvalidConfig("S1 dataset without a raster file".into())),
        None => None,
    };
    let bytes = read_sized(dir, &m.records)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    let mut records = Vec::with_capacity(m.link_count);
    for (i, &expected) in m.link_offsets.iter().enumerate() {
        if c.pos as u64 != expected {
            return Err(c.corrupt(format!("link {i} should start at byte {expected}")));
        }
        records.push(decode_link(&mut c, &m, raster.as_ref())?);
    }
    if c.pos != bytes.len() {
        return Err(c.corrupt("trailing bytes after the last link"));
    }
    if fingerprint(&bytes) != m.records_hash {
        return Err(Error::Corrupt { offset: 0, reason: "records hash mismatch".into() });
    }
    Ok(Dataset { scene, steps: m.steps, config: m.config, raster, records, split: m.split, seed: m.seed })
}
