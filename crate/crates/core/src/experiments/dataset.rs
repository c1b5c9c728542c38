use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rasterize_heightmap, Point3, Raster, RxSet, Scene};
use crate::propagation::{channel_truth, ChannelConfig, ChannelTruth, ShadowField};
use crate::wei::{extract, Step, WeiRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// S1 raster `(width, height)`.
    pub raster_dims: (usize, usize),
    pub channel: ChannelConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { raster_dims: (128, 128), channel: ChannelConfig::default() }
    }
}

/// Everything recorded for one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub rx: Point3,
    pub truth: ChannelTruth,
    /// One record per dataset step, in `Dataset::steps` order.
    pub wei: Vec<WeiRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded 70/15/15 partition of `0..n`; each part is sorted.
    pub fn seeded(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (n as f64 * 0.70).round() as usize;
        let n_val = (n as f64 * 0.15).round() as usize;
        let mut train = idx[..n_train].to_vec();
        let mut val = idx[n_train..n_train + n_val].to_vec();
        let mut test = idx[n_train + n_val..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Self { train, val, test }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scene: Scene,
    pub steps: Vec<Step>,
    pub config: DatasetConfig,
    /// Shared S1 raster, present when S1 is among the steps.
    pub raster: Option<Arc<Raster>>,
    pub records: Vec<LinkRecord>,
    pub split: Split,
    pub seed: u64,
}

impl Dataset {
    pub fn wei(&self, link: usize, step: Step) -> Option<&WeiRecord> {
        let pos = self.steps.iter().position(|s| *s == step)?;
        self.records.get(link).map(|r| &r.wei[pos])
    }

    pub fn has_steps(&self, steps: &[Step]) -> bool {
        steps.iter().all(|s| self.steps.contains(s))
    }

    pub fn building_count(&self) -> usize {
        self.scene.buildings.len()
    }
}

/// Runs the oracle and the requested extractors for every receiver.
///
/// Links are evaluated in parallel; output order follows `rx_set`.
pub fn build_dataset(scene: &Scene, rx_set: &RxSet, steps: &[Step], config: &DatasetConfig, seed: u64) -> Result<Dataset> {
    scene.validate()?;
    if steps.is_empty() {
        return Err(Error::InvalidConfig("at least one WEI step is required".into()));
    }
    if let Some(bad) = rx_set.points.iter().position(|p| !scene.is_valid_rx(*p)) {
        return Err(Error::InvalidConfig(format!("rx point {bad} is not a valid receiver location")));
    }
    let mut steps = steps.to_vec();
    steps.sort();
    steps.dedup();
    let raster = if steps.contains(&Step::S1) {
        Some(Arc::new(rasterize_heightmap(scene, config.raster_dims.0, config.raster_dims.1)?))
    } else {
        None
    };
    let shadow = ShadowField::new(scene.seed, &scene.extent, config.channel.shadow_sigma, config.channel.shadow_decorr)?;
    let placeholder = Arc::new(Raster { width: 0, height: 0, data: Vec::new() });
    let shared = raster.as_ref().unwrap_or(&placeholder);
    let records = rx_set
        .points
        .par_iter()
        .map(|&rx| LinkRecord {
            rx,
            truth: channel_truth(scene, rx, &config.channel, &shadow),
            wei: steps.iter().map(|&s| extract(s, scene, rx, shared)).collect(),
        })
        .collect::<Vec<_>>();
    let split = Split::seeded(records.len(), seed);
    Ok(Dataset { scene: scene.clone(), steps, config: config.clone(), raster, records, split, seed })
}
