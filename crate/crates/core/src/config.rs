//! Whole-pipeline configuration with master-seed splitting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{CsiConfig, DatasetConfig, PlBenchConfig};
use crate::geometry::{RxLayout, SceneConfig};
use crate::seed::derive_seed;
use crate::wei::Step;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RxConfig {
    pub layout: RxLayout,
    /// Receiver height above ground, meters.
    pub height: f64,
}

impl Default for RxConfig {
    fn default() -> Self {
        Self { layout: RxLayout::Uniform { count: 2000 }, height: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    pub scene: SceneConfig,
    pub rx: RxConfig,
    pub steps: Vec<Step>,
    pub dataset: DatasetConfig,
    pub pl_bench: PlBenchConfig,
    pub csi: CsiConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scene: SceneConfig::default(),
            rx: RxConfig::default(),
            steps: Step::ALL.to_vec(),
            dataset: DatasetConfig::default(),
            pl_bench: PlBenchConfig::default(),
            csi: CsiConfig::default(),
        }
    }
}

/// Stage seeds derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub scene: u64,
    pub rx: u64,
    pub split: u64,
    pub model_init: u64,
    pub train_shuffle: u64,
    pub csi_model: u64,
    pub csi_noise: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            scene: derive_seed(master, "scene"),
            rx: derive_seed(master, "rx"),
            split: derive_seed(master, "split"),
            model_init: derive_seed(master, "model-init"),
            train_shuffle: derive_seed(master, "train-shuffle"),
            csi_model: derive_seed(master, "csi-model"),
            csi_noise: derive_seed(master, "csi-noise"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::InvalidConfig(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if !(self.rx.height > 0.0) {
            return Err(Error::InvalidConfig("rx.height must be positive".into()));
        }
        if self.steps.is_empty() {
            return Err(Error::InvalidConfig("steps must not be empty".into()));
        }
        let (w, h) = self.dataset.raster_dims;
        if w < 8 || h < 8 {
            return Err(Error::InvalidConfig("dataset.raster_dims must be at least 8 × 8".into()));
        }
        if self.dataset.channel.antennas.count == 0 || self.dataset.channel.ofdm.subcarriers == 0 {
            return Err(Error::InvalidConfig("the CSI grid needs at least one antenna and one subcarrier".into()));
        }
        self.pl_bench.train.validate()?;
        if self.pl_bench.latency_reps < 100 {
            return Err(Error::InvalidConfig("pl_bench.latency_reps must be at least 100".into()));
        }
        self.csi.validate()
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_master(self.seed)
    }

    /// Benchmark settings with the derived seeds filled in.
    pub fn pl_bench_config(&self) -> PlBenchConfig {
        let s = self.seeds();
        let mut cfg = self.pl_bench;
        cfg.model_seed = s.model_init;
        cfg.train.seed = s.train_shuffle;
        cfg
    }

    pub fn csi_config(&self) -> CsiConfig {
        let s = self.seeds();
        let mut cfg = self.csi.clone();
        cfg.model_seed = s.csi_model;
        cfg.noise_seed = s.csi_noise;
        cfg.train.seed = s.train_shuffle;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_roundtrips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn seeds_follow_the_master() {
        let a = RunConfig { seed: 5, ..RunConfig::default() };
        let b = RunConfig { seed: 6, ..RunConfig::default() };
        assert_eq!(a.seeds(), Seeds::from_master(5));
        assert_ne!(a.seeds().scene, b.seeds().scene);
        assert_ne!(a.seeds().scene, a.seeds().rx);
        assert_eq!(a.pl_bench_config().model_seed, a.seeds().model_init);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = RunConfig::from_json("{\n  \"seed\": \"x\"\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = RunConfig::from_json(r#"{"seed": 9, "rx": {"height": 2.0}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.rx.layout, RunConfig::default().rx.layout);
        assert_eq!(cfg.rx.height, 2.0);
    }
}
