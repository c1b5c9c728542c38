//! A trained model together with the normalization it was trained under,
//! and its checkpoint format.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::model::{build_model, Model, ModelInput, ModelSpec};
use crate::error::{Error, Result};
use crate::wei::{read_f32s, write_f32s};

/// Per-feature affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Statistics over `rows`; constant columns get unit scale.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f32]>) -> Self {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for row in rows {
            if sum.is_empty() {
                sum = vec![0.0; row.len()];
                sq = vec![0.0; row.len()];
            }
            for (k, v) in row.iter().enumerate() {
                sum[k] += *v as f64;
                sq[k] += (*v as f64) * (*v as f64);
            }
            n += 1;
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var.sqrt() > 1e-9 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn identity(n: usize) -> Self {
        Self { mean: vec![0.0; n], std: vec![1.0; n] }
    }

    pub fn apply(&self, row: &[f32]) -> Vec<f32> {
        row.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| ((*v as f64 - m) / s) as f32).collect()
    }

    pub fn invert(&self, row: &[f32]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| *v as f64 * s + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub features: Standardizer,
    pub target: Standardizer,
    /// Multiplier applied to raster cells (1 / tallest building).
    pub raster_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub model: Model<f32>,
    pub norm: Normalization,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: u32,
    spec: ModelSpec,
    norm: Normalization,
    param_count: usize,
}

pub const CHECKPOINT_FORMAT: u32 = 1;

impl Predictor {
    /// Predicts in target units from raw (unnormalized) inputs.
    pub fn predict(&self, raster: Option<&[f32]>, features: &[f32]) -> Result<Vec<f64>> {
        let scaled: Option<Vec<f32>> = raster.map(|r| {
            let s = self.norm.raster_scale as f32;
            r.iter().map(|v| v * s).collect()
        });
        let feats = self.norm.features.apply(features);
        let out = self.model.forward(&ModelInput { raster: scaled.as_deref(), features: &feats })?;
        Ok(self.norm.target.invert(&out))
    }

    /// JSON header length (`u32` LE), the header, then the parameters as
    /// little-endian `f32`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT,
            spec: self.model.spec().clone(),
            norm: self.norm.clone(),
            param_count: self.model.param_count(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        write_f32s(w, &self.model.params)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut json)?;
        let header: CheckpointHeader = serde_json::from_slice(&json)?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::VersionMismatch { expected: CHECKPOINT_FORMAT, found: header.format });
        }
        let mut model = build_model::<f32>(&header.spec)?;
        if model.param_count() != header.param_count {
            return Err(Error::Corrupt { offset: 4, reason: "parameter count disagrees with spec".into() });
        }
        model.params = read_f32s(r, header.param_count).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Corrupt { offset: 4 + json.len() as u64, reason: "truncated parameters".into() },
            _ => Error::Io(e),
        })?;
        Ok(Self { model, norm: header.norm })
    }
}
