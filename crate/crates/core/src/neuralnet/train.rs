//! Minibatch training with SGD or Adam on the mean squared error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Model, ModelInput};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Stop after this many epochs without validation improvement; the
    /// best validation checkpoint is restored either way.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, batch_size: 64, epochs: 200, optimizer: Optimizer::default(), seed: 0, patience: Some(30) }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidConfig("train.lr must be finite and non-negative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("train.epochs and train.batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One normalized training example. Rasters are shared across examples
/// through an index into [`Examples::rasters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub raster: Option<usize>,
    pub features: Vec<f32>,
    pub target: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Examples {
    pub rasters: Vec<Vec<f32>>,
    pub items: Vec<Example>,
}

impl Examples {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn input(&self, i: usize) -> ModelInput<'_, f32> {
        let e = &self.items[i];
        ModelInput { raster: e.raster.map(|r| self.rasters[r].as_slice()), features: &e.features }
    }
}

/// Optimizer state bound to one model.
#[derive(Debug)]
pub struct Trainer<'m> {
    pub model: &'m mut Model<f32>,
    cfg: TrainConfig,
    grads: Vec<f32>,
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
}

impl<'m> Trainer<'m> {
    pub fn new(model: &'m mut Model<f32>, cfg: TrainConfig) -> Self {
        let n = model.param_count();
        Self { model, cfg, grads: vec![0.0; n], m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Computes the batch MSE and its gradient, then applies one optimizer
    /// update. Returns the loss measured before the update.
    ///
    /// Examples that share a raster share one extractor pass: the extractor
    /// is linear in its output gradient for a fixed activation pattern, so
    /// summing the per-example feature gradients first is exact.
    pub fn backward_and_step(&mut self, data: &Examples, batch: &[usize]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        let model = &*self.model;
        self.grads.iter_mut().for_each(|g| *g = 0.0);
        let outputs = model.output_len();
        let scale = 1.0 / (batch.len() * outputs) as f32;

        // raster index -> (extractor activations, accumulated feature grad)
        let mut shared: Vec<(usize, Vec<Vec<f32>>, Vec<f32>)> = Vec::new();
        let mut loss = 0.0f64;
        for &i in batch {
            let ex = &data.items[i];
            model.check_input(&data.input(i))?;
            let slot = ex.raster.map(|r| match shared.iter().position(|(k, _, _)| *k == r) {
                Some(p) => p,
                None => {
                    let acts = model.extract(&data.rasters[r]);
                    let n = acts.last().map_or(0, Vec::len);
                    shared.push((r, acts, vec![0.0; n]));
                    shared.len() - 1
                }
            });
            let feat = slot.map(|s| shared[s].1.last().expect("extractor output").as_slice()).unwrap_or(&[]);
            let acts = model.run_head(feat, &ex.features);
            let out = acts.last().expect("head output");
            if ex.target.len() != out.len() {
                return Err(Error::ShapeMismatch { expected: vec![out.len()], got: vec![ex.target.len()] });
            }
            let mut g = Vec::with_capacity(out.len());
            for (y, t) in out.iter().zip(&ex.target) {
                let e = y - t;
                loss += (e as f64) * (e as f64);
                g.push(2.0 * e * scale);
            }
            let gin = model.backward_head(&acts, &g, &mut self.grads, slot.is_some());
            if let Some(s) = slot {
                let acc = &mut shared[s].2;
                for (a, v) in acc.iter_mut().zip(&gin) {
                    *a += v;
                }
            }
        }
        for (_, acts, g) in &shared {
            model.backward_extractor(acts, g, &mut self.grads);
        }
        let loss = loss / (batch.len() * outputs) as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: model.spec().step });
        }
        self.apply();
        Ok(loss)
    }

    fn apply(&mut self) {
        let lr = self.cfg.lr as f32;
        let params = &mut self.model.params;
        match self.cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(&self.grads) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let (b1, b2) = (beta1 as f32, beta2 as f32);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                let eps = eps as f32;
                for (((p, g), m), v) in params.iter_mut().zip(&self.grads).zip(&mut self.m).zip(&mut self.v) {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Mean squared error over a whole example set (normalized units).
pub fn evaluate_mse(model: &Model<f32>, data: &Examples) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..data.len() {
        let y = model.forward(&data.input(i))?;
        for (a, b) in y.iter().zip(&data.items[i].target) {
            sum += ((a - b) as f64).powi(2);
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// Trains for `cfg.epochs` (or until patience runs out) with a seeded
/// shuffle each epoch and restores the parameters with the best validation
/// loss.
pub fn fit(model: &mut Model<f32>, train: &Examples, val: &Examples, cfg: &TrainConfig) -> Result<FitReport> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = FitReport { epochs_run: 0, best_epoch: 0, train_loss: Vec::new(), val_loss: Vec::new() };
    let mut best = (f64::INFINITY, model.params.clone());
    let mut trainer = Trainer::new(model, *cfg);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            total += trainer.backward_and_step(train, batch)? * batch.len() as f64;
        }
        report.train_loss.push(total / train.len() as f64);
        let val_loss = if val.is_empty() { report.train_loss[epoch] } else { evaluate_mse(trainer.model, val)? };
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: trainer.model.spec().step });
        }
        report.val_loss.push(val_loss);
        report.epochs_run = epoch + 1;
        if val_loss < best.0 {
            best = (val_loss, trainer.model.params.clone());
            report.best_epoch = epoch;
        } else if cfg.patience.is_some_and(|p| epoch - report.best_epoch >= p) {
            break;
        }
    }
    model.params = best.1;
    Ok(report)
}
