//! Four-way path-loss prediction comparison: one model per WEI step,
//! trained from identical seeds, compared on test MSE, single-sample
//! inference latency, data quantity and parameter count.

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::latency::{measure_latencies, measure_latency};
use crate::error::{Error, Result};
use crate::neuralnet::{build_model, count_inputs, fit, Example, Examples, ModelSpec, Normalization, Predictor, Standardizer, TrainConfig};
use crate::seed::fingerprint;
use crate::wei::Step;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlBenchConfig {
    pub train: TrainConfig,
    pub model_seed: u64,
    pub latency_reps: usize,
}

impl Default for PlBenchConfig {
    fn default() -> Self {
        Self { train: TrainConfig::default(), model_seed: 0, latency_reps: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: Step,
    /// Test-set mean squared error of the predicted path loss, dB².
    pub test_mse: f64,
    pub val_mse: f64,
    /// Median single-sample inference time, seconds.
    pub latency_s: f64,
    pub quantity: usize,
    pub params: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

/// Orderings and ratios derived from the four results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// MSE(S4) < MSE(S3) < MSE(S1) < MSE(S2).
    pub full_mse_order: bool,
    /// MSE(S4) < MSE(S3) < min(MSE(S1), MSE(S2)).
    pub knowledge_beats_raw: bool,
    /// t(S4) < t(S3) <= t(S2) < t(S1).
    pub latency_order: bool,
    /// 1 - quantity(S2) / quantity(S1).
    pub s1_to_s2_data_reduction: f64,
    /// 1 - t(S4) / t(S3).
    pub s3_to_s4_latency_saving: f64,
    /// 1 - MSE(S4) / MSE(S3).
    pub s3_to_s4_mse_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlBenchReport {
    pub steps: Vec<StepResult>,
    /// Variance of the test-set path loss (constant-predictor MSE), dB².
    pub test_pl_variance: f64,
    pub test_count: usize,
    pub comparison: Comparison,
    pub config: PlBenchConfig,
    pub config_hash: String,
    pub dataset_seed: u64,
    pub scene_seed: u64,
}

impl PlBenchReport {
    pub fn get(&self, step: Step) -> &StepResult {
        self.steps.iter().find(|r| r.step == step).expect("all four steps are reported")
    }

    /// One CSV row per step.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,quantity,params,mse_db2,latency_s\n");
        for r in &self.steps {
            s.push_str(&format!("{},{},{},{:.6},{:.9}\n", r.step, r.quantity, r.params, r.test_mse, r.latency_s));
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<5} {:>10} {:>9} {:>12} {:>14}\n", "step", "quantity", "params", "mse (dB^2)", "latency (s)");
        for r in &self.steps {
            s.push_str(&format!("{:<5} {:>10} {:>9} {:>12.3} {:>14.3e}\n", r.step.to_string(), r.quantity, r.params, r.test_mse, r.latency_s));
        }
        s.push_str(&format!("constant-predictor MSE (test PL variance): {:.3} dB^2\n", self.test_pl_variance));
        let c = &self.comparison;
        s.push_str(&format!(
            "full MSE order S4<S3<S1<S2: {}; S4<S3<min(S1,S2): {}; latency order: {}\n",
            c.full_mse_order, c.knowledge_beats_raw, c.latency_order
        ));
        s.push_str(&format!(
            "S1->S2 data reduction {:.2}%; S3->S4 latency saving {:.1}%; S3->S4 MSE gain {:.1}%\n",
            100.0 * c.s1_to_s2_data_reduction,
            100.0 * c.s3_to_s4_latency_saving,
            100.0 * c.s3_to_s4_mse_gain
        ));
        s
    }
}

/// Normalized examples for `step` over the links in `idx`.
pub(crate) fn step_examples(ds: &Dataset, step: Step, idx: &[usize], norm: &Normalization) -> Examples {
    let raster = ds.raster.as_ref().filter(|_| step == Step::S1).map(|r| {
        let s = norm.raster_scale as f32;
        r.data.iter().map(|v| v * s).collect::<Vec<f32>>()
    });
    let has_raster = raster.is_some();
    let items = idx
        .iter()
        .map(|&i| {
            let rec = ds.wei(i, step).expect("step present");
            let target = norm.target.apply(&[ds.records[i].truth.pl as f32]);
            Example { raster: has_raster.then_some(0), features: norm.features.apply(&rec.vector()), target }
        })
        .collect();
    Examples { rasters: raster.into_iter().collect(), items }
}

fn fit_normalization(ds: &Dataset, step: Step) -> Normalization {
    let train = &ds.split.train;
    let rows: Vec<Vec<f32>> = train.iter().map(|&i| ds.wei(i, step).expect("step present").vector()).collect();
    let targets: Vec<[f32; 1]> = train.iter().map(|&i| [ds.records[i].truth.pl as f32]).collect();
    let max_h = ds.scene.max_building_height();
    Normalization {
        features: Standardizer::fit(rows.iter().map(Vec::as_slice)),
        target: Standardizer::fit(targets.iter().map(|t| t.as_slice())),
        raster_scale: if max_h > 0.0 { 1.0 / max_h } else { 1.0 },
    }
}

/// Trains and evaluates the path-loss model for one step.
pub fn train_pl_model(ds: &Dataset, step: Step, cfg: &PlBenchConfig) -> Result<(Predictor, StepResult)> {
    let attribute = |e: Error| match e {
        Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { step: Some(step) },
        other => other,
    };
    let norm = fit_normalization(ds, step);
    let train = step_examples(ds, step, &ds.split.train, &norm);
    let val = step_examples(ds, step, &ds.split.val, &norm);
    let features = train.items.first().map_or(0, |e| e.features.len());
    let raster_dims = ds.raster.as_ref().filter(|_| step == Step::S1).map(|r| (r.width, r.height));
    let spec = ModelSpec::for_step(step, features, raster_dims, cfg.model_seed)?;
    let mut model = build_model::<f32>(&spec)?;
    let train_cfg = TrainConfig { seed: cfg.train.seed, ..cfg.train };
    let fit_report = fit(&mut model, &train, &val, &train_cfg).map_err(attribute)?;
    let predictor = Predictor { model, norm };

    let raster = ds.raster.as_ref().filter(|_| step == Step::S1).map(|r| r.data.as_slice());
    let mse_over = |idx: &[usize]| -> Result<f64> {
        let mut sum = 0.0;
        for &i in idx {
            let rec = ds.wei(i, step).expect("step present");
            let p = predictor.predict(raster, &rec.vector())?[0];
            sum += (p - ds.records[i].truth.pl).powi(2);
        }
        Ok(sum / idx.len().max(1) as f64)
    };
    let test_mse = mse_over(&ds.split.test)?;
    let val_mse = mse_over(&ds.split.val)?;

    let probe = ds.split.test.first().or(ds.split.train.first()).copied().unwrap_or(0);
    let features = ds.wei(probe, step).expect("step present").vector();
    let latency_s = measure_latency(|| predictor.predict(raster, &features), cfg.latency_reps)?;

    let result = StepResult {
        step,
        test_mse,
        val_mse,
        latency_s,
        quantity: count_inputs(step, ds.building_count(), ds.config.raster_dims),
        params: predictor.model.param_count(),
        epochs_run: fit_report.epochs_run,
        best_epoch: fit_report.best_epoch,
    };
    Ok((predictor, result))
}

pub fn compare(steps: &[StepResult]) -> Comparison {
    let get = |s: Step| steps.iter().find(|r| r.step == s).expect("all four steps");
    let (s1, s2, s3, s4) = (get(Step::S1), get(Step::S2), get(Step::S3), get(Step::S4));
    Comparison {
        full_mse_order: s4.test_mse < s3.test_mse && s3.test_mse < s1.test_mse && s1.test_mse < s2.test_mse,
        knowledge_beats_raw: s4.test_mse < s3.test_mse && s3.test_mse < s1.test_mse.min(s2.test_mse),
        latency_order: s4.latency_s < s3.latency_s && s3.latency_s <= s2.latency_s && s2.latency_s < s1.latency_s,
        s1_to_s2_data_reduction: 1.0 - s2.quantity as f64 / s1.quantity as f64,
        s3_to_s4_latency_saving: 1.0 - s4.latency_s / s3.latency_s,
        s3_to_s4_mse_gain: 1.0 - s4.test_mse / s3.test_mse,
    }
}

/// Trains one model per step and reports the comparison.
pub fn run_pl_benchmark(ds: &Dataset, cfg: &PlBenchConfig) -> Result<(PlBenchReport, Vec<Predictor>)> {
    if !ds.has_steps(&Step::ALL) {
        return Err(Error::InvalidConfig("the path-loss benchmark needs all four WEI steps".into()));
    }
    if ds.split.test.is_empty() || ds.split.train.is_empty() {
        return Err(Error::InvalidConfig("dataset split has an empty train or test part".into()));
    }
    let mut steps = Vec::new();
    let mut predictors = Vec::new();
    for step in Step::ALL {
        let (p, r) = train_pl_model(ds, step, cfg)?;
        steps.push(r);
        predictors.push(p);
    }
    // Re-time all four together so the ordering is not skewed by load
    // changes between training runs.
    let latencies = {
        let raster = ds.raster.as_ref().map(|r| r.data.as_slice());
        let probe = ds.split.test[0];
        let inputs: Vec<Vec<f32>> = Step::ALL.iter().map(|&s| ds.wei(probe, s).expect("step present").vector()).collect();
        let mut calls: Vec<Box<dyn FnMut() + '_>> = predictors
            .iter()
            .zip(&inputs)
            .zip(Step::ALL)
            .map(|((p, x), step)| {
                let raster = raster.filter(|_| step == Step::S1);
                Box::new(move || {
                    std::hint::black_box(p.predict(raster, x).expect("timed once already"));
                }) as Box<dyn FnMut() + '_>
            })
            .collect();
        let mut refs: Vec<&mut dyn FnMut()> = calls.iter_mut().map(|c| &mut **c as &mut dyn FnMut()).collect();
        measure_latencies(&mut refs, cfg.latency_reps)?
    };
    for (r, t) in steps.iter_mut().zip(latencies) {
        r.latency_s = t;
    }
    let test_pl: Vec<f64> = ds.split.test.iter().map(|&i| ds.records[i].truth.pl).collect();
    let mean = test_pl.iter().sum::<f64>() / test_pl.len() as f64;
    let test_pl_variance = test_pl.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / test_pl.len() as f64;
    let report = PlBenchReport {
        comparison: compare(&steps),
        steps,
        test_pl_variance,
        test_count: test_pl.len(),
        config: *cfg,
        config_hash: fingerprint(&serde_json::to_vec(cfg)?),
        dataset_seed: ds.seed,
        scene_seed: ds.scene.seed,
    };
    Ok((report, predictors))
}
