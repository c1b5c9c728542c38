//! Finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::LayerSpec;
use super::model::{build_model, Model, ModelInput, ModelSpec};
use super::tensor::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameters compared.
    pub checked: usize,
    /// Parameters whose ± perturbation flipped a ReLU; the finite
    /// difference straddles a kink there and is not comparable.
    pub skipped: usize,
}

/// Relative error floor so that two vanishing gradients compare equal.
const REL_FLOOR: f64 = 1e-7;

/// Compares analytic parameter gradients of the MSE loss against central
/// differences, all evaluated in 64-bit precision.
pub fn grad_check<T: Scalar>(model: &Model<T>, input: &ModelInput<'_, T>, target: &[T], eps: f64) -> Result<GradCheckReport> {
    if !(1e-5..=1e-2).contains(&eps) {
        return Err(Error::InvalidConfig(format!("grad-check eps {eps} outside [1e-5, 1e-2]")));
    }
    let m64: Model<f64> = model.cast();
    let raster: Option<Vec<f64>> = input.raster.map(|r| r.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect());
    let features: Vec<f64> = input.features.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let target: Vec<f64> = target.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let x = ModelInput { raster: raster.as_deref(), features: &features };

    let mut analytic = Vec::new();
    m64.loss_and_grad(&x, &target, &mut analytic)?;
    let base_mask = m64.forward_trace(&x)?.relu_mask(m64.extractor_layers(), m64.head_layers());

    let mut probe = m64.clone();
    let mut scratch = Vec::new();
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for i in 0..probe.params.len() {
        let orig = probe.params[i];
        let mut eval = |v: f64, probe: &mut Model<f64>| -> Result<(f64, bool)> {
            probe.params[i] = v;
            let trace = probe.forward_trace(&x)?;
            let same = trace.relu_mask(probe.extractor_layers(), probe.head_layers()) == base_mask;
            let loss = probe.loss_and_grad(&x, &target, &mut scratch)?;
            Ok((loss, same))
        };
        let (plus, same_p) = eval(orig + eps, &mut probe)?;
        let (minus, same_m) = eval(orig - eps, &mut probe)?;
        probe.params[i] = orig;
        if !(same_p && same_m) {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

/// Layer type exercised by a randomized gradient probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Conv2d,
    Conv1d,
    Linear,
    Relu,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 4] = [ProbeKind::Conv2d, ProbeKind::Conv1d, ProbeKind::Linear, ProbeKind::Relu];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Conv2d => "conv2d",
            ProbeKind::Conv1d => "conv1d",
            ProbeKind::Linear => "linear",
            ProbeKind::Relu => "relu",
        }
    }
}

/// A random small model with a random input and target.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub model: Model<f64>,
    pub raster: Option<Vec<f64>>,
    pub features: Vec<f64>,
    pub target: Vec<f64>,
}

impl Probe {
    pub fn input(&self) -> ModelInput<'_, f64> {
        ModelInput { raster: self.raster.as_deref(), features: &self.features }
    }
}

/// Builds a probe of at most a few hundred parameters around `kind`;
/// parameters, inputs and targets are uniform in `[-1, 1]`.
pub fn probe(kind: ProbeKind, seed: u64) -> Result<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = ModelSpec { step: None, raster: None, extractor: vec![], features: 0, head: vec![], param_init_seed: seed };
    match kind {
        ProbeKind::Conv2d => {
            let (w, h) = (rng.gen_range(5..9), rng.gen_range(5..9));
            let (c1, c2) = (rng.gen_range(1..4), rng.gen_range(1..3));
            let (k2, s2) = (rng.gen_range(1..3), rng.gen_range(1..3));
            let conv = |i, o, k, s| LayerSpec::Conv2d { in_ch: i, out_ch: o, kernel: k, stride: s };
            let (h1, w1) = (h - 2, w - 2);
            let (h2, w2) = ((h1 - k2) / s2 + 1, (w1 - k2) / s2 + 1);
            spec.raster = Some((w, h));
            spec.extractor = vec![conv(1, c1, 3, 1), conv(c1, c2, k2, s2)];
            spec.features = rng.gen_range(1..4);
            spec.head = vec![LayerSpec::Linear { inputs: c2 * h2 * w2 + spec.features, outputs: 1 }];
        }
        ProbeKind::Conv1d => {
            let len = rng.gen_range(3..9);
            let (c1, c2) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let k2 = [1, 3, 5][rng.gen_range(0..3)];
            spec.features = len;
            spec.head = vec![
                LayerSpec::Conv1d { in_ch: 1, out_ch: c1, kernel: 3 },
                LayerSpec::Conv1d { in_ch: c1, out_ch: c2, kernel: k2 },
                LayerSpec::Linear { inputs: c2 * len, outputs: rng.gen_range(1..3) },
            ];
        }
        ProbeKind::Linear => {
            let (n, hidden, out) = (rng.gen_range(1..9), rng.gen_range(1..9), rng.gen_range(1..4));
            spec.features = n;
            spec.head = vec![LayerSpec::Linear { inputs: n, outputs: hidden }, LayerSpec::Linear { inputs: hidden, outputs: out }];
        }
        ProbeKind::Relu => {
            let (n, hidden) = (rng.gen_range(2..8), rng.gen_range(4..12));
            spec.features = n;
            spec.head = vec![
                LayerSpec::Linear { inputs: n, outputs: hidden },
                LayerSpec::Relu,
                LayerSpec::Linear { inputs: hidden, outputs: 4 },
                LayerSpec::Relu,
                LayerSpec::Linear { inputs: 4, outputs: 1 },
            ];
        }
    }
    let mut model = build_model::<f64>(&spec)?;
    for p in &mut model.params {
        *p = rng.gen_range(-1.0..1.0);
    }
    let raster = model.raster_len().map(|n| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let features = (0..spec.features).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let target = (0..model.output_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(Probe { model, raster, features, target })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub kind: ProbeKind,
    pub models: usize,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Runs [`grad_check`] on `seeds` random probes of every layer type.
pub fn grad_check_suite(seeds: u64, eps: f64) -> Result<Vec<SuiteRow>> {
    ProbeKind::ALL
        .iter()
        .map(|&kind| {
            let mut row = SuiteRow { kind, models: 0, max_rel_error: 0.0, checked: 0, skipped: 0 };
            for seed in 0..seeds {
                let p = probe(kind, seed)?;
                let r = grad_check(&p.model, &p.input(), &p.target, eps)?;
                row.models += 1;
                row.max_rel_error = row.max_rel_error.max(r.max_rel_error);
                row.checked += r.checked;
                row.skipped += r.skipped;
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::layers::LayerSpec;
    use crate::neuralnet::model::{build_model, ModelSpec};

    fn linear_spec(n: usize) -> ModelSpec {
        ModelSpec {
            step: None,
            raster: None,
            extractor: vec![],
            features: n,
            head: vec![LayerSpec::Linear { inputs: n, outputs: 1 }],
            param_init_seed: 3,
        }
    }

    #[test]
    fn linear_gradient_is_closed_form() {
        let m = build_model::<f64>(&linear_spec(4)).unwrap();
        let x = [0.5, -1.0, 2.0, 0.25];
        let input = ModelInput { raster: None, features: &x };
        let y = 1.5;
        let yhat = m.forward(&input).unwrap()[0];
        let mut g = Vec::new();
        m.loss_and_grad(&input, &[y], &mut g).unwrap();
        for k in 0..4 {
            assert_eq!(g[k], 2.0 * (yhat - y) * x[k]);
        }
        assert_eq!(g[4], 2.0 * (yhat - y));
    }

    #[test]
    fn eps_outside_range_is_rejected() {
        let m = build_model::<f32>(&linear_spec(2)).unwrap();
        let input = ModelInput { raster: None, features: &[1.0, 2.0] };
        assert!(grad_check(&m, &input, &[0.0], 0.1).is_err());
    }

    #[test]
    fn relu_smooth_region() {
        let spec = ModelSpec {
            head: vec![LayerSpec::Linear { inputs: 3, outputs: 4 }, LayerSpec::Relu, LayerSpec::Linear { inputs: 4, outputs: 1 }],
            features: 3,
            ..linear_spec(3)
        };
        let mut m = build_model::<f64>(&spec).unwrap();
        // biases of the hidden layer keep every pre-activation far from zero
        for b in &mut m.params[12..16] {
            *b = 5.0;
        }
        let r = grad_check(&m, &ModelInput { raster: None, features: &[0.1, -0.2, 0.3] }, &[0.7], 1e-3).unwrap();
        assert_eq!(r.skipped, 0);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }
}
