use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{BoundLayer, LayerSpec};
use super::tensor::Scalar;
use crate::error::{Error, Result};
use crate::wei::Step;

/// Default widths for the per-step architectures.
pub const RASTER_CHANNELS: [usize; 2] = [8, 16];
pub const VECTOR_CHANNELS: usize = 16;
pub const RASTER_FEATURES: usize = 32;

/// Layer stack of a model.
///
/// A model optionally starts with a raster feature extractor over a
/// `[1, height, width]` image; its output vector is concatenated with the
/// `features` input vector and fed to the head as a `[1, L]` sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// When set, the layer budget for that step is enforced.
    pub step: Option<Step>,
    /// Raster `(width, height)` consumed by the extractor.
    pub raster: Option<(usize, usize)>,
    pub extractor: Vec<LayerSpec>,
    pub features: usize,
    pub head: Vec<LayerSpec>,
    pub param_init_seed: u64,
}

/// Conv and linear counts required per step: (extractor conv, extractor
/// linear, head conv, head linear).
pub fn layer_budget(step: Step) -> (usize, usize, usize, usize) {
    match step {
        Step::S1 => (2, 1, 3, 1),
        Step::S2 | Step::S3 => (0, 0, 3, 1),
        Step::S4 => (0, 0, 2, 1),
    }
}

fn conv1d_stack(convs: usize, first_in: usize, len: usize, outputs: usize) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    let mut ch = first_in;
    for _ in 0..convs {
        layers.push(LayerSpec::Conv1d { in_ch: ch, out_ch: VECTOR_CHANNELS, kernel: 3 });
        layers.push(LayerSpec::Relu);
        ch = VECTOR_CHANNELS;
    }
    layers.push(LayerSpec::Linear { inputs: ch * len, outputs });
    layers
}

impl ModelSpec {
    /// Default architecture for predicting a scalar from one WEI step.
    ///
    /// `features` is the vector input length (rx coordinates for S1);
    /// `raster` is required for S1.
    pub fn for_step(step: Step, features: usize, raster: Option<(usize, usize)>, seed: u64) -> Result<Self> {
        let (_, _, head_convs, _) = layer_budget(step);
        let (raster, extractor, head_len) = match step {
            Step::S1 => {
                let (w, h) = raster.ok_or_else(|| Error::SpecMismatch("S1 needs raster dimensions".into()))?;
                let [c1, c2] = RASTER_CHANNELS;
                let conv = |i, o| LayerSpec::Conv2d { in_ch: i, out_ch: o, kernel: 3, stride: 2 };
                let out = |n: usize| if n >= 3 { (n - 3) / 2 + 1 } else { 0 };
                let (oh, ow) = (out(out(h)), out(out(w)));
                let ext = vec![
                    conv(1, c1),
                    LayerSpec::Relu,
                    conv(c1, c2),
                    LayerSpec::Relu,
                    LayerSpec::Linear { inputs: c2 * oh * ow, outputs: RASTER_FEATURES },
                    LayerSpec::Relu,
                ];
                (Some((w, h)), ext, RASTER_FEATURES + features)
            }
            _ => (None, Vec::new(), features),
        };
        let spec = Self {
            step: Some(step),
            raster,
            extractor,
            features,
            head: conv1d_stack(head_convs, 1, head_len, 1),
            param_init_seed: seed,
        };
        spec.check_budget()?;
        Ok(spec)
    }

    pub fn check_budget(&self) -> Result<()> {
        let Some(step) = self.step else { return Ok(()) };
        let count = |layers: &[LayerSpec]| {
            (layers.iter().filter(|l| l.is_conv()).count(), layers.iter().filter(|l| l.is_linear()).count())
        };
        let (ec, el) = count(&self.extractor);
        let (hc, hl) = count(&self.head);
        let want = layer_budget(step);
        if (ec, el, hc, hl) != want {
            return Err(Error::SpecMismatch(format!(
                "{step} needs extractor {}conv+{}linear and head {}conv+{}linear, got {ec}+{el} and {hc}+{hl}",
                want.0, want.1, want.2, want.3
            )));
        }
        if (step == Step::S1) != self.raster.is_some() {
            return Err(Error::SpecMismatch(format!("{step}: raster input only allowed for S1")));
        }
        Ok(())
    }
}

/// Network with a flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    spec: ModelSpec,
    extractor: Vec<BoundLayer>,
    head: Vec<BoundLayer>,
    pub params: Vec<T>,
}

/// One sample: optional raster (row-major `height × width`) plus the
/// feature vector.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a, T> {
    pub raster: Option<&'a [T]>,
    pub features: &'a [T],
}

/// Activations recorded during a forward pass (inputs of every layer plus
/// the final output).
#[derive(Debug, Clone, Default)]
pub struct Trace<T> {
    pub(crate) extractor: Vec<Vec<T>>,
    pub(crate) head: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.head.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sign pattern of every ReLU input, used to detect kink crossings.
    pub(crate) fn relu_mask(&self, model_ext: &[BoundLayer], model_head: &[BoundLayer]) -> Vec<bool>
    where
        T: Scalar,
    {
        let mut mask = Vec::new();
        for (layers, acts) in [(model_ext, &self.extractor), (model_head, &self.head)] {
            for (l, a) in layers.iter().zip(acts.iter()) {
                if l.spec == LayerSpec::Relu {
                    mask.extend(a.iter().map(|v| *v > T::zero()));
                }
            }
        }
        mask
    }
}

fn bind(layers: &[LayerSpec], mut shape: Vec<usize>, offset: &mut usize) -> Result<Vec<BoundLayer>> {
    let mut out = Vec::with_capacity(layers.len());
    for spec in layers {
        let out_shape = spec.output_shape(&shape)?;
        let w_off = *offset;
        let b_off = w_off + spec.weight_len();
        *offset = b_off + spec.bias_len();
        out.push(BoundLayer { spec: *spec, in_shape: shape, out_shape: out_shape.clone(), w_off, b_off });
        shape = out_shape;
    }
    Ok(out)
}

/// Builds a model with He-uniform weights and zero biases.
pub fn build_model<T: Scalar>(spec: &ModelSpec) -> Result<Model<T>> {
    spec.check_budget()?;
    if spec.raster.is_some() == spec.extractor.is_empty() {
        return Err(Error::SpecMismatch("a raster input needs an extractor and vice versa".into()));
    }
    if spec.head.is_empty() {
        return Err(Error::SpecMismatch("empty head".into()));
    }
    let mut offset = 0;
    let extractor = match spec.raster {
        Some((w, h)) => bind(&spec.extractor, vec![1, h, w], &mut offset)?,
        None => Vec::new(),
    };
    let ext_out: usize = extractor.last().map_or(0, |l| l.out_len());
    let head = bind(&spec.head, vec![1, ext_out + spec.features], &mut offset)?;
    if head.last().map(|l| l.out_shape.len()) != Some(1) {
        return Err(Error::SpecMismatch("head must end in a vector output".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.param_init_seed);
    let mut params = vec![T::zero(); offset];
    for l in extractor.iter().chain(&head) {
        let n = l.spec.weight_len();
        if n == 0 {
            continue;
        }
        let bound = (6.0 / l.spec.fan_in() as f64).sqrt();
        for p in &mut params[l.w_off..l.w_off + n] {
            *p = T::of(rng.gen_range(-bound..bound));
        }
    }
    Ok(Model { spec: spec.clone(), extractor, head, params })
}

impl<T: Scalar> Model<T> {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn output_len(&self) -> usize {
        self.head.last().map_or(0, |l| l.out_len())
    }

    pub fn raster_len(&self) -> Option<usize> {
        self.spec.raster.map(|(w, h)| w * h)
    }

    pub(crate) fn extractor_layers(&self) -> &[BoundLayer] {
        &self.extractor
    }

    pub(crate) fn head_layers(&self) -> &[BoundLayer] {
        &self.head
    }

    /// Same architecture with parameters converted to another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            extractor: self.extractor.clone(),
            head: self.head.clone(),
            params: self.params.iter().map(|p| U::of(p.to_f64().unwrap_or(f64::NAN))).collect(),
        }
    }

    pub fn check_input(&self, input: &ModelInput<'_, T>) -> Result<()> {
        if input.features.len() != self.spec.features {
            return Err(Error::ShapeMismatch { expected: vec![self.spec.features], got: vec![input.features.len()] });
        }
        match (self.raster_len(), input.raster) {
            (None, None) => Ok(()),
            (Some(n), Some(r)) if r.len() == n => Ok(()),
            (expected, got) => Err(Error::ShapeMismatch {
                expected: expected.into_iter().collect(),
                got: got.map(|r| r.len()).into_iter().collect(),
            }),
        }
    }

    fn run(layers: &[BoundLayer], params: &[T], input: Vec<T>) -> Vec<Vec<T>> {
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(input);
        for l in layers {
            let mut y = Vec::new();
            l.forward(params, acts.last().expect("input pushed"), &mut y);
            acts.push(y);
        }
        acts
    }

    /// Extractor activations for a raster.
    pub(crate) fn extract(&self, raster: &[T]) -> Vec<Vec<T>> {
        Self::run(&self.extractor, &self.params, raster.to_vec())
    }

    /// Head activations given the extractor output (possibly empty).
    pub(crate) fn run_head(&self, extracted: &[T], features: &[T]) -> Vec<Vec<T>> {
        let mut x = Vec::with_capacity(extracted.len() + features.len());
        x.extend_from_slice(extracted);
        x.extend_from_slice(features);
        Self::run(&self.head, &self.params, x)
    }

    pub fn forward_trace(&self, input: &ModelInput<'_, T>) -> Result<Trace<T>> {
        self.check_input(input)?;
        let extractor = input.raster.map(|r| self.extract(r)).unwrap_or_default();
        let feat = extractor.last().map(Vec::as_slice).unwrap_or(&[]);
        let head = self.run_head(feat, input.features);
        Ok(Trace { extractor, head })
    }

    pub fn forward(&self, input: &ModelInput<'_, T>) -> Result<Vec<T>> {
        self.check_input(input)?;
        let mut buf = Vec::new();
        let mut cur;
        let head_in = match input.raster {
            Some(r) => {
                cur = r.to_vec();
                for l in &self.extractor {
                    l.forward(&self.params, &cur, &mut buf);
                    std::mem::swap(&mut cur, &mut buf);
                }
                cur.extend_from_slice(input.features);
                cur
            }
            None => input.features.to_vec(),
        };
        cur = head_in;
        for l in &self.head {
            l.forward(&self.params, &cur, &mut buf);
            std::mem::swap(&mut cur, &mut buf);
        }
        Ok(cur)
    }

    pub fn forward_batch(&self, inputs: &[ModelInput<'_, T>]) -> Result<Vec<Vec<T>>> {
        inputs.iter().map(|x| self.forward(x)).collect()
    }

    /// Backpropagates `grad_out` through the head, accumulating parameter
    /// gradients; returns the gradient w.r.t. the head input.
    pub(crate) fn backward_head(&self, acts: &[Vec<T>], grad_out: &[T], grads: &mut [T], need_input_grad: bool) -> Vec<T> {
        Self::backprop(&self.head, &self.params, acts, grad_out, grads, need_input_grad)
    }

    pub(crate) fn backward_extractor(&self, acts: &[Vec<T>], grad_out: &[T], grads: &mut [T]) {
        Self::backprop(&self.extractor, &self.params, acts, grad_out, grads, false);
    }

    fn backprop(layers: &[BoundLayer], params: &[T], acts: &[Vec<T>], grad_out: &[T], grads: &mut [T], need_input_grad: bool) -> Vec<T> {
        let mut g = grad_out.to_vec();
        let mut gx = Vec::new();
        for (i, l) in layers.iter().enumerate().rev() {
            // The first layer's input gradient is only needed on request.
            let want = i > 0 || need_input_grad;
            l.backward(params, &acts[i], &g, grads, want.then_some(&mut gx));
            if want {
                std::mem::swap(&mut g, &mut gx);
            }
        }
        g
    }

    /// Parameter gradients of the mean squared error for one sample, plus
    /// the loss itself. `grads` is overwritten.
    pub fn loss_and_grad(&self, input: &ModelInput<'_, T>, target: &[T], grads: &mut Vec<T>) -> Result<T> {
        let trace = self.forward_trace(input)?;
        let out = trace.output();
        if target.len() != out.len() {
            return Err(Error::ShapeMismatch { expected: vec![out.len()], got: vec![target.len()] });
        }
        grads.clear();
        grads.resize(self.params.len(), T::zero());
        let n = T::of(out.len() as f64);
        let mut loss = T::zero();
        let mut g = Vec::with_capacity(out.len());
        for (y, t) in out.iter().zip(target) {
            let e = *y - *t;
            loss += e * e / n;
            g.push(T::of(2.0) * e / n);
        }
        let has_ext = !trace.extractor.is_empty();
        let gin = self.backward_head(&trace.head, &g, grads, has_ext);
        if has_ext {
            let ext_len = trace.extractor.last().map_or(0, Vec::len);
            self.backward_extractor(&trace.extractor, &gin[..ext_len], grads);
        }
        Ok(loss)
    }
}
