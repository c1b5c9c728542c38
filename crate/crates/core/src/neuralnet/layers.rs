//! Layer kernels. Each layer reads an input activation and writes an output
//! activation; parameters live in the model's flat buffer and are passed
//! in as slices.

use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid (unpadded) 2-D convolution over `[C, H, W]`.
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize },
    /// Stride-1 1-D convolution over `[C, L]`, zero padded to keep `L`.
    Conv1d { in_ch: usize, out_ch: usize, kernel: usize },
    /// Fully connected layer over the flattened input.
    Linear { inputs: usize, outputs: usize },
    Relu,
}

impl LayerSpec {
    pub fn is_conv(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Conv1d { .. })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, LayerSpec::Linear { .. })
    }

    pub fn weight_len(&self) -> usize {
        match *self {
            LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => out_ch * in_ch * kernel * kernel,
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => out_ch * in_ch * kernel,
            LayerSpec::Linear { inputs, outputs } => inputs * outputs,
            LayerSpec::Relu => 0,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerSpec::Conv2d { out_ch, .. } | LayerSpec::Conv1d { out_ch, .. } => out_ch,
            LayerSpec::Linear { outputs, .. } => outputs,
            LayerSpec::Relu => 0,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv2d { in_ch, kernel, .. } => in_ch * kernel * kernel,
            LayerSpec::Conv1d { in_ch, kernel, .. } => in_ch * kernel,
            LayerSpec::Linear { inputs, .. } => inputs,
            LayerSpec::Relu => 0,
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::ShapeMismatch { expected, got: input.to_vec() };
        match *self {
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride } => {
                let [c, h, w] = input else { return Err(mismatch(vec![in_ch, 0, 0])) };
                if *c != in_ch || *h < kernel || *w < kernel || stride == 0 {
                    return Err(mismatch(vec![in_ch, kernel, kernel]));
                }
                Ok(vec![out_ch, (h - kernel) / stride + 1, (w - kernel) / stride + 1])
            }
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => {
                let [c, l] = input else { return Err(mismatch(vec![in_ch, 0])) };
                if *c != in_ch || kernel % 2 == 0 {
                    return Err(mismatch(vec![in_ch, *l]));
                }
                Ok(vec![out_ch, *l])
            }
            LayerSpec::Linear { inputs, outputs } => {
                if input.iter().product::<usize>() != inputs {
                    return Err(mismatch(vec![inputs]));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
        }
    }
}

/// A layer bound to its input shape and parameter offsets.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BoundLayer {
    pub spec: LayerSpec,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub w_off: usize,
    pub b_off: usize,
}

impl BoundLayer {
    pub fn out_len(&self) -> usize {
        self.out_shape.iter().product()
    }

    pub fn params<'a, T>(&self, all: &'a [T]) -> (&'a [T], &'a [T]) {
        (
            &all[self.w_off..self.w_off + self.spec.weight_len()],
            &all[self.b_off..self.b_off + self.spec.bias_len()],
        )
    }

    pub fn forward<T: Scalar>(&self, params: &[T], x: &[T], y: &mut Vec<T>) {
        let (w, b) = self.params(params);
        y.clear();
        y.resize(self.out_len(), T::zero());
        match self.spec {
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride } => {
                let (h, wd) = (self.in_shape[1], self.in_shape[2]);
                let (oh, ow) = (self.out_shape[1], self.out_shape[2]);
                for o in 0..out_ch {
                    let plane = &mut y[o * oh * ow..(o + 1) * oh * ow];
                    plane.iter_mut().for_each(|v| *v = b[o]);
                    for c in 0..in_ch {
                        let input = &x[c * h * wd..(c + 1) * h * wd];
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let wv = w[((o * in_ch + c) * kernel + ky) * kernel + kx];
                                for oy in 0..oh {
                                    let row = &input[(oy * stride + ky) * wd + kx..];
                                    let out_row = &mut plane[oy * ow..(oy + 1) * ow];
                                    for (ox, ov) in out_row.iter_mut().enumerate() {
                                        *ov += wv * row[ox * stride];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => {
                let l = self.in_shape[1];
                let pad = kernel / 2;
                for o in 0..out_ch {
                    let out = &mut y[o * l..(o + 1) * l];
                    out.iter_mut().for_each(|v| *v = b[o]);
                    for c in 0..in_ch {
                        let input = &x[c * l..(c + 1) * l];
                        for k in 0..kernel {
                            let wv = w[(o * in_ch + c) * kernel + k];
                            // out[i] += wv * in[i + k - pad] over the valid range
                            let (lo, hi) = (pad.saturating_sub(k), (l + pad).saturating_sub(k).min(l));
                            if lo >= hi {
                                continue;
                            }
                            let src = lo + k - pad;
                            axpy(wv, &input[src..src + hi - lo], &mut out[lo..hi]);
                        }
                    }
                }
            }
            LayerSpec::Linear { inputs, outputs } => {
                for j in 0..outputs {
                    y[j] = b[j] + dot(&w[j * inputs..(j + 1) * inputs], x);
                }
            }
            LayerSpec::Relu => {
                for (yo, xi) in y.iter_mut().zip(x) {
                    *yo = if *xi > T::zero() { *xi } else { T::zero() };
                }
            }
        }
    }

    /// Accumulates parameter gradients into `grads` and, when `gx` is
    /// given, writes the input gradient.
    pub fn backward<T: Scalar>(&self, params: &[T], x: &[T], gy: &[T], grads: &mut [T], gx: Option<&mut Vec<T>>) {
        let (w, _) = self.params(params);
        let mut gx = gx.map(|g| {
            g.clear();
            g.resize(x.len(), T::zero());
            g
        });
        match self.spec {
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride } => {
                let (h, wd) = (self.in_shape[1], self.in_shape[2]);
                let (oh, ow) = (self.out_shape[1], self.out_shape[2]);
                for o in 0..out_ch {
                    let gplane = &gy[o * oh * ow..(o + 1) * oh * ow];
                    grads[self.b_off + o] += gplane.iter().copied().sum();
                    for c in 0..in_ch {
                        let input = &x[c * h * wd..(c + 1) * h * wd];
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let wi = ((o * in_ch + c) * kernel + ky) * kernel + kx;
                                let mut acc = T::zero();
                                for oy in 0..oh {
                                    let row = &input[(oy * stride + ky) * wd + kx..];
                                    let grow = &gplane[oy * ow..(oy + 1) * ow];
                                    for (ox, g) in grow.iter().enumerate() {
                                        acc += *g * row[ox * stride];
                                    }
                                }
                                grads[self.w_off + wi] += acc;
                                if let Some(gx) = gx.as_deref_mut() {
                                    let wv = w[wi];
                                    let gin = &mut gx[c * h * wd..(c + 1) * h * wd];
                                    for oy in 0..oh {
                                        let base = (oy * stride + ky) * wd + kx;
                                        let grow = &gplane[oy * ow..(oy + 1) * ow];
                                        for (ox, g) in grow.iter().enumerate() {
                                            gin[base + ox * stride] += wv * *g;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => {
                let l = self.in_shape[1];
                let pad = kernel / 2;
                for o in 0..out_ch {
                    let g = &gy[o * l..(o + 1) * l];
                    grads[self.b_off + o] += g.iter().copied().sum();
                    for c in 0..in_ch {
                        let input = &x[c * l..(c + 1) * l];
                        for k in 0..kernel {
                            let wi = (o * in_ch + c) * kernel + k;
                            let (lo, hi) = (pad.saturating_sub(k), (l + pad).saturating_sub(k).min(l));
                            if lo >= hi {
                                continue;
                            }
                            let src = lo + k - pad;
                            grads[self.w_off + wi] += dot(&g[lo..hi], &input[src..src + hi - lo]);
                            if let Some(gx) = gx.as_deref_mut() {
                                axpy(w[wi], &g[lo..hi], &mut gx[c * l + src..c * l + src + hi - lo]);
                            }
                        }
                    }
                }
            }
            LayerSpec::Linear { inputs, outputs } => {
                for j in 0..outputs {
                    let gj = gy[j];
                    grads[self.b_off + j] += gj;
                    if gj == T::zero() {
                        continue;
                    }
                    axpy(gj, x, &mut grads[self.w_off + j * inputs..self.w_off + (j + 1) * inputs]);
                    if let Some(gx) = gx.as_deref_mut() {
                        axpy(gj, &w[j * inputs..(j + 1) * inputs], gx);
                    }
                }
            }
            LayerSpec::Relu => {
                if let Some(gx) = gx {
                    for ((gi, xi), g) in gx.iter_mut().zip(x).zip(gy) {
                        *gi = if *xi > T::zero() { *g } else { T::zero() };
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(spec: LayerSpec, in_shape: Vec<usize>) -> BoundLayer {
        let out_shape = spec.output_shape(&in_shape).unwrap();
        BoundLayer { spec, in_shape, out_shape, w_off: 0, b_off: spec.weight_len() }
    }

    /// Direct definition of a padded 1-D convolution, written independently.
    fn conv1d_reference(w: &[f64], b: &[f64], x: &[f64], in_ch: usize, out_ch: usize, k: usize, l: usize) -> Vec<f64> {
        let mut y = vec![0.0; out_ch * l];
        for o in 0..out_ch {
            for i in 0..l {
                let mut s = b[o];
                for c in 0..in_ch {
                    for t in 0..k {
                        let j = i as isize + t as isize - (k / 2) as isize;
                        if j >= 0 && (j as usize) < l {
                            s += w[(o * in_ch + c) * k + t] * x[c * l + j as usize];
                        }
                    }
                }
                y[o * l + i] = s;
            }
        }
        y
    }

    #[test]
    fn conv1d_matches_reference() {
        let spec = LayerSpec::Conv1d { in_ch: 2, out_ch: 3, kernel: 3 };
        let layer = bind(spec, vec![2, 5]);
        let params: Vec<f64> = (0..spec.weight_len() + spec.bias_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.91).cos()).collect();
        let mut y = Vec::new();
        layer.forward(&params, &x, &mut y);
        let (w, b) = params.split_at(spec.weight_len());
        let r = conv1d_reference(w, b, &x, 2, 3, 3, 5);
        for (a, e) in y.iter().zip(&r) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn conv2d_shape_and_value() {
        let spec = LayerSpec::Conv2d { in_ch: 1, out_ch: 1, kernel: 3, stride: 2 };
        let layer = bind(spec, vec![1, 7, 7]);
        assert_eq!(layer.out_shape, vec![1, 3, 3]);
        let mut params = vec![1.0f64; 9];
        params.push(0.5);
        let x: Vec<f64> = (0..49).map(|i| i as f64).collect();
        let mut y = Vec::new();
        layer.forward(&params, &x, &mut y);
        // top-left window: rows 0..3, cols 0..3
        let expect: f64 = [0, 1, 2, 7, 8, 9, 14, 15, 16].iter().map(|&i| i as f64).sum::<f64>() + 0.5;
        assert_eq!(y[0], expect);
    }

    #[test]
    fn shape_errors() {
        let spec = LayerSpec::Linear { inputs: 4, outputs: 2 };
        assert!(spec.output_shape(&[5]).is_err());
        let conv = LayerSpec::Conv2d { in_ch: 1, out_ch: 2, kernel: 3, stride: 2 };
        assert!(conv.output_shape(&[1, 2, 2]).is_err());
        assert!(conv.output_shape(&[3]).is_err());
    }
}
