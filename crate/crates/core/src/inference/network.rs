use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Classifier, InferenceError, Posterior};
use crate::imagegeom::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Conv { out_channels: usize, kernel: usize, stride: usize, pad: usize },
    Relu,
    Maxpool { kernel: usize, stride: usize },
    FullyConnected { out_dim: usize },
    Softmax,
}

/// One layer with its parameters. Conv weights are
/// `[out_channels][in_channels][ky][kx]`, fully connected `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Layer {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self { name: name.into(), kind, weights: Vec::new(), bias: Vec::new() }
    }

    pub fn with_params(name: impl Into<String>, kind: LayerKind, weights: Vec<f32>, bias: Vec<f32>) -> Self {
        Self { name: name.into(), kind, weights, bias }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self.kind, LayerKind::Conv { .. } | LayerKind::FullyConnected { .. })
    }
}

/// Shape `(channels, height, width)` of an activation.
pub(crate) type Shape = (usize, usize, usize);

/// Immutable network: input geometry, per-channel means and layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    input: InputDims,
    means: Vec<f32>,
    layers: Vec<Layer>,
    shapes: Vec<Shape>,
}

fn dim_err(layer: &Layer, msg: impl Into<String>) -> InferenceError {
    InferenceError::Dimension { layer: layer.name.clone(), msg: msg.into() }
}

/// Output shape of `layer` applied to `shape`, checking parameter sizes.
fn layer_output(layer: &Layer, (c, h, w): Shape) -> Result<Shape, InferenceError> {
    let blob_err = |msg: String| InferenceError::Blob { layer: layer.name.clone(), msg };
    match layer.kind {
        LayerKind::Conv { out_channels, kernel, stride, pad } => {
            if out_channels == 0 || kernel == 0 || stride == 0 {
                return Err(dim_err(layer, "conv parameters must be positive"));
            }
            if h + 2 * pad < kernel || w + 2 * pad < kernel {
                return Err(dim_err(layer, format!("kernel {kernel} larger than padded input {}x{}", w + 2 * pad, h + 2 * pad)));
            }
            let need = out_channels * c * kernel * kernel;
            if layer.weights.len() != need {
                return Err(blob_err(format!("has {} weights, expected {need}", layer.weights.len())));
            }
            if layer.bias.len() != out_channels {
                return Err(blob_err(format!("has {} biases, expected {out_channels}", layer.bias.len())));
            }
            Ok((out_channels, (h + 2 * pad - kernel) / stride + 1, (w + 2 * pad - kernel) / stride + 1))
        }
        LayerKind::Relu | LayerKind::Softmax => Ok((c, h, w)),
        LayerKind::Maxpool { kernel, stride } => {
            if kernel == 0 || stride == 0 {
                return Err(dim_err(layer, "pool parameters must be positive"));
            }
            if h < kernel || w < kernel {
                return Err(dim_err(layer, format!("pool kernel {kernel} larger than input {w}x{h}")));
            }
            Ok((c, (h - kernel) / stride + 1, (w - kernel) / stride + 1))
        }
        LayerKind::FullyConnected { out_dim } => {
            let need = out_dim * c * h * w;
            if out_dim == 0 {
                return Err(dim_err(layer, "fully connected output must be positive"));
            }
            if layer.weights.len() != need {
                return Err(blob_err(format!("has {} weights, expected {need}", layer.weights.len())));
            }
            if layer.bias.len() != out_dim {
                return Err(blob_err(format!("has {} biases, expected {out_dim}", layer.bias.len())));
            }
            Ok((out_dim, 1, 1))
        }
    }
}

impl NetworkSpec {
    /// Validates the dimension chain and the softmax terminal.
    pub fn new(input: InputDims, means: Vec<f32>, layers: Vec<Layer>) -> Result<Self, InferenceError> {
        if input.width == 0 || input.height == 0 || !(input.channels == 1 || input.channels == 3) {
            return Err(InferenceError::Manifest(format!("invalid input dims {input:?}")));
        }
        if means.len() != input.channels {
            return Err(InferenceError::Manifest(format!("{} means for {} channels", means.len(), input.channels)));
        }
        let softmax_at = layers.iter().position(|l| l.kind == LayerKind::Softmax);
        if softmax_at != Some(layers.len().wrapping_sub(1)) {
            return Err(InferenceError::MissingSoftmax);
        }
        let mut shape = (input.channels, input.height, input.width);
        let mut shapes = Vec::with_capacity(layers.len());
        for layer in &layers {
            if !layer.is_parametric() && (!layer.weights.is_empty() || !layer.bias.is_empty()) {
                return Err(InferenceError::Blob { layer: layer.name.clone(), msg: "given to a layer without parameters".into() });
            }
            shape = layer_output(layer, shape)?;
            shapes.push(shape);
        }
        Ok(Self { input, means, layers, shapes })
    }

    pub fn input(&self) -> InputDims {
        self.input
    }

    pub fn means(&self) -> &[f32] {
        &self.means
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn output_dim(&self) -> usize {
        let (c, h, w) = *self.shapes.last().expect("validated non-empty");
        c * h * w
    }

    /// Flattened size of the activation after the named layer.
    pub fn feature_dim(&self, layer: &str) -> Option<usize> {
        let i = self.layers.iter().position(|l| l.name == layer)?;
        let (c, h, w) = self.shapes[i];
        Some(c * h * w)
    }

    fn check_input(&self, img: &Image) -> Result<(), InferenceError> {
        let got = (img.width(), img.height(), img.channels());
        let expected = (self.input.width, self.input.height, self.input.channels);
        if got != expected {
            return Err(InferenceError::InputMismatch { expected, got });
        }
        Ok(())
    }

    /// Mean-subtracted input as a planar `[c][y][x]` tensor.
    fn input_tensor(&self, img: &Image) -> Vec<f64> {
        let (w, h, ch) = (img.width(), img.height(), img.channels());
        let px = img.pixels();
        let mut t = vec![0.0; ch * h * w];
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    t[(c * h + y) * w + x] = px[(y * w + x) * ch + c] as f64 - self.means[c] as f64;
                }
            }
        }
        t
    }

    /// Runs layers `0..=last`, returning the flattened activation.
    fn run(&self, img: &Image, last: usize) -> Result<Vec<f64>, InferenceError> {
        self.check_input(img)?;
        let mut shape = (self.input.channels, self.input.height, self.input.width);
        let mut act = self.input_tensor(img);
        for (layer, &out) in self.layers[..=last].iter().zip(&self.shapes) {
            act = apply(layer, &act, shape, out);
            shape = out;
        }
        Ok(act)
    }

    pub fn forward(&self, img: &Image) -> Result<Posterior, InferenceError> {
        let probs = self.run(img, self.layers.len() - 1)?;
        Ok(Posterior::from_raw(probs))
    }

    /// Activations after the named layer, flattened `[c][y][x]`.
    pub fn features(&self, img: &Image, layer: &str) -> Result<Vec<f64>, InferenceError> {
        let i = self
            .layers
            .iter()
            .position(|l| l.name == layer)
            .ok_or_else(|| InferenceError::Manifest(format!("no layer named {layer:?}")))?;
        self.run(img, i)
    }
}

fn apply(layer: &Layer, x: &[f64], (c, h, w): Shape, (oc, oh, ow): Shape) -> Vec<f64> {
    match layer.kind {
        LayerKind::Conv { kernel: k, stride, pad, .. } => {
            let mut out = vec![0.0; oc * oh * ow];
            for o in 0..oc {
                let bias = layer.bias[o] as f64;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias;
                        for i in 0..c {
                            let wbase = (o * c + i) * k * k;
                            for ky in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let row = (i * h + iy as usize) * w;
                                let wrow = wbase + ky * k;
                                for kx in 0..k {
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += layer.weights[wrow + kx] as f64 * x[row + ix as usize];
                                }
                            }
                        }
                        out[(o * oh + oy) * ow + ox] = acc;
                    }
                }
            }
            out
        }
        LayerKind::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
        LayerKind::Maxpool { kernel, stride } => {
            let mut out = vec![0.0; c * oh * ow];
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut m = f64::NEG_INFINITY;
                        for ky in 0..kernel {
                            let row = (ch * h + oy * stride + ky) * w + ox * stride;
                            for v in &x[row..row + kernel] {
                                m = m.max(*v);
                            }
                        }
                        out[(ch * oh + oy) * ow + ox] = m;
                    }
                }
            }
            out
        }
        LayerKind::FullyConnected { out_dim } => {
            let n = x.len();
            (0..out_dim)
                .map(|o| {
                    let row = &layer.weights[o * n..(o + 1) * n];
                    row.iter().zip(x).fold(layer.bias[o] as f64, |acc, (&wt, &v)| acc + wt as f64 * v)
                })
                .collect()
        }
        LayerKind::Softmax => Posterior::from_logits(x).probs,
    }
}

impl Classifier for NetworkSpec {
    fn input_dims(&self) -> InputDims {
        self.input
    }

    fn class_count(&self) -> usize {
        self.output_dim()
    }

    fn classify_batch(&self, batch: &[Image]) -> Result<Vec<Posterior>, InferenceError> {
        batch.par_iter().map(|img| self.forward(img)).collect()
    }
}
