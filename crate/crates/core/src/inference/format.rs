//! Network manifest (JSON) plus a sidecar blob of f32 LE values.
//!
//! ```json
//! {
//!   "input": {"width": 16, "height": 16, "channels": 1},
//!   "means": [0.5],
//!   "blob": "net.bin",
//!   "layers": [
//!     {"name": "conv1", "type": "conv", "out_channels": 8, "kernel": 12, "stride": 1, "pad": 0,
//!      "offset": 0, "length": 1160},
//!     {"name": "relu1", "type": "relu"},
//!     {"name": "pool1", "type": "maxpool", "kernel": 5, "stride": 5},
//!     {"name": "fc", "type": "fully_connected", "out_dim": 8, "offset": 1160, "length": 72},
//!     {"name": "prob", "type": "softmax"}
//!   ]
//! }
//! ```
//!
//! `offset` and `length` count f32 values. Each parametric layer's span holds
//! its weights followed by its biases. A relative `blob` path resolves
//! against the manifest's directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{InputDims, Layer, LayerKind, NetworkSpec};
use super::InferenceError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    input: InputDims,
    means: Vec<f32>,
    blob: String,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerEntry {
    name: String,
    #[serde(flatten)]
    kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<usize>,
}

/// Number of weights (excluding biases) a parametric layer needs, given the
/// flattened size of its input.
fn weight_count(kind: &LayerKind, in_shape: (usize, usize, usize)) -> Option<(usize, usize)> {
    let (c, h, w) = in_shape;
    match *kind {
        LayerKind::Conv { out_channels, kernel, .. } => Some((out_channels * c * kernel * kernel, out_channels)),
        LayerKind::FullyConnected { out_dim } => Some((out_dim * c * h * w, out_dim)),
        _ => None,
    }
}

fn next_shape(kind: &LayerKind, (c, h, w): (usize, usize, usize)) -> (usize, usize, usize) {
    match *kind {
        LayerKind::Conv { out_channels, kernel, stride, pad } => (
            out_channels,
            (h + 2 * pad).saturating_sub(kernel) / stride.max(1) + 1,
            (w + 2 * pad).saturating_sub(kernel) / stride.max(1) + 1,
        ),
        LayerKind::Maxpool { kernel, stride } => {
            (c, h.saturating_sub(kernel) / stride.max(1) + 1, w.saturating_sub(kernel) / stride.max(1) + 1)
        }
        LayerKind::FullyConnected { out_dim } => (out_dim, 1, 1),
        LayerKind::Relu | LayerKind::Softmax => (c, h, w),
    }
}

pub fn load_network(manifest_path: impl AsRef<Path>) -> Result<NetworkSpec, InferenceError> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| InferenceError::Manifest(e.to_string()))?;
    let blob_path = manifest_path.parent().unwrap_or(Path::new(".")).join(&manifest.blob);
    let bytes = std::fs::read(&blob_path)?;
    if bytes.len() % 4 != 0 {
        return Err(InferenceError::Manifest(format!("blob {} is not a whole number of f32 values", blob_path.display())));
    }
    let blob: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();

    let mut shape = (manifest.input.channels, manifest.input.height, manifest.input.width);
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in manifest.layers {
        let blob_err = |msg: String| InferenceError::Blob { layer: entry.name.clone(), msg };
        let layer = match weight_count(&entry.kind, shape) {
            Some((nw, nb)) => {
                let (offset, length) = match (entry.offset, entry.length) {
                    (Some(o), Some(l)) => (o, l),
                    _ => return Err(blob_err("span missing offset/length".into())),
                };
                if length != nw + nb {
                    return Err(blob_err(format!("length {length} does not match declared shape ({nw} weights + {nb} biases)")));
                }
                let span = blob
                    .get(offset..offset + length)
                    .ok_or_else(|| blob_err(format!("span {offset}+{length} exceeds blob of {} values", blob.len())))?;
                Layer::with_params(&entry.name, entry.kind, span[..nw].to_vec(), span[nw..].to_vec())
            }
            None => {
                if entry.offset.is_some() || entry.length.is_some() {
                    return Err(blob_err("span given to a layer without parameters".into()));
                }
                Layer::new(&entry.name, entry.kind)
            }
        };
        shape = next_shape(&entry.kind, shape);
        layers.push(layer);
    }
    NetworkSpec::new(manifest.input, manifest.means, layers)
}

/// Writes `manifest_path` and its blob (`blob_name`, placed next to the manifest).
pub fn save_network(net: &NetworkSpec, manifest_path: impl AsRef<Path>, blob_name: &str) -> Result<(), InferenceError> {
    let manifest_path = manifest_path.as_ref();
    let mut blob: Vec<u8> = Vec::new();
    let mut offset = 0usize;
    let mut entries = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let (o, l) = if layer.is_parametric() {
            for v in layer.weights.iter().chain(&layer.bias) {
                blob.extend_from_slice(&v.to_le_bytes());
            }
            let len = layer.weights.len() + layer.bias.len();
            let span = (Some(offset), Some(len));
            offset += len;
            span
        } else {
            (None, None)
        };
        entries.push(LayerEntry { name: layer.name.clone(), kind: layer.kind, offset: o, length: l });
    }
    let manifest = Manifest { input: net.input(), means: net.means().to_vec(), blob: blob_name.to_string(), layers: entries };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| InferenceError::Manifest(e.to_string()))?;
    std::fs::write(manifest_path, json + "\n")?;
    std::fs::write(manifest_path.parent().unwrap_or(Path::new(".")).join(blob_name), blob)?;
    Ok(())
}
