//! Region correspondence with domain-size pooled descriptors.
//!
//! A region patch is ingested already normalized (affine-normalized and
//! orientation-aligned) and covers a square of side `2 sigma` around the
//! detected region, so its scale in patch pixels is `patch side / 2`. The
//! pooled descriptor averages a base descriptor over concentric crops of
//! sizes spread over `[lambda1 sigma, lambda2 sigma]`.

mod describe;
mod eval;
pub mod io;
mod pca;

pub use describe::{concat_descriptors, dsp_descriptor, single_size_descriptor, Describe, Descriptor, NetworkDescriptor, RawPatch};
pub use eval::{correspondence_oracle, map_box, match_regions, matching_ap, matching_map, Homography, MatchRecord, IDENTITY};
pub use pca::{pca_apply, pca_fit, pca_reconstruct, PcaModel};

use thiserror::Error;

use crate::imagegeom::{BBox, GeomError, Image};
use crate::inference::InferenceError;

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("region {region_id}: domain size {size:.3} exceeds the {available}-pixel patch")]
    ContextTooSmall { region_id: String, size: f64, available: usize },
    #[error("invalid pooling parameters: {0}")]
    Pooling(String),
    #[error("cannot concatenate an empty descriptor")]
    EmptyDescriptor,
    #[error("descriptor dimensions differ ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("PCA: {0}")]
    Pca(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A detected, normalized region. `scale` is sigma in patch pixels; `bbox`
/// is the detected region (side sigma) in its source image.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedRegion {
    pub region_id: String,
    pub image_id: String,
    pub patch: Image,
    pub scale: f64,
    pub bbox: BBox,
}

/// `(lambda1, lambda2, sizes)` used for the layer-4 comparison on the
/// smaller benchmark.
pub const DSP_PRESET_NARROW: (f64, f64, usize) = (0.7, 1.5, 6);
/// `(lambda1, lambda2, sizes)` used for the cross-validated comparison.
pub const DSP_PRESET_WIDE: (f64, f64, usize) = (0.5, 1.4, 10);
/// Neighbourhood used for the concatenated layer-3/4 variant.
pub const DSP_PRESET_CONCAT: (f64, f64) = (0.5, 1.24);
