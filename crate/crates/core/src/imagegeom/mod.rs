//! Images, boxes and the region operations used to turn a nuisance
//! hypothesis (a box plus a flip flag) into classifier input.
//!
//! Resampling is bilinear with the align-corners-false convention: output
//! pixel `i` of a region `[x0, x1)` resampled to `n` pixels reads source
//! coordinate `x0 + (i + 0.5) * (x1 - x0) / n - 0.5`, clamped to the valid
//! pixel range. The same convention is used everywhere so results are
//! bit-reproducible.

mod boxes;
mod image;
pub mod io;
mod resample;

pub use boxes::{expand_box, interp_box_to_image, iou, BBox, PadMode, Provenance, RegionSample};
pub use image::Image;
pub use resample::{crop_resize, hflip, resize_min_side, same_resolution_crop};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("invalid box ({x0}, {y0}, {x1}, {y1}): requires x0 < x1 and y0 < y1")]
    InvalidBox { x0: f64, y0: f64, x1: f64, y1: f64 },
    #[error("degenerate region after clamping to {width}x{height} image")]
    DegenerateRegion { width: usize, height: usize },
    #[error("pixel buffer has {got} values, expected {expected}")]
    PixelCount { expected: usize, got: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("non-finite intensity at index {0}")]
    NonFinite(usize),
    #[error("invalid output size {0}x{1}")]
    OutputSize(usize, usize),
    #[error("image format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
