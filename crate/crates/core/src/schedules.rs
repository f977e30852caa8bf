//! Non-adaptive sampling schedules: regular crop grids with scale jitter,
//! concentric domain sizes, and padded ground-truth regions.
//!
//! Sample order is fixed (scales outer, grid row-major, original before
//! flip) so that posterior averages are bit-reproducible.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagegeom::{expand_box, BBox, PadMode, Provenance, RegionSample};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("crop side {crop} exceeds the {width}x{height} image rescaled to min side {scale}")]
    CropTooLarge { crop: f64, scale: f64, width: f64, height: f64 },
    #[error("unsupported crop protocol C={0} (expected 0, 10 or 50)")]
    CropCount(usize),
    #[error("invalid schedule parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered region samples plus the evaluation/averaging contract.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub samples: Vec<RegionSample>,
    pub eval_count: usize,
    pub ave_count: usize,
}

impl Schedule {
    /// Schedule whose every sample is both evaluated and averaged.
    pub fn from_samples(samples: Vec<RegionSample>) -> Self {
        let n = samples.len();
        Self { samples, eval_count: n, ave_count: n }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Concatenation; accounting is additive.
    pub fn extend(&mut self, other: Schedule) {
        self.samples.extend(other.samples);
        self.eval_count += other.eval_count;
        self.ave_count += other.ave_count;
    }

    /// One row per sample: `x0,y0,x1,y1,flip,provenance`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<(), ScheduleError> {
        writeln!(w, "x0,y0,x1,y1,flip,provenance")?;
        for s in &self.samples {
            let b = &s.bbox;
            writeln!(w, "{},{},{},{},{},{}", b.x0, b.y0, b.x1, b.y1, u8::from(s.flipped), s.provenance.as_str())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Regular crop protocol: 0 (none), 10 (corners + centre) or 50 (5x5 grid), flips included.
    pub crops: usize,
    /// Min-side targets for scale jitter, one schedule per entry.
    pub scales: Vec<f64>,
    /// Crop side in rescaled pixels; `None` means the classifier input side.
    pub crop_side: Option<f64>,
    /// Number of distinct concentric domain sizes (each doubled by flips).
    pub sizes: usize,
    pub size_range_min: f64,
    pub flips: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { crops: 0, scales: vec![256.0], crop_side: None, sizes: 0, size_range_min: 0.6, flips: true }
    }
}

/// `n` values uniformly spaced on `[lo, hi]` inclusive; `n == 1` gives `hi`.
pub fn inclusive_spacing(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
        }
    }
}

fn push_with_flip(out: &mut Vec<RegionSample>, mut s: RegionSample, flips: bool) {
    out.push(s);
    if flips {
        s.flipped = true;
        out.push(s);
    }
}

/// Regular crops at every configured scale. `crop_side` is in rescaled
/// pixels; boxes are returned in original image coordinates.
pub fn regular_crops(width: usize, height: usize, cfg: &ScheduleConfig, crop_side: f64) -> Result<Schedule, ScheduleError> {
    let per_axis: &[f64] = match cfg.crops {
        0 => return Ok(Schedule::default()),
        10 => &[],
        50 => &[0.0, 0.25, 0.5, 0.75, 1.0],
        c => return Err(ScheduleError::CropCount(c)),
    };
    if !(crop_side > 0.0) {
        return Err(ScheduleError::Invalid(format!("crop side {crop_side}")));
    }
    let (w, h) = (width as f64, height as f64);
    let mut samples = Vec::new();
    for (si, &scale) in cfg.scales.iter().enumerate() {
        if !(scale > 0.0) {
            return Err(ScheduleError::Invalid(format!("scale {scale}")));
        }
        // original pixels per rescaled pixel
        let k = w.min(h) / scale;
        let (sw, sh) = (w / k, h / k);
        if crop_side > sw + 1e-9 || crop_side > sh + 1e-9 {
            return Err(ScheduleError::CropTooLarge { crop: crop_side, scale, width: w, height: h });
        }
        let side = crop_side * k;
        let (range_x, range_y) = (w - side, h - side);
        let origins: Vec<(f64, f64)> = if per_axis.is_empty() {
            vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)]
        } else {
            per_axis.iter().flat_map(|&fy| per_axis.iter().map(move |&fx| (fx, fy))).collect()
        };
        for (fx, fy) in origins {
            let x0 = fx * range_x;
            let y0 = fy * range_y;
            let bbox = BBox { x0, y0, x1: x0 + side, y1: y0 + side };
            let mut s = RegionSample::new(bbox, false, Provenance::Crop);
            s.scale_index = Some(si);
            push_with_flip(&mut samples, s, cfg.flips);
        }
    }
    Ok(Schedule::from_samples(samples))
}

/// Normalized concentric sizes on `[r, 1]`, endpoints included.
pub fn concentric_sizes(d: usize, r: f64) -> Vec<f64> {
    inclusive_spacing(r, 1.0, d)
}

/// Concentric boxes around the image centre, ascending size, original
/// before flip. Side is `size * image side` along each dimension.
pub fn concentric_schedule(width: usize, height: usize, d: usize, r: f64, flips: bool) -> Result<Schedule, ScheduleError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(ScheduleError::Invalid(format!("size_range_min {r} outside (0, 1]")));
    }
    let (w, h) = (width as f64, height as f64);
    let mut samples = Vec::new();
    for (i, s) in concentric_sizes(d, r).into_iter().enumerate() {
        let bbox = BBox::centered(w / 2.0, h / 2.0, s * w, s * h);
        let mut rs = RegionSample::new(bbox, false, Provenance::Concentric);
        rs.scale_index = Some(i);
        push_with_flip(&mut samples, rs, flips);
    }
    Ok(Schedule::from_samples(samples))
}

/// Ground-truth box padded with `n_sizes` rims uniformly spaced on `[0, pad_max]`.
pub fn gt_padded_schedule(
    gt: &BBox,
    pad_max: f64,
    n_sizes: usize,
    mode: PadMode,
    width: usize,
    height: usize,
) -> Schedule {
    let samples = gt_pads(pad_max, n_sizes)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut s = RegionSample::new(expand_box(gt, p, mode, width, height), false, Provenance::GtPadded);
            s.scale_index = Some(i);
            s
        })
        .collect();
    Schedule::from_samples(samples)
}

/// Pads used by [`gt_padded_schedule`].
pub fn gt_pads(pad_max: f64, n_sizes: usize) -> Vec<f64> {
    if n_sizes == 1 {
        vec![0.0]
    } else {
        inclusive_spacing(0.0, pad_max, n_sizes)
    }
}

/// All non-adaptive samples for one image: crops at every scale, then the
/// concentric sizes.
pub fn fixed_schedule(width: usize, height: usize, cfg: &ScheduleConfig, default_crop_side: f64) -> Result<Schedule, ScheduleError> {
    let mut sched = regular_crops(width, height, cfg, cfg.crop_side.unwrap_or(default_crop_side))?;
    sched.extend(concentric_schedule(width, height, cfg.sizes, cfg.size_range_min, cfg.flips)?);
    Ok(sched)
}
