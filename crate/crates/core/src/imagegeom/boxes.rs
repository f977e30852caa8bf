use serde::{Deserialize, Serialize};

use super::GeomError;

/// Half-open axis-aligned box `[x0, x1) x [y0, y1)` in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeomError> {
        let ok = x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite() && x0 < x1 && y0 < y1;
        if !ok {
            return Err(GeomError::InvalidBox { x0, y0, x1, y1 });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self { x0: 0.0, y0: 0.0, x1: width as f64, y1: height as f64 }
    }

    /// Box of size `w x h` centred on `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { x0: cx - w / 2.0, y0: cy - h / 2.0, x1: cx + w / 2.0, y1: cy + h / 2.0 }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection with `[0, width] x [0, height]`; `None` when empty.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<BBox> {
        let b = BBox {
            x0: self.x0.max(0.0),
            y0: self.y0.max(0.0),
            x1: self.x1.min(width as f64),
            y1: self.y1.min(height as f64),
        };
        (b.x0 < b.x1 && b.y0 < b.y1).then_some(b)
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn mirrored(&self, width: usize) -> BBox {
        let w = width as f64;
        BBox { x0: w - self.x1, y0: self.y0, x1: w - self.x0, y1: self.y1 }
    }
}

/// Intersection over union on continuous areas; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadMode {
    /// Rim added on all four sides.
    BothDims,
    /// Rim added only on the two sides spanning the shorter dimension
    /// (both dimensions when the sides differ by at most [`SQUARE_TOL`]).
    MinDimOnly,
}

/// Side difference, in pixels, under which a box counts as square.
pub const SQUARE_TOL: f64 = 1e-3;

/// Grows `b` by `rim` pixels per side according to `mode`, then clamps to
/// the image bounds.
pub fn expand_box(b: &BBox, rim: f64, mode: PadMode, width: usize, height: usize) -> BBox {
    let rim = rim.max(0.0);
    let (grow_x, grow_y) = match mode {
        PadMode::BothDims => (true, true),
        PadMode::MinDimOnly => {
            let (w, h) = (b.width(), b.height());
            (w <= h + SQUARE_TOL, h <= w + SQUARE_TOL)
        }
    };
    let rx = if grow_x { rim } else { 0.0 };
    let ry = if grow_y { rim } else { 0.0 };
    BBox {
        x0: (b.x0 - rx).max(0.0),
        y0: (b.y0 - ry).max(0.0),
        x1: (b.x1 + rx).min(width as f64),
        y1: (b.y1 + ry).min(height as f64),
    }
}

/// Coordinate-wise interpolation between `b` (`t = 0`) and the full image
/// (`t = 1`).
pub fn interp_box_to_image(b: &BBox, t: f64, width: usize, height: usize) -> BBox {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, z: f64| a + t * (z - a);
    BBox {
        x0: lerp(b.x0, 0.0),
        y0: lerp(b.y0, 0.0),
        x1: lerp(b.x1, width as f64),
        y1: lerp(b.y1, height as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Crop,
    Concentric,
    GtPadded,
    Proposal,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Crop => "crop",
            Provenance::Concentric => "concentric",
            Provenance::GtPadded => "gt_padded",
            Provenance::Proposal => "proposal",
        }
    }
}

/// One nuisance hypothesis: which region to look at and whether to mirror it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub bbox: BBox,
    pub flipped: bool,
    pub provenance: Provenance,
    pub scale_index: Option<usize>,
}

impl RegionSample {
    pub fn new(bbox: BBox, flipped: bool, provenance: Provenance) -> Self {
        Self { bbox, flipped, provenance, scale_index: None }
    }
}
