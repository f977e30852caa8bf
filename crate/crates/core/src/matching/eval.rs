use super::{Descriptor, MatchingError};
use crate::imagegeom::{iou, BBox};

/// Row-major 3x3 planar homography acting on `(x, y, 1)`.
pub type Homography = [[f64; 3]; 3];

pub const IDENTITY: Homography = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub region_a: String,
    pub region_b: String,
    pub index_a: usize,
    pub index_b: usize,
    pub distance: f64,
    pub correct: bool,
}

fn apply(h: &Homography, x: f64, y: f64) -> Option<(f64, f64)> {
    let w = h[2][0] * x + h[2][1] * y + h[2][2];
    if w.abs() < 1e-12 {
        return None;
    }
    Some(((h[0][0] * x + h[0][1] * y + h[0][2]) / w, (h[1][0] * x + h[1][1] * y + h[1][2]) / w))
}

/// Axis-aligned bounding box of the four mapped corners.
pub fn map_box(b: &BBox, h: &Homography) -> Option<BBox> {
    let corners = [(b.x0, b.y0), (b.x1, b.y0), (b.x0, b.y1), (b.x1, b.y1)];
    let mut pts = Vec::with_capacity(4);
    for (x, y) in corners {
        pts.push(apply(h, x, y)?);
    }
    let x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    BBox::new(x0, y0, x1, y1).ok()
}

/// `iou(H(a), b) >= threshold`; a degenerate mapping never corresponds.
pub fn correspondence_oracle(a: &BBox, b: &BBox, h: &Homography, threshold: f64) -> bool {
    map_box(a, h).is_some_and(|m| iou(&m, b) >= threshold)
}

/// Nearest neighbour in `b` for every descriptor of `a`; ties go to the
/// lowest index in `b`.
pub fn match_regions(
    ids_a: &[String],
    a: &[Descriptor],
    ids_b: &[String],
    b: &[Descriptor],
    correct: impl Fn(usize, usize) -> bool,
) -> Result<Vec<MatchRecord>, MatchingError> {
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let dim = b[0].dim();
    if let Some(d) = a.iter().chain(b).find(|d| d.dim() != dim) {
        return Err(MatchingError::DimMismatch(dim, d.dim()));
    }
    Ok(a.iter()
        .enumerate()
        .map(|(i, da)| {
            let (j, distance) = b
                .iter()
                .enumerate()
                .map(|(j, db)| (j, da.distance(db)))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            MatchRecord {
                region_a: ids_a[i].clone(),
                region_b: ids_b[j].clone(),
                index_a: i,
                index_b: j,
                distance,
                correct: correct(i, j),
            }
        })
        .collect())
}

/// Trapezoidal area under the precision-recall curve of the distance
/// ranking (ties by `index_a`), starting from (recall 0, precision 1).
/// Recall is relative to `correspondable`; zero correspondable regions give 0.
pub fn matching_ap(records: &[MatchRecord], correspondable: usize) -> f64 {
    if correspondable == 0 {
        return 0.0;
    }
    let mut order: Vec<&MatchRecord> = records.iter().collect();
    order.sort_by(|x, y| x.distance.total_cmp(&y.distance).then(x.index_a.cmp(&y.index_a)));
    let (mut prev_r, mut prev_p, mut tp, mut area) = (0.0, 1.0, 0usize, 0.0);
    for (rank, r) in order.iter().enumerate() {
        if r.correct {
            tp += 1;
        }
        let recall = tp as f64 / correspondable as f64;
        let precision = tp as f64 / (rank + 1) as f64;
        area += (recall - prev_r) * (precision + prev_p) / 2.0;
        prev_r = recall;
        prev_p = precision;
    }
    area.clamp(0.0, 1.0)
}

pub fn matching_map(aps: &[f64]) -> f64 {
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}
