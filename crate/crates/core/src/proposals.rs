//! Class-agnostic region candidates.
//!
//! The built-in generator is an edge-ring objectness heuristic: boxes whose
//! outline bands all carry more gradient energy than their interior score
//! high. It stands in for a dedicated proposal tool; precomputed boxes can be
//! ingested with [`load_boxes`] instead.

use std::cmp::Ordering;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagegeom::{iou, BBox, Image};

#[derive(Debug, Error)]
pub enum ProposalError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalSource {
    Builtin,
    Ingested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub boxes: Vec<BBox>,
    pub scores: Vec<f64>,
    pub source: ProposalSource,
}

impl ProposalSet {
    pub fn empty(source: ProposalSource) -> Self {
        Self { boxes: Vec::new(), scores: Vec::new(), source }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> ProposalSet {
        ProposalSet {
            boxes: idx.iter().map(|&i| self.boxes[i]).collect(),
            scores: idx.iter().map(|&i| self.scores[i]).collect(),
            source: self.source,
        }
    }

    /// Clamps every box to the image, dropping boxes left with no area.
    pub fn clipped(&self, width: usize, height: usize) -> ProposalSet {
        let mut out = ProposalSet::empty(self.source);
        for (b, &s) in self.boxes.iter().zip(&self.scores) {
            if let Some(c) = b.clamp_to(width, height) {
                out.boxes.push(c);
                out.scores.push(s);
            }
        }
        out
    }
}

/// Candidate lattice for the built-in heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    /// Position stride is `image side / position_divisions`.
    pub position_divisions: usize,
    /// Number of box scales, geometric from `min_scale` to 1.
    pub scales: usize,
    pub min_scale: f64,
    /// Width/height ratios.
    pub aspect_ratios: Vec<f64>,
    pub nms_iou: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { position_divisions: 8, scales: 6, min_scale: 0.125, aspect_ratios: vec![0.5, 1.0, 2.0], nms_iou: 0.7 }
    }
}

fn cmp_desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

fn cmp_lex(a: &BBox, b: &BBox) -> Ordering {
    a.x0.total_cmp(&b.x0)
        .then(a.y0.total_cmp(&b.y0))
        .then(a.x1.total_cmp(&b.x1))
        .then(a.y1.total_cmp(&b.y1))
}

/// Sobel gradient magnitude of the channel-mean image, edges clamped.
fn gradient_magnitude(img: &Image) -> Vec<f64> {
    let (w, h) = img.dims();
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        img.luma(x, y) as f64
    };
    let mut g = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1);
            let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1);
            g[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    g
}

/// Summed-area table with a zero row and column in front.
struct Integral {
    w: usize,
    table: Vec<f64>,
}

impl Integral {
    fn new(values: &[f64], w: usize, h: usize) -> Self {
        let stride = w + 1;
        let mut table = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += values[y * w + x];
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self { w, table }
    }

    /// Sum over pixels `[x0, x1) x [y0, y1)`.
    fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        let s = self.w + 1;
        self.table[y1 * s + x1] - self.table[y0 * s + x1] - self.table[y1 * s + x0] + self.table[y0 * s + x0]
    }
}

/// Edge-ring score of an integer box. The boundary ring straddles the box
/// outline (`r` pixels either side, clipped to the image) so that lattice
/// boxes a few pixels off an object still collect its contour. The ring is
/// split into four side bands; the weakest band mean minus the interior
/// mean, weighted by `sqrt(area)`, is the score. Taking the weakest band
/// favours closed contours over boxes that run along a single edge.
fn ring_score(integral: &Integral, w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
    let (bw, bh) = (x1 - x0, y1 - y0);
    let r = ((bw.min(bh) as f64 / 4.0).round() as usize).max(1);
    let (ox0, oy0, ox1, oy1) = (x0.saturating_sub(r), y0.saturating_sub(r), (x1 + r).min(w), (y1 + r).min(h));
    let (ix0, iy0) = ((x0 + r).min(x1), (y0 + r).min(y1));
    let (ix1, iy1) = (x1.saturating_sub(r).max(ix0), y1.saturating_sub(r).max(iy0));
    let mean = |ax: usize, ay: usize, bx: usize, by: usize| {
        if bx <= ax || by <= ay {
            return 0.0;
        }
        integral.sum(ax, ay, bx, by) / ((bx - ax) * (by - ay)) as f64
    };
    let ring = [
        mean(ox0, oy0, ox1, iy0),
        mean(ox0, iy1, ox1, oy1),
        mean(ox0, oy0, ix0, oy1),
        mean(ix1, oy0, ox1, oy1),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    (ring - mean(ix0, iy0, ix1, iy1)) * ((bw * bh) as f64).sqrt()
}

/// Integer candidate boxes in lattice order (scale, aspect ratio, row, column).
fn candidate_lattice(width: usize, height: usize, cfg: &LatticeConfig, seed: u64) -> Vec<(usize, usize, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let div = cfg.position_divisions.max(1) as f64;
    let (w, h) = (width as f64, height as f64);
    let (sx, sy) = (w / div, h / div);
    let (ox, oy) = (rng.random::<f64>() * sx, rng.random::<f64>() * sy);
    let n = cfg.scales.max(1);
    let ratio = if n > 1 { (1.0 / cfg.min_scale).powf(1.0 / (n - 1) as f64) } else { 1.0 };
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for si in 0..n {
        let s = if n > 1 { cfg.min_scale * ratio.powi(si as i32) } else { 1.0 };
        for &ar in &cfg.aspect_ratios {
            let bw = (s * w * ar.sqrt()).min(w).round().max(2.0) as usize;
            let bh = (s * h / ar.sqrt()).min(h).round().max(2.0) as usize;
            if bw > width || bh > height {
                continue;
            }
            let xs = positions(ox, sx, width - bw);
            let ys = positions(oy, sy, height - bh);
            for &y0 in &ys {
                for &x0 in &xs {
                    let b = (x0, y0, x0 + bw, y0 + bh);
                    if seen.insert(b) {
                        out.push(b);
                    }
                }
            }
        }
    }
    out
}

/// Lattice positions `offset + k * stride` within `[0, max]`, plus `max`
/// itself so the far border is always reachable.
fn positions(offset: f64, stride: f64, max: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut p = offset % stride.max(1e-9);
    while p <= max as f64 {
        v.push(p.round() as usize);
        p += stride;
    }
    v.push(max);
    v.dedup();
    v
}

/// Built-in objectness proposals: lattice candidates scored by
/// [`ring_score`], suppressed at `cfg.nms_iou`, best `count` returned.
/// Deterministic for fixed `(img, count, seed)`.
pub fn objectness_proposals(img: &Image, count: usize, seed: u64, cfg: &LatticeConfig) -> ProposalSet {
    let (w, h) = img.dims();
    if count == 0 || w < 2 || h < 2 {
        return ProposalSet::empty(ProposalSource::Builtin);
    }
    let grad = gradient_magnitude(img);
    let integral = Integral::new(&grad, w, h);
    let cands = candidate_lattice(w, h, cfg, seed);
    let all = ProposalSet {
        boxes: cands.iter().map(|&(x0, y0, x1, y1)| BBox { x0: x0 as f64, y0: y0 as f64, x1: x1 as f64, y1: y1 as f64 }).collect(),
        scores: cands.iter().map(|&(x0, y0, x1, y1)| ring_score(&integral, w, h, x0, y0, x1, y1)).collect(),
        source: ProposalSource::Builtin,
    };
    let mut kept = nms_indices(&all.boxes, &all.scores, cfg.nms_iou);
    kept.truncate(count);
    all.subset(&kept)
}

/// Greedy suppression in score-descending order (ties by input index);
/// returns surviving indices in that order.
pub fn nms_indices(boxes: &[BBox], scores: &[f64], iou_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| cmp_desc(scores[a], scores[b]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| iou(&boxes[k], &boxes[i]) <= iou_threshold) {
            kept.push(i);
        }
    }
    kept
}

pub fn nms(set: &ProposalSet, iou_threshold: f64) -> ProposalSet {
    set.subset(&nms_indices(&set.boxes, &set.scores, iou_threshold))
}

/// The `n` largest boxes by area; ties by score (descending), then by
/// `(x0, y0, x1, y1)`. Output is in that order.
pub fn keep_largest(set: &ProposalSet, n: usize) -> ProposalSet {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| {
        cmp_desc(set.boxes[a].area(), set.boxes[b].area())
            .then(cmp_desc(set.scores[a], set.scores[b]))
            .then(cmp_lex(&set.boxes[a], &set.boxes[b]))
    });
    order.truncate(n);
    set.subset(&order)
}

/// Parses `x0,y0,x1,y1,score` rows. Blank lines, `#` comments and a
/// literal header row are skipped.
pub fn parse_boxes(text: &str, origin: &str) -> Result<ProposalSet, ProposalError> {
    let mut set = ProposalSet::empty(ProposalSource::Ingested);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("x0")) {
            continue;
        }
        let err = |msg: String| ProposalError::Parse { path: origin.to_string(), line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let mut v = [0.0f64; 5];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| err(format!("not a number: {f:?}")))?;
            if !slot.is_finite() {
                return Err(err(format!("non-finite value {f:?}")));
            }
        }
        let b = BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| err(e.to_string()))?;
        set.boxes.push(b);
        set.scores.push(v[4]);
    }
    Ok(set)
}

pub fn load_boxes(path: impl AsRef<Path>) -> Result<ProposalSet, ProposalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_boxes(&text, &path.display().to_string())
}
