//! Region and pair manifests, homography files and descriptor blobs.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{Descriptor, DetectedRegion, Homography, MatchingError};
use crate::imagegeom::io::load_image;
use crate::imagegeom::BBox;

/// One row of a region manifest; `sigma` is in source-image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionEntry {
    pub region_id: String,
    pub image_id: String,
    pub cx: f64,
    pub cy: f64,
    pub sigma: f64,
    pub patch: PathBuf,
}

impl RegionEntry {
    pub fn bbox(&self) -> BBox {
        BBox::centered(self.cx, self.cy, self.sigma, self.sigma)
    }

    /// Loads the patch; it must be square and covers side `2 sigma`.
    pub fn load(&self) -> Result<DetectedRegion, MatchingError> {
        let patch = load_image(&self.patch)?;
        if patch.width() != patch.height() {
            return Err(MatchingError::Parse {
                path: self.patch.display().to_string(),
                line: 0,
                msg: format!("patch of region {} is {}x{}, not square", self.region_id, patch.width(), patch.height()),
            });
        }
        let scale = patch.width() as f64 / 2.0;
        Ok(DetectedRegion { region_id: self.region_id.clone(), image_id: self.image_id.clone(), patch, scale, bbox: self.bbox() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEntry {
    pub image_a: String,
    pub image_b: String,
    pub homography: Homography,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> MatchingError {
    MatchingError::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| (n, l.split(',').map(str::trim).collect()))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `region_id,image_id,cx,cy,sigma,patch`; patch paths are relative to the
/// manifest directory. A first row starting with `region_id` is a header.
pub fn load_region_manifest(path: &Path) -> Result<Vec<RegionEntry>, MatchingError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (n, f) in rows(&text) {
        if out.is_empty() && f[0] == "region_id" {
            continue;
        }
        if f.len() != 6 {
            return Err(parse_err(path, n, format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str, what: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| parse_err(path, n, format!("bad {what} '{s}'")));
        let sigma = num(f[4], "sigma")?;
        if sigma <= 0.0 {
            return Err(parse_err(path, n, "sigma must be positive"));
        }
        out.push(RegionEntry {
            region_id: f[0].to_string(),
            image_id: f[1].to_string(),
            cx: num(f[2], "center x")?,
            cy: num(f[3], "center y")?,
            sigma,
            patch: resolve(base, f[5]),
        });
    }
    Ok(out)
}

/// Nine whitespace-separated reals, row-major.
pub fn load_homography(path: &Path) -> Result<Homography, MatchingError> {
    let text = std::fs::read_to_string(path)?;
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(path, 0, format!("bad value '{t}'"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != 9 {
        return Err(parse_err(path, 0, format!("expected 9 values, found {}", vals.len())));
    }
    Ok([[vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5]], [vals[6], vals[7], vals[8]]])
}

pub fn write_homography(path: &Path, h: &Homography) -> Result<(), MatchingError> {
    let text: Vec<String> = h.iter().map(|r| format!("{} {} {}", r[0], r[1], r[2])).collect();
    std::fs::write(path, text.join("\n") + "\n")?;
    Ok(())
}

/// `image_a,image_b,homography_path`; a first row starting with `image_a`
/// is a header.
pub fn load_pair_manifest(path: &Path) -> Result<Vec<PairEntry>, MatchingError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (n, f) in rows(&text) {
        if out.is_empty() && f[0] == "image_a" {
            continue;
        }
        if f.len() != 3 {
            return Err(parse_err(path, n, format!("expected 3 fields, found {}", f.len())));
        }
        out.push(PairEntry { image_a: f[0].to_string(), image_b: f[1].to_string(), homography: load_homography(&resolve(base, f[2]))? });
    }
    Ok(out)
}

/// `dim: u32`, `count: u32`, then `count * dim` f32 values, all little-endian.
pub fn write_descriptor_blob(mut w: impl Write, descs: &[Descriptor]) -> Result<(), MatchingError> {
    let dim = descs.first().map_or(0, Descriptor::dim);
    if let Some(d) = descs.iter().find(|d| d.dim() != dim) {
        return Err(MatchingError::DimMismatch(dim, d.dim()));
    }
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(descs.len() as u32).to_le_bytes())?;
    for d in descs {
        for &v in &d.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_descriptor_blob(mut r: impl Read, layer_tag: &str) -> Result<Vec<Descriptor>, MatchingError> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)?;
    let dim = u32::from_le_bytes(head[0..4].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; dim * count * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(dim.max(1) * 4)
        .take(count)
        .map(|c| Descriptor::new(c.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect(), layer_tag))
        .collect())
}
