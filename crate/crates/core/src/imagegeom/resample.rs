use super::{BBox, GeomError, Image};

/// Precomputed bilinear taps along one axis.
struct Taps {
    lo: Vec<usize>,
    hi: Vec<usize>,
    frac: Vec<f64>,
}

fn taps(start: f64, extent: f64, n_out: usize, n_src: usize) -> Taps {
    let step = extent / n_out as f64;
    let max = (n_src - 1) as f64;
    let mut t = Taps { lo: Vec::with_capacity(n_out), hi: Vec::with_capacity(n_out), frac: Vec::with_capacity(n_out) };
    for i in 0..n_out {
        let s = (start + (i as f64 + 0.5) * step - 0.5).clamp(0.0, max);
        let lo = s.floor() as usize;
        t.lo.push(lo);
        t.hi.push((lo + 1).min(n_src - 1));
        t.frac.push(s - lo as f64);
    }
    t
}

/// Bilinear resample of region `b` (clamped to the image) to `out_w x out_h`.
pub fn crop_resize(img: &Image, b: &BBox, out_w: usize, out_h: usize) -> Result<Image, GeomError> {
    if out_w == 0 || out_h == 0 {
        return Err(GeomError::OutputSize(out_w, out_h));
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let r = b.clamp_to(w, h).ok_or(GeomError::DegenerateRegion { width: w, height: h })?;
    let tx = taps(r.x0, r.width(), out_w, w);
    let ty = taps(r.y0, r.height(), out_h, h);
    let src = img.pixels();
    let mut out = Vec::with_capacity(out_w * out_h * ch);
    for j in 0..out_h {
        let (y0, y1, fy) = (ty.lo[j], ty.hi[j], ty.frac[j]);
        for i in 0..out_w {
            let (x0, x1, fx) = (tx.lo[i], tx.hi[i], tx.frac[i]);
            for c in 0..ch {
                let p = |x: usize, y: usize| src[(y * w + x) * ch + c] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out.push((top * (1.0 - fy) + bot * fy) as f32);
            }
        }
    }
    Ok(Image::from_parts_unchecked(out_w, out_h, ch, out))
}

/// Mirrors the image left to right.
pub fn hflip(img: &Image) -> Image {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = img.pixels();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in (0..w).rev() {
            let base = (y * w + x) * ch;
            out.extend_from_slice(&src[base..base + ch]);
        }
    }
    Image::from_parts_unchecked(w, h, ch, out)
}

/// Output dimensions for an aspect-preserving resize whose shorter side is `target`.
pub(crate) fn min_side_dims(w: usize, h: usize, target: usize) -> (usize, usize) {
    if w <= h {
        let other = ((h as f64) * target as f64 / w as f64).round().max(1.0) as usize;
        (target, other)
    } else {
        let other = ((w as f64) * target as f64 / h as f64).round().max(1.0) as usize;
        (other, target)
    }
}

/// Aspect-preserving resize so that `min(width, height) == target`.
pub fn resize_min_side(img: &Image, target: usize) -> Result<Image, GeomError> {
    let (w, h) = img.dims();
    let (ow, oh) = min_side_dims(w, h, target);
    if (ow, oh) == (w, h) {
        return Ok(img.clone());
    }
    crop_resize(img, &img.full_box(), ow, oh)
}

/// Crops `b` at the resolution the whole image would have when fed to the
/// network: the region is first resampled with the whole-image to
/// `net_w x net_h` factor, then rescaled to the network input. When the
/// image already has the network input size this is a plain crop.
pub fn same_resolution_crop(img: &Image, b: &BBox, net_w: usize, net_h: usize) -> Result<Image, GeomError> {
    let (w, h) = img.dims();
    let r = b.clamp_to(w, h).ok_or(GeomError::DegenerateRegion { width: w, height: h })?;
    let fx = net_w as f64 / w as f64;
    let fy = net_h as f64 / h as f64;
    if (w, h) == (net_w, net_h) {
        return crop_resize(img, &r, net_w, net_h);
    }
    let mid_w = (r.width() * fx).round().max(1.0) as usize;
    let mid_h = (r.height() * fy).round().max(1.0) as usize;
    let mid = crop_resize(img, &r, mid_w, mid_h)?;
    crop_resize(&mid, &mid.full_box(), net_w, net_h)
}
