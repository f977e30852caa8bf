use std::sync::Arc;

use super::{DetectedRegion, MatchingError};
use crate::imagegeom::{crop_resize, BBox, Image};
use crate::inference::NetworkSpec;
use crate::schedules::inclusive_spacing;

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub layer_tag: String,
}

impl Descriptor {
    pub fn new(values: Vec<f64>, layer_tag: impl Into<String>) -> Self {
        Self { values, layer_tag: layer_tag.into() }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Patch-to-descriptor function with a fixed input size.
pub trait Describe: Send + Sync {
    fn input_size(&self) -> (usize, usize);

    fn tag(&self) -> String;

    /// `patch` already has [`Describe::input_size`].
    fn describe(&self, patch: &Image) -> Result<Descriptor, MatchingError>;
}

/// Raw intensities of the (gray) patch, optionally zero-mean and unit-norm.
#[derive(Debug, Clone)]
pub struct RawPatch {
    pub side: usize,
    pub normalize: bool,
}

impl Describe for RawPatch {
    fn input_size(&self) -> (usize, usize) {
        (self.side, self.side)
    }

    fn tag(&self) -> String {
        "raw".into()
    }

    fn describe(&self, patch: &Image) -> Result<Descriptor, MatchingError> {
        let mut v: Vec<f64> = patch.to_gray().pixels().iter().map(|&p| p as f64).collect();
        if self.normalize {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
        Ok(Descriptor::new(v, self.tag()))
    }
}

/// Activations of one declared layer of a network.
#[derive(Debug, Clone)]
pub struct NetworkDescriptor {
    pub net: Arc<NetworkSpec>,
    pub layer: String,
}

impl Describe for NetworkDescriptor {
    fn input_size(&self) -> (usize, usize) {
        let d = self.net.input();
        (d.width, d.height)
    }

    fn tag(&self) -> String {
        self.layer.clone()
    }

    fn describe(&self, patch: &Image) -> Result<Descriptor, MatchingError> {
        let ch = self.net.input().channels;
        let input = match (patch.channels(), ch) {
            (3, 1) => patch.to_gray(),
            (1, 3) => Image::new(patch.width(), patch.height(), 3, patch.pixels().iter().flat_map(|&v| [v, v, v]).collect())?,
            _ => patch.clone(),
        };
        Ok(Descriptor::new(self.net.features(&input, &self.layer)?, self.tag()))
    }
}

/// Mean of the base descriptor over `sizes` concentric crops with sides
/// uniformly spaced on `[lambda1 sigma, lambda2 sigma]` (inclusive; a single
/// size uses `lambda2 sigma`).
pub fn dsp_descriptor(
    region: &DetectedRegion,
    lambda1: f64,
    lambda2: f64,
    sizes: usize,
    describe: &dyn Describe,
) -> Result<Descriptor, MatchingError> {
    if !(lambda1 > 0.0 && lambda1 <= lambda2) || sizes == 0 {
        return Err(MatchingError::Pooling(format!("lambda1={lambda1}, lambda2={lambda2}, sizes={sizes}")));
    }
    let patch = &region.patch;
    let (pw, ph) = patch.dims();
    let available = pw.min(ph);
    let (cx, cy) = (pw as f64 / 2.0, ph as f64 / 2.0);
    let (iw, ih) = describe.input_size();
    let mut acc: Option<Descriptor> = None;
    let side_list = inclusive_spacing(lambda1 * region.scale, lambda2 * region.scale, sizes);
    for &side in &side_list {
        if side > available as f64 + 1e-9 {
            return Err(MatchingError::ContextTooSmall { region_id: region.region_id.clone(), size: side, available });
        }
        let crop = crop_resize(patch, &BBox::centered(cx, cy, side, side), iw, ih)?;
        let d = describe.describe(&crop)?;
        match acc.as_mut() {
            None => acc = Some(d),
            Some(a) => {
                if a.dim() != d.dim() {
                    return Err(MatchingError::DimMismatch(a.dim(), d.dim()));
                }
                a.values.iter_mut().zip(&d.values).for_each(|(x, y)| *x += y);
            }
        }
    }
    let mut out = acc.expect("at least one size");
    let n = side_list.len() as f64;
    out.values.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Base descriptor of the detected region itself (one crop of side sigma).
pub fn single_size_descriptor(region: &DetectedRegion, describe: &dyn Describe) -> Result<Descriptor, MatchingError> {
    dsp_descriptor(region, 1.0, 1.0, 1, describe)
}

pub fn concat_descriptors(a: &Descriptor, b: &Descriptor) -> Result<Descriptor, MatchingError> {
    if a.values.is_empty() || b.values.is_empty() {
        return Err(MatchingError::EmptyDescriptor);
    }
    let mut values = Vec::with_capacity(a.dim() + b.dim());
    values.extend_from_slice(&a.values);
    values.extend_from_slice(&b.values);
    Ok(Descriptor::new(values, format!("{}+{}", a.layer_tag, b.layer_tag)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Describes a patch by its mean intensity.
    struct MeanStub(usize);

    impl Describe for MeanStub {
        fn input_size(&self) -> (usize, usize) {
            (self.0, self.0)
        }
        fn tag(&self) -> String {
            "mean".into()
        }
        fn describe(&self, patch: &Image) -> Result<Descriptor, MatchingError> {
            let m = patch.pixels().iter().map(|&v| v as f64).sum::<f64>() / patch.pixels().len() as f64;
            Ok(Descriptor::new(vec![m], "mean"))
        }
    }

    fn region(patch: Image, scale: f64) -> DetectedRegion {
        DetectedRegion { region_id: "r1".into(), image_id: "a".into(), patch, scale, bbox: BBox::full(1, 1) }
    }

    #[test]
    fn single_size_is_plain_describe() {
        let patch = Image::from_fn(8, 8, 1, |x, y, _| ((x * 3 + y) % 7) as f32 / 6.0).unwrap();
        let raw = RawPatch { side: 8, normalize: false };
        let r = region(patch.clone(), 8.0);
        assert_eq!(dsp_descriptor(&r, 1.0, 1.0, 1, &raw).unwrap(), raw.describe(&patch).unwrap());
    }

    #[test]
    fn constant_patch_pools_to_same_descriptor() {
        let patch = Image::filled(32, 32, 1, 0.3).unwrap();
        let raw = RawPatch { side: 8, normalize: false };
        let r = region(patch, 16.0);
        let base = single_size_descriptor(&r, &raw).unwrap();
        let pooled = dsp_descriptor(&r, 0.7, 1.5, 6, &raw).unwrap();
        for (a, b) in base.values.iter().zip(&pooled.values) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn pooled_mean_stub_on_v_ramp() {
        // f(x) = |x_center - 10| / 10; every bilinear tap pair lies on one side
        // of the fold, so a side-s crop sampled at 4 points averages s / 40.
        let patch = Image::from_fn(20, 20, 1, |x, _, _| ((x as f64 + 0.5 - 10.0).abs() / 10.0) as f32).unwrap();
        let r = region(patch, 10.0);
        let pooled = dsp_descriptor(&r, 0.8, 1.6, 3, &MeanStub(4)).unwrap().values[0];
        assert!((pooled - (0.2 + 0.3 + 0.4) / 3.0).abs() < 1e-6, "{pooled}");
    }

    #[test]
    fn context_check_names_region() {
        let r = region(Image::filled(16, 16, 1, 0.0).unwrap(), 12.0);
        match dsp_descriptor(&r, 0.7, 1.5, 6, &RawPatch { side: 4, normalize: false }) {
            Err(MatchingError::ContextTooSmall { region_id, .. }) => assert_eq!(region_id, "r1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn concat_rules() {
        let a = Descriptor::new(vec![1.0; 9216], "l3");
        let b = Descriptor::new(vec![2.0; 8192], "l4");
        let c = concat_descriptors(&a, &b).unwrap();
        assert_eq!(c.dim(), 17_408);
        assert_eq!(c.values[9215], 1.0);
        assert_eq!(c.values[9216], 2.0);
        assert!(matches!(concat_descriptors(&a, &Descriptor::new(vec![], "e")), Err(MatchingError::EmptyDescriptor)));
    }
}
