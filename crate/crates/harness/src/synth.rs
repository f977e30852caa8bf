//! Seeded synthetic stand-ins: shape scenes with clutter, a template-matching
//! classifier with hand-set weights, and a region-matching benchmark of
//! scale-perturbed pairs.

use std::path::Path;

use nuisance_core::imagegeom::io::save_image;
use nuisance_core::inference::{save_network, InputDims, Layer, LayerKind, NetworkSpec};
use nuisance_core::matching::io::write_homography;
use nuisance_core::matching::Homography;
use nuisance_core::{BBox, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::report::{fmt_g, Table};

/// Shape names, indexed by class.
pub const SHAPES: [&str; 8] = ["disk", "ring", "square", "frame", "hbars", "vbars", "plus", "cross"];

/// Indicator of shape `class` at normalized coordinates `(u, v)` in `[-1, 1]`.
pub fn shape_mask(class: usize, u: f64, v: f64) -> bool {
    let r = (u * u + v * v).sqrt();
    let m = u.abs().max(v.abs());
    let bars = |t: f64| m <= 0.85 && (((t + 0.85) / 0.34).floor() as i64) % 2 == 0;
    match class {
        0 => r <= 0.9,
        1 => (0.5..=0.9).contains(&r),
        2 => m <= 0.8,
        3 => (0.45..=0.8).contains(&m),
        4 => bars(v),
        5 => bars(u),
        6 => m <= 0.9 && (u.abs() <= 0.25 || v.abs() <= 0.25),
        7 => m <= 0.9 && (u.abs() - v.abs()).abs() <= 0.3,
        _ => false,
    }
}

/// Fraction of a pixel covered by the shape, by 4x4 supersampling.
/// `(x0, y0)` and `side` place the shape's `[-1, 1]` square in pixel units.
fn coverage(class: usize, px: usize, py: usize, x0: f64, y0: f64, side: f64) -> f64 {
    let mut hit = 0;
    for sy in 0..4 {
        for sx in 0..4 {
            let x = px as f64 + (sx as f64 + 0.5) / 4.0;
            let y = py as f64 + (sy as f64 + 0.5) / 4.0;
            let u = (x - x0) / side * 2.0 - 1.0;
            let v = (y - y0) / side * 2.0 - 1.0;
            if u.abs() <= 1.0 && v.abs() <= 1.0 && shape_mask(class, u, v) {
                hit += 1;
            }
        }
    }
    hit as f64 / 16.0
}

fn stamp(px: &mut [f64], w: usize, h: usize, class: usize, b: &BBox, contrast: f64) {
    let xa = b.x0.floor().max(0.0) as usize;
    let ya = b.y0.floor().max(0.0) as usize;
    let xb = (b.x1.ceil() as usize).min(w);
    let yb = (b.y1.ceil() as usize).min(h);
    for y in ya..yb {
        for x in xa..xb {
            px[y * w + x] += contrast * coverage(class, x, y, b.x0, b.y0, b.width());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSceneConfig {
    pub images: usize,
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    /// Object side range in pixels.
    pub object_min: f64,
    pub object_max: f64,
    pub object_contrast: f64,
    pub background: f64,
    /// Expected distractors per 10,000 pixels.
    pub clutter_density: f64,
    pub clutter_min: f64,
    pub clutter_max: f64,
    pub clutter_contrast: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        Self {
            images: 200,
            width: 96,
            height: 96,
            classes: 8,
            object_min: 20.0,
            object_max: 32.0,
            object_contrast: 0.45,
            background: 0.5,
            clutter_density: 4.0,
            clutter_min: 8.0,
            clutter_max: 14.0,
            clutter_contrast: 0.15,
            noise: 0.03,
        }
    }
}

impl SyntheticSceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.classes < 2 || self.classes > SHAPES.len() {
            return bad(format!("classes must be in 2..={}", SHAPES.len()));
        }
        if !(self.object_min > 0.0 && self.object_min <= self.object_max) {
            return bad("object size range is empty".into());
        }
        if self.object_max > self.width.min(self.height) as f64 {
            return bad(format!("objects up to {} px do not fit a {}x{} image", self.object_max, self.width, self.height));
        }
        if !(self.clutter_min > 0.0 && self.clutter_min <= self.clutter_max) || self.clutter_density < 0.0 || self.noise < 0.0 {
            return bad("invalid clutter or noise settings".into());
        }
        Ok(())
    }
}

/// One rendered scene and its planted object.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    pub label: usize,
    pub gt: BBox,
}

pub fn render_scene(cfg: &SyntheticSceneConfig, rng: &mut ChaCha8Rng) -> Scene {
    let (w, h) = (cfg.width, cfg.height);
    let mut px = vec![cfg.background; w * h];
    let label = rng.random_range(0..cfg.classes);
    let side = if cfg.object_max > cfg.object_min { rng.random_range(cfg.object_min..=cfg.object_max) } else { cfg.object_min };
    let x0 = rng.random_range(0.0..=w as f64 - side);
    let y0 = rng.random_range(0.0..=h as f64 - side);
    let gt = BBox::new(x0, y0, x0 + side, y0 + side).expect("positive side");

    let expected = cfg.clutter_density * (w * h) as f64 / 10_000.0;
    let count = expected.floor() as usize + usize::from(rng.random_bool(expected.fract()));
    for _ in 0..count {
        let cs = rng.random_range(cfg.clutter_min..=cfg.clutter_max).min(w.min(h) as f64);
        let class = (label + rng.random_range(1..cfg.classes)) % cfg.classes;
        // distractors never touch the object
        for _ in 0..20 {
            let cx = rng.random_range(0.0..=w as f64 - cs);
            let cy = rng.random_range(0.0..=h as f64 - cs);
            let b = BBox::new(cx, cy, cx + cs, cy + cs).expect("positive side");
            if b.intersection_area(&gt) == 0.0 {
                stamp(&mut px, w, h, class, &b, cfg.clutter_contrast);
                break;
            }
        }
    }
    stamp(&mut px, w, h, label, &gt, cfg.object_contrast);
    if cfg.noise > 0.0 {
        let normal = Normal::new(0.0, cfg.noise).expect("finite sigma");
        px.iter_mut().for_each(|v| *v += normal.sample(rng));
    }
    let pixels = px.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
    Scene { image: Image::new(w, h, 1, pixels).expect("valid scene"), label, gt }
}

/// Hand-set weights: one zero-mean, unit-norm template per class, then
/// global max pooling and scaled identity logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateClassifierConfig {
    pub input: usize,
    pub window: usize,
    /// Shape side inside the template window, in pixels.
    pub object: f64,
    /// Logit scale.
    pub beta: f64,
}

impl Default for TemplateClassifierConfig {
    fn default() -> Self {
        Self { input: 16, window: 12, object: 10.0, beta: 3.0 }
    }
}

pub fn template_network(cfg: &TemplateClassifierConfig, classes: usize, background: f64) -> Result<NetworkSpec> {
    if cfg.window == 0 || cfg.window > cfg.input || !(cfg.object > 0.0 && cfg.object <= cfg.window as f64) {
        return Err(HarnessError::Config("template window must fit the input and contain the object".into()));
    }
    let k = cfg.window;
    let off = (k as f64 - cfg.object) / 2.0;
    let mut weights = Vec::with_capacity(classes * k * k);
    for c in 0..classes {
        let t: Vec<f64> = (0..k * k).map(|i| coverage(c, i % k, i / k, off, off, cfg.object)).collect();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let norm = t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt();
        weights.extend(t.iter().map(|v| ((v - mean) / norm) as f32));
    }
    let pool = cfg.input - k + 1;
    let mut fc = vec![0.0f32; classes * classes];
    for c in 0..classes {
        fc[c * classes + c] = cfg.beta as f32;
    }
    let layers = vec![
        Layer::with_params("conv", LayerKind::Conv { out_channels: classes, kernel: k, stride: 1, pad: 0 }, weights, vec![0.0; classes]),
        Layer::new("relu", LayerKind::Relu),
        Layer::new("pool", LayerKind::Maxpool { kernel: pool, stride: pool }),
        Layer::with_params("fc", LayerKind::FullyConnected { out_dim: classes }, fc, vec![0.0; classes]),
        Layer::new("prob", LayerKind::Softmax),
    ];
    Ok(NetworkSpec::new(InputDims { width: cfg.input, height: cfg.input, channels: 1 }, vec![background as f32], layers)?)
}

/// Region benchmark: pairs of views of a smooth random texture related by
/// a zoom-and-shift homography, with each second-view region's scale
/// perturbed by a factor drawn from `[perturb_min, perturb_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingSceneConfig {
    pub pairs: usize,
    pub regions_per_image: usize,
    /// Extra unmatched regions in the second view.
    pub distractors: usize,
    /// Patch side in pixels (covers twice the region scale).
    pub patch: usize,
    /// Region scale range in first-view units.
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub zoom_min: f64,
    pub zoom_max: f64,
    pub perturb_min: f64,
    pub perturb_max: f64,
    pub blobs: usize,
    pub world: f64,
    pub noise: f64,
}

impl Default for MatchingSceneConfig {
    fn default() -> Self {
        Self {
            pairs: 10,
            regions_per_image: 8,
            distractors: 8,
            patch: 32,
            sigma_min: 8.0,
            sigma_max: 14.0,
            zoom_min: 0.8,
            zoom_max: 1.25,
            perturb_min: 0.7,
            perturb_max: 1.4,
            blobs: 400,
            world: 320.0,
            noise: 0.04,
        }
    }
}

struct Blob {
    x: f64,
    y: f64,
    s: f64,
    a: f64,
}

fn texture(blobs: &[Blob], x: f64, y: f64) -> f64 {
    let v = 0.5 + blobs.iter().map(|b| b.a * (-((x - b.x).powi(2) + (y - b.y).powi(2)) / (2.0 * b.s * b.s)).exp()).sum::<f64>();
    v.clamp(0.0, 1.0)
}

/// Square patch of side `2 sigma` around `(cx, cy)` in view coordinates,
/// sampled through `to_world`.
fn render_patch(
    blobs: &[Blob],
    side: usize,
    cx: f64,
    cy: f64,
    sigma: f64,
    to_world: impl Fn(f64, f64) -> (f64, f64),
    noise: &Option<Normal<f64>>,
    rng: &mut ChaCha8Rng,
) -> Image {
    let step = 2.0 * sigma / side as f64;
    let mut px = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            let x = cx + (i as f64 + 0.5 - side as f64 / 2.0) * step;
            let y = cy + (j as f64 + 0.5 - side as f64 / 2.0) * step;
            let (wx, wy) = to_world(x, y);
            let n = noise.as_ref().map_or(0.0, |d| d.sample(rng));
            px.push((texture(blobs, wx, wy) + n).clamp(0.0, 1.0) as f32);
        }
    }
    Image::new(side, side, 1, px).expect("valid patch")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scene: SyntheticSceneConfig,
    pub classifier: TemplateClassifierConfig,
    pub matching: MatchingSceneConfig,
    /// Image format for scenes: `png` or `imgf`.
    pub format: String,
}

/// Writes the classification set, the template classifier, the matching
/// benchmark and one ready-to-run config per experiment under `out`.
pub fn generate_all(cfg: &SynthConfig, seed: u64, out: &Path) -> Result<()> {
    cfg.scene.validate()?;
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| HarnessError::Data(format!("{}: {e}", p.display())));
    mkdir(&out.join("images"))?;
    mkdir(&out.join("classifier"))?;
    let ext = match cfg.format.as_str() {
        "" | "png" => "png",
        "imgf" => "imgf",
        f => return Err(HarnessError::Config(format!("unknown image format '{f}'"))),
    };
    let scenes = generate_scenes(&cfg.scene, seed);
    let mut manifest = Table::new(&["path", "label", "x0", "y0", "x1", "y1"]);
    for (i, s) in scenes.iter().enumerate() {
        let name = format!("images/img_{i:04}.{ext}");
        save_image(&s.image, out.join(&name))?;
        manifest.push(vec![name, s.label.to_string(), fmt_g(s.gt.x0), fmt_g(s.gt.y0), fmt_g(s.gt.x1), fmt_g(s.gt.y1)]);
    }
    manifest.write(&out.join("manifest.csv"))?;
    let net = template_network(&cfg.classifier, cfg.scene.classes, cfg.scene.background)?;
    save_network(&net, out.join("classifier/net.json"), "net.bin")?;
    generate_matching(&cfg.matching, seed, &out.join("matching"))?;
    write_configs(out, seed)
}

/// Scenes for `seed`; scene `i` depends only on `(seed, i)`.
pub fn generate_scenes(cfg: &SyntheticSceneConfig, seed: u64) -> Vec<Scene> {
    (0..cfg.images)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            render_scene(cfg, &mut rng)
        })
        .collect()
}

pub fn generate_matching(cfg: &MatchingSceneConfig, seed: u64, out: &Path) -> Result<()> {
    if cfg.patch == 0 || !(cfg.sigma_min > 0.0 && cfg.sigma_min <= cfg.sigma_max) || !(cfg.zoom_min > 0.0 && cfg.zoom_min <= cfg.zoom_max) {
        return Err(HarnessError::Config("invalid matching benchmark settings".into()));
    }
    if !(cfg.perturb_min > 0.0 && cfg.perturb_min <= cfg.perturb_max) {
        return Err(HarnessError::Config("invalid scale perturbation range".into()));
    }
    std::fs::create_dir_all(out.join("patches")).map_err(|e| HarnessError::Data(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let noise = (cfg.noise > 0.0).then(|| Normal::new(0.0, cfg.noise).expect("finite sigma"));
    let mut regions = Table::new(&["region_id", "image_id", "cx", "cy", "sigma", "patch"]);
    let mut pairs = Table::new(&["image_a", "image_b", "homography"]);
    let margin = 2.0 * cfg.sigma_max;
    for p in 0..cfg.pairs {
        let blobs: Vec<Blob> = (0..cfg.blobs)
            .map(|_| Blob {
                x: rng.random_range(-20.0..cfg.world + 20.0),
                y: rng.random_range(-20.0..cfg.world + 20.0),
                s: rng.random_range(2.0..10.0),
                a: rng.random_range(0.1..0.3) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            })
            .collect();
        let zoom = rng.random_range(cfg.zoom_min..=cfg.zoom_max);
        let (tx, ty) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let h: Homography = [[zoom, 0.0, tx], [0.0, zoom, ty], [0.0, 0.0, 1.0]];
        let to_world_b = |x: f64, y: f64| ((x - tx) / zoom, (y - ty) / zoom);
        let (ia, ib) = (format!("p{p:02}a"), format!("p{p:02}b"));
        let mut centres: Vec<(f64, f64)> = Vec::new();
        let mut tries = 0;
        while centres.len() < cfg.regions_per_image + cfg.distractors && tries < 10_000 {
            tries += 1;
            let c = (rng.random_range(margin..cfg.world - margin), rng.random_range(margin..cfg.world - margin));
            if centres.iter().all(|q| ((q.0 - c.0).powi(2) + (q.1 - c.1).powi(2)).sqrt() > 2.5 * cfg.sigma_max) {
                centres.push(c);
            }
        }
        if centres.len() < cfg.regions_per_image + cfg.distractors {
            return Err(HarnessError::Config("world too small for the requested regions".into()));
        }
        for (r, &(cx, cy)) in centres.iter().enumerate() {
            let sigma = rng.random_range(cfg.sigma_min..=cfg.sigma_max);
            let perturb = rng.random_range(cfg.perturb_min..=cfg.perturb_max);
            let (bx, by) = (zoom * cx + tx, zoom * cy + ty);
            let sb = zoom * sigma * perturb;
            if r < cfg.regions_per_image {
                let patch = render_patch(&blobs, cfg.patch, cx, cy, sigma, |x, y| (x, y), &noise, &mut rng);
                let name = format!("patches/{ia}_r{r:02}.imgf");
                save_image(&patch, out.join(&name))?;
                regions.push(vec![format!("{ia}_r{r:02}"), ia.clone(), fmt_g(cx), fmt_g(cy), fmt_g(sigma), name]);
            }
            // distractors exist only in the second view
            let patch = render_patch(&blobs, cfg.patch, bx, by, sb, to_world_b, &noise, &mut rng);
            let name = format!("patches/{ib}_r{r:02}.imgf");
            save_image(&patch, out.join(&name))?;
            regions.push(vec![format!("{ib}_r{r:02}"), ib.clone(), fmt_g(bx), fmt_g(by), fmt_g(sb), name]);
        }
        let hname = format!("h_{p:02}.txt");
        write_homography(&out.join(&hname), &h)?;
        pairs.push(vec![ia, ib, hname]);
    }
    regions.write(&out.join("regions.csv"))?;
    pairs.write(&out.join("pairs.csv"))
}

fn write_configs(out: &Path, seed: u64) -> Result<()> {
    let dir = out.join("configs");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::Data(e.to_string()))?;
    let common = |extra: serde_json::Value| {
        let mut v = serde_json::json!({
            "dataset": "../manifest.csv",
            "classifier": "builtin:../classifier/net.json",
            "seed": seed,
        });
        v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        v
    };
    let whole = serde_json::json!({"id": "whole_image", "schedule": {"sizes": 1, "size_range_min": 1.0, "flips": false}});
    let crops = serde_json::json!({"crops": 10, "scales": [24.0]});
    let files = [
        (
            "classify.json",
            common(serde_json::json!({"classify": {"methods": [
                whole,
                {"id": "C10", "schedule": crops},
                {"id": "D10", "schedule": {"sizes": 5, "size_range_min": 0.6}},
                {"id": "C10_D10", "schedule": {"crops": 10, "scales": [24.0], "sizes": 5, "size_range_min": 0.6}},
                {"id": "E40", "schedule": {}, "proposals": {"count": 200, "keep": 80}, "selection": {"keep": 40}},
                {"id": "C10_D10_E12", "schedule": {"crops": 10, "scales": [24.0], "sizes": 5, "size_range_min": 0.6},
                 "proposals": {"count": 200, "keep": 80}, "selection": {"keep": 12}},
                {"id": "C10_D10_E12_W", "schedule": {"crops": 10, "scales": [24.0], "sizes": 5, "size_range_min": 0.6},
                 "proposals": {"count": 200, "keep": 80}, "selection": {"keep": 12}, "weighting": {"mode": "inverse_entropy"}}
            ]}})),
        ),
        ("rim-sweep.json", common(serde_json::json!({"rim_sweep": {"table": true, "pad_px": 4.0, "averaged_pads": [[4, 12.0], [8, 28.0]]}}))),
        ("selection-curves.json", common(serde_json::json!({"selection_curves": {}}))),
        (
            "iou-analysis.json",
            common(serde_json::json!({"iou_analysis": {"methods": [
                {"id": "C10", "schedule": crops},
                {"id": "D10", "schedule": {"sizes": 5, "size_range_min": 0.6}},
                {"id": "C10_D10", "schedule": {"crops": 10, "scales": [24.0], "sizes": 5, "size_range_min": 0.6}}
            ]}})),
        ),
        (
            "match.json",
            serde_json::json!({"seed": seed, "match": {
                "regions": "../matching/regions.csv",
                "pairs": "../matching/pairs.csv",
                "overlap_threshold": 0.4,
                "methods": [
                    {"id": "raw_single", "describe": [{"kind": "raw"}]},
                    {"id": "raw_dsp_d1", "describe": [{"kind": "raw"}], "lambda1": 1.0, "lambda2": 1.0, "sizes": 1},
                    {"id": "raw_dsp", "describe": [{"kind": "raw"}], "lambda1": 0.7, "lambda2": 1.5, "sizes": 6},
                    {"id": "raw_dsp_wide", "describe": [{"kind": "raw"}], "lambda1": 0.5, "lambda2": 1.4, "sizes": 10},
                    {"id": "cnn_conv", "describe": [{"kind": "network", "network": "../classifier/net.json", "layer": "conv"}]},
                    {"id": "cnn_conv_dsp", "describe": [{"kind": "network", "network": "../classifier/net.json", "layer": "conv"}],
                     "lambda1": 0.7, "lambda2": 1.5, "sizes": 6},
                    {"id": "raw_dsp_pca32", "describe": [{"kind": "raw"}], "lambda1": 0.7, "lambda2": 1.5, "sizes": 6, "pca": 32}
                ]
            }}),
        ),
    ];
    for (name, value) in files {
        let text = serde_json::to_string_pretty(&value).expect("config serializes") + "\n";
        std::fs::write(dir.join(name), text).map_err(|e| HarnessError::Data(e.to_string()))?;
    }
    Ok(())
}
