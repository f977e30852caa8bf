//! Error as a function of the rim between the ground-truth box (t = 0) and
//! the whole image (t = 1), plus the fixed ground-truth conditions.

use nuisance_core::imagegeom::{crop_resize, expand_box, interp_box_to_image, same_resolution_crop, PadMode};
use nuisance_core::inference::{Classifier, InputDims, Posterior};
use nuisance_core::marginal::{marginalize, top_k_predict, WeightingConfig};
use nuisance_core::schedules::gt_padded_schedule;
use nuisance_core::{BBox, Image};
use rayon::prelude::*;

use super::{load_dataset, topk_hits};
use crate::config::{ExperimentConfig, RimMode};
use crate::error::{HarnessError, Result};
use crate::report::{fmt_g, Table};

fn to_channels(img: Image, channels: usize) -> Image {
    match (img.channels(), channels) {
        (3, 1) => img.to_gray(),
        (1, 3) => {
            let px = img.pixels().iter().flat_map(|&v| [v, v, v]).collect();
            Image::new(img.width(), img.height(), 3, px).expect("same geometry")
        }
        _ => img,
    }
}

fn input(img: &Image, b: &BBox, mode: RimMode, dims: InputDims) -> Result<Image> {
    let crop = match mode {
        RimMode::Padded => crop_resize(img, b, dims.width, dims.height)?,
        RimMode::SameResolution => same_resolution_crop(img, b, dims.width, dims.height)?,
    };
    Ok(to_channels(crop, dims.channels))
}

fn classify_all(classifier: &dyn Classifier, inputs: &[Image], batch: usize) -> Result<Vec<Posterior>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch) {
        out.extend(classifier.classify_batch(chunk)?);
    }
    Ok(out)
}

/// A fixed condition: which boxes are averaged and how they are resampled.
struct Condition {
    name: String,
    mode: RimMode,
    samples: usize,
    boxes: Box<dyn Fn(&BBox, usize, usize) -> Vec<BBox> + Sync>,
}

fn conditions(cfg: &crate::config::RimSweepConfig) -> Vec<Condition> {
    let mut v = vec![
        Condition { name: "whole_image".into(), mode: RimMode::Padded, samples: 1, boxes: Box::new(|_, w, h| vec![BBox::full(w, h)]) },
        Condition { name: "gt".into(), mode: RimMode::Padded, samples: 1, boxes: Box::new(|g, _, _| vec![*g]) },
        Condition { name: "gt_same_resolution".into(), mode: RimMode::SameResolution, samples: 1, boxes: Box::new(|g, _, _| vec![*g]) },
    ];
    let modes = [(PadMode::MinDimOnly, "min_dim_only"), (PadMode::BothDims, "both_dims")];
    for (mode, tag) in modes {
        let pad = cfg.pad_px;
        v.push(Condition {
            name: format!("gt_padded_{}px_{tag}", fmt_g(pad)),
            mode: RimMode::Padded,
            samples: 1,
            boxes: Box::new(move |g, w, h| vec![expand_box(g, pad, mode, w, h)]),
        });
    }
    for &(n, pmax) in &cfg.averaged_pads {
        for (mode, tag) in modes {
            v.push(Condition {
                name: format!("ave_gt_{n}_sizes_0_{}px_{tag}", fmt_g(pmax)),
                mode: RimMode::Padded,
                samples: n,
                boxes: Box::new(move |g, w, h| gt_padded_schedule(g, pmax, n, mode, w, h).samples.iter().map(|s| s.bbox).collect()),
            });
        }
    }
    v
}

/// Returns the curve table (`mode,t,...`) and, when configured, the
/// conditions table.
pub fn run_rim_sweep(cfg: &ExperimentConfig, classifier: &dyn Classifier) -> Result<(Table, Option<Table>)> {
    let rc = cfg.rim_sweep.clone().ok_or_else(|| HarnessError::Config("config has no 'rim_sweep' section".into()))?;
    if rc.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(HarnessError::Config("rim t values must lie in [0, 1]".into()));
    }
    let batch = cfg.batch_size()?;
    let data = load_dataset(cfg, classifier.class_count())?;
    data.require_gt()?;
    let dims = classifier.input_dims();
    let conds = if rc.table { conditions(&rc) } else { Vec::new() };
    let uniform = WeightingConfig::default();

    // per image: (curve hits per mode x t, condition hits)
    type Hits = Vec<(bool, bool)>;
    let per_image: Vec<(Hits, Hits)> = data
        .entries
        .par_iter()
        .map(|e| {
            let img = e.load()?;
            let (w, h) = img.dims();
            let gt = e.gt.expect("checked").clamp_to(w, h).ok_or_else(|| HarnessError::Data(format!("{}: ground truth outside image", e.path.display())))?;
            let mut inputs = Vec::new();
            for &mode in &rc.modes {
                for &t in &rc.t_grid {
                    inputs.push(input(&img, &interp_box_to_image(&gt, t, w, h), mode, dims)?);
                }
            }
            let curve = classify_all(classifier, &inputs, batch)?
                .iter()
                .map(|p| topk_hits(&top_k_predict(p, 5), e.label))
                .collect();
            let mut table = Vec::with_capacity(conds.len());
            for c in &conds {
                let inputs = (c.boxes)(&gt, w, h).iter().map(|b| input(&img, b, c.mode, dims)).collect::<Result<Vec<_>>>()?;
                let posts = classify_all(classifier, &inputs, batch)?;
                let refs: Vec<&Posterior> = posts.iter().collect();
                table.push(topk_hits(&top_k_predict(&marginalize(&refs, &uniform)?, 5), e.label));
            }
            Ok((curve, table))
        })
        .collect::<Result<_>>()?;

    let n = per_image.len();
    let rate = |f: &dyn Fn(&(Hits, Hits)) -> bool| per_image.iter().filter(|r| !f(r)).count() as f64 / n as f64;
    let mut curve = Table::new(&["mode", "t", "top1_error", "top5_error", "images"]);
    let nt = rc.t_grid.len();
    for (mi, mode) in rc.modes.iter().enumerate() {
        for (ti, &t) in rc.t_grid.iter().enumerate() {
            let k = mi * nt + ti;
            curve.push(vec![
                mode.as_str().into(),
                fmt_g(t),
                fmt_g(rate(&|r| r.0[k].0)),
                fmt_g(rate(&|r| r.0[k].1)),
                n.to_string(),
            ]);
        }
    }
    let table = rc.table.then(|| {
        let mut t = Table::new(&["condition", "top1_error", "top5_error", "samples", "images"]);
        for (k, c) in conds.iter().enumerate() {
            t.push(vec![c.name.clone(), fmt_g(rate(&|r| r.1[k].0)), fmt_g(rate(&|r| r.1[k].1)), c.samples.to_string(), n.to_string()]);
        }
        t
    });
    Ok((curve, table))
}
