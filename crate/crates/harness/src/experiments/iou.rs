//! Classification error bucketed by IoU error of fixed schedules.

use nuisance_core::imagegeom::iou;
use nuisance_core::inference::{batch_eval, Classifier, Posterior};
use nuisance_core::marginal::{marginalize, top_k_predict, WeightingConfig};
use nuisance_core::schedules::fixed_schedule;
use rayon::prelude::*;

use super::{default_crop_side, load_dataset, topk_hits};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{fmt_g, Table};

/// Bucket of `x` for edges `e`: `[e_i, e_{i+1})`, the last bucket closed.
pub fn bucket_of(edges: &[f64], x: f64) -> Option<usize> {
    let k = edges.len().checked_sub(1)?;
    if k == 0 || x < edges[0] || x > edges[k] {
        return None;
    }
    Some((0..k).find(|&i| x < edges[i + 1]).unwrap_or(k - 1))
}

/// Returns the bucket table and the per-image table.
pub fn run_error_vs_iou(cfg: &ExperimentConfig, classifier: &dyn Classifier) -> Result<(Table, Table)> {
    let ic = cfg.iou_analysis.clone().ok_or_else(|| HarnessError::Config("config has no 'iou_analysis' section".into()))?;
    let edges = &ic.bucket_edges;
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(HarnessError::Config("bucket_edges must be strictly increasing with at least two entries".into()));
    }
    if ic.methods.is_empty() {
        return Err(HarnessError::Config("iou_analysis lists no methods".into()));
    }
    let batch = cfg.batch_size()?;
    let data = load_dataset(cfg, classifier.class_count())?;
    data.require_gt()?;
    let side = default_crop_side(classifier.input_dims());
    let uniform = WeightingConfig::default();

    // per image, per method: (iou error, top1 hit, top5 hit)
    let per_image: Vec<Vec<(f64, bool, bool)>> = data
        .entries
        .par_iter()
        .map(|e| {
            let img = e.load()?;
            let (w, h) = img.dims();
            let gt = e.gt.expect("checked");
            ic.methods
                .iter()
                .map(|m| {
                    let sched = fixed_schedule(w, h, &m.schedule, side)?;
                    if sched.is_empty() {
                        return Err(HarnessError::Config(format!("method '{}' has no samples", m.id)));
                    }
                    let err = 1.0 - sched.samples.iter().map(|s| iou(&gt, &s.bbox)).fold(0.0, f64::max);
                    let ev = batch_eval(&sched, &img, classifier, batch)?;
                    let refs: Vec<&Posterior> = ev.posteriors.iter().collect();
                    let (h1, h5) = topk_hits(&top_k_predict(&marginalize(&refs, &uniform)?, 5), e.label);
                    Ok((err, h1, h5))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut buckets = Table::new(&["method", "bucket_lo", "bucket_hi", "count", "top1_error", "top5_error"]);
    let mut images = Table::new(&["method", "index", "iou_error", "top1_correct", "top5_correct"]);
    for (k, m) in ic.methods.iter().enumerate() {
        let mut stats = vec![(0usize, 0usize, 0usize); edges.len() - 1];
        for (i, r) in per_image.iter().enumerate() {
            let (err, h1, h5) = r[k];
            images.push(vec![m.id.clone(), i.to_string(), fmt_g(err), u8::from(h1).to_string(), u8::from(h5).to_string()]);
            if let Some(b) = bucket_of(edges, err) {
                stats[b].0 += 1;
                stats[b].1 += usize::from(!h1);
                stats[b].2 += usize::from(!h5);
            }
        }
        for (b, &(count, e1, e5)) in stats.iter().enumerate() {
            let rate = |e: usize| if count == 0 { String::new() } else { fmt_g(e as f64 / count as f64) };
            buckets.push(vec![m.id.clone(), fmt_g(edges[b]), fmt_g(edges[b + 1]), count.to_string(), rate(e1), rate(e5)]);
        }
    }
    Ok((buckets, images))
}
