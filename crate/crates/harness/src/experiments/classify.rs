//! Schedule + proposals, batched evaluation, selection, marginalization, top-k.

use nuisance_core::inference::{batch_eval, Classifier, Posterior};
use nuisance_core::marginal::{marginal_weights, schedule_accounting, select, top_k_predict, Candidate, Strategy, WeightingConfig};
use nuisance_core::schedules::{fixed_schedule, Schedule};
use nuisance_core::Image;
use rayon::prelude::*;

use super::{default_crop_side, fixed_counts, image_proposals, load_dataset, mix_seed, proposal_samples, topk_hits};
use crate::config::{ExperimentConfig, MethodConfig, WeightScope};
use crate::dataset::DatasetEntry;
use crate::error::{HarnessError, Result};
use crate::report::{fmt_g, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub index: usize,
    pub label: usize,
    pub top5: Vec<usize>,
    pub eval: usize,
    pub ave: usize,
    pub seconds: f64,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub id: String,
    pub top1_error: f64,
    pub top5_error: f64,
    /// Nominal counts from the accounting rule.
    pub eval_count: usize,
    pub ave_count: usize,
    pub images: usize,
    pub records: Vec<ImageRecord>,
}

#[derive(Debug)]
pub struct ClassifyOutput {
    pub methods: Vec<MethodSummary>,
    pub report: Table,
    pub predictions: Table,
    pub timing: Table,
}

/// Nominal `(#eval, #ave)` of a method.
pub fn method_accounting(m: &MethodConfig) -> (usize, usize) {
    let (c, s, d) = fixed_counts(&m.schedule);
    match m.proposals {
        Some(pool) => schedule_accounting(c, s, d, m.selection.keep, pool.keep, m.schedule.flips),
        None => schedule_accounting(c, s, d, 0, 0, m.schedule.flips),
    }
}

/// Averaging weights. Under `ProposalsOnly` each of the `n` averaged
/// samples that is not a proposal carries `1/n`; the selected proposals
/// share the remaining mass according to `weighting`.
fn averaging_weights(posts: &[&Posterior], n_fixed: usize, weighting: &WeightingConfig, scope: WeightScope) -> Result<Vec<f64>> {
    match scope {
        WeightScope::All => Ok(marginal_weights(posts, weighting)?),
        WeightScope::ProposalsOnly => {
            let n = posts.len() as f64;
            let mut w = vec![1.0 / n; n_fixed];
            if posts.len() > n_fixed {
                let share = (posts.len() - n_fixed) as f64 / n;
                w.extend(marginal_weights(&posts[n_fixed..], weighting)?.into_iter().map(|v| v * share));
            }
            Ok(w)
        }
    }
}

pub(crate) fn classify_image(
    cfg: &ExperimentConfig,
    m: &MethodConfig,
    classifier: &dyn Classifier,
    entry: &DatasetEntry,
    index: usize,
    img: &Image,
) -> Result<ImageRecord> {
    let (w, h) = img.dims();
    let mut sched = fixed_schedule(w, h, &m.schedule, default_crop_side(classifier.input_dims()))?;
    let n_fixed = sched.len();
    if let Some(pool) = &m.proposals {
        let props = image_proposals(cfg, entry, img, pool, mix_seed(cfg.seed, index as u64))?;
        sched.extend(Schedule::from_samples(proposal_samples(&props, m.schedule.flips)));
    }
    let eval = batch_eval(&sched, img, classifier, cfg.batch_size()?)?;
    let (fixed, props) = eval.posteriors.split_at(n_fixed);
    let mut averaged: Vec<&Posterior> = fixed.iter().collect();
    if !props.is_empty() {
        let cands: Vec<Candidate> = props
            .iter()
            .zip(&eval.samples[n_fixed..])
            .map(|(p, s)| Candidate { posterior: p, area: s.bbox.area() })
            .collect();
        let mut sel = m.selection;
        if sel.strategy == Strategy::Random {
            sel.seed = mix_seed(mix_seed(sel.seed, index as u64), 1);
        }
        averaged.extend(select(&cands, &sel)?.into_iter().map(|i| &props[i]));
    }
    if averaged.is_empty() {
        return Err(HarnessError::Config(format!("method '{}' averages no samples", m.id)));
    }
    let weights = averaging_weights(&averaged, n_fixed, &m.weighting, m.weight_scope)?;
    let post = nuisance_core::marginal::weighted_average(&averaged, &weights)?;
    Ok(ImageRecord {
        index,
        label: entry.label,
        top5: top_k_predict(&post, 5),
        eval: sched.len(),
        ave: averaged.len(),
        seconds: eval.seconds,
        batches: eval.batch_count,
    })
}

pub(crate) fn error_rates(records: &[ImageRecord]) -> (f64, f64) {
    let n = records.len().max(1) as f64;
    let (mut e1, mut e5) = (0usize, 0usize);
    for r in records {
        let (h1, h5) = topk_hits(&r.top5, r.label);
        e1 += usize::from(!h1);
        e5 += usize::from(!h5);
    }
    (e1 as f64 / n, e5 as f64 / n)
}

fn join_classes(c: &[usize]) -> String {
    c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Runs every configured method over the manifest; rows follow config order.
pub fn run_classification(cfg: &ExperimentConfig, classifier: &dyn Classifier) -> Result<ClassifyOutput> {
    let methods = &cfg.classify.as_ref().ok_or_else(|| HarnessError::Config("config has no 'classify' section".into()))?.methods;
    if methods.is_empty() {
        return Err(HarnessError::Config("classify lists no methods".into()));
    }
    for m in methods {
        m.selection.validate()?;
    }
    let data = load_dataset(cfg, classifier.class_count())?;
    let per_image: Vec<Vec<ImageRecord>> = data
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let img = e.load()?;
            methods.iter().map(|m| classify_image(cfg, m, classifier, e, i, &img)).collect()
        })
        .collect::<Result<_>>()?;

    let mut out = ClassifyOutput {
        methods: Vec::new(),
        report: Table::new(&["method", "top1_error", "top5_error", "eval_count", "ave_count", "images"]),
        predictions: Table::new(&["method", "index", "label", "top5", "top1_correct", "top5_correct", "eval", "ave"]),
        timing: Table::new(&["method", "seconds_per_image", "batches_per_image"]),
    };
    for (k, m) in methods.iter().enumerate() {
        let records: Vec<ImageRecord> = per_image.iter().map(|r| r[k].clone()).collect();
        let (top1, top5) = error_rates(&records);
        let (eval_count, ave_count) = method_accounting(m);
        let n = records.len();
        out.report.push(vec![m.id.clone(), fmt_g(top1), fmt_g(top5), eval_count.to_string(), ave_count.to_string(), n.to_string()]);
        for r in &records {
            let (h1, h5) = topk_hits(&r.top5, r.label);
            out.predictions.push(vec![
                m.id.clone(),
                r.index.to_string(),
                r.label.to_string(),
                join_classes(&r.top5),
                u8::from(h1).to_string(),
                u8::from(h5).to_string(),
                r.eval.to_string(),
                r.ave.to_string(),
            ]);
        }
        let secs = records.iter().map(|r| r.seconds).sum::<f64>() / n as f64;
        let batches = records.iter().map(|r| r.batches).sum::<usize>() as f64 / n as f64;
        out.timing.push(vec![m.id.clone(), fmt_g(secs), fmt_g(batches)]);
        out.methods.push(MethodSummary { id: m.id.clone(), top1_error: top1, top5_error: top5, eval_count, ave_count, images: n, records });
    }
    Ok(out)
}
