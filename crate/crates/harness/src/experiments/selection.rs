//! Error versus number of averaged proposals, per selection strategy.

use nuisance_core::inference::{batch_eval, Classifier, Posterior};
use nuisance_core::marginal::{marginalize, select, top_k_predict, Candidate, SelectionConfig, Strategy};
use nuisance_core::schedules::Schedule;
use rayon::prelude::*;

use super::{image_proposals, load_dataset, mix_seed, proposal_samples, topk_hits};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{fmt_g, fmt_opt, Table};

/// Mean and `3 x` standard error of the mean; `None` for a single value.
pub fn mean_ci(v: &[f64]) -> (f64, Option<(f64, f64)>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 3.0 * (var / n).sqrt();
    (mean, Some((mean - half, mean + half)))
}

/// Columns: `strategy,e,repeats,top1_error,top1_lo,top1_hi,top5_error,top5_lo,top5_hi`.
/// Interval cells are blank for deterministic strategies and single repeats.
pub fn run_selection_curves(cfg: &ExperimentConfig, classifier: &dyn Classifier) -> Result<Table> {
    let sc = cfg.selection_curves.clone().ok_or_else(|| HarnessError::Config("config has no 'selection_curves' section".into()))?;
    if sc.repeats == 0 || sc.e_grid.is_empty() || sc.strategies.is_empty() {
        return Err(HarnessError::Config("selection curves need strategies, an E grid and at least one repeat".into()));
    }
    let batch = cfg.batch_size()?;
    let data = load_dataset(cfg, classifier.class_count())?;
    let runs: Vec<(Strategy, usize)> = sc
        .strategies
        .iter()
        .map(|&s| (s, if s == Strategy::Random { sc.repeats } else { 1 }))
        .collect();

    // per image: hits indexed [strategy][e][repeat]
    type Hits = Vec<Vec<Vec<(bool, bool)>>>;
    let per_image: Vec<Hits> = data
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let img = e.load()?;
            let props = image_proposals(cfg, e, &img, &sc.pool, mix_seed(cfg.seed, i as u64))?;
            let sched = Schedule::from_samples(proposal_samples(&props, sc.flips));
            if sched.is_empty() {
                return Err(HarnessError::Data(format!("{}: no proposals", e.path.display())));
            }
            let ev = batch_eval(&sched, &img, classifier, batch)?;
            let cands: Vec<Candidate> = ev.posteriors.iter().zip(&ev.samples).map(|(p, s)| Candidate { posterior: p, area: s.bbox.area() }).collect();
            runs.iter()
                .map(|&(strategy, reps)| {
                    sc.e_grid
                        .iter()
                        .map(|&keep| {
                            (0..reps)
                                .map(|r| {
                                    let seed = mix_seed(mix_seed(cfg.seed, i as u64), 1 + r as u64);
                                    let sel = select(&cands, &SelectionConfig { strategy, keep, alpha: sc.alpha, seed })?;
                                    let chosen: Vec<&Posterior> = sel.iter().map(|&k| &ev.posteriors[k]).collect();
                                    Ok(topk_hits(&top_k_predict(&marginalize(&chosen, &sc.weighting)?, 5), e.label))
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n = per_image.len() as f64;
    let mut t = Table::new(&["strategy", "e", "repeats", "top1_error", "top1_lo", "top1_hi", "top5_error", "top5_lo", "top5_hi"]);
    for (si, &(strategy, reps)) in runs.iter().enumerate() {
        for (ei, &keep) in sc.e_grid.iter().enumerate() {
            let errs = |top5: bool| -> Vec<f64> {
                (0..reps)
                    .map(|r| per_image.iter().filter(|h| { let x = h[si][ei][r]; !if top5 { x.1 } else { x.0 } }).count() as f64 / n)
                    .collect()
            };
            let (m1, ci1) = mean_ci(&errs(false));
            let (m5, ci5) = mean_ci(&errs(true));
            t.push(vec![
                strategy.as_str().into(),
                keep.to_string(),
                reps.to_string(),
                fmt_g(m1),
                fmt_opt(ci1.map(|c| c.0)),
                fmt_opt(ci1.map(|c| c.1)),
                fmt_g(m5),
                fmt_opt(ci5.map(|c| c.0)),
                fmt_opt(ci5.map(|c| c.1)),
            ]);
        }
    }
    Ok(t)
}
