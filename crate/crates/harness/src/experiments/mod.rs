//! Experiment runners. Each returns its tables; the CLI writes them.
//!
//! Images are processed in parallel and collected in manifest order, so
//! thread count never changes report bytes.

mod classify;
mod iou;
mod matching;
mod rim;
mod selection;

use std::path::Path;
use std::time::Duration;

use nuisance_core::imagegeom::{Provenance, RegionSample};
use nuisance_core::inference::{load_network, Classifier, ExternalClassifier, InputDims};
use nuisance_core::proposals::{keep_largest, load_boxes, objectness_proposals, ProposalSet};
use nuisance_core::schedules::ScheduleConfig;
use nuisance_core::Image;

pub use classify::{run_classification, ClassifyOutput, ImageRecord, MethodSummary};
pub use iou::run_error_vs_iou;
pub use matching::{export_descriptors, run_matching_benchmark, MatchOutput};
pub use rim::run_rim_sweep;
pub use selection::run_selection_curves;

use crate::config::{ClassifierSpec, ExperimentConfig, ProposalPool, ProposalSpec};
use crate::dataset::{DatasetEntry, DatasetManifest};
use crate::error::{HarnessError, Result};

pub fn build_classifier(cfg: &ExperimentConfig) -> Result<Box<dyn Classifier>> {
    match cfg.classifier_spec()? {
        ClassifierSpec::Builtin(path) => {
            let net = load_network(&path).map_err(|e| HarnessError::Classifier(format!("{}: {e}", path.display())))?;
            Ok(Box::new(net))
        }
        ClassifierSpec::External(cmd) => {
            let e = &cfg.external;
            let dims = InputDims { width: e.width, height: e.height, channels: e.channels };
            Ok(Box::new(ExternalClassifier::spawn(&cmd, dims, e.classes, Duration::from_millis(e.timeout_ms))?))
        }
    }
}

/// Loads the manifest and checks labels against the classifier before any
/// evaluation.
pub fn load_dataset(cfg: &ExperimentConfig, classes: usize) -> Result<DatasetManifest> {
    let m = DatasetManifest::load(cfg.dataset_path()?)?;
    if m.is_empty() {
        return Err(HarnessError::Data("dataset manifest lists no images".into()));
    }
    m.check_labels(classes)?;
    Ok(m)
}

/// Per-image seed: SplitMix64 finalizer over the global seed and a stream tag.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Proposal pool for one image: generated or read, then the `keep` largest.
pub fn image_proposals(
    cfg: &ExperimentConfig,
    entry: &DatasetEntry,
    img: &Image,
    pool: &ProposalPool,
    seed: u64,
) -> Result<ProposalSet> {
    let set = match cfg.proposal_spec()? {
        ProposalSpec::Builtin => objectness_proposals(img, pool.count, seed, &cfg.lattice),
        ProposalSpec::Files(dir) => {
            let stem = entry.path.file_stem().ok_or_else(|| HarnessError::Data(format!("{}: no file stem", entry.path.display())))?;
            let path = dir.join(Path::new(stem).with_extension("csv"));
            let (w, h) = img.dims();
            load_boxes(&path)?.clipped(w, h)
        }
    };
    Ok(keep_largest(&set, pool.keep))
}

/// Proposal samples in pool order, each followed by its mirror when `flips`.
pub fn proposal_samples(set: &ProposalSet, flips: bool) -> Vec<RegionSample> {
    let mut out = Vec::with_capacity(set.len() * 2);
    for b in &set.boxes {
        out.push(RegionSample::new(*b, false, Provenance::Proposal));
        if flips {
            out.push(RegionSample::new(*b, true, Provenance::Proposal));
        }
    }
    out
}

/// `(C, S, D)` as counted by the accounting rule: per-scale crop samples,
/// scale count and concentric samples, flips included.
pub fn fixed_counts(s: &ScheduleConfig) -> (usize, usize, usize) {
    let per_flip = if s.flips { 2 } else { 1 };
    let c = if s.crops == 0 { 0 } else { s.crops / 2 * per_flip };
    (c, s.scales.len(), s.sizes * per_flip)
}

pub fn default_crop_side(dims: InputDims) -> f64 {
    dims.width.min(dims.height) as f64
}

/// Run-level per-image error triple used by several reports.
pub(crate) fn topk_hits(pred: &[usize], label: usize) -> (bool, bool) {
    (pred.first() == Some(&label), pred.iter().take(5).any(|&c| c == label))
}
