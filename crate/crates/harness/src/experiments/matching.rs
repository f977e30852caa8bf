//! Region-matching benchmark: pooled descriptors, optional PCA, mAP.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nuisance_core::inference::load_network;
use nuisance_core::matching::io::{load_pair_manifest, load_region_manifest, write_descriptor_blob};
use nuisance_core::matching::{
    concat_descriptors, correspondence_oracle, dsp_descriptor, match_regions, matching_ap, matching_map, pca_apply, pca_fit, Describe,
    Descriptor, DetectedRegion, NetworkDescriptor, RawPatch,
};
use rayon::prelude::*;

use crate::config::{DescribeConfig, ExperimentConfig, MatchMethod};
use crate::error::{HarnessError, Result};
use crate::report::{fmt_g, Table};

pub struct MatchOutput {
    /// `(method id, dim, mAP)` in config order.
    pub summary: Vec<(String, usize, f64)>,
    pub report: Table,
    pub pairs: Table,
    /// Descriptors per method, in region manifest order.
    pub descriptors: Vec<Vec<Descriptor>>,
}

fn describers(m: &MatchMethod) -> Result<Vec<Box<dyn Describe>>> {
    if m.describe.is_empty() {
        return Err(HarnessError::Config(format!("method '{}' has no descriptors", m.id)));
    }
    m.describe
        .iter()
        .map(|d| -> Result<Box<dyn Describe>> {
            Ok(match d {
                DescribeConfig::Raw { side, normalize } => {
                    if *side == 0 {
                        return Err(HarnessError::Config("raw descriptor side must be positive".into()));
                    }
                    Box::new(RawPatch { side: *side, normalize: *normalize })
                }
                DescribeConfig::Network { network, layer } => {
                    let net = load_network(network).map_err(|e| HarnessError::Classifier(format!("{}: {e}", network.display())))?;
                    if net.feature_dim(layer).is_none() {
                        return Err(HarnessError::Config(format!("network {} has no layer '{layer}'", network.display())));
                    }
                    Box::new(NetworkDescriptor { net: Arc::new(net), layer: layer.clone() })
                }
            })
        })
        .collect()
}

fn describe_region(m: &MatchMethod, ds: &[Box<dyn Describe>], r: &DetectedRegion) -> Result<Descriptor> {
    let mut parts = ds.iter().map(|d| dsp_descriptor(r, m.lambda1, m.lambda2, m.sizes, d.as_ref()));
    let mut acc = parts.next().expect("at least one describer")?;
    for p in parts {
        acc = concat_descriptors(&acc, &p?)?;
    }
    Ok(acc)
}

pub fn run_matching_benchmark(cfg: &ExperimentConfig) -> Result<MatchOutput> {
    let mc = cfg.matching.as_ref().ok_or_else(|| HarnessError::Config("config has no 'match' section".into()))?;
    if mc.methods.is_empty() {
        return Err(HarnessError::Config("match lists no methods".into()));
    }
    let entries = load_region_manifest(&mc.regions)?;
    let pairs = load_pair_manifest(&mc.pairs)?;
    if pairs.is_empty() {
        return Err(HarnessError::Data(format!("{}: no image pairs", mc.pairs.display())));
    }
    let regions: Vec<DetectedRegion> = entries.par_iter().map(|e| e.load().map_err(HarnessError::from)).collect::<Result<_>>()?;
    let mut by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in regions.iter().enumerate() {
        by_image.entry(r.image_id.as_str()).or_default().push(i);
    }
    for p in &pairs {
        for id in [&p.image_a, &p.image_b] {
            if !by_image.contains_key(id.as_str()) {
                return Err(HarnessError::Data(format!("pair references image '{id}' with no regions")));
            }
        }
    }

    let mut out = MatchOutput {
        summary: Vec::new(),
        report: Table::new(&["method", "dim", "map", "pairs"]),
        pairs: Table::new(&["method", "image_a", "image_b", "ap", "correspondable", "correct_matches", "regions_a"]),
        descriptors: Vec::new(),
    };
    for m in &mc.methods {
        let ds = describers(m)?;
        let mut descs: Vec<Descriptor> = regions.par_iter().map(|r| describe_region(m, &ds, r)).collect::<Result<_>>()?;
        if let Some(k) = m.pca {
            let model = pca_fit(&descs, k)?;
            descs = descs.iter().map(|d| pca_apply(&model, d)).collect::<std::result::Result<_, _>>()?;
        }
        let dim = descs[0].dim();
        let mut aps = Vec::with_capacity(pairs.len());
        for p in &pairs {
            let (ia, ib) = (&by_image[p.image_a.as_str()], &by_image[p.image_b.as_str()]);
            let pick = |ix: &[usize]| -> (Vec<String>, Vec<Descriptor>) {
                (ix.iter().map(|&i| regions[i].region_id.clone()).collect(), ix.iter().map(|&i| descs[i].clone()).collect())
            };
            let ((ids_a, da), (ids_b, db)) = (pick(ia), pick(ib));
            let corr = |i: usize, j: usize| correspondence_oracle(&regions[ia[i]].bbox, &regions[ib[j]].bbox, &p.homography, mc.overlap_threshold);
            let correspondable = (0..ia.len()).filter(|&i| (0..ib.len()).any(|j| corr(i, j))).count();
            let records = match_regions(&ids_a, &da, &ids_b, &db, corr)?;
            let ap = matching_ap(&records, correspondable);
            let hits = records.iter().filter(|r| r.correct).count();
            out.pairs.push(vec![
                m.id.clone(),
                p.image_a.clone(),
                p.image_b.clone(),
                fmt_g(ap),
                correspondable.to_string(),
                hits.to_string(),
                ia.len().to_string(),
            ]);
            aps.push(ap);
        }
        let map = matching_map(&aps);
        out.report.push(vec![m.id.clone(), dim.to_string(), fmt_g(map), pairs.len().to_string()]);
        out.summary.push((m.id.clone(), dim, map));
        out.descriptors.push(descs);
    }
    Ok(out)
}

/// Writes `descriptors_<method>.bin` for every method.
pub fn export_descriptors(out: &MatchOutput, dir: &Path) -> Result<()> {
    for ((id, _, _), descs) in out.summary.iter().zip(&out.descriptors) {
        let path = dir.join(format!("descriptors_{id}.bin"));
        let f = std::fs::File::create(&path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        write_descriptor_blob(std::io::BufWriter::new(f), descs)?;
    }
    Ok(())
}
