//! Experiment configuration (JSON, one experiment per file).
//!
//! Relative paths inside a config file are resolved against the file's
//! directory. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nuisance_core::marginal::{SelectionConfig, Strategy, WeightingConfig};
use nuisance_core::proposals::LatticeConfig;
use nuisance_core::schedules::ScheduleConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset manifest for the classification verbs.
    pub dataset: Option<PathBuf>,
    /// `builtin:<network manifest>` or `external:<command>`.
    pub classifier: Option<String>,
    pub external: ExternalConfig,
    /// `builtin` or `file:<directory of per-image CSVs>`.
    pub proposals: String,
    pub lattice: LatticeConfig,
    pub seed: u64,
    pub batch_size: usize,
    pub classify: Option<ClassifyConfig>,
    pub rim_sweep: Option<RimSweepConfig>,
    pub selection_curves: Option<SelectionCurvesConfig>,
    pub iou_analysis: Option<IouAnalysisConfig>,
    #[serde(rename = "match")]
    pub matching: Option<MatchConfig>,
    pub synth: Option<SynthConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            classifier: None,
            external: ExternalConfig::default(),
            proposals: "builtin".into(),
            lattice: LatticeConfig::default(),
            seed: 0,
            batch_size: 32,
            classify: None,
            rim_sweep: None,
            selection_curves: None,
            iou_analysis: None,
            matching: None,
            synth: None,
        }
    }
}

/// Geometry and arity of an external classifier; the wire protocol has no
/// handshake, so these are declared here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalConfig {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub classes: usize,
    pub timeout_ms: u64,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        Self { width: 224, height: 224, channels: 3, classes: 1000, timeout_ms: 30_000 }
    }
}

/// Proposal stage of a method: `count` generated, the `keep` largest retained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalPool {
    pub count: usize,
    pub keep: usize,
}

impl Default for ProposalPool {
    fn default() -> Self {
        Self { count: 200, keep: 80 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScope {
    /// Weighting mode applies to every averaged sample.
    #[default]
    All,
    /// Fixed samples get uniform `1/n` mass each; selected proposals share
    /// the rest under the weighting mode.
    ProposalsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub id: String,
    pub schedule: ScheduleConfig,
    /// Absent: no proposals.
    pub proposals: Option<ProposalPool>,
    pub selection: SelectionConfig,
    pub weighting: WeightingConfig,
    pub weight_scope: WeightScope,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            id: "whole_image".into(),
            schedule: ScheduleConfig { sizes: 1, size_range_min: 1.0, flips: false, ..Default::default() },
            proposals: None,
            selection: SelectionConfig::default(),
            weighting: WeightingConfig::default(),
            weight_scope: WeightScope::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub methods: Vec<MethodConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RimMode {
    Padded,
    SameResolution,
}

impl RimMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RimMode::Padded => "padded",
            RimMode::SameResolution => "same_resolution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RimSweepConfig {
    pub t_grid: Vec<f64>,
    pub modes: Vec<RimMode>,
    /// Also emit the fixed ground-truth conditions table.
    pub table: bool,
    /// Rim of the single padded condition, in pixels.
    pub pad_px: f64,
    /// `(sizes, max pad in pixels)` for the averaged padded conditions.
    pub averaged_pads: Vec<(usize, f64)>,
}

impl Default for RimSweepConfig {
    fn default() -> Self {
        Self {
            t_grid: (0..=20).map(|i| i as f64 / 20.0).collect(),
            modes: vec![RimMode::Padded, RimMode::SameResolution],
            table: false,
            pad_px: 10.0,
            averaged_pads: vec![(4, 30.0), (8, 70.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionCurvesConfig {
    pub strategies: Vec<Strategy>,
    pub e_grid: Vec<usize>,
    pub repeats: usize,
    pub pool: ProposalPool,
    pub flips: bool,
    pub alpha: f64,
    pub weighting: WeightingConfig,
}

impl Default for SelectionCurvesConfig {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::LowestEntropy, Strategy::Random, Strategy::LargestSize, Strategy::MaxConfidence],
            e_grid: vec![4, 8, 12, 16, 20],
            repeats: 10,
            pool: ProposalPool::default(),
            flips: true,
            alpha: 0.35,
            weighting: WeightingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedMethod {
    pub id: String,
    pub schedule: ScheduleConfig,
}

impl Default for FixedMethod {
    fn default() -> Self {
        Self { id: "fixed".into(), schedule: ScheduleConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IouAnalysisConfig {
    pub methods: Vec<FixedMethod>,
    pub bucket_edges: Vec<f64>,
}

impl Default for IouAnalysisConfig {
    fn default() -> Self {
        Self { methods: Vec::new(), bucket_edges: (0..=10).map(|i| i as f64 / 10.0).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DescribeConfig {
    /// Gray intensities of a `side x side` resample, optionally zero-mean unit-norm.
    Raw {
        #[serde(default = "default_raw_side")]
        side: usize,
        #[serde(default = "default_true")]
        normalize: bool,
    },
    /// Activations after `layer` of a network manifest.
    Network { network: PathBuf, layer: String },
}

fn default_raw_side() -> usize {
    16
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchMethod {
    pub id: String,
    /// Base descriptors, pooled separately and concatenated in order.
    pub describe: Vec<DescribeConfig>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sizes: usize,
    /// PCA output dimension, fitted on all regions of the benchmark.
    pub pca: Option<usize>,
}

impl Default for MatchMethod {
    fn default() -> Self {
        Self {
            id: "single".into(),
            describe: vec![DescribeConfig::Raw { side: 16, normalize: true }],
            lambda1: 1.0,
            lambda2: 1.0,
            sizes: 1,
            pca: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub regions: PathBuf,
    pub pairs: PathBuf,
    pub methods: Vec<MatchMethod>,
    pub overlap_threshold: f64,
    /// Write each method's descriptors as a blob next to the report.
    pub export_descriptors: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            regions: "regions.csv".into(),
            pairs: "pairs.csv".into(),
            methods: Vec::new(),
            overlap_threshold: 0.5,
            export_descriptors: false,
        }
    }
}

/// Where a classifier comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSpec {
    Builtin(PathBuf),
    External(String),
}

impl ClassifierSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(p) = s.strip_prefix("builtin:") {
            Ok(ClassifierSpec::Builtin(p.into()))
        } else if let Some(c) = s.strip_prefix("external:") {
            Ok(ClassifierSpec::External(c.into()))
        } else {
            Err(HarnessError::Config(format!("classifier '{s}' must start with builtin: or external:")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProposalSpec {
    Builtin,
    /// Directory with one `<image stem>.csv` per image.
    Files(PathBuf),
}

impl ProposalSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "builtin" {
            Ok(ProposalSpec::Builtin)
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(ProposalSpec::Files(p.into()))
        } else {
            Err(HarnessError::Config(format!("proposals '{s}' must be builtin or file:<path>")))
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_prefixed(base: &Path, s: &mut String, prefix: &str) {
    if let Some(rest) = s.strip_prefix(prefix) {
        if Path::new(rest).is_relative() {
            *s = format!("{prefix}{}", base.join(rest).display());
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads `path` and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(d) = self.dataset.as_mut() {
            rebase(base, d);
        }
        if let Some(c) = self.classifier.as_mut() {
            rebase_prefixed(base, c, "builtin:");
        }
        rebase_prefixed(base, &mut self.proposals, "file:");
        if let Some(m) = self.matching.as_mut() {
            rebase(base, &mut m.regions);
            rebase(base, &mut m.pairs);
            for method in &mut m.methods {
                for d in &mut method.describe {
                    if let DescribeConfig::Network { network, .. } = d {
                        rebase(base, network);
                    }
                }
            }
        }
    }

    pub fn classifier_spec(&self) -> Result<ClassifierSpec> {
        ClassifierSpec::parse(self.classifier.as_deref().ok_or_else(|| HarnessError::Config("no classifier configured".into()))?)
    }

    pub fn proposal_spec(&self) -> Result<ProposalSpec> {
        ProposalSpec::parse(&self.proposals)
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset.as_deref().ok_or_else(|| HarnessError::Config("no dataset configured".into()))
    }

    pub fn batch_size(&self) -> Result<usize> {
        if self.batch_size == 0 {
            return Err(HarnessError::Config("batch_size must be at least 1".into()));
        }
        Ok(self.batch_size)
    }
}
