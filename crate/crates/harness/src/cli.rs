//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::{
    build_classifier, export_descriptors, run_classification, run_error_vs_iou, run_matching_benchmark, run_rim_sweep, run_selection_curves,
};
use crate::synth::generate_all;

#[derive(Debug, Parser)]
#[command(name = "nuisance", version, about = "Test-time marginalization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Top-1/top-5 error and sample accounting per configured method.
    Classify(Common),
    /// Error versus rim size between the ground-truth box and the whole image.
    RimSweep(Common),
    /// Error versus number of averaged proposals per selection strategy.
    SelectionCurves(Common),
    /// Error bucketed by the IoU error of fixed schedules.
    IouAnalysis(Common),
    /// Region-matching mAP of single-size and pooled descriptors.
    Match(Common),
    /// Writes the synthetic dataset, classifier, matching benchmark and configs.
    Synth(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `builtin:<network manifest>` or `external:<command>`.
    #[arg(long)]
    pub classifier: Option<String>,
    /// `builtin` or `file:<directory>`.
    #[arg(long)]
    pub proposals: Option<String>,
}

impl Common {
    fn config(&self, required: bool) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None if required => return Err(HarnessError::Config("--config is required".into())),
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = &self.classifier {
            cfg.classifier = Some(c.clone());
        }
        if let Some(p) = &self.proposals {
            cfg.proposals = p.clone();
        }
        Ok(cfg)
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| HarnessError::Data(format!("{}: {e}", p.display())))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.verb {
        Verb::Classify(c) => {
            let cfg = c.config(true)?;
            let clf = build_classifier(&cfg)?;
            let out = run_classification(&cfg, clf.as_ref())?;
            create_dir(&c.out_dir)?;
            out.report.write(&c.out_dir.join("report.csv"))?;
            out.predictions.write(&c.out_dir.join("predictions.csv"))?;
            out.timing.write(&c.out_dir.join("timing.csv"))
        }
        Verb::RimSweep(c) => {
            let cfg = c.config(true)?;
            let clf = build_classifier(&cfg)?;
            let (curve, table) = run_rim_sweep(&cfg, clf.as_ref())?;
            create_dir(&c.out_dir)?;
            curve.write(&c.out_dir.join("rim_curve.csv"))?;
            match table {
                Some(t) => t.write(&c.out_dir.join("rim_table.csv")),
                None => Ok(()),
            }
        }
        Verb::SelectionCurves(c) => {
            let cfg = c.config(true)?;
            let clf = build_classifier(&cfg)?;
            let t = run_selection_curves(&cfg, clf.as_ref())?;
            create_dir(&c.out_dir)?;
            t.write(&c.out_dir.join("selection_curves.csv"))
        }
        Verb::IouAnalysis(c) => {
            let cfg = c.config(true)?;
            let clf = build_classifier(&cfg)?;
            let (buckets, images) = run_error_vs_iou(&cfg, clf.as_ref())?;
            create_dir(&c.out_dir)?;
            buckets.write(&c.out_dir.join("iou_buckets.csv"))?;
            images.write(&c.out_dir.join("iou_images.csv"))
        }
        Verb::Match(c) => {
            let cfg = c.config(true)?;
            let out = run_matching_benchmark(&cfg)?;
            create_dir(&c.out_dir)?;
            out.report.write(&c.out_dir.join("match_report.csv"))?;
            out.pairs.write(&c.out_dir.join("match_pairs.csv"))?;
            if cfg.matching.as_ref().is_some_and(|m| m.export_descriptors) {
                export_descriptors(&out, &c.out_dir)?;
            }
            Ok(())
        }
        Verb::Synth(c) => {
            let cfg = c.config(false)?;
            create_dir(&c.out_dir)?;
            generate_all(&cfg.synth.unwrap_or_default(), cfg.seed, &c.out_dir)
        }
    }
}
