use std::path::Path;

use nuisance_core::imagegeom::io::save_image;
use nuisance_core::inference::{Classifier, InferenceError, InputDims, Posterior};
use nuisance_core::marginal::{schedule_accounting, SelectionConfig, Strategy};
use nuisance_core::matching::io::write_homography;
use nuisance_core::matching::IDENTITY;
use nuisance_core::schedules::ScheduleConfig;
use nuisance_core::Image;
use nuisance_harness::config::{
    ClassifyConfig, DescribeConfig, ExperimentConfig, FixedMethod, IouAnalysisConfig, MatchConfig, MatchMethod, MethodConfig, ProposalPool,
    RimSweepConfig, SelectionCurvesConfig,
};
use nuisance_harness::error::HarnessError;
use nuisance_harness::experiments::{run_classification, run_error_vs_iou, run_matching_benchmark, run_rim_sweep, run_selection_curves};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLASSES: usize = 10;

/// Reads the label off the mean intensity: class `c` images are filled with `(c + 0.5) / CLASSES`.
struct BrightnessOracle;

impl Classifier for BrightnessOracle {
    fn input_dims(&self) -> InputDims {
        InputDims { width: 8, height: 8, channels: 1 }
    }
    fn class_count(&self) -> usize {
        CLASSES
    }
    fn classify_batch(&self, batch: &[Image]) -> Result<Vec<Posterior>, InferenceError> {
        Ok(batch
            .iter()
            .map(|img| {
                let mean = img.pixels().iter().map(|&v| v as f64).sum::<f64>() / img.pixels().len() as f64;
                Posterior::one_hot(CLASSES, ((mean * CLASSES as f64) as usize).min(CLASSES - 1))
            })
            .collect())
    }
}

/// Same posterior for every input.
struct Constant(Posterior);

impl Classifier for Constant {
    fn input_dims(&self) -> InputDims {
        InputDims { width: 8, height: 8, channels: 1 }
    }
    fn class_count(&self) -> usize {
        self.0.class_count()
    }
    fn classify_batch(&self, batch: &[Image]) -> Result<Vec<Posterior>, InferenceError> {
        Ok(vec![self.0.clone(); batch.len()])
    }
}

/// Writes constant-intensity images for `labels`, each with ground truth `gt`.
fn dataset(dir: &Path, labels: &[usize], size: (usize, usize), gt: (f64, f64, f64, f64)) -> ExperimentConfig {
    let mut manifest = String::from("path,label,x0,y0,x1,y1\n");
    for (i, &l) in labels.iter().enumerate() {
        let v = (l as f32 + 0.5) / CLASSES as f32;
        let name = format!("img{i}.imgf");
        save_image(&Image::filled(size.0, size.1, 1, v).unwrap(), dir.join(&name)).unwrap();
        manifest.push_str(&format!("{name},{l},{},{},{},{}\n", gt.0, gt.1, gt.2, gt.3));
    }
    std::fs::write(dir.join("manifest.csv"), manifest).unwrap();
    ExperimentConfig { dataset: Some(dir.join("manifest.csv")), seed: 7, ..Default::default() }
}

fn cell(t: &nuisance_harness::report::Table, row: usize, col: usize) -> String {
    t.rows()[row][col].clone()
}

#[test]
fn whole_image_with_oracle_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = dataset(dir.path(), &[3], (20, 16), (0.0, 0.0, 10.0, 10.0));
    cfg.classify = Some(ClassifyConfig { methods: vec![MethodConfig::default()] });
    let out = run_classification(&cfg, &BrightnessOracle).unwrap();
    assert_eq!(out.report.rows()[0], vec!["whole_image", "0", "0", "1", "1", "1"]);
}

#[test]
fn uniform_posteriors_miss_labels_outside_the_first_five() {
    let dir = tempfile::tempdir().unwrap();
    let labels: Vec<usize> = (0..CLASSES).collect();
    let mut cfg = dataset(dir.path(), &labels, (12, 12), (0.0, 0.0, 5.0, 5.0));
    cfg.classify = Some(ClassifyConfig { methods: vec![MethodConfig::default()] });
    let out = run_classification(&cfg, &Constant(Posterior::uniform(CLASSES))).unwrap();
    // ties resolve to the lowest class indices, so top-5 is {0..4}
    let m = &out.methods[0];
    assert_eq!(m.top5_error, 1.0 - 5.0 / CLASSES as f64);
    assert_eq!(m.top1_error, 1.0 - 1.0 / CLASSES as f64);
}

#[test]
fn c10_d10_n80_e12_reports_180_and_32() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = dataset(dir.path(), &[1, 4], (64, 48), (4.0, 4.0, 30.0, 30.0));
    let method = MethodConfig {
        id: "C10_D10_E12".into(),
        schedule: ScheduleConfig { crops: 10, scales: vec![16.0], sizes: 5, ..Default::default() },
        proposals: Some(ProposalPool { count: 200, keep: 80 }),
        selection: SelectionConfig { keep: 12, ..Default::default() },
        ..Default::default()
    };
    cfg.classify = Some(ClassifyConfig { methods: vec![method] });
    let out = run_classification(&cfg, &BrightnessOracle).unwrap();
    assert_eq!(&out.report.rows()[0][3..5], &["180".to_string(), "32".to_string()]);
    for r in &out.methods[0].records {
        assert_eq!((r.eval, r.ave), (180, 32));
    }
}

#[test]
fn label_beyond_classifier_is_a_data_error_before_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = dataset(dir.path(), &[1, 2], (12, 12), (0.0, 0.0, 5.0, 5.0));
    cfg.classify = Some(ClassifyConfig { methods: vec![MethodConfig::default()] });
    let err = run_classification(&cfg, &Constant(Posterior::uniform(2))).unwrap_err();
    assert!(matches!(err, HarnessError::Data(_)), "{err}");
}

#[test]
fn ingested_proposals_are_used() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = dataset(dir.path(), &[2], (32, 32), (0.0, 0.0, 5.0, 5.0));
    let props = dir.path().join("props");
    std::fs::create_dir(&props).unwrap();
    std::fs::write(props.join("img0.csv"), "x0,y0,x1,y1,score\n0,0,10,10,0.9\n5,5,30,30,0.5\n2,2,8,8,0.1\n").unwrap();
    cfg.proposals = format!("file:{}", props.display());
    let method = MethodConfig {
        id: "E2".into(),
        schedule: ScheduleConfig { flips: false, ..Default::default() },
        proposals: Some(ProposalPool { count: 200, keep: 3 }),
        selection: SelectionConfig { keep: 2, ..Default::default() },
        ..Default::default()
    };
    cfg.classify = Some(ClassifyConfig { methods: vec![method] });
    let out = run_classification(&cfg, &BrightnessOracle).unwrap();
    let r = &out.methods[0].records[0];
    assert_eq!((r.eval, r.ave), (3, 2));
    assert_eq!(out.methods[0].top1_error, 0.0);
}

#[test]
fn rim_endpoints_match_gt_and_whole_image_conditions() {
    let dir = tempfile::tempdir().unwrap();
    // ground truth and the rest of the image differ in intensity
    let mut manifest = String::from("path,label,x0,y0,x1,y1\n");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..12 {
        let (inner, outer) = (rng.random_range(0..CLASSES), rng.random_range(0..CLASSES));
        let img = Image::from_fn(40, 30, 1, |x, y, _| {
            if (5..25).contains(&x) && (5..20).contains(&y) { (inner as f32 + 0.5) / 10.0 } else { (outer as f32 + 0.5) / 10.0 }
        })
        .unwrap();
        save_image(&img, dir.path().join(format!("r{i}.imgf"))).unwrap();
        manifest.push_str(&format!("r{i}.imgf,{inner},5,5,25,20\n"));
    }
    std::fs::write(dir.path().join("manifest.csv"), manifest).unwrap();
    let mut cfg = ExperimentConfig { dataset: Some(dir.path().join("manifest.csv")), ..Default::default() };
    cfg.rim_sweep = Some(RimSweepConfig { t_grid: vec![0.0, 1.0], table: true, ..Default::default() });
    let (curve, table) = run_rim_sweep(&cfg, &BrightnessOracle).unwrap();
    let table = table.unwrap();
    assert_eq!(cell(&curve, 0, 2), "0");
    assert_eq!(cell(&curve, 0, 2), cell(&table, 1, 1));
    assert_eq!(cell(&curve, 1, 2), cell(&table, 0, 1));
    // t = 1 is the whole-image classification
    cfg.classify = Some(ClassifyConfig { methods: vec![MethodConfig::default()] });
    let whole = run_classification(&cfg, &BrightnessOracle).unwrap();
    assert_eq!(cell(&curve, 1, 2), cell(&whole.report, 0, 1));
    assert_eq!(cell(&curve, 1, 3), cell(&whole.report, 0, 2));
}

#[test]
fn constant_classifier_gives_flat_rim_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = dataset(dir.path(), &[0, 1, 2, 3], (30, 30), (10.0, 10.0, 15.0, 15.0));
    cfg.rim_sweep = Some(RimSweepConfig::default());
    let (curve, _) = run_rim_sweep(&cfg, &Constant(Posterior::one_hot(CLASSES, 1))).unwrap();
    let errs: Vec<&String> = curve.rows().iter().map(|r| &r[2]).collect();
    assert!(errs.windows(2).all(|w| w[0] == w[1]) && errs[0] == "0.75");
    assert_eq!(curve.rows().len(), 42);
}

#[test]
fn selection_curves_without_repeats_have_blank_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = dataset(dir.path(), &[0, 5], (40, 40), (0.0, 0.0, 10.0, 10.0));
    cfg.selection_curves = Some(SelectionCurvesConfig { repeats: 1, e_grid: vec![2, 4], pool: ProposalPool { count: 20, keep: 10 }, ..Default::default() });
    let t = run_selection_curves(&cfg, &BrightnessOracle).unwrap();
    assert_eq!(t.rows().len(), 8);
    assert!(t.rows().iter().all(|r| r[4].is_empty() && r[5].is_empty() && r[2] == "1"));
    cfg.selection_curves.as_mut().unwrap().repeats = 4;
    let t = run_selection_curves(&cfg, &BrightnessOracle).unwrap();
    for r in t.rows() {
        assert_eq!(r[4].is_empty(), r[0] != Strategy::Random.as_str(), "{r:?}");
    }
    assert_eq!(t.to_csv(), run_selection_curves(&cfg, &BrightnessOracle).unwrap().to_csv());
}

#[test]
fn iou_analysis_buckets() {
    let dir = tempfile::tempdir().unwrap();
    // gt equal to the whole image: the whole-image sample has IoU error 0
    let mut cfg = dataset(dir.path(), &[0, 1], (32, 32), (0.0, 0.0, 32.0, 32.0));
    let whole = FixedMethod { id: "whole".into(), schedule: MethodConfig::default().schedule };
    cfg.iou_analysis = Some(IouAnalysisConfig { methods: vec![whole], ..Default::default() });
    let (buckets, images) = run_error_vs_iou(&cfg, &BrightnessOracle).unwrap();
    assert_eq!(buckets.rows().len(), 10);
    assert_eq!(buckets.rows()[0][3..], ["2".to_string(), "0".into(), "0".into()]);
    assert_eq!(buckets.rows()[5][3..], ["0".to_string(), String::new(), String::new()]);
    assert_eq!(cell(&images, 0, 2), "0");

    // tiny corner object against a centred schedule
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = dataset(dir.path(), &[0], (100, 100), (0.0, 0.0, 4.0, 4.0));
    let centred = FixedMethod { id: "d10".into(), schedule: ScheduleConfig { sizes: 5, ..Default::default() } };
    cfg.iou_analysis = Some(IouAnalysisConfig { methods: vec![centred], ..Default::default() });
    let (buckets, images) = run_error_vs_iou(&cfg, &BrightnessOracle).unwrap();
    // best sample covers the whole image: 1 - 16/10000
    assert_eq!(images.rows()[0][2], "0.9984");
    assert_eq!(buckets.rows()[9][3], "1");
}

fn write_patches(dir: &Path, image: &str, seed: u64, n: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = String::new();
    for r in 0..n {
        let patch = Image::from_fn(16, 16, 1, |_, _, _| rng.random::<f32>()).unwrap();
        let name = format!("{image}_{r}.imgf");
        save_image(&patch, dir.join(&name)).unwrap();
        rows.push_str(&format!("{image}_{r},{image},{},{},8,{name}\n", 20 + 40 * r, 30));
    }
    rows
}

#[test]
fn identical_pair_matches_perfectly_and_d1_equals_single() {
    let dir = tempfile::tempdir().unwrap();
    // view b reuses view a's patches
    let rows_a = write_patches(dir.path(), "a", 1, 6);
    let rows_b = rows_a.replace(",a,", ",b,").replace("a_", "b_");
    for r in 0..6 {
        std::fs::copy(dir.path().join(format!("a_{r}.imgf")), dir.path().join(format!("b_{r}.imgf"))).unwrap();
    }
    std::fs::write(dir.path().join("regions.csv"), format!("region_id,image_id,cx,cy,sigma,patch\n{rows_a}{rows_b}")).unwrap();
    write_homography(&dir.path().join("h.txt"), &IDENTITY).unwrap();
    std::fs::write(dir.path().join("pairs.csv"), "image_a,image_b,homography\na,b,h.txt\n").unwrap();
    let raw = vec![DescribeConfig::Raw { side: 8, normalize: true }];
    let m = |id: &str, l1, l2, sizes| MatchMethod { id: id.into(), describe: raw.clone(), lambda1: l1, lambda2: l2, sizes, pca: None };
    let cfg = ExperimentConfig {
        matching: Some(MatchConfig {
            regions: dir.path().join("regions.csv"),
            pairs: dir.path().join("pairs.csv"),
            methods: vec![m("single", 1.0, 1.0, 1), m("d1", 1.0, 1.0, 1), m("dsp", 0.7, 1.5, 6), MatchMethod { pca: Some(4), ..m("pca", 0.7, 1.5, 6) }],
            ..Default::default()
        }),
        ..Default::default()
    };
    let out = run_matching_benchmark(&cfg).unwrap();
    assert_eq!(out.report.rows()[0], vec!["single", "64", "1", "1"]);
    assert_eq!(out.report.rows()[0][1..], out.report.rows()[1][1..]);
    assert_eq!(out.report.rows()[2][2], "1");
    assert_eq!(out.report.rows()[3][1], "4");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn report_accounting_equals_schedule_accounting(crops in prop::sample::select(vec![0usize, 10]), sizes in 0usize..4, flips: bool, keep in 0usize..6, extra in 0usize..4) {
        prop_assume!(crops > 0 || sizes > 0 || keep > 0);
        let pool = keep + extra;
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = dataset(dir.path(), &[2], (40, 40), (0.0, 0.0, 5.0, 5.0));
        let method = MethodConfig {
            id: "m".into(),
            schedule: ScheduleConfig { crops, scales: vec![16.0], sizes, flips, ..Default::default() },
            proposals: (keep > 0).then_some(ProposalPool { count: 50, keep: pool }),
            selection: if keep > 0 { SelectionConfig { keep, ..Default::default() } } else { SelectionConfig::default() },
            ..Default::default()
        };
        cfg.classify = Some(ClassifyConfig { methods: vec![method] });
        let out = run_classification(&cfg, &BrightnessOracle).unwrap();
        let per_flip = if flips { 2 } else { 1 };
        let c = if crops == 0 { 0 } else { crops / 2 * per_flip };
        let want = schedule_accounting(c, 1, sizes * per_flip, keep, if keep > 0 { pool } else { 0 }, flips);
        prop_assert_eq!(out.methods[0].eval_count, want.0);
        prop_assert_eq!(out.methods[0].ave_count, want.1);
    }
}
