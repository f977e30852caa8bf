use std::path::Path;
use std::process::{Command, Output};

fn nuisance(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nuisance")).args(args).output().unwrap()
}

fn synth(dir: &Path) {
    let cfg = dir.join("synth.json");
    std::fs::write(&cfg, r#"{"seed": 2, "synth": {"scene": {"images": 8}, "matching": {"pairs": 2}}}"#).unwrap();
    let out = nuisance(&["synth", "--config", cfg.to_str().unwrap(), "--out-dir", dir.join("data").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_exits_1() {
    let out = nuisance(&["classify"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
    assert_eq!(nuisance(&["no-such-verb"]).status.code(), Some(1));
    assert_eq!(nuisance(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_config_field_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"datset": "x.csv"}"#).unwrap();
    assert_eq!(nuisance(&["classify", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn label_beyond_classes_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = dir.path().join("data");
    let manifest = std::fs::read_to_string(data.join("manifest.csv")).unwrap();
    let mut lines: Vec<String> = manifest.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[1].split(',').collect();
    fields[1] = "8";
    lines[1] = fields.join(",");
    std::fs::write(data.join("manifest.csv"), lines.join("\n") + "\n").unwrap();
    let cfg = data.join("configs/classify.json");
    let out = nuisance(&["classify", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("out/report.csv").exists());
}

#[test]
fn unreachable_external_classifier_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = dir.path().join("data/configs/classify.json");
    let out = nuisance(&["classify", "--config", cfg.to_str().unwrap(), "--classifier", "external:/nonexistent", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn proposals_from_files_are_ingested() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = dir.path().join("data");
    let props = dir.path().join("props");
    std::fs::create_dir(&props).unwrap();
    for i in 0..8 {
        std::fs::write(props.join(format!("img_{i:04}.csv")), "x0,y0,x1,y1,score\n0,0,48,48,0.9\n48,48,96,96,0.8\n# comment\n10,10,60,60,0.1\n").unwrap();
    }
    let cfg = dir.path().join("e.json");
    let body = format!(
        r#"{{"dataset": "{}", "classifier": "builtin:{}", "classify": {{"methods": [{{"id": "E2", "schedule": {{"flips": false}}, "proposals": {{"count": 100, "keep": 3}}, "selection": {{"keep": 2}}}}]}}}}"#,
        data.join("manifest.csv").display(),
        data.join("classifier/net.json").display()
    );
    std::fs::write(&cfg, body).unwrap();
    let out_dir = dir.path().join("out");
    let proposals = format!("file:{}", props.display());
    let out = nuisance(&["classify", "--config", cfg.to_str().unwrap(), "--proposals", &proposals, "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[0], row[3], row[4], row[5]), ("E2", "3", "2", "8"));
}
