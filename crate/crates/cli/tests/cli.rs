use std::fs;
use std::path::Path;
use std::process::Command;

use fpl_cli::{run_pipeline, run_suite, ExperimentConfig, Overrides, Stage, Status};

const TORSION: &str = r#"{
  "name": "small_torsion",
  "domain": { "kind": "disc", "center": [0.0, 0.0], "radius": 1.0 },
  "anisotropy": { "kind": "ell_r", "r": 2.0, "p": 2.0 },
  "reaction": { "kind": "constant", "c": 1.0 },
  "h": 0.05,
  "delta": 0.3,
  "scan": { "pairs": 2000 }
}"#;

const REJECTED: &str = r#"{
  "name": "rejected",
  "domain": { "kind": "disc", "center": [0.0, 0.0], "radius": 1.0 },
  "anisotropy": { "kind": "ell_r", "r": 2.0, "p": 2.0 },
  "reaction": { "kind": "power", "c": 1.0, "q": 3.0 },
  "h": 0.1
}"#;

fn small_torsion() -> ExperimentConfig {
    ExperimentConfig::from_json(TORSION).unwrap()
}

fn write(dir: &Path, file: &str, body: &str) {
    fs::write(dir.join(file), body).unwrap();
}

#[test]
fn config_round_trips() {
    let cfg = small_torsion();
    let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
    assert_eq!(cfg, back);
}

#[test]
fn unknown_fields_are_rejected() {
    let bad = TORSION.replace("\"delta\"", "\"dleta\"");
    assert!(ExperimentConfig::from_json(&bad).is_err());
}

#[test]
fn invalid_values_are_rejected() {
    for (from, to) in [("\"h\": 0.05", "\"h\": -0.05"), ("\"p\": 2.0", "\"p\": 1.0"), ("small_torsion", "a/b")] {
        let bad = TORSION.replace(from, to);
        assert!(ExperimentConfig::from_json(&bad).is_err(), "{to}");
    }
}

#[test]
fn same_seed_gives_identical_reports() {
    let cfg = small_torsion();
    let a = run_pipeline(&cfg).unwrap().report.deterministic_json().unwrap();
    let b = run_pipeline(&cfg).unwrap().report.deterministic_json().unwrap();
    assert_eq!(a, b);
    assert!(!a.contains("timing"));
}

#[test]
fn small_torsion_passes_every_check() {
    let out = run_pipeline(&small_torsion()).unwrap();
    let failed: Vec<_> = out.report.checks.iter().filter(|(_, ok)| !**ok).collect();
    assert!(out.report.passed, "{failed:?}");
    assert!(out.report.max_u > 0.0);
}

#[test]
fn superlinear_reaction_fails_at_hypotheses() {
    let cfg = ExperimentConfig::from_json(REJECTED).unwrap();
    let err = run_pipeline(&cfg).err().expect("should be rejected");
    assert_eq!(err.stage, Stage::Hypotheses);
    assert!(err.to_string().starts_with("stage hypotheses failed"));
}

#[test]
fn empty_suite_writes_header_only() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let ov = Overrides { out: Some(out.path().to_path_buf()), ..Default::default() };
    let outcome = run_suite(src.path(), &ov).unwrap();
    assert!(outcome.rows.is_empty());
    assert!(outcome.all_passed());
    let text = fs::read_to_string(&outcome.summary).unwrap();
    assert_eq!(text.trim(), "experiment,quantity,value,max_violation,tolerance,status");
}

#[test]
fn suite_reports_each_experiment_in_file_order() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write(src.path(), "a.json", TORSION);
    write(src.path(), "b.json", REJECTED);
    write(src.path(), "c.json", "{ not json");
    write(src.path(), "notes.txt", "ignored");
    let ov = Overrides { out: Some(out.path().to_path_buf()), ..Default::default() };
    let outcome = run_suite(src.path(), &ov).unwrap();
    let status: Vec<_> = outcome.rows.iter().map(|r| r.status.clone()).collect();
    assert_eq!(status.len(), 3);
    assert_eq!(status[0], Status::Pass);
    assert!(matches!(&status[1], Status::Error { stage, .. } if stage == "hypotheses"));
    assert!(matches!(&status[2], Status::Error { stage, .. } if stage == "config"));
    assert!(!outcome.all_passed());
    assert!(out.path().join("small_torsion/report.json").is_file());
    let summary = fs::read_to_string(&outcome.summary).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().nth(1).unwrap().starts_with("small_torsion,max_u,"));
}

fn fpl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fpl"))
}

#[test]
fn solve_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.json", TORSION);
    let out = dir.path().join("run");
    let status = fpl()
        .arg("solve")
        .arg(dir.path().join("t.json"))
        .arg("--out")
        .arg(&out)
        .args(["--seed", "7", "--h", "0.06"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["report.json", "nodes.csv", "triangles.csv", "u.csv", "v.csv", "worst_triples.csv", "u.svg", "v.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["mesh"]["h"], 0.06);
}

#[test]
fn stage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "r.json", REJECTED);
    let out = fpl()
        .arg("solve")
        .arg(dir.path().join("r.json"))
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage hypotheses failed"));

    let missing = fpl().arg("solve").arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn check_anisotropy_passes_for_smooth_gauge() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.json", TORSION);
    let out = dir.path().join("probe");
    let status = fpl().arg("check-anisotropy").arg(dir.path().join("t.json")).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("anisotropy.json").is_file());
}

#[test]
fn barrier_study_writes_field() {
    let dir = tempfile::tempdir().unwrap();
    let body = TORSION.replace("\"h\": 0.05,", "\"h\": 0.05, \"barrier\": { \"h\": [0.1, 0.05] },");
    write(dir.path(), "b.json", &body);
    let out = dir.path().join("barrier");
    let status = fpl().arg("barrier").arg(dir.path().join("b.json")).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("barrier.json").is_file());
    assert!(out.join("barrier.csv").is_file());
}
