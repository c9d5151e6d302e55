use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn uavtilt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavtilt"))
        .args(args)
        .current_dir(cwd)
        .env_remove("UAVTILT_OUTPUT_ROOT")
        .output()
        .expect("spawn uavtilt")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_TURBO: &str = r#"{"mode":"optimize","optimizer":"turbo",
  "scenario_preset":"ground_only","scenario":{"n_rings":1,"gue_per_cell":4},
  "turbo":{"n_regions":1,"n_init":8,"max_evals":6}}"#;

#[test]
fn baseline_preset_reports_near_total_uav_outage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("base");
    let o = uavtilt(
        &["--preset", "baseline-3gpp", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    let outage = s["report"]["uav_outage"].as_f64().unwrap();
    assert!(outage >= 0.99, "outage {outage}");
    assert_eq!(s["decision_name"], "baseline");
    assert!(s["provenance"]["config_hash"].is_string());
    for f in ["ues.csv", "sinr_cdf_UAV.csv", "rate_cdf_GUE.csv", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let ues = std::fs::read_to_string(out.join("ues.csv")).unwrap();
    assert!(ues.starts_with("# uavtilt config_hash="));
}

#[test]
fn missing_or_bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(uavtilt(&[], tmp.path()).status.code(), Some(2));
    assert_eq!(uavtilt(&["--config", "nope.json"], tmp.path()).status.code(), Some(2));
    let bad = write(tmp.path(), "bad.json", r#"{"mode":"optimize","surprise":1}"#);
    let o = uavtilt(&["--config", &bad], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("surprise"));
    let neg = write(tmp.path(), "neg.json", r#"{"mode":"evaluate","scenario":{"isd":-5}}"#);
    assert_eq!(uavtilt(&["--config", &neg], tmp.path()).status.code(), Some(2));
    let z = uavtilt(&["--preset", "baseline-3gpp", "--threads", "0"], tmp.path());
    assert_eq!(z.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_and_resume_from_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.json", SMALL_TURBO);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = uavtilt(
            &[
                "--config",
                &cfg,
                "--seed",
                "7",
                "--threads",
                "2",
                "--out",
                dir.to_str().unwrap(),
            ],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["convergence.csv", "regions.csv", "best_ues.csv", "trace.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let before = std::fs::read(a.join("convergence.csv")).unwrap();
    let o = uavtilt(
        &["--config", &cfg, "--seed", "7", "--out", a.to_str().unwrap()],
        tmp.path(),
    );
    assert!(o.status.success());
    let s = summary(&a);
    assert_eq!(s["replayed_evaluations"], s["n_evaluations"]);
    assert_eq!(std::fs::read(a.join("convergence.csv")).unwrap(), before);
}

#[test]
fn checkpoint_from_other_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.json", SMALL_TURBO);
    let out = tmp.path().join("run");
    assert!(uavtilt(
        &["--config", &cfg, "--seed", "1", "--out", out.to_str().unwrap()],
        tmp.path()
    )
    .status
    .success());
    let o = uavtilt(
        &["--config", &cfg, "--seed", "2", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config hash"));
}

#[test]
fn output_root_from_environment_is_created() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("deep/nested/root");
    let o = Command::new(env!("CARGO_BIN_EXE_uavtilt"))
        .args(["--preset", "baseline-3gpp"])
        .current_dir(tmp.path())
        .env("UAVTILT_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs: Vec<_> = std::fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(runs.len(), 1);
    assert!(runs[0].to_string_lossy().starts_with("evaluate-"));
}

#[test]
fn transfer_reads_a_saved_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.json", SMALL_TURBO);
    let src = tmp.path().join("src");
    assert!(uavtilt(&["--config", &cfg, "--out", src.to_str().unwrap()], tmp.path())
        .status
        .success());
    let tcfg = format!(
        r#"{{"mode":"transfer","scenario_preset":"ground_only","scenario":{{"n_rings":1,"gue_per_cell":4}},
        "turbo":{{"n_regions":1,"max_evals":3}},
        "transfer":{{"n_init":6,"mixes":[1.0,0.0],"source_trace":{:?}}}}}"#,
        src.join("trace.json")
    );
    let tcfg = write(tmp.path(), "tr.json", &tcfg);
    let out = tmp.path().join("tr");
    let o = uavtilt(&["--config", &tcfg, "--out", out.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cmp = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(cmp.lines().nth(1).unwrap() == "iteration,best_mix100,best_mix0");
    let arms = summary(&out)["arms"].clone();
    assert_eq!(arms[1]["n_copied"], 6);
    assert_eq!(arms[0]["n_copied"], 0);
}

#[test]
fn typo_in_optimizer_section_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.json", r#"{"mode":"optimize","turbo":{"max_eval":5}}"#);
    let o = uavtilt(&["--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_eval"));
}
