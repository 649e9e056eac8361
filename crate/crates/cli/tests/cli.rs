use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
        .display()
        .to_string()
}

fn ccs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccs"))
        .args(args)
        .output()
        .expect("run ccs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn check_passes_on_the_water_tank() {
    let out = ccs(&["check", &corpus("watertank.ccs")]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["passed"], true);
    assert_eq!(report["systems"][0]["reactivity"], "0.05");
    assert!(report["systems"][0]["gates"]
        .as_array()
        .unwrap()
        .iter()
        .all(|g| g["violations"].as_array().unwrap().is_empty()));
}

#[test]
fn check_reports_shared_output() {
    let out = ccs(&["check", &corpus("bad_shared_output.ccs")]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["passed"], false);
    assert_eq!(report["error"]["line"], 28);
    assert_eq!(report["error"]["violations"][0]["variables"][0], "fin");
}

#[test]
fn check_lists_variable_sets() {
    let out = ccs(&["check", "--vars", &corpus("watertank.ccs")]);
    let report = json(&out);
    let ctrl = &report["components"][0];
    assert_eq!(ctrl["name"], "wlctrl");
    assert_eq!(ctrl["bv"], serde_json::json!(["fin", "tau_1", "wlm"]));
    assert_eq!(ctrl["mbv"], serde_json::json!(["tau_1", "wlm"]));
}

#[test]
fn cost_model_override_changes_the_gate() {
    let dir = tempfile::tempdir().unwrap();
    let cm = dir.path().join("cm.json");
    std::fs::write(&cm, r#"{"wlctrl1": "a", "wlctrl2": "b"}"#).unwrap();
    let out = ccs(&["check", &corpus("two_tanks_slow.ccs"), "--cost-model", cm.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["systems"][2]["reactivity"], "0.1");
}

#[test]
fn usage_and_parse_errors_exit_2() {
    assert_eq!(ccs(&[]).status.code(), Some(2));
    assert_eq!(ccs(&["check"]).status.code(), Some(2));
    assert_eq!(ccs(&["check", "/nonexistent.ccs"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ccs");
    std::fs::write(&bad, "plant p controllability { x' = 1 }\n").unwrap();
    let out = ccs(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1:25"));
    assert_eq!(
        ccs(&["simulate", &corpus("watertank.ccs"), "--strategy", "eager"]).status.code(),
        Some(2)
    );
}

#[test]
fn version_and_help() {
    assert_eq!(ccs(&["--version"]).status.code(), Some(0));
    let help = ccs(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("export-kyx"));
}

#[test]
fn two_tank_simulation_is_safe_and_reproducible() {
    let args = ["simulate", &corpus("two_tanks.ccs"), "--schedules", "100", "--seed", "7"];
    let first = ccs(&args);
    assert_eq!(first.status.code(), Some(0));
    let summary = json(&first);
    assert_eq!(summary["runs"], 100);
    assert_eq!(summary["violations"], 0);
    assert_eq!(summary["per_monitor"]["G_wl1||wl2"], 0);
    assert_eq!(ccs(&args).stdout, first.stdout);
    let sequential = ccs(&[&args[..], &["--sequential"]].concat());
    assert_eq!(sequential.stdout, first.stdout);
}

#[test]
fn broken_threshold_is_a_failed_simulation() {
    let out = ccs(&["simulate", &corpus("watertank_broken_threshold.ccs"), "--schedules", "10", "--horizon", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["per_monitor"]["G_wl"].as_u64().unwrap() > 0);
}

#[test]
fn simulation_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let init = dir.path().join("init.json");
    std::fs::write(&init, r#"{"wl": 5, "fin": 0}"#).unwrap();
    let out = ccs(&[
        "simulate",
        &corpus("watertank.ccs"),
        "--schedules",
        "1",
        "--horizon",
        "2",
        "--init",
        init.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(&csv).unwrap();
    let mut lines = trace.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..2], ["time", "event"]);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let wl = header.iter().position(|h| *h == "wl").unwrap();
    assert_eq!(first[1], "loop-boundary");
    assert_eq!(first[wl], "5");
}

#[test]
fn obligations_export_to_kyx() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obligations.json");
    let out = ccs(&["obligations", &corpus("watertank.ccs"), "--theorem", "auto", "-o", obs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&obs).unwrap()).unwrap();
    assert_eq!(written.as_array().unwrap().len(), 15);
    assert_eq!(written[0]["id"], "thm1.base");
    assert_eq!(written[0]["status"], "open");

    let kyx = dir.path().join("kyx");
    let out = ccs(&["export-kyx", obs.to_str().unwrap(), "-o", kyx.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&kyx).unwrap().count(), 15);
    let entry = std::fs::read_to_string(kyx.join("thm1.step.6.kyx")).unwrap();
    assert!(entry.starts_with("ArchiveEntry \"thm1.step.6\""));
    assert!(entry.contains("{wl' = (fin - fout), t' = 1 & "));
    assert!(entry.is_ascii());
}

#[test]
fn wrong_theorem_is_a_failure() {
    let out = ccs(&["obligations", &corpus("watertank.ccs"), "--theorem", "thm3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bounded_check_finds_the_tightened_guarantee() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("box.json");
    std::fs::write(&b, r#"{"wl": [3, 7], "wlm": [3, 7], "fin": [0, 1], "t": [0, 0.05], "tau_1": 0}"#).unwrap();
    let b = b.to_str().unwrap();
    let ok = ccs(&["obligations", &corpus("watertank.ccs"), "--check", "--box", b, "--grid", "9"]);
    assert_eq!(ok.status.code(), Some(0));
    let report = json(&ok);
    assert!(report["obligations"]
        .as_array()
        .unwrap()
        .iter()
        .all(|o| o["status"] == "holds"));

    let bad = ccs(&["obligations", &corpus("watertank_tight_guarantee.ccs"), "--check", "--box", b, "--grid", "9"]);
    assert_eq!(bad.status.code(), Some(1));
    let report = json(&bad);
    let cex = &report["counterexamples"][0];
    assert_eq!(cex["id"], "thm1.step.6");
    let wl = cex["verdict"]["witness"]["wl"].as_f64().unwrap();
    assert!(6.0 < wl && wl <= 7.0);
}

#[test]
fn composed_model_checks_again() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.ccs");
    let out = ccs(&["compose", &corpus("two_tanks.ccs"), "-o", flat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&flat).unwrap();
    assert!(text.contains("system tanks = ccs(wlctrl1 || wlctrl2, wl1_wl2) with jcmp"));
    let again = ccs(&["check", flat.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(json(&again)["systems"][0]["reactivity"], "0.07");
}

#[test]
fn text_format() {
    let out = ccs(&["--format", "text", "check", &corpus("watertank.ccs")]);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "system tank: 1 gate(s) passed, reactivity 0.05 <= controllability 0.2\n"
    );
}
