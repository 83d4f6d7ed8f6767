use std::fs;
use std::process::Command;

fn aclwright(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_aclwright")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

#[test]
fn batch_run_on_the_composite_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let (ok, out, err) = aclwright(&["run", "--scenario", "composite", "--backend", "mock", "--auto-approve", "--out", dir.to_str().unwrap()]);
    assert!(ok, "{out}{err}");
    assert!(out.contains("verified true"), "{out}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verified"], true);
    assert_eq!(report["applied"], "optimized");
}

#[test]
fn generated_scenario_file_feeds_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    let (ok, out, err) = aclwright(&["gen", "--scenario", "cloud", "--seed", "4", "--rules-per-acl", "20", "--out", gen.to_str().unwrap()]);
    assert!(ok, "{out}{err}");
    let file = gen.join("scenario.json");
    let first = fs::read(&file).unwrap();
    aclwright(&["gen", "--scenario", "cloud", "--seed", "4", "--rules-per-acl", "20", "--out", gen.to_str().unwrap()]);
    assert_eq!(fs::read(&file).unwrap(), first, "generation is deterministic");

    let run = tmp.path().join("run");
    let (ok, out, err) =
        aclwright(&["plan", "--scenario", file.to_str().unwrap(), "--strategy", "xumi", "--auto-approve", "--out", run.to_str().unwrap()]);
    assert!(ok, "{out}{err}");
    assert!(out.contains("bottleneck") && !out.contains("applied"), "{out}");
}

#[test]
fn detect_writes_full_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    let (ok, out, err) = aclwright(&["detect", "--scenario", "fig2", "--auto-approve", "--full-sets", "--out", dir.to_str().unwrap()]);
    assert!(ok, "{out}{err}");
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("conflicts.json")).unwrap()).unwrap();
    assert_eq!(rows[0]["interface"], "R_B@2");
    assert!(rows[0]["flow_sets"].is_array());
}

#[test]
fn verify_needs_an_existing_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (ok, _, err) = aclwright(&["verify", "--out", tmp.path().join("none").to_str().unwrap()]);
    assert!(!ok);
    assert!(err.contains("no run"), "{err}");
}

#[test]
fn review_gate_holds_without_auto_approve() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let (ok, out, _) = aclwright(&["run", "--scenario", "fig3", "--out", dir.to_str().unwrap()]);
    assert!(ok);
    assert!(out.contains("awaiting-review") && !out.contains("verified true"), "{out}");
    let (ok, out, _) = aclwright(&["verify", "--auto-approve", "--out", dir.to_str().unwrap()]);
    assert!(ok);
    assert!(out.contains("verified true"), "{out}");
}
