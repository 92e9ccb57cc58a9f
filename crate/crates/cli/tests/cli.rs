use std::process::Command;

fn nodal() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nodal"))
}

#[test]
fn estimate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = nodal()
        .args([
            "estimate",
            "--n",
            "5,10",
            "--trials",
            "4",
            "--oversample",
            "4",
            "--workers",
            "2",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["config"]["degrees"], serde_json::json!([5, 10]));
    for f in [
        "summary.json",
        "summary.csv",
        "run.json",
        "estimate_5.jsonl",
        "estimate_10.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let replayed = nodal()
        .arg("replay")
        .arg(dir.path().join("estimate_10.jsonl"))
        .output()
        .unwrap();
    assert!(replayed.status.success());
    let r: serde_json::Value = serde_json::from_slice(&replayed.stdout).unwrap();
    assert_eq!(r["matched"], 4);
}

#[test]
fn lattice_run() {
    let out = nodal()
        .args([
            "bs",
            "--lattice-side",
            "16",
            "--trials",
            "5",
            "--boundary",
            "free",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["model"], "external");
}

#[test]
fn validation_error_exits_2() {
    let out = nodal()
        .args(["stability", "--n", "20", "--alpha", "5", "--beta", "0.01"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = nodal()
        .args(["sharpness", "--rho", "0.9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    // a regular file where the output directory should go
    let out = nodal()
        .args(["bs", "--trials", "2", "--out"])
        .arg(file.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = nodal()
        .args(["replay"])
        .arg(dir.path().join("missing.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
