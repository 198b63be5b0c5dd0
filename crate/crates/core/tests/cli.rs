use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fillinglab")).args(args).output().unwrap()
}

#[test]
fn truncate_prints_the_depth() {
    let out = lab(&["truncate", "--fixture", "FIX2", "--slopes", "16"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["0"]["t"], 1);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let out = lab(&["truncate", "--fixture", "FIX9"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("FIX9"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "fixture = FIX1\nradius = 2\nbogus = 1\n").unwrap();
    let out = lab(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn run_then_export_reproduces_the_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/minimal.cfg");
    let first = dir.path().join("first");
    let out = lab(&["run", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let second = dir.path().join("second");
    let report = first.join("report.json");
    let out = lab(&["export", "--report", report.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["report.json", "spiderweb.csv", "betti.csv", "gh.csv"] {
        assert_eq!(std::fs::read(first.join(name)).unwrap(), std::fs::read(second.join(name)).unwrap(), "{name}");
    }
}
