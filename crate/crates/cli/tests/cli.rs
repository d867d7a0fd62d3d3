use std::path::Path;
use std::process::Command as Process;

use mmrabi::config::{read_config, usage};
use mmrabi::manifest::{sha256_hex, MANIFEST_NAME};
use mmrabi::{parse_args, resolve, run, Command, RunManifest, Scenario};
use serde_json::json;

fn spec(args: &[&str]) -> mmrabi::ScenarioSpec {
    match parse_args(args).unwrap() {
        Command::Run(spec) => spec,
        other => panic!("expected a run, got {other:?}"),
    }
}

#[test]
fn empty_overlap_config_uses_published_defaults() {
    let s = spec(&["overlap"]);
    assert_eq!(s.settings.usize("mode_count"), 100);
    assert_eq!(s.settings.f64("g_min"), 0.1);
    assert_eq!(s.settings.f64("g_max"), 1.0);
    assert!(s.overrides.is_empty());
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"g": 0.3, "x_points": 101}"#).unwrap();
    let cfg = format!("--config={}", path.display());
    let s = spec(&["field-map", &cfg, "--g=0.6"]);
    assert_eq!(s.settings.f64("g"), 0.6);
    assert_eq!(s.settings.usize("x_points"), 101);
    let keys: Vec<_> = s.overrides.iter().map(|o| o.key.as_str()).collect();
    assert!(keys.contains(&"g") && keys.contains(&"x_points"));
    // desk-scale defaults are listed too
    assert!(keys.contains(&"mode_count"));
}

#[test]
fn rejects_bad_input() {
    for args in [
        vec!["overlap", "--mode-count=0"],
        vec!["overlap", "--unknown=1"],
        vec!["overlap", "--g-min=abc"],
        vec!["spectrum", "--levels=-3"],
        vec!["dynamics", "--engine=magic"],
        vec!["causality", "--fit-window=0.9,0.2"],
        vec!["no-such-scenario"],
        vec![],
    ] {
        let err = parse_args(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{args:?}: {err}");
    }
    let bad = json!({"mode_count": "many"});
    let err = resolve(Scenario::Overlap, bad.as_object(), &[], "out".into()).unwrap_err();
    assert!(err.to_string().contains("config.mode_count"), "{err}");
}

#[test]
fn config_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, "[1, 2]").unwrap();
    assert_eq!(read_config(&path).unwrap_err().exit_code(), 2);
    assert_eq!(read_config(&dir.path().join("missing.json")).unwrap_err().exit_code(), 5);
}

#[test]
fn every_scenario_has_help() {
    for s in Scenario::ALL {
        assert_eq!(s.id().parse::<Scenario>().unwrap(), s);
        assert!(usage(Some(s)).contains("keys:"));
        assert!(usage(None).contains(s.id()));
    }
}

fn check_manifest(dir: &Path) -> RunManifest {
    let m = RunManifest::load(dir).unwrap();
    assert_eq!(RunManifest::from_json(&m.to_json()).unwrap(), m);
    let mut listed: Vec<_> = m.outputs.iter().map(|o| o.path.clone()).collect();
    listed.sort();
    let mut present: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != MANIFEST_NAME)
        .collect();
    present.sort();
    assert_eq!(listed, present);
    for o in &m.outputs {
        let bytes = std::fs::read(dir.join(&o.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), o.sha256);
        assert_eq!(bytes.len() as u64, o.bytes);
    }
    m
}

#[test]
fn manifest_lists_every_output_with_its_digest() {
    let dir = tempfile::tempdir().unwrap();
    let out = format!("--out={}", dir.path().display());
    let m = run(&spec(&["chain-check", "--mode-count=12", &out])).unwrap();
    assert_eq!(m.status, "ok");
    assert!(m.checks.iter().all(|c| c.passed));
    check_manifest(dir.path());
}

#[test]
fn rerun_gives_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = format!("--out={}", d.path().display());
        run(&spec(&["overlap", "--g-points=3", "--t-points=51", &out])).unwrap();
    }
    let ma = check_manifest(a.path());
    let mb = check_manifest(b.path());
    assert_eq!(ma.outputs, mb.outputs);
}

#[test]
fn binary_reports_categories_through_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mmrabi");
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| Process::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--help"]), Some(0));
    assert_eq!(status(&["overlap", "--mode-count=0"]), Some(2));
    // 2 * 8^7 basis states exceed the exact-diagonalization budget
    let out = format!("--out={}", dir.path().join("n").display());
    assert_eq!(status(&["n-sweep", "--modes=7", "--g-points=1", "--svg=false", &out]), Some(3));
    let m = RunManifest::load(&dir.path().join("n")).unwrap();
    assert_eq!(m.status, "failed");
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = format!("--out={}", blocker.join("sub").display());
    assert_eq!(status(&["chain-check", &out]), Some(5));
    let out = format!("--out={}", dir.path().join("c").display());
    assert_eq!(status(&["critical-coupling", "--m-max=20", &out]), Some(0));
}

#[test]
fn worker_count_comes_from_the_environment() {
    let bin = env!("CARGO_BIN_EXE_mmrabi");
    let dir = tempfile::tempdir().unwrap();
    let out = format!("--out={}", dir.path().display());
    let code = Process::new(bin).args(["chain-check", &out]).env("MMRABI_WORKERS", "zero").output().unwrap().status.code();
    assert_eq!(code, Some(2));
    let ok = Process::new(bin).args(["chain-check", &out]).env("MMRABI_WORKERS", "3").output().unwrap();
    assert!(ok.status.success());
    assert_eq!(RunManifest::load(dir.path()).unwrap().workers, 3);
}
