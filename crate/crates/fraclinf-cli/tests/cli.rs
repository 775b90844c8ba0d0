//! End-to-end tests through the compiled binary: artifact layout, exit
//! codes, flag overrides, and byte-level determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fraclinf"))
}

fn workspace_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_writes_full_run_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = bin()
        .args(["solve", "--config"])
        .arg(workspace_config("quick_1d.json"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    for f in [
        "config.json",
        "report.json",
        "trajectory.csv",
        "fields/u.csv",
        "fields/exterior_data.csv",
        "fields/operator_image.csv",
        "duals/f_p2.csv",
        "duals/f_p16.csv",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    assert!(stdout_of(&out).contains("run artifacts in"));
}

#[test]
fn verify_passes_on_quick_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    let out = bin()
        .args(["verify", "--config"])
        .arg(workspace_config("quick_1d.json"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("stage_convergence"));
    assert!(text.contains("uniqueness"));
    assert!(text.contains("hard checks: PASS"));
    let report = fs::read_to_string(dir.join("report.json")).unwrap();
    assert!(report.contains("\"schema\": \"fraclinf-report/1\""));
    assert!(report.contains("\"hard_pass\": true"));
    assert!(report.contains("\"uniqueness\""));
}

#[test]
fn invalid_config_lists_every_violation_at_once() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(
        &path,
        r#"{"dim":1,"s":0.6,"half_width":2.0,"spacing":0.0625,
            "omega":{"kind":"interval","bounds":[-0.5,0.5]},
            "exterior_data":[],"p_schedule":[1.0,1.0]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["solve", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("requires n > 2s: dim 1 with s = 0.6"), "{err}");
    assert!(err.contains("p schedule"), "{err}");
}

#[test]
fn missing_config_source_is_a_usage_error() {
    let out = bin().arg("solve").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--config"));

    let out = bin().args(["solve", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("bump_1d"));
}

#[test]
fn trivial_config_warns_and_still_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("t");
    let out = bin()
        .args(["solve", "--config"])
        .arg(workspace_config("trivial_1d.json"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("warning:"), "{text}");
    assert!(text.contains("u = 0"), "{text}");
    let report = fs::read_to_string(dir.join("report.json")).unwrap();
    assert!(report.contains("\"degenerate\": true"));
}

#[test]
fn artifacts_are_byte_identical_across_output_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = bin()
            .args(["solve", "--config"])
            .arg(workspace_config("quick_1d.json"))
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    }
    // everything except config.json is location-independent
    for f in [
        "report.json",
        "trajectory.csv",
        "fields/u.csv",
        "duals/f_p8.csv",
    ] {
        let fa = fs::read(a.join(f)).unwrap();
        let fb = fs::read(b.join(f)).unwrap();
        assert_eq!(fa, fb, "{f} differs between reruns");
    }
}

#[test]
fn sweep_writes_per_stage_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    let out = bin()
        .args(["sweep-p", "--config"])
        .arg(workspace_config("quick_1d.json"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("# config_hash="));
    assert!(csv.contains("p,e_p,mass,duality_gap_rel,saturation_excl"));
    assert_eq!(csv.lines().count(), 2 + 4, "one row per stage");
}

#[test]
fn uniqueness_writes_report_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("u");
    let out = bin()
        .args(["uniqueness", "--config"])
        .arg(workspace_config("quick_1d.json"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("uniqueness: PASS"));
    let json = fs::read_to_string(dir.join("uniqueness.json")).unwrap();
    assert!(json.contains("\"schema\": \"fraclinf-uniqueness/1\""));
    assert!(json.contains("\"pass\": true"));
}

#[test]
fn export_round_trips_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = bin()
        .args(["solve", "--config"])
        .arg(workspace_config("quick_1d.json"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let csv_dir = tmp.path().join("csv");
    let out = bin()
        .arg("export")
        .arg(dir.join("report.json"))
        .arg("--out")
        .arg(&csv_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let report = fs::read_to_string(dir.join("report.json")).unwrap();
    let hash_line = report
        .lines()
        .find(|l| l.contains("config_hash"))
        .unwrap()
        .split('"')
        .nth(3)
        .unwrap()
        .to_string();
    for f in ["checks.csv", "stages.csv"] {
        let csv = fs::read_to_string(csv_dir.join(f)).unwrap();
        assert!(
            csv.starts_with(&format!("# config_hash={hash_line}")),
            "{f} does not embed the config hash"
        );
    }
    let stages = fs::read_to_string(csv_dir.join("stages.csv")).unwrap();
    assert!(stages.contains("\n2.0,"), "p column missing");
    let checks = fs::read_to_string(csv_dir.join("checks.csv")).unwrap();
    assert!(checks.contains("stage_convergence,true,pass"));

    // malformed input is a usage error
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let out = bin().arg("export").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn operator_check_agrees_with_oracle() {
    let out = bin()
        .args(["operator-check", "--probes", "8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("ratio"));
    assert!(text.contains("kelvin identity"));
    assert!(text.contains("operator check: PASS"));
}

#[test]
fn shipped_sample_configs_stay_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        let cfg = fraclinf::config::RunConfig::from_json(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 5, "expected the full sample set, found {seen}");
}

#[test]
fn flags_override_config_and_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = bin()
        .args(["solve", "--config"])
        .arg(workspace_config("quick_1d.json"))
        .args(["--schedule", "2,4", "--seed", "99", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let cfg = fs::read_to_string(dir.join("config.json")).unwrap();
    assert!(cfg.contains("\"seed\": 99"), "{cfg}");
    assert!(cfg.contains("2.0,\n    4.0"), "{cfg}");
    assert!(!dir.join("duals/f_p8.csv").exists(), "override not applied");
}
