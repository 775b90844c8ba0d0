//! End-to-end pipeline tests: config -> assemble -> continuation -> report
//! -> run directory, including the rerun-reproducibility guarantee across
//! every exported file.

use fraclinf::config::RunConfig;
use fraclinf::io::write_run_dir;
use fraclinf::report::{build_report, Status};
use fraclinf::solver::solve_continuation;
use std::fs;
use std::path::Path;

fn medium_config() -> RunConfig {
    RunConfig::from_json(
        &serde_json::json!({
            "dim": 1,
            "s": 0.25,
            "half_width": 2.0,
            "spacing": 0.0625,
            "omega": {"kind": "interval", "bounds": [-0.5, 0.5]},
            "exterior_data": [
                {"profile": "smooth_bump", "params": {"center": [1.2], "radius": 0.45}}
            ],
            "p_schedule": [2.0, 4.0, 8.0, 16.0]
        })
        .to_string(),
    )
    .unwrap()
}

fn collect_files(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(
                    path.strip_prefix(root)
                        .unwrap()
                        .to_string_lossy()
                        .into_owned(),
                );
            }
        }
    }
    out.sort();
    out
}

#[test]
fn rerun_writes_byte_identical_directories() {
    let cfg = medium_config();
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for dir in &dirs {
        let prob = cfg.assemble().unwrap();
        let result = solve_continuation(&prob, &cfg.continuation_options(), None).unwrap();
        let report = build_report(&prob, &result, &cfg, None).unwrap();
        write_run_dir(dir, &cfg, &prob, &result, &report).unwrap();
    }
    let files = collect_files(&dirs[0]);
    assert_eq!(files, collect_files(&dirs[1]));
    assert!(files.len() >= 8, "{files:?}");
    for f in &files {
        let a = fs::read(dirs[0].join(f)).unwrap();
        let b = fs::read(dirs[1].join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between reruns");
    }
}

#[test]
fn medium_run_passes_all_hard_checks() {
    let cfg = medium_config();
    let prob = cfg.assemble().unwrap();
    let result = solve_continuation(&prob, &cfg.continuation_options(), None).unwrap();
    assert!(result.stages.iter().all(|st| st.converged));
    let report = build_report(&prob, &result, &cfg, None).unwrap();
    assert!(
        report.hard_pass,
        "{:#?}",
        report
            .checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .collect::<Vec<_>>()
    );
    // energies strictly below the sup norm and increasing
    let es: Vec<f64> = result.stages.iter().map(|st| st.e_p).collect();
    for w in es.windows(2) {
        assert!(w[0] <= w[1] * (1.0 + 1e-12));
    }
}

#[test]
fn degenerate_config_flows_through_whole_pipeline() {
    let cfg = RunConfig::from_json(
        &serde_json::json!({
            "dim": 1,
            "s": 0.25,
            "half_width": 2.0,
            "spacing": 0.125,
            "omega": {"kind": "interval", "bounds": [-0.5, 0.5]},
            "p_schedule": [2.0, 4.0, 8.0]
        })
        .to_string(),
    )
    .unwrap();
    let prob = cfg.assemble().unwrap();
    assert!(prob.degenerate);
    let result = solve_continuation(&prob, &cfg.continuation_options(), None).unwrap();
    for st in &result.stages {
        assert_eq!(st.e_p, 0.0);
        assert!(st.u.iter().all(|&v| v == 0.0));
        assert!(st.converged);
    }
    let report = build_report(&prob, &result, &cfg, None).unwrap();
    assert!(report.degenerate && report.hard_pass);
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    write_run_dir(&dir, &cfg, &prob, &result, &report).unwrap();
    assert!(dir.join("report.json").is_file());
    let rep_text = fs::read_to_string(dir.join("report.json")).unwrap();
    assert!(rep_text.contains("\"degenerate\": true"));
}

#[test]
fn two_dimensional_pipeline_small_grid() {
    let cfg = RunConfig::from_json(
        &serde_json::json!({
            "dim": 2,
            "s": 0.5,
            "half_width": 1.0,
            "spacing": 0.125,
            "omega": {"kind": "ball", "center": [0.0, 0.0], "radius": 0.4},
            "exterior_data": [
                {"profile": "smooth_bump", "params": {"center": [0.65, 0.0], "radius": 0.2}}
            ],
            "p_schedule": [2.0, 4.0, 8.0]
        })
        .to_string(),
    )
    .unwrap();
    let prob = cfg.assemble().unwrap();
    let result = solve_continuation(&prob, &cfg.continuation_options(), None).unwrap();
    assert!(result.stages.iter().all(|st| st.converged));
    let report = build_report(&prob, &result, &cfg, None).unwrap();
    assert!(
        report.hard_pass,
        "{:#?}",
        report
            .checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .collect::<Vec<_>>()
    );
}
