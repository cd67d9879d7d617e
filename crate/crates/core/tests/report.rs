mod common;

use common::tiny_config;
use gsl::error::GslError;
use gsl::orchestrator::{run_baseline, run_gsl, RunOptions};
use gsl::report::{report, RunData};

#[test]
fn groups_seeds_and_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for seed in [1, 2] {
        let d = tmp.path().join(format!("gsl{seed}"));
        run_gsl(&tiny_config(seed), &d, RunOptions::default()).unwrap();
        dirs.push(d);
        let b = tmp.path().join(format!("base{seed}"));
        run_baseline(&tiny_config(seed), &b).unwrap();
        dirs.push(b);
    }
    let out = tmp.path().join("report");
    let rep = report(&dirs, &out).unwrap();
    let names: Vec<&str> = rep.groups.iter().map(|g| g.group.as_str()).collect();
    assert_eq!(names, ["baseline-plain", "gsl-dapg"]);
    assert!(rep.groups.iter().all(|g| g.runs == 2));

    let series = &rep.series[&("gsl-dapg".to_string(), "phase1_generalist".to_string())];
    assert_eq!(series.len(), 4);
    assert!(series.iter().all(|p| p.n == 2));
    let runs: Vec<RunData> = dirs.iter().step_by(2).map(|d| RunData::load(d).unwrap()).collect();
    let (a, b) = (
        &runs[0].curves["phase1_generalist"].0,
        &runs[1].curves["phase1_generalist"].0,
    );
    let mean = (a[2] + b[2]) / 2.0;
    let std = ((a[2] - mean).powi(2) + (b[2] - mean).powi(2)).sqrt();
    assert!((series[2].mean - mean).abs() < 1e-12 && (series[2].std - std).abs() < 1e-12);

    for f in [
        "comparison.csv",
        "runs.csv",
        "series_gsl-dapg_phase2_dapg.csv",
        "series_baseline-plain_baseline.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let text = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(text.starts_with("group,runs,final_return_mean,final_return_std,final_success_mean"));
}

#[test]
fn mixed_environments_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = tmp.path().join("grid");
    run_baseline(&tiny_config(1), &grid).unwrap();
    let maze = tmp.path().join("maze");
    let mut cfg = gsl::config::ExperimentConfig::preset(gsl::config::PRESET_PPO_DAPG).unwrap();
    cfg.gsl.total_steps = 0;
    cfg.ppo.hidden = vec![8];
    run_baseline(&cfg, &maze).unwrap();
    let err = report(&[grid, maze], &tmp.path().join("out")).unwrap_err();
    assert!(matches!(err, GslError::Config(_)), "{err}");
}
