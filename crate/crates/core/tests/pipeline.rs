mod common;

use common::{snapshot, tiny_config};
use gsl::error::GslError;
use gsl::lfd::LfdMethod;
use gsl::orchestrator::{
    consolidate_run, resume_gsl, run_baseline, run_gsl, GslPlan, Phase, RunDir, RunOptions, RunReport,
};

#[test]
fn full_run_fills_the_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(1);
    let plan = run_gsl(&cfg, tmp.path(), RunOptions::default()).unwrap();
    assert_eq!(plan.phase, Phase::Done);
    assert_eq!(plan.trigger_epoch, None);
    assert_eq!(plan.phase1_epochs, 4);
    assert_eq!(plan.specialists.len(), 2);
    assert!(plan.specialists.iter().all(|s| s.done && s.variations.len() == 1));
    assert!(plan.steps.total() <= cfg.gsl.total_steps);
    assert_eq!(plan.steps.specialists, vec![2048, 2048]);

    let dir = RunDir::open(tmp.path()).unwrap();
    for m in ["phase1_generalist", "specialist_0", "specialist_1", "phase2_dapg"] {
        assert!(dir.metrics(m).is_file(), "{m}");
    }
    for c in [
        "generalist_init",
        "generalist_phase1",
        "specialist_0_best",
        "specialist_1_best",
        "generalist_final",
    ] {
        assert!(dir.checkpoint(c).is_file(), "{c}");
    }
    assert!(dir.demos("specialist_0").is_file() && dir.demos("generalist").is_file());
    let report = RunReport::load(&dir.report()).unwrap();
    assert_eq!(report.kind, "gsl");
    assert_eq!(report.total_steps, plan.steps.total());
    assert!(report.after.is_some() && report.before.is_some());
    // gridworld levels have no goal regions to tabulate
    assert!(report.ignorance_before.is_none());

    let again = run_gsl(&cfg, tmp.path(), RunOptions::default());
    assert!(again.is_err(), "a second run must not overwrite the first");
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(7);
    cfg.parallelism = 1;
    run_gsl(&cfg, a.path(), RunOptions::default()).unwrap();
    cfg.parallelism = 2;
    run_gsl(&cfg, b.path(), RunOptions::default()).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let names = |s: &[(String, Vec<u8>)]| s.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
    assert_eq!(names(&sa), names(&sb));
    for ((name, x), (_, y)) in sa.iter().zip(&sb) {
        if name == "config.toml" {
            continue;
        }
        assert!(x == y, "{name} differs between parallelism 1 and 2");
    }
}

#[test]
fn resumed_run_matches_uninterrupted() {
    let whole = tempfile::tempdir().unwrap();
    let parts = tempfile::tempdir().unwrap();
    let cfg = tiny_config(3);
    run_gsl(&cfg, whole.path(), RunOptions::default()).unwrap();
    for stop in [Phase::Select, Phase::Specialists, Phase::Demos, Phase::GeneralistII] {
        let plan = if stop == Phase::Select {
            run_gsl(&cfg, parts.path(), RunOptions { stop_before: stop }).unwrap()
        } else {
            resume_gsl(parts.path(), RunOptions { stop_before: stop }).unwrap()
        };
        assert_eq!(plan.phase, stop);
    }
    let plan = resume_gsl(parts.path(), RunOptions::default()).unwrap();
    assert_eq!(plan.phase, Phase::Done);
    assert_eq!(snapshot(whole.path()), snapshot(parts.path()));
}

#[test]
fn resume_after_a_partial_specialist_phase() {
    let whole = tempfile::tempdir().unwrap();
    let parts = tempfile::tempdir().unwrap();
    let cfg = tiny_config(4);
    run_gsl(&cfg, whole.path(), RunOptions::default()).unwrap();
    run_gsl(
        &cfg,
        parts.path(),
        RunOptions {
            stop_before: Phase::Demos,
        },
    )
    .unwrap();
    // pretend the second specialist never finished
    let dir = RunDir::open(parts.path()).unwrap();
    let mut plan = GslPlan::load(&dir.plan()).unwrap();
    plan.phase = Phase::Specialists;
    plan.specialists[1].done = false;
    plan.steps.specialists[1] = 0;
    std::fs::remove_file(dir.checkpoint("specialist_1_best")).unwrap();
    std::fs::write(dir.metrics("specialist_1"), "garbage").unwrap();
    plan.save(&dir.plan()).unwrap();
    resume_gsl(parts.path(), RunOptions::default()).unwrap();
    assert_eq!(snapshot(whole.path()), snapshot(parts.path()));
}

#[test]
fn baseline_with_zero_steps() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(1);
    cfg.gsl.total_steps = 0;
    let rep = run_baseline(&cfg, tmp.path()).unwrap();
    assert_eq!(rep.total_steps, 0);
    assert_eq!(rep.phase1_epochs, 0);
    let dir = RunDir::open(tmp.path()).unwrap();
    assert!(!dir.checkpoint("generalist_final").exists());
    assert!(dir.checkpoint("generalist_init").is_file());
    assert!(rep.after.is_some());
}

#[test]
fn baseline_follows_phase_one_until_the_trigger() {
    let g = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = tiny_config(5);
    run_gsl(
        &cfg,
        g.path(),
        RunOptions {
            stop_before: Phase::Select,
        },
    )
    .unwrap();
    run_baseline(&cfg, b.path()).unwrap();
    let p1 = gsl::metrics::read_metrics(&RunDir::open(g.path()).unwrap().metrics("phase1_generalist")).unwrap();
    let base = gsl::metrics::read_metrics(&RunDir::open(b.path()).unwrap().metrics("baseline")).unwrap();
    assert_eq!(base.len(), 32);
    assert_eq!(&base[..p1.len()], &p1[..]);
}

#[test]
fn unreachable_demo_threshold_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(2);
    cfg.gsl.demo_tau = Some(1e9);
    let err = run_gsl(&cfg, tmp.path(), RunOptions::default()).unwrap_err();
    assert!(matches!(err, GslError::InsufficientDemos { .. }), "{err}");
    assert_eq!(gsl::cli::exit_code(&err), gsl::cli::EXIT_INSUFFICIENT_DEMOS);
    let plan = GslPlan::load(&RunDir::open(tmp.path()).unwrap().plan()).unwrap();
    assert_eq!(plan.phase, Phase::Demos);
}

#[test]
fn consolidation_methods_share_the_demos() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = tiny_config(6);
    run_gsl(
        &cfg,
        src.path(),
        RunOptions {
            stop_before: Phase::GeneralistII,
        },
    )
    .unwrap();
    let bc = consolidate_run(src.path(), Some(LfdMethod::Bc), &out.path().join("bc"), &[]).unwrap();
    assert_eq!(bc.steps.phase2, 0);
    assert_eq!(bc.kind, "consolidation");
    let dapg = consolidate_run(src.path(), Some(LfdMethod::Dapg), &out.path().join("dapg"), &[]).unwrap();
    assert_eq!(dapg.steps.phase2, 2048);
    assert_eq!(dapg.before, bc.before);
    let gail = consolidate_run(src.path(), Some(LfdMethod::Gail), &out.path().join("gail"), &[]);
    assert!(matches!(gail, Err(GslError::Config(_))));
}
