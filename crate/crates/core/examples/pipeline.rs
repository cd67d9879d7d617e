//! The whole generalist-specialist pipeline on a small gridworld, then the
//! same demos consolidated with behaviour cloning, then a comparison report.
//!
//! Run directories go to `$TMPDIR/gsl-pipeline-example`.

use gsl::config::{ExperimentConfig, PRESET_PPO_DAPG};
use gsl::envs::EnvConfig;
use gsl::lfd::LfdMethod;
use gsl::orchestrator::{consolidate_run, run_gsl, RunDir, RunOptions, RunReport};

fn config() -> gsl::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::preset(PRESET_PPO_DAPG)?;
    cfg.name = "gridworld-example".into();
    cfg.seed = 4;
    cfg.env = EnvConfig::gridworld(8);
    cfg.env.horizon = 64;
    cfg.env.seed_base = 1;
    cfg.ppo.hidden = vec![32];
    cfg.ppo.lr = 3e-3;
    cfg.ppo.samples_per_epoch = 1024;
    cfg.ppo.minibatch = 256;
    cfg.ppo.epochs = 4;
    cfg.ppo.threads = 4;
    cfg.gsl.total_steps = 200_000;
    cfg.gsl.num_specialists = 2;
    cfg.gsl.num_low_variations = 4;
    cfg.gsl.specialist_steps = 40_960;
    cfg.gsl.specialist_demo_steps = 2_000;
    cfg.gsl.generalist_demo_steps = Some(1_000);
    cfg.gsl.consolidation_steps = 20_480;
    cfg.gsl.demo_tau = None;
    cfg.gsl.trigger_epoch = Some(30);
    cfg.gsl.specialist_eval_every = 2;
    cfg.lfd.dapg.demo_batch = 128;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> gsl::Result<()> {
    let root = std::env::temp_dir().join("gsl-pipeline-example");
    let _ = std::fs::remove_dir_all(&root);
    let cfg = config()?;

    let gsl_dir = root.join("gsl");
    let plan = run_gsl(&cfg, &gsl_dir, RunOptions::default())?;
    println!("lowest-return levels after phase I: {:?}", plan.low_variations);
    for s in &plan.specialists {
        println!("  specialist {} trained on {:?}", s.id, s.variations);
    }
    let report = RunReport::load(&RunDir::open(&gsl_dir)?.report())?;
    let before = report.before.as_ref().expect("phase I evaluation");
    let after = report.after.as_ref().expect("final evaluation");
    println!(
        "DAPG: return {:.3} -> {:.3}, success {:.2} -> {:.2}, {} steps in total",
        before.mean_return(),
        after.mean_return(),
        before.success_rate(),
        after.success_rate(),
        report.total_steps
    );

    let bc = consolidate_run(&gsl_dir, Some(LfdMethod::Bc), &root.join("bc"), &[])?;
    println!(
        "BC on the same demos: final return {:.3}",
        bc.after.as_ref().expect("final evaluation").mean_return()
    );

    let out = gsl::report::report(&[gsl_dir, root.join("bc")], &root.join("report"))?;
    for g in &out.groups {
        println!(
            "{:<16} final return {:.3}  success {:.2}",
            g.group, g.final_mean, g.success_mean
        );
    }
    println!("report files in {}", root.join("report").display());
    Ok(())
}
