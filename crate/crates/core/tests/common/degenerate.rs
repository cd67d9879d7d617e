//! Degenerate settings of the demo-driven methods against the plain
//! backbone, compared through the bytes of their metrics files.

use std::path::Path;

use gsl::config::{Backbone, ExperimentConfig, PRESET_SAC_GAIL};
use gsl::demo_store::{record_and_filter, DemoFilter, DemoInventory, DemoSource};
use gsl::envs::{make_env, Env};
use gsl::lfd::LfdMethod;
use gsl::orchestrator::{consolidate_with, Learner};
use gsl::rng::rng_for;

use super::{tiny_config, ScriptedMaze};

fn run_pair(
    cfg_plain: &ExperimentConfig,
    cfg_method: &ExperimentConfig,
    method: LfdMethod,
    env: &dyn Env,
    demos: &DemoInventory,
    budget: u64,
    dir: &Path,
) -> (Vec<u8>, Vec<u8>, usize) {
    let init = Learner::new(cfg_plain, env, &mut rng_for(cfg_plain.seed, "generalist/init")).unwrap();
    let a = dir.join("plain.csv");
    let b = dir.join("method.csv");
    let out = consolidate_with(cfg_plain, env, init.clone(), demos, None, budget, 0, &a).unwrap();
    consolidate_with(cfg_method, env, init, demos, Some(method), budget, 0, &b).unwrap();
    (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), out.rows.len())
}

/// DAPG with weight `omega` against plain PPO. Returns whether the metrics
/// files are identical and the number of epochs compared.
pub fn dapg_against_plain(dir: &Path, omega: f64) -> (bool, usize) {
    let cfg = tiny_config(21);
    let env = make_env(&cfg.env).unwrap();
    let actor = gsl::agents::RandomActor {
        space: env.action_space(),
    };
    let demos = record_and_filter(
        &actor,
        env.as_ref(),
        &[0, 1, 2, 3],
        400,
        DemoFilter::ReturnAtLeast { tau: -1e9 },
        DemoSource::Generalist,
        "random",
        &mut rng_for(21, "demos"),
    )
    .unwrap()
    .inventory;
    let mut dapg = cfg.clone();
    dapg.lfd.dapg.omega = omega;
    let (a, b, n) = run_pair(&cfg, &dapg, LfdMethod::Dapg, env.as_ref(), &demos, 12 * 512, dir);
    (a == b, n)
}

/// GAIL with mixing weight `beta` against plain SAC.
pub fn gail_against_plain(dir: &Path, beta: f64, detached: bool) -> (bool, usize) {
    let mut cfg = ExperimentConfig::preset(PRESET_SAC_GAIL).unwrap();
    cfg.seed = 22;
    cfg.sac.hidden = vec![32, 32];
    cfg.sac.samples_per_epoch = 500;
    cfg.sac.warmup = 500;
    cfg.sac.threads = 2;
    cfg.lfd.gail.hidden = vec![16];
    cfg.lfd.gail.per_policy_updates = 10;
    assert_eq!(cfg.backbone, Backbone::Sac);
    let env = make_env(&cfg.env).unwrap();
    let demos = record_and_filter(
        &ScriptedMaze { noise: 0.1 },
        env.as_ref(),
        &[0, 1, 2, 3, 4],
        1000,
        DemoFilter::Success,
        DemoSource::Specialist(0),
        "scripted",
        &mut rng_for(22, "demos"),
    )
    .unwrap()
    .inventory;
    let mut gail = cfg.clone();
    gail.lfd.gail.beta = beta;
    gail.lfd.gail.detached = detached;
    let (a, b, n) = run_pair(&cfg, &gail, LfdMethod::Gail, env.as_ref(), &demos, 3000, dir);
    (a == b, n)
}
