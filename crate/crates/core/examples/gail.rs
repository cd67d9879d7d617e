//! SAC with a GAIL discriminator on brush-maze goal 1. The discriminator's
//! log-ratio is mixed into the environment reward with weight `1 - beta`.

use gsl::agents::FnActor;
use gsl::autodiff::Action;
use gsl::config::{ExperimentConfig, PRESET_SAC_GAIL};
use gsl::demo_store::{record_and_filter, DemoFilter, DemoSource};
use gsl::envs::brushmaze::{goal_index_for_context, scripted_action};
use gsl::envs::{evaluate_on, make_env, BrushMazeState};
use gsl::lfd::{Discriminator, GailHooks};
use gsl::orchestrator::{train, Consolidation, Learner, TrainSpec};
use gsl::rng::rng_for;

fn main() -> gsl::Result<()> {
    let goal = 0;
    let mut cfg = ExperimentConfig::preset(PRESET_SAC_GAIL)?;
    cfg.seed = 9;
    cfg.sac.hidden = vec![64, 64];
    cfg.sac.samples_per_epoch = 2000;
    cfg.sac.warmup = 1000;
    cfg.sac.threads = 2;
    cfg.lfd.gail.beta = 0.5;
    let env = make_env(&cfg.env)?;

    let expert = FnActor(|o: &[f64]| {
        let g = goal_index_for_context(o[4]).expect("context in range");
        let state = BrushMazeState {
            pos: [o[0], o[1]],
            vel: [o[2], o[3]],
            context: o[4],
            goal: g,
            steps: 0,
        };
        Action::Continuous(scripted_action(&state, g))
    });
    let demos = record_and_filter(
        &expert,
        env.as_ref(),
        &[goal],
        1000,
        DemoFilter::Success,
        DemoSource::Specialist(0),
        "scripted",
        &mut rng_for(cfg.seed, "demos"),
    )?
    .inventory;
    println!("{} expert transitions", demos.num_steps());

    let mut learner = Learner::new(&cfg, env.as_ref(), &mut rng_for(cfg.seed, "init"))?;
    let disc = Discriminator::new(
        env.obs_dim(),
        2,
        cfg.lfd.gail.hidden.clone(),
        cfg.lfd.gail.delta,
        &mut rng_for(cfg.seed, "discriminator"),
    );
    let mut hooks = GailHooks::new(cfg.lfd.gail.clone(), disc, &demos, rng_for(cfg.seed, "demo-batches"))?;
    let mut epoch = 0;
    let steps = train(
        &mut learner,
        &cfg,
        TrainSpec {
            env: env.as_ref(),
            variations: vec![goal],
            budget: 200_000,
            step_offset: 0,
            seed: cfg.seed,
            label: "gail-example".into(),
        },
        Consolidation::Sac(&mut hooks),
        &mut |l, row| {
            let rep = evaluate_on(
                l.actor(),
                env.as_ref(),
                &[goal],
                cfg.eval.episodes,
                cfg.eval.deterministic,
                &mut rng_for(cfg.seed, "eval"),
            )?;
            epoch += 1;
            println!(
                "epoch {epoch:>2}  return {:>7.2}  D(policy) {:.3}  D(demo) {:.3}  training success {:.2}  eval success {:.2}",
                row.mean_return,
                row.mean_d_policy.unwrap_or(f64::NAN),
                row.mean_d_demo.unwrap_or(f64::NAN),
                row.success_rate,
                rep.success_rates[goal]
            );
            Ok(rep.success_rates[goal] >= 0.8)
        },
    )?;
    println!("stopped after {steps} environment steps");
    Ok(())
}
