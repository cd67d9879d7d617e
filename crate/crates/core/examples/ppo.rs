//! PPO with GAE on a handful of procedurally generated gridworld levels,
//! driving the rollout and update functions directly.

use gsl::agents::{collect_rollout, ppo_update, EnvPool, PpoAgent, PpoConfig};
use gsl::autodiff::{HeadKind, MlpSpec};
use gsl::envs::{evaluate_per_variation, ActionSpace, Env, GridWorld};
use gsl::rng::rng_for;

fn main() -> gsl::Result<()> {
    let seed = 3;
    let env = GridWorld::new(100, 4, 6, 0.15, 40);
    let cfg = PpoConfig {
        lr: 3e-3,
        hidden: vec![32],
        epochs: 4,
        minibatch: 256,
        samples_per_epoch: 1024,
        threads: 4,
        ..Default::default()
    };
    let ActionSpace::Discrete(n) = env.action_space() else {
        unreachable!()
    };
    let policy = MlpSpec::new(env.obs_dim(), cfg.hidden.clone(), HeadKind::Categorical { actions: n });
    let value = MlpSpec::new(env.obs_dim(), cfg.hidden.clone(), HeadKind::Scalar);
    let mut agent = PpoAgent::new(policy, value, &mut rng_for(seed, "init"))?;
    let mut pool = EnvPool::new(&env, cfg.threads, (0..4).collect(), rng_for(seed, "pool"))?;
    let mut rng = rng_for(seed, "ppo");

    for epoch in 0..40 {
        let mut batch = collect_rollout(&agent.policy, &agent.value, &mut pool, cfg.samples_per_epoch, &mut rng)?;
        batch.compute_advantages(cfg.gamma, cfg.gae_lambda);
        let stats = ppo_update(&mut agent, &batch, &cfg, cfg.ent_coef, &mut rng, None)?;
        if epoch % 5 == 4 {
            println!(
                "epoch {:>2}  return {:>6.2}  value loss {:.3}  entropy {:.3}",
                epoch + 1,
                batch.mean_episode_return().unwrap_or(f64::NAN),
                stats.value_loss,
                stats.entropy
            );
        }
    }
    let rep = evaluate_per_variation(&agent.policy, &env, 20, true, &mut rng_for(seed, "eval"))?;
    println!(
        "greedy returns per level {:.2?}, success {:.2}",
        rep.mean_returns,
        rep.success_rate()
    );
    Ok(())
}
