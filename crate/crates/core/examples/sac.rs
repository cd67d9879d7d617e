//! Soft actor-critic on the nearest brush-maze goal.

use gsl::agents::sac::PlainSac;
use gsl::agents::{train_sac, EnvPool, ReplayBuffer, SacAgent, SacConfig};
use gsl::envs::{evaluate_on, BrushMaze, Env};
use gsl::rng::rng_for;

fn main() -> gsl::Result<()> {
    let seed = 5;
    let env = BrushMaze::new();
    let cfg = SacConfig {
        hidden: vec![64, 64],
        samples_per_epoch: 2000,
        warmup: 1000,
        threads: 2,
        ..Default::default()
    };
    let mut agent = SacAgent::new(env.obs_dim(), 2, &cfg, &mut rng_for(seed, "init"))?;
    let mut pool = EnvPool::new(&env, cfg.threads, vec![0], rng_for(seed, "pool"))?;
    let mut replay = ReplayBuffer::new(cfg.buffer_capacity);
    let steps = train_sac(
        &mut agent,
        &mut pool,
        &mut replay,
        &cfg,
        30_000,
        &mut PlainSac,
        &mut rng_for(seed, "sac"),
        &mut |agent, e| {
            let ret = e.episodes.iter().map(|s| s.total_return).sum::<f64>() / e.episodes.len().max(1) as f64;
            println!(
                "{:>6} steps  return {ret:>7.2}  q loss {:.3}  alpha {:.3}",
                e.total_samples, e.stats.q_loss, e.stats.alpha
            );
            let rep = evaluate_on(agent, &env, &[0], 10, true, &mut rng_for(seed, "eval"))?;
            Ok(rep.success_rates[0] >= 1.0)
        },
    )?;
    println!("stopped after {steps} environment steps");
    Ok(())
}
