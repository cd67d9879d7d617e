mod common;

use common::rng;
use gsl::agents::{sac_update, IdentityReward, ReplayBuffer, SacAgent, SacBatch, SacConfig};
use gsl::autodiff::{Action, Matrix};
use gsl::envs::Transition;

fn transition(i: usize) -> Transition {
    Transition {
        obs: vec![i as f64],
        action: Action::Continuous(vec![0.0]),
        reward: 0.0,
        next_obs: vec![i as f64],
        done: false,
        truncated: false,
        variation: 0,
    }
}

#[test]
fn replay_sampling_is_uniform() {
    const SLOTS: usize = 50;
    // ring of capacity 50 after 120 pushes: every slot holds one live item
    let mut buf = ReplayBuffer::new(SLOTS);
    for i in 0..120 {
        buf.push(transition(i));
    }
    let draws = 100_000;
    let mut counts = [0usize; SLOTS];
    for i in buf.sample_indices(draws, &mut rng("replay-chi2")) {
        counts[i] += 1;
    }
    let expected = draws as f64 / SLOTS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 0.999 quantile of chi-square with 49 degrees of freedom
    assert!(chi2 < 85.35, "chi-square {chi2:.2}");
    let live: Vec<f64> = (0..SLOTS).map(|i| buf.get(i).obs[0]).collect();
    assert!(live.iter().all(|&x| x >= 70.0));
}

#[test]
fn critic_reaches_the_soft_bellman_fixed_point() {
    // one state that loops onto itself with reward 1 and gamma 1/2; with
    // alpha = 0 every action is worth 1 / (1 - gamma) = 2
    let cfg = SacConfig {
        lr: 3e-3,
        gamma: 0.5,
        tau: 0.05,
        hidden: vec![16],
        auto_alpha: false,
        alpha: 0.0,
        ..SacConfig::default()
    };
    let mut r = rng("sac-fixed-point");
    let mut agent = SacAgent::new(1, 1, &cfg, &mut r).unwrap();
    let ts: Vec<Transition> = (0..64)
        .map(|i| Transition {
            obs: vec![0.5],
            action: Action::Continuous(vec![-1.0 + 2.0 * i as f64 / 63.0]),
            reward: 1.0,
            next_obs: vec![0.5],
            done: false,
            truncated: false,
            variation: 0,
        })
        .collect();
    let refs: Vec<&Transition> = ts.iter().collect();
    let batch = SacBatch::from_transitions(&refs).unwrap();
    for _ in 0..3000 {
        sac_update(&mut agent, &batch, &cfg, &IdentityReward, &mut r).unwrap();
    }
    let x = Matrix::from_vec(
        64,
        2,
        (0..64).flat_map(|i| [0.5, -1.0 + 2.0 * i as f64 / 63.0]).collect(),
    );
    for q in [&agent.q1, &agent.q2, &agent.q1_target, &agent.q2_target] {
        let v = q.predict(&x).unwrap();
        let worst = v.iter().map(|q| (q - 2.0).abs()).fold(0.0, f64::max);
        assert!(worst < 0.05, "max |Q - 2| = {worst}");
    }
}

#[test]
fn terminal_steps_do_not_bootstrap() {
    let cfg = SacConfig {
        lr: 3e-3,
        gamma: 0.9,
        hidden: vec![16],
        auto_alpha: false,
        alpha: 0.0,
        ..SacConfig::default()
    };
    let mut r = rng("sac-terminal");
    let mut agent = SacAgent::new(1, 1, &cfg, &mut r).unwrap();
    let ts: Vec<Transition> = (0..32)
        .map(|i| Transition {
            obs: vec![0.0],
            action: Action::Continuous(vec![-1.0 + 2.0 * i as f64 / 31.0]),
            reward: -0.5,
            next_obs: vec![0.0],
            done: true,
            truncated: false,
            variation: 0,
        })
        .collect();
    let refs: Vec<&Transition> = ts.iter().collect();
    let batch = SacBatch::from_transitions(&refs).unwrap();
    for _ in 0..1500 {
        sac_update(&mut agent, &batch, &cfg, &IdentityReward, &mut r).unwrap();
    }
    let x = Matrix::from_vec(1, 2, vec![0.0, 0.3]);
    assert!((agent.q1.predict(&x).unwrap()[0] + 0.5).abs() < 0.05);
}

#[test]
fn ppo_improves_on_one_gridworld_level() {
    use gsl::orchestrator::{train, Consolidation, Learner, TrainSpec};
    let mut cfg = common::tiny_config(11);
    cfg.ppo.lr = 3e-3;
    cfg.ppo.epochs = 4;
    cfg.ppo.hidden = vec![32];
    let env = gsl::envs::make_env(&cfg.env).unwrap();
    let mut learner = Learner::new(&cfg, env.as_ref(), &mut rng("ppo-init")).unwrap();
    let mut returns = Vec::new();
    train(
        &mut learner,
        &cfg,
        TrainSpec {
            env: env.as_ref(),
            variations: vec![0],
            budget: 60 * 512,
            step_offset: 0,
            seed: 11,
            label: "ppo-check".into(),
        },
        Consolidation::Plain,
        &mut |_, row| {
            returns.push(row.mean_return);
            Ok(false)
        },
    )
    .unwrap();
    let head: f64 = returns[..5].iter().sum::<f64>() / 5.0;
    let tail: f64 = returns[returns.len() - 5..].iter().sum::<f64>() / 5.0;
    assert!(tail > head + 0.5, "first epochs {head:.3}, last epochs {tail:.3}");
}
