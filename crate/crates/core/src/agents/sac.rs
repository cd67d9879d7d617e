//! Soft actor-critic with twin critics, Polyak-averaged targets, a
//! tanh-squashed gaussian actor and automatic temperature tuning.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::policy::{Actor, PolicyNet, ValueNet};
use super::replay::ReplayBuffer;
use super::rollout::{EnvPool, EpisodeStat};
use crate::autodiff::{
    adam_step, heads, Action, AdamState, HeadKind, HeadVars, Matrix, MlpSpec, ParamSet, ParamVector, Tape, Var,
};
use crate::envs::Transition;
use crate::error::{GslError, Result};
use crate::rng::JobRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub lr: f64,
    pub gamma: f64,
    /// Polyak coefficient for the target critics.
    pub tau: f64,
    pub batch_size: usize,
    /// `updates_per_block` gradient updates after every `block` online samples.
    pub updates_per_block: usize,
    pub block: usize,
    pub buffer_capacity: usize,
    /// Uniform-random steps before the actor takes over.
    pub warmup: usize,
    pub threads: usize,
    pub hidden: Vec<usize>,
    /// Tune the temperature toward an entropy of `-action_dim`; otherwise
    /// keep it fixed at `alpha`.
    pub auto_alpha: bool,
    pub alpha: f64,
    pub min_std: f64,
    pub max_std: f64,
    /// Online samples per logged epoch.
    pub samples_per_epoch: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            lr: 3e-4,
            gamma: 0.95,
            tau: 0.005,
            batch_size: 200,
            updates_per_block: 4,
            block: 64,
            buffer_capacity: super::replay::DEFAULT_CAPACITY,
            warmup: 2_000,
            threads: 4,
            hidden: vec![256, 256],
            auto_alpha: true,
            alpha: 0.2,
            min_std: (-10.0f64).exp(),
            max_std: 2.0f64.exp(),
            samples_per_epoch: 10_000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GslError::config(format!("sac.{m}")));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must be in (0, 1]");
        }
        if self.batch_size == 0 || self.updates_per_block == 0 || self.block == 0 {
            return bad("update cadence and batch size must be positive");
        }
        if self.buffer_capacity == 0 || self.threads == 0 || self.samples_per_epoch == 0 {
            return bad("buffer_capacity, threads and samples_per_epoch must be positive");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden sizes must be positive");
        }
        if self.alpha < 0.0 {
            return bad("alpha must be non-negative");
        }
        if !(self.min_std > 0.0 && self.min_std <= self.max_std) {
            return bad("needs 0 < min_std <= max_std");
        }
        Ok(())
    }
}

/// A minibatch in matrix form. `terminal` excludes time-limit endings.
#[derive(Debug, Clone)]
pub struct SacBatch {
    pub obs: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_obs: Matrix,
    pub terminal: Vec<bool>,
}

impl SacBatch {
    pub fn from_transitions(ts: &[&Transition]) -> Result<Self> {
        if ts.is_empty() {
            return Err(GslError::contract("empty SAC batch"));
        }
        let actions: Result<Vec<Vec<f64>>> = ts
            .iter()
            .map(|t| match &t.action {
                Action::Continuous(a) => Ok(a.clone()),
                Action::Discrete(_) => Err(GslError::contract("SAC needs continuous actions")),
            })
            .collect();
        Ok(SacBatch {
            obs: Matrix::from_rows(&ts.iter().map(|t| t.obs.as_slice()).collect::<Vec<_>>()),
            actions: Matrix::from_rows(&actions?),
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_obs: Matrix::from_rows(&ts.iter().map(|t| t.next_obs.as_slice()).collect::<Vec<_>>()),
            terminal: ts.iter().map(|t| t.done && !t.truncated).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Supplies the reward used in the critic target (identity for plain SAC).
pub trait RewardHook {
    fn reward(&self, batch: &SacBatch) -> Result<Vec<f64>>;
}

pub struct IdentityReward;

impl RewardHook for IdentityReward {
    fn reward(&self, batch: &SacBatch) -> Result<Vec<f64>> {
        Ok(batch.rewards.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacAgent {
    pub actor: PolicyNet,
    pub q1: ValueNet,
    pub q2: ValueNet,
    pub q1_target: ValueNet,
    pub q2_target: ValueNet,
    pub log_alpha: f64,
    pub actor_opt: AdamState,
    pub q1_opt: AdamState,
    pub q2_opt: AdamState,
    pub alpha_opt: AdamState,
    pub target_entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SacStats {
    pub q_loss: f64,
    pub policy_loss: f64,
    pub alpha: f64,
    /// Monte-Carlo entropy estimate `-mean log pi` of the squashed actor.
    pub entropy: f64,
}

impl SacAgent {
    pub fn new(obs_dim: usize, action_dim: usize, cfg: &SacConfig, rng: &mut JobRng) -> Result<Self> {
        cfg.validate()?;
        let actor_spec = MlpSpec::new(
            obs_dim,
            cfg.hidden.clone(),
            HeadKind::Gaussian {
                dim: action_dim,
                min_std: cfg.min_std,
                max_std: cfg.max_std,
            },
        );
        let q_spec = MlpSpec::new(obs_dim + action_dim, cfg.hidden.clone(), HeadKind::Scalar);
        let ap = actor_spec.init(rng);
        let q1p = q_spec.init(rng);
        let q2p = q_spec.init(rng);
        let alpha0 = cfg.alpha.max(1e-12);
        Ok(SacAgent {
            actor_opt: AdamState::for_params(&ap),
            q1_opt: AdamState::for_params(&q1p),
            q2_opt: AdamState::for_params(&q2p),
            alpha_opt: AdamState::new(1),
            actor: PolicyNet::new(actor_spec, ap)?,
            q1: ValueNet::new(q_spec.clone(), q1p.clone())?,
            q2: ValueNet::new(q_spec.clone(), q2p.clone())?,
            q1_target: ValueNet::new(q_spec.clone(), q1p)?,
            q2_target: ValueNet::new(q_spec, q2p)?,
            log_alpha: alpha0.ln(),
            target_entropy: -(action_dim as f64),
        })
    }

    pub fn alpha(&self, cfg: &SacConfig) -> f64 {
        if cfg.auto_alpha {
            self.log_alpha.exp()
        } else {
            cfg.alpha
        }
    }

    pub fn action_dim(&self) -> usize {
        self.actor.spec.head.output_dim()
    }
}

/// Reparameterized squashed sample `a = tanh(mean + std * eps)` and its log
/// density including the tanh change of variables. Returns `(a, log_pi)`
/// with shapes `batch x dim` and `batch x 1`.
pub fn squashed_sample(
    tape: &mut Tape,
    set: ParamSet,
    actor: &PolicyNet,
    obs: Var,
    eps: &Matrix,
) -> Result<(Var, Var)> {
    let HeadVars::Gaussian { mean, log_std } = actor.spec.forward_tape(tape, set, &actor.params, obs)? else {
        return Err(GslError::config("SAC actor needs a gaussian head"));
    };
    let e = tape.constant(eps.clone());
    let std = tape.exp(log_std);
    let noise = tape.mul(e, std);
    let u = tape.add(mean, noise);
    let lp_u = heads::gaussian_log_prob(tape, u, mean, log_std);
    let a = tape.tanh(u);
    let a2 = tape.square(a);
    let one_minus = tape.scale(a2, -1.0);
    let one_minus = tape.add_scalar(one_minus, 1.0 + 1e-6);
    let log_jac = tape.log(one_minus);
    let log_jac = tape.sum_cols(log_jac);
    let lp = tape.sub(lp_u, log_jac);
    Ok((a, lp))
}

fn q_value(tape: &mut Tape, set: ParamSet, q: &ValueNet, obs: Var, act: Var) -> Result<Var> {
    let x = tape.concat_cols(obs, act);
    match q.spec.forward_tape(tape, set, &q.params, x)? {
        HeadVars::Scalar(v) => Ok(v),
        _ => Err(GslError::config("critic needs a scalar head")),
    }
}

pub fn standard_normal(rows: usize, cols: usize, rng: &mut JobRng) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect(),
    )
}

/// Soft value of `next_obs` under the target critics,
/// `min(Q1', Q2')(s', a') - alpha * log pi(a'|s')` with `a' ~ pi`.
pub fn target_values(agent: &SacAgent, next_obs: &Matrix, alpha: f64, rng: &mut JobRng) -> Result<Vec<f64>> {
    let eps = standard_normal(next_obs.rows, agent.action_dim(), rng);
    let mut tape = Tape::new();
    let aset = tape.register(&agent.actor.params);
    let s1 = tape.register(&agent.q1_target.params);
    let s2 = tape.register(&agent.q2_target.params);
    let x = tape.constant(next_obs.clone());
    let (a, lp) = squashed_sample(&mut tape, aset, &agent.actor, x, &eps)?;
    let q1 = q_value(&mut tape, s1, &agent.q1_target, x, a)?;
    let q2 = q_value(&mut tape, s2, &agent.q2_target, x, a)?;
    let (q1, q2, lp) = (tape.value(q1), tape.value(q2), tape.value(lp));
    Ok((0..next_obs.rows)
        .map(|i| q1.data[i].min(q2.data[i]) - alpha * lp.data[i])
        .collect())
}

/// `target <- (1 - tau) target + tau online`.
pub fn polyak(target: &mut ParamVector, online: &ParamVector, tau: f64) {
    for (t, &o) in target.values.iter_mut().zip(&online.values) {
        *t = (1.0 - tau) * *t + tau * o;
    }
}

/// `mean (Q1 - y)^2 + mean (Q2 - y)^2` over the batch.
pub fn critic_loss(
    tape: &mut Tape,
    sets: (ParamSet, ParamSet),
    agent: &SacAgent,
    obs: &Matrix,
    actions: &Matrix,
    y: &[f64],
) -> Result<Var> {
    let x = tape.constant(obs.clone());
    let a = tape.constant(actions.clone());
    let yv = tape.constant(Matrix::column(y.to_vec()));
    let q1 = q_value(tape, sets.0, &agent.q1, x, a)?;
    let q2 = q_value(tape, sets.1, &agent.q2, x, a)?;
    let d1 = tape.sub(q1, yv);
    let d2 = tape.sub(q2, yv);
    let l1 = tape.square(d1);
    let l1 = tape.mean(l1);
    let l2 = tape.square(d2);
    let l2 = tape.mean(l2);
    Ok(tape.add(l1, l2))
}

/// `mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a))` with `a` reparameterized
/// from the noise `eps`. Returns the loss and the `log pi` node.
pub fn actor_loss(
    tape: &mut Tape,
    actor_set: ParamSet,
    critic_sets: (ParamSet, ParamSet),
    agent: &SacAgent,
    obs: &Matrix,
    eps: &Matrix,
    alpha: f64,
) -> Result<(Var, Var)> {
    let x = tape.constant(obs.clone());
    let (act, lp) = squashed_sample(tape, actor_set, &agent.actor, x, eps)?;
    let q1 = q_value(tape, critic_sets.0, &agent.q1, x, act)?;
    let q2 = q_value(tape, critic_sets.1, &agent.q2, x, act)?;
    let q = tape.min(q1, q2);
    let alp = tape.scale(lp, alpha);
    let inner = tape.sub(alp, q);
    Ok((tape.mean(inner), lp))
}

/// One SAC gradient step on critics, actor and temperature, followed by
/// the Polyak target update. The critic regresses onto
/// `r~ + gamma * (1 - terminal) * V_target(s')` with `r~` from `hook`.
pub fn sac_update(
    agent: &mut SacAgent,
    batch: &SacBatch,
    cfg: &SacConfig,
    hook: &dyn RewardHook,
    rng: &mut JobRng,
) -> Result<SacStats> {
    if batch.is_empty() {
        log::warn!("sac: empty batch, update skipped");
        return Ok(SacStats::default());
    }
    let alpha = agent.alpha(cfg);
    let rewards = hook.reward(batch)?;
    if rewards.len() != batch.len() {
        return Err(GslError::contract("reward hook changed the batch size"));
    }
    let v_next = target_values(agent, &batch.next_obs, alpha, rng)?;
    let y: Vec<f64> = (0..batch.len())
        .map(|i| rewards[i] + if batch.terminal[i] { 0.0 } else { cfg.gamma * v_next[i] })
        .collect();

    // critics
    let mut tape = Tape::new();
    let s1 = tape.register(&agent.q1.params);
    let s2 = tape.register(&agent.q2.params);
    let q_loss = critic_loss(&mut tape, (s1, s2), agent, &batch.obs, &batch.actions, &y)?;
    let q_loss_value = tape.scalar(q_loss);
    if !q_loss_value.is_finite() {
        return Err(GslError::NonFinite("sac critic loss".into()));
    }
    let mut g = tape.backward(q_loss)?;
    adam_step(&mut agent.q1.params, &g.take(s1), &mut agent.q1_opt, cfg.lr)?;
    adam_step(&mut agent.q2.params, &g.take(s2), &mut agent.q2_opt, cfg.lr)?;

    // actor
    let eps = standard_normal(batch.len(), agent.action_dim(), rng);
    let mut tape = Tape::new();
    let aset = tape.register(&agent.actor.params);
    let s1 = tape.register(&agent.q1.params);
    let s2 = tape.register(&agent.q2.params);
    let (pi_loss, lp) = actor_loss(&mut tape, aset, (s1, s2), agent, &batch.obs, &eps, alpha)?;
    let pi_loss_value = tape.scalar(pi_loss);
    if !pi_loss_value.is_finite() {
        return Err(GslError::NonFinite("sac actor loss".into()));
    }
    let g = tape.grad(pi_loss, aset)?;
    adam_step(&mut agent.actor.params, &g, &mut agent.actor_opt, cfg.lr)?;
    agent.actor.spec.project(&mut agent.actor.params);
    let mean_lp = tape.value(lp).data.iter().sum::<f64>() / batch.len() as f64;

    // temperature: minimize -log_alpha * (log pi + target_entropy)
    if cfg.auto_alpha {
        let mut la = ParamVector::new(vec![agent.log_alpha], vec![("log_alpha".into(), 1, 1)])?;
        let grad = -(mean_lp + agent.target_entropy);
        adam_step(&mut la, &[grad], &mut agent.alpha_opt, cfg.lr)?;
        agent.log_alpha = la.values[0];
    }

    polyak(&mut agent.q1_target.params, &agent.q1.params, cfg.tau);
    polyak(&mut agent.q2_target.params, &agent.q2.params, cfg.tau);
    Ok(SacStats {
        q_loss: q_loss_value,
        policy_loss: pi_loss_value,
        alpha,
        entropy: -mean_lp,
    })
}

/// Stochastic (or, when `deterministic`, `tanh(mean)`) squashed actions.
impl Actor for SacAgent {
    fn act_batch(&self, obs: &Matrix, rng: &mut JobRng, deterministic: bool) -> Result<Vec<Action>> {
        let (mean, std) = self.actor.spec.forward_batch(&self.actor.params, obs.clone())?;
        let std = std.expect("gaussian head");
        Ok((0..obs.rows)
            .map(|i| {
                let u = if deterministic {
                    mean.row(i).to_vec()
                } else {
                    heads::sample_gaussian(mean.row(i), &std.data, rng)
                };
                Action::Continuous(u.into_iter().map(f64::tanh).collect())
            })
            .collect())
    }
}

/// Extension points used by GAIL on top of the plain SAC loop.
pub trait SacHooks {
    fn reward_hook(&self) -> &dyn RewardHook;

    /// Transitions (demos) that take the place of online samples in a
    /// minibatch of size `n`.
    fn extra_transitions(&mut self, _n: usize, _rng: &mut JobRng) -> Vec<Transition> {
        Vec::new()
    }

    /// Called after every policy update with the running update count.
    fn after_update(&mut self, _updates: u64, _replay: &ReplayBuffer, _rng: &mut JobRng) -> Result<()> {
        Ok(())
    }

    /// Per-epoch diagnostics `(disc_loss, mean_D_policy, mean_D_demo)`.
    fn epoch_stats(&mut self) -> Option<(f64, f64, f64)> {
        None
    }
}

pub struct PlainSac;

impl SacHooks for PlainSac {
    fn reward_hook(&self) -> &dyn RewardHook {
        &IdentityReward
    }
}

/// Per-epoch aggregates of the SAC loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SacEpoch {
    pub epoch: usize,
    pub total_samples: u64,
    pub episodes: Vec<EpisodeStat>,
    pub stats: SacStats,
    pub disc: Option<(f64, f64, f64)>,
}

/// Run SAC for `budget` online environment steps. `on_epoch` sees each
/// completed epoch and returns `true` to stop early.
pub fn train_sac(
    agent: &mut SacAgent,
    pool: &mut EnvPool,
    replay: &mut ReplayBuffer,
    cfg: &SacConfig,
    budget: u64,
    hooks: &mut dyn SacHooks,
    rng: &mut JobRng,
    on_epoch: &mut dyn FnMut(&SacAgent, &SacEpoch) -> Result<bool>,
) -> Result<u64> {
    let k = pool.len() as u64;
    let start = pool.steps;
    let mut updates: u64 = 0;
    let mut since_block = 0usize;
    let mut epoch = 0usize;
    let mut ep_samples = 0usize;
    let mut episodes = Vec::new();
    let mut acc = SacStats::default();
    let mut acc_n = 0usize;
    let random = super::policy::RandomActor {
        space: crate::envs::ActionSpace::Continuous(agent.action_dim()),
    };

    while pool.steps - start + k <= budget {
        let obs = pool.current_obs();
        let warm = (pool.steps - start) < cfg.warmup as u64;
        let actions = if warm {
            random.act_batch(&obs, rng, false)?
        } else {
            agent.act_batch(&obs, rng, false)?
        };
        for (e, action) in actions.into_iter().enumerate() {
            let variation = pool.env(e).variation();
            let (out, finished) = pool.step_one(e, &action)?;
            replay.push(Transition {
                obs: obs.row(e).to_vec(),
                action,
                reward: out.reward,
                next_obs: out.obs,
                done: out.done,
                truncated: out.done && !out.success,
                variation,
            });
            episodes.extend(finished);
        }
        since_block += k as usize;
        ep_samples += k as usize;

        while since_block >= cfg.block {
            since_block -= cfg.block;
            if replay.len() < cfg.batch_size || warm {
                continue;
            }
            for _ in 0..cfg.updates_per_block {
                let extra = hooks.extra_transitions(cfg.batch_size, rng);
                let online_n = cfg.batch_size - extra.len().min(cfg.batch_size);
                let mut ts: Vec<&Transition> = replay.sample(online_n, rng);
                ts.extend(extra.iter());
                let batch = SacBatch::from_transitions(&ts)?;
                let s = sac_update(agent, &batch, cfg, hooks.reward_hook(), rng)?;
                updates += 1;
                hooks.after_update(updates, replay, rng)?;
                acc.q_loss += s.q_loss;
                acc.policy_loss += s.policy_loss;
                acc.alpha += s.alpha;
                acc.entropy += s.entropy;
                acc_n += 1;
            }
        }

        if ep_samples >= cfg.samples_per_epoch {
            epoch += 1;
            if acc_n > 0 {
                let n = acc_n as f64;
                acc.q_loss /= n;
                acc.policy_loss /= n;
                acc.alpha /= n;
                acc.entropy /= n;
            }
            let rec = SacEpoch {
                epoch,
                total_samples: pool.steps - start,
                episodes: std::mem::take(&mut episodes),
                stats: std::mem::take(&mut acc),
                disc: hooks.epoch_stats(),
            };
            acc_n = 0;
            ep_samples = 0;
            if on_epoch(agent, &rec)? {
                break;
            }
        }
    }
    Ok(pool.steps - start)
}
