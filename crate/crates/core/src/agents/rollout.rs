//! On-policy rollout collection and generalized advantage estimation.

use rand::seq::SliceRandom;

use super::policy::{PolicyNet, ValueNet};
use crate::autodiff::{ActionBatch, Matrix};
use crate::envs::Env;
use crate::error::{GslError, Result};
use crate::rng::JobRng;

/// Summary of one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStat {
    pub variation: usize,
    pub total_return: f64,
    pub length: usize,
    pub success: bool,
}

/// A fixed set of environment instances that keep their episodes running
/// across rollout calls. Each reset draws a variation uniformly from
/// `variations`.
pub struct EnvPool {
    envs: Vec<Box<dyn Env>>,
    obs: Vec<Vec<f64>>,
    ep_return: Vec<f64>,
    ep_len: Vec<usize>,
    variations: Vec<usize>,
    rng: JobRng,
    /// Environment steps taken through this pool.
    pub steps: u64,
}

impl EnvPool {
    pub fn new(prototype: &dyn Env, size: usize, variations: Vec<usize>, mut rng: JobRng) -> Result<Self> {
        if size == 0 {
            return Err(GslError::config("environment pool needs at least one instance"));
        }
        if variations.is_empty() {
            return Err(GslError::config("environment pool needs at least one variation"));
        }
        if let Some(&bad) = variations.iter().find(|&&v| v >= prototype.num_variations()) {
            return Err(GslError::config(format!("variation {bad} does not exist")));
        }
        let mut envs = Vec::with_capacity(size);
        let mut obs = Vec::with_capacity(size);
        for _ in 0..size {
            let mut env = prototype.boxed_clone();
            let v = *variations.choose(&mut rng).expect("nonempty");
            obs.push(env.reset(&mut rng, Some(v))?);
            envs.push(env);
        }
        Ok(EnvPool {
            envs,
            obs,
            ep_return: vec![0.0; size],
            ep_len: vec![0; size],
            variations,
            rng,
            steps: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn variations(&self) -> &[usize] {
        &self.variations
    }

    pub fn obs_dim(&self) -> usize {
        self.envs[0].obs_dim()
    }

    pub fn env(&self, i: usize) -> &dyn Env {
        self.envs[i].as_ref()
    }

    pub fn current_obs(&self) -> Matrix {
        Matrix::from_rows(&self.obs)
    }

    /// Step instance `i`; on episode end the instance is reset and the
    /// finished episode is returned alongside the outcome.
    pub fn step_one(
        &mut self,
        i: usize,
        action: &crate::autodiff::Action,
    ) -> Result<(crate::envs::StepOutcome, Option<EpisodeStat>)> {
        let variation = self.envs[i].variation();
        let out = self.envs[i]
            .step(action)
            .map_err(|e| GslError::Runtime(format!("environment {i} failed: {e}")))?;
        self.steps += 1;
        self.ep_return[i] += out.reward;
        self.ep_len[i] += 1;
        let mut finished = None;
        if out.done {
            finished = Some(EpisodeStat {
                variation,
                total_return: self.ep_return[i],
                length: self.ep_len[i],
                success: out.success,
            });
            self.ep_return[i] = 0.0;
            self.ep_len[i] = 0;
            let v = *self.variations.choose(&mut self.rng).expect("nonempty");
            self.obs[i] = self.envs[i].reset(&mut self.rng, Some(v))?;
        } else {
            self.obs[i] = out.obs.clone();
        }
        Ok((out, finished))
    }
}

/// Samples from `num_envs` parallel streams, stored time-major: row
/// `t * num_envs + e` is step `t` of instance `e`.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub obs: Matrix,
    pub actions: ActionBatch,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub variations: Vec<usize>,
    /// Value of each instance's observation after the last step.
    pub bootstrap: Vec<f64>,
    pub num_envs: usize,
    pub advantages: Option<Vec<f64>>,
    pub returns: Option<Vec<f64>>,
    pub episodes: Vec<EpisodeStat>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Fill `advantages` and `returns` stream by stream.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) {
        let k = self.num_envs;
        let n = self.len();
        let mut adv = vec![0.0; n];
        let mut ret = vec![0.0; n];
        for e in 0..k {
            let idx: Vec<usize> = (e..n).step_by(k).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let (a, g) = compute_gae(&r, &v, &d, self.bootstrap[e], gamma, lambda);
            for (j, &i) in idx.iter().enumerate() {
                adv[i] = a[j];
                ret[i] = g[j];
            }
        }
        self.advantages = Some(adv);
        self.returns = Some(ret);
    }

    pub fn mean_episode_return(&self) -> Option<f64> {
        if self.episodes.is_empty() {
            None
        } else {
            Some(self.episodes.iter().map(|e| e.total_return).sum::<f64>() / self.episodes.len() as f64)
        }
    }
}

/// Advantages and returns-to-go for one stream:
/// `delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t`,
/// `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`, `R_t = A_t + V_t`,
/// with `V_T = bootstrap`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "gae inputs misaligned");
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Roll the pool forward until `n` samples are collected (`n / pool size`
/// steps per instance), sampling actions from `policy`.
pub fn collect_rollout(
    policy: &PolicyNet,
    value: &ValueNet,
    pool: &mut EnvPool,
    n: usize,
    rng: &mut JobRng,
) -> Result<RolloutBatch> {
    let k = pool.len();
    if n == 0 || n % k != 0 {
        return Err(GslError::contract(format!(
            "rollout size {n} must be a positive multiple of the pool size {k}"
        )));
    }
    let steps = n / k;
    let obs_dim = pool.obs_dim();
    let mut obs = Matrix::zeros(n, obs_dim);
    let mut actions = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    let mut dones = Vec::with_capacity(n);
    let mut log_probs = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut variations = Vec::with_capacity(n);
    let mut episodes = Vec::new();

    for t in 0..steps {
        let o = pool.current_obs();
        let (a, lp) = policy.sample_with_log_prob(&o, rng, false)?;
        let v = value.predict(&o)?;
        for e in 0..k {
            let row = t * k + e;
            obs.row_mut(row).copy_from_slice(o.row(e));
            variations.push(pool.env(e).variation());
            let action = a.get(e);
            let (out, finished) = pool.step_one(e, &action)?;
            if !out.reward.is_finite() {
                return Err(GslError::Runtime(format!(
                    "environment {e} produced a non-finite reward"
                )));
            }
            actions.push(action);
            rewards.push(out.reward);
            dones.push(out.done);
            episodes.extend(finished);
        }
        log_probs.extend(lp);
        values.extend(v);
    }
    let bootstrap = value.predict(&pool.current_obs())?;
    Ok(RolloutBatch {
        obs,
        actions: ActionBatch::from_actions(&actions)?,
        rewards,
        dones,
        log_probs,
        values,
        variations,
        bootstrap,
        num_envs: k,
        advantages: None,
        returns: None,
        episodes,
    })
}
