//! Proximal policy optimization with separate policy and value networks.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::policy::{PolicyNet, ValueNet};
use super::rollout::RolloutBatch;
use crate::autodiff::{adam_step, clip_grad_norm, heads, AdamState, HeadVars, Matrix, MlpSpec, ParamSet, Tape, Var};
use crate::error::{GslError, Result};
use crate::rng::JobRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub samples_per_epoch: usize,
    /// Number of parallel environment instances (rollout workers).
    pub threads: usize,
    pub hidden: Vec<usize>,
    pub min_std: f64,
    pub max_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            lr: 3e-4,
            gamma: 0.95,
            gae_lambda: 0.97,
            clip: 0.2,
            ent_coef: 0.01,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            epochs: 10,
            minibatch: 2000,
            samples_per_epoch: 10_000,
            threads: 5,
            hidden: vec![256, 256],
            min_std: 0.05,
            max_std: 1.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GslError::config(format!("ppo.{m}")));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.ent_coef < 0.0 || self.vf_coef < 0.0 {
            return bad("loss coefficients must be non-negative");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        if self.epochs == 0 || self.minibatch == 0 || self.threads == 0 {
            return bad("epochs, minibatch and threads must be positive");
        }
        if self.samples_per_epoch == 0 || self.samples_per_epoch % self.threads != 0 {
            return bad("samples_per_epoch must be a positive multiple of threads");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden sizes must be positive");
        }
        if !(self.min_std > 0.0 && self.min_std <= self.max_std) {
            return bad("needs 0 < min_std <= max_std");
        }
        Ok(())
    }
}

/// Policy, value function and their optimizer states.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoAgent {
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub policy_opt: AdamState,
    pub value_opt: AdamState,
}

impl PpoAgent {
    pub fn new(policy_spec: MlpSpec, value_spec: MlpSpec, rng: &mut JobRng) -> Result<Self> {
        let pp = policy_spec.init(rng);
        let vp = value_spec.init(rng);
        let policy_opt = AdamState::for_params(&pp);
        let value_opt = AdamState::for_params(&vp);
        Ok(PpoAgent {
            policy: PolicyNet::new(policy_spec, pp)?,
            value: ValueNet::new(value_spec, vp)?,
            policy_opt,
            value_opt,
        })
    }

    /// Fresh optimizer moments, keeping the parameters.
    pub fn reset_optimizers(&mut self) {
        self.policy_opt = AdamState::for_params(&self.policy.params);
        self.value_opt = AdamState::for_params(&self.value.params);
    }
}

/// Averages over the minibatch updates of one `ppo_update` call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean value of the extra policy term, zero when absent.
    pub extra_loss: f64,
    pub skipped: usize,
    pub updates: usize,
}

/// An additional scalar added to the policy loss of every minibatch.
pub trait PolicyTerm {
    fn term(&mut self, tape: &mut Tape, set: ParamSet, policy: &PolicyNet) -> Result<Option<Var>>;
}

/// Per-sample clipped surrogate `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Advantages shifted and scaled to mean 0 and standard deviation 1.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    adv.iter().map(|a| (a - mean) / std).collect()
}

/// Clipped-surrogate loss terms on a minibatch; returns
/// `(policy_loss, entropy)` nodes, the loss being `-mean(clipped objective)`.
pub fn ppo_policy_loss(
    tape: &mut Tape,
    set: ParamSet,
    policy: &PolicyNet,
    obs: &Matrix,
    actions: &crate::autodiff::ActionBatch,
    old_log_probs: &[f64],
    advantages: &[f64],
    clip: f64,
) -> Result<(Var, Var)> {
    let x = tape.constant(obs.clone());
    let head = policy.spec.forward_tape(tape, set, &policy.params, x)?;
    let lp = heads::log_prob(tape, head, actions)?;
    let old = tape.constant(Matrix::column(old_log_probs.to_vec()));
    let diff = tape.sub(lp, old);
    let ratio = tape.exp(diff);
    let adv = tape.constant(Matrix::column(advantages.to_vec()));
    let unclipped = tape.mul(ratio, adv);
    let clipped_ratio = tape.clamp(ratio, 1.0 - clip, 1.0 + clip);
    let clipped = tape.mul(clipped_ratio, adv);
    let obj = tape.min(unclipped, clipped);
    let mean_obj = tape.mean(obj);
    let loss = tape.neg(mean_obj);
    let ent = heads::entropy(tape, head)?;
    let ent = tape.mean(ent);
    Ok((loss, ent))
}

pub fn value_loss(tape: &mut Tape, set: ParamSet, value: &ValueNet, obs: &Matrix, targets: &[f64]) -> Result<Var> {
    let x = tape.constant(obs.clone());
    let HeadVars::Scalar(v) = value.spec.forward_tape(tape, set, &value.params, x)? else {
        unreachable!("value network has a scalar head")
    };
    let t = tape.constant(Matrix::column(targets.to_vec()));
    let d = tape.sub(v, t);
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}

/// Run `cfg.epochs` passes of shuffled minibatch updates over `batch`.
/// Advantages must already be computed; they are normalized here.
pub fn ppo_update(
    agent: &mut PpoAgent,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    ent_coef: f64,
    rng: &mut JobRng,
    mut extra: Option<&mut dyn PolicyTerm>,
) -> Result<PpoStats> {
    let (Some(adv), Some(returns)) = (&batch.advantages, &batch.returns) else {
        return Err(GslError::contract(
            "ppo_update needs advantages; call compute_advantages first",
        ));
    };
    let adv = normalize_advantages(adv);
    let n = batch.len();
    let mb = cfg.minibatch.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut stats = PpoStats::default();
    let mut applied = 0usize;

    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(mb) {
            let obs = batch.obs.select_rows(chunk);
            let actions = batch.actions.select(chunk);
            let old: Vec<f64> = chunk.iter().map(|&i| batch.log_probs[i]).collect();
            let a: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
            let r: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();

            let mut tape = Tape::new();
            let pset = tape.register(&agent.policy.params);
            let vset = tape.register(&agent.value.params);
            let (pl, ent) = ppo_policy_loss(&mut tape, pset, &agent.policy, &obs, &actions, &old, &a, cfg.clip)?;
            let ent_term = tape.scale(ent, -ent_coef);
            let mut policy_total = tape.add(pl, ent_term);
            let mut extra_value = 0.0;
            if let Some(term) = extra.as_deref_mut() {
                if let Some(t) = term.term(&mut tape, pset, &agent.policy)? {
                    extra_value = tape.scalar(t);
                    policy_total = tape.add(policy_total, t);
                }
            }
            let vl = value_loss(&mut tape, vset, &agent.value, &obs, &r)?;
            let vl_scaled = tape.scale(vl, cfg.vf_coef);
            let total = tape.add(policy_total, vl_scaled);
            if !tape.scalar(total).is_finite() {
                log::warn!("ppo: non-finite loss, minibatch skipped");
                stats.skipped += 1;
                continue;
            }
            let mut grads = tape.backward(total)?;
            let mut gp = grads.take(pset);
            let mut gv = grads.take(vset);
            clip_grad_norm(&mut gp, cfg.max_grad_norm);
            clip_grad_norm(&mut gv, cfg.max_grad_norm);
            let step = adam_step(&mut agent.policy.params, &gp, &mut agent.policy_opt, cfg.lr)
                .and_then(|_| adam_step(&mut agent.value.params, &gv, &mut agent.value_opt, cfg.lr));
            if let Err(e) = step {
                log::warn!("ppo: update rejected: {e}");
                stats.skipped += 1;
                continue;
            }
            agent.policy.spec.project(&mut agent.policy.params);
            stats.policy_loss += tape.scalar(pl);
            stats.value_loss += tape.scalar(vl);
            stats.entropy += tape.scalar(ent);
            stats.extra_loss += extra_value;
            applied += 1;
        }
    }
    if applied > 0 {
        let k = applied as f64;
        stats.policy_loss /= k;
        stats.value_loss /= k;
        stats.entropy /= k;
        stats.extra_loss /= k;
    }
    stats.updates = applied;
    Ok(stats)
}
