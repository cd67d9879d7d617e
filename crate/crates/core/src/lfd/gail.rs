//! Adversarial imitation on top of SAC. A discriminator `D(s, a)` learns to
//! output 1 on demo pairs and 0 on policy pairs; the critic then sees the
//! mixed reward `beta * r + (1 - beta) * log D`.

use serde::{Deserialize, Serialize};

use crate::agents::sac::{RewardHook, SacBatch, SacHooks};
use crate::agents::ReplayBuffer;
use crate::autodiff::{adam_step, AdamState, HeadKind, HeadVars, Matrix, MlpSpec, ParamSet, ParamVector, Tape, Var};
use crate::envs::Transition;
use crate::error::{GslError, Result};
use crate::rng::JobRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GailConfig {
    /// Weight of the environment reward in the mixed reward.
    pub beta: f64,
    /// Discriminator outputs are clamped to `[delta, 1 - delta]`.
    pub delta: f64,
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// `disc_updates` discriminator steps every `per_policy_updates` SAC updates.
    pub disc_updates: usize,
    pub per_policy_updates: usize,
    pub disc_batch: usize,
    /// Share of every SAC minibatch taken from the demos.
    pub demo_fraction: f64,
    /// Freeze the discriminator and leave demos out of the replay batches.
    pub detached: bool,
}

impl Default for GailConfig {
    fn default() -> Self {
        GailConfig {
            beta: 0.5,
            delta: 0.01,
            hidden: vec![256, 256],
            lr: 3e-4,
            disc_updates: 5,
            per_policy_updates: 100,
            disc_batch: 200,
            demo_fraction: 0.25,
            detached: false,
        }
    }
}

impl GailConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(GslError::config("gail.beta must be in [0, 1]"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(GslError::config("gail.delta must be in (0, 0.5)"));
        }
        if self.disc_updates == 0 || self.per_policy_updates == 0 || self.disc_batch == 0 {
            return Err(GslError::config("gail update cadence and batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.demo_fraction) {
            return Err(GslError::config("gail.demo_fraction must be in [0, 1)"));
        }
        if !(self.lr > 0.0) {
            return Err(GslError::config("gail.lr must be positive"));
        }
        Ok(())
    }
}

/// `beta * r + (1 - beta) * ln d`.
pub fn gail_mixed_reward(r: f64, d: f64, beta: f64) -> f64 {
    beta * r + (1.0 - beta) * d.ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub opt: AdamState,
    pub delta: f64,
}

impl Discriminator {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: Vec<usize>, delta: f64, rng: &mut JobRng) -> Self {
        let spec = MlpSpec::new(obs_dim + action_dim, hidden, HeadKind::Scalar);
        let params = spec.init(rng);
        let opt = AdamState::for_params(&params);
        Discriminator {
            spec,
            params,
            opt,
            delta,
        }
    }

    /// Clamped `D(s, a)` as a `batch x 1` node.
    pub fn output(&self, tape: &mut Tape, set: ParamSet, obs: &Matrix, actions: &Matrix) -> Result<Var> {
        let x = tape.constant(obs.clone());
        let a = tape.constant(actions.clone());
        let xa = tape.concat_cols(x, a);
        let HeadVars::Scalar(logit) = self.spec.forward_tape(tape, set, &self.params, xa)? else {
            unreachable!("scalar head")
        };
        let d = tape.sigmoid(logit);
        Ok(tape.clamp(d, self.delta, 1.0 - self.delta))
    }

    pub fn predict(&self, obs: &Matrix, actions: &Matrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let set = tape.register(&self.params);
        let d = self.output(&mut tape, set, obs, actions)?;
        Ok(tape.value(d).data.clone())
    }

    /// `L_D = mean_policy ln D + mean_demo ln(1 - D)`; returns the loss and
    /// the two mean outputs.
    pub fn loss(
        &self,
        tape: &mut Tape,
        set: ParamSet,
        policy: (&Matrix, &Matrix),
        demo: (&Matrix, &Matrix),
    ) -> Result<(Var, f64, f64)> {
        let dp = self.output(tape, set, policy.0, policy.1)?;
        let dd = self.output(tape, set, demo.0, demo.1)?;
        let mean = |m: &Matrix| m.data.iter().sum::<f64>() / m.len() as f64;
        let (mp, md) = (mean(tape.value(dp)), mean(tape.value(dd)));
        let lp = tape.log(dp);
        let lp = tape.mean(lp);
        let one_minus = tape.scale(dd, -1.0);
        let one_minus = tape.add_scalar(one_minus, 1.0);
        let ld = tape.log(one_minus);
        let ld = tape.mean(ld);
        Ok((tape.add(lp, ld), mp, md))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscStats {
    pub loss: f64,
    pub mean_d_policy: f64,
    pub mean_d_demo: f64,
}

/// One Adam step on `L_D`.
pub fn gail_discriminator_update(
    disc: &mut Discriminator,
    policy: (&Matrix, &Matrix),
    demo: (&Matrix, &Matrix),
    lr: f64,
) -> Result<DiscStats> {
    if policy.0.rows == 0 || demo.0.rows == 0 {
        return Err(GslError::contract("discriminator update needs policy and demo pairs"));
    }
    let mut tape = Tape::new();
    let set = tape.register(&disc.params);
    let (loss, mp, md) = disc.loss(&mut tape, set, policy, demo)?;
    let value = tape.scalar(loss);
    let g = tape.grad(loss, set)?;
    adam_step(&mut disc.params, &g, &mut disc.opt, lr)?;
    Ok(DiscStats {
        loss: value,
        mean_d_policy: mp,
        mean_d_demo: md,
    })
}

fn split(ts: &[&Transition]) -> Result<(Matrix, Matrix)> {
    let b = SacBatch::from_transitions(ts)?;
    Ok((b.obs, b.actions))
}

/// SAC extension implementing GAIL: mixed rewards, demo transitions in the
/// replay minibatches, and the discriminator update cadence.
pub struct GailHooks {
    pub cfg: GailConfig,
    pub disc: Discriminator,
    demos: Vec<Transition>,
    sampler: crate::demo_store::DemoSampler,
    acc: DiscStats,
    acc_n: usize,
}

impl GailHooks {
    pub fn new(
        cfg: GailConfig,
        disc: Discriminator,
        demos: &crate::demo_store::DemoInventory,
        demo_rng: JobRng,
    ) -> Result<Self> {
        cfg.validate()?;
        if demos.is_empty() && !cfg.detached {
            return Err(GslError::contract("GAIL needs demonstrations"));
        }
        Ok(GailHooks {
            sampler: crate::demo_store::DemoSampler::new(demos, demo_rng),
            demos: demos.transitions().into_iter().cloned().collect(),
            cfg,
            disc,
            acc: DiscStats::default(),
            acc_n: 0,
        })
    }
}

impl RewardHook for GailHooks {
    fn reward(&self, batch: &SacBatch) -> Result<Vec<f64>> {
        if self.cfg.beta == 1.0 {
            return Ok(batch.rewards.clone());
        }
        let d = self.disc.predict(&batch.obs, &batch.actions)?;
        Ok(batch
            .rewards
            .iter()
            .zip(d)
            .map(|(&r, d)| gail_mixed_reward(r, d, self.cfg.beta))
            .collect())
    }
}

impl SacHooks for GailHooks {
    fn reward_hook(&self) -> &dyn RewardHook {
        self
    }

    fn extra_transitions(&mut self, n: usize, _rng: &mut JobRng) -> Vec<Transition> {
        if self.cfg.detached || self.demos.is_empty() {
            return Vec::new();
        }
        let k = (self.cfg.demo_fraction * n as f64).round() as usize;
        self.sampler
            .next_indices(k)
            .into_iter()
            .map(|i| self.demos[i].clone())
            .collect()
    }

    fn after_update(&mut self, updates: u64, replay: &ReplayBuffer, rng: &mut JobRng) -> Result<()> {
        if self.cfg.detached || updates % self.cfg.per_policy_updates as u64 != 0 {
            return Ok(());
        }
        for _ in 0..self.cfg.disc_updates {
            let policy = replay.sample(self.cfg.disc_batch, rng);
            if policy.is_empty() {
                return Ok(());
            }
            let demo: Vec<&Transition> = self
                .sampler
                .next_indices(self.cfg.disc_batch)
                .into_iter()
                .map(|i| &self.demos[i])
                .collect();
            let (po, pa) = split(&policy)?;
            let (dob, da) = split(&demo)?;
            let s = gail_discriminator_update(&mut self.disc, (&po, &pa), (&dob, &da), self.cfg.lr)?;
            self.acc.loss += s.loss;
            self.acc.mean_d_policy += s.mean_d_policy;
            self.acc.mean_d_demo += s.mean_d_demo;
            self.acc_n += 1;
        }
        Ok(())
    }

    fn epoch_stats(&mut self) -> Option<(f64, f64, f64)> {
        if self.acc_n == 0 {
            return None;
        }
        let n = self.acc_n as f64;
        let out = (self.acc.loss / n, self.acc.mean_d_policy / n, self.acc.mean_d_demo / n);
        self.acc = DiscStats::default();
        self.acc_n = 0;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_reward_examples() {
        assert_eq!(gail_mixed_reward(3.0, 0.2, 1.0), 3.0);
        assert!((gail_mixed_reward(2.0, (-1.0f64).exp(), 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(gail_mixed_reward(-4.0, 1.0, 0.25), -1.0);
    }
}
