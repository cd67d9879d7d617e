//! One trainable policy behind either backbone, with checkpointing and a
//! shared epoch loop.

use std::path::Path;

use crate::agents::sac::PlainSac;
use crate::agents::{
    collect_rollout, ppo_update, train_sac, Actor, EnvPool, PpoAgent, ReplayBuffer, SacAgent, SacHooks,
};
use crate::autodiff::{AdamState, Checkpoint, HeadKind, MlpSpec, ParamVector};
use crate::config::{Backbone, ExperimentConfig};
use crate::demo_store::DemoSampler;
use crate::envs::{ActionSpace, Env};
use crate::error::{GslError, Result};
use crate::lfd::{dapg_ppo_update, DapgConfig};
use crate::metrics::MetricsRow;
use crate::rng::{rng_for, JobRng};

const CHECKPOINT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Ppo(PpoAgent),
    Sac(Box<SacAgent>),
}

/// Borrowed view handed to per-epoch callbacks.
#[derive(Clone, Copy)]
pub enum LearnerRef<'a> {
    Ppo(&'a PpoAgent),
    Sac(&'a SacAgent),
}

impl LearnerRef<'_> {
    pub fn actor(&self) -> &dyn Actor {
        match self {
            LearnerRef::Ppo(a) => &a.policy,
            LearnerRef::Sac(a) => *a,
        }
    }

    pub fn to_owned(&self) -> Learner {
        match self {
            LearnerRef::Ppo(a) => Learner::Ppo((*a).clone()),
            LearnerRef::Sac(a) => Learner::Sac(Box::new((*a).clone())),
        }
    }
}

fn policy_spec(cfg: &ExperimentConfig, env: &dyn Env) -> MlpSpec {
    let head = match env.action_space() {
        ActionSpace::Discrete(n) => HeadKind::Categorical { actions: n },
        ActionSpace::Continuous(d) => HeadKind::Gaussian {
            dim: d,
            min_std: cfg.ppo.min_std,
            max_std: cfg.ppo.max_std,
        },
    };
    MlpSpec::new(env.obs_dim(), cfg.ppo.hidden.clone(), head)
}

impl Learner {
    pub fn new(cfg: &ExperimentConfig, env: &dyn Env, rng: &mut JobRng) -> Result<Self> {
        match cfg.backbone {
            Backbone::Ppo => {
                let value = MlpSpec::new(env.obs_dim(), cfg.ppo.hidden.clone(), HeadKind::Scalar);
                Ok(Learner::Ppo(PpoAgent::new(policy_spec(cfg, env), value, rng)?))
            }
            Backbone::Sac => {
                let ActionSpace::Continuous(d) = env.action_space() else {
                    return Err(GslError::config("sac needs a continuous action space"));
                };
                Ok(Learner::Sac(Box::new(SacAgent::new(env.obs_dim(), d, &cfg.sac, rng)?)))
            }
        }
    }

    pub fn as_ref(&self) -> LearnerRef<'_> {
        match self {
            Learner::Ppo(a) => LearnerRef::Ppo(a),
            Learner::Sac(a) => LearnerRef::Sac(a),
        }
    }

    pub fn actor(&self) -> &dyn Actor {
        match self {
            Learner::Ppo(a) => &a.policy,
            Learner::Sac(a) => a.as_ref(),
        }
    }

    pub fn backbone(&self) -> Backbone {
        match self {
            Learner::Ppo(_) => Backbone::Ppo,
            Learner::Sac(_) => Backbone::Sac,
        }
    }

    pub fn to_checkpoint(&self, label: &str) -> Result<Checkpoint> {
        let ck = Checkpoint::new(CHECKPOINT_VERSION, label);
        Ok(match self {
            Learner::Ppo(a) => ck
                .with_section("policy", &a.policy.params, Some(&a.policy_opt))
                .with_section("value", &a.value.params, Some(&a.value_opt)),
            Learner::Sac(a) => {
                let alpha = ParamVector::new(vec![a.log_alpha], vec![("log_alpha".into(), 1, 1)])?;
                ck.with_section("actor", &a.actor.params, Some(&a.actor_opt))
                    .with_section("q1", &a.q1.params, Some(&a.q1_opt))
                    .with_section("q2", &a.q2.params, Some(&a.q2_opt))
                    .with_section("q1_target", &a.q1_target.params, None)
                    .with_section("q2_target", &a.q2_target.params, None)
                    .with_section("log_alpha", &alpha, Some(&a.alpha_opt))
            }
        })
    }

    /// Rebuild from a checkpoint written by [`Learner::to_checkpoint`] for
    /// the same configuration.
    pub fn from_checkpoint(cfg: &ExperimentConfig, env: &dyn Env, ck: &Checkpoint) -> Result<Self> {
        let mut learner = Learner::new(cfg, env, &mut rng_for(0, "checkpoint-shell"))?;
        fn load(target: &mut ParamVector, opt: Option<&mut AdamState>, ck: &Checkpoint, name: &str) -> Result<()> {
            let s = ck.section(name)?;
            if !s.params.same_layout(target) {
                return Err(GslError::Runtime(format!(
                    "checkpoint section '{name}' does not match the configured network"
                )));
            }
            *target = s.params.clone();
            if let Some(opt) = opt {
                *opt = s.optimizer.clone().unwrap_or_else(|| AdamState::for_params(target));
            }
            Ok(())
        }
        match &mut learner {
            Learner::Ppo(a) => {
                load(&mut a.policy.params, Some(&mut a.policy_opt), ck, "policy")?;
                load(&mut a.value.params, Some(&mut a.value_opt), ck, "value")?;
            }
            Learner::Sac(a) => {
                load(&mut a.actor.params, Some(&mut a.actor_opt), ck, "actor")?;
                load(&mut a.q1.params, Some(&mut a.q1_opt), ck, "q1")?;
                load(&mut a.q2.params, Some(&mut a.q2_opt), ck, "q2")?;
                load(&mut a.q1_target.params, None, ck, "q1_target")?;
                load(&mut a.q2_target.params, None, ck, "q2_target")?;
                let s = ck.section("log_alpha")?;
                a.log_alpha = s.params.values[0];
                a.alpha_opt = s.optimizer.clone().unwrap_or_else(|| AdamState::new(1));
            }
        }
        Ok(learner)
    }

    pub fn save(&self, path: &Path, label: &str) -> Result<()> {
        self.to_checkpoint(label)?.save(path)
    }

    pub fn load(cfg: &ExperimentConfig, env: &dyn Env, path: &Path) -> Result<Self> {
        Self::from_checkpoint(cfg, env, &Checkpoint::load(path)?)
    }
}

/// What is added on top of the plain backbone update.
pub enum Consolidation<'a> {
    Plain,
    Dapg {
        sampler: &'a mut DemoSampler,
        cfg: &'a DapgConfig,
    },
    Sac(&'a mut dyn SacHooks),
}

/// Where and how long one training run goes.
pub struct TrainSpec<'a> {
    pub env: &'a dyn Env,
    pub variations: Vec<usize>,
    /// Environment steps this run may take.
    pub budget: u64,
    /// Added to the phase-local step count in `total_samples`.
    pub step_offset: u64,
    pub seed: u64,
    /// Stream label; pool and update RNGs derive from it.
    pub label: String,
}

/// Train epoch by epoch until the budget cannot fit another epoch or
/// `on_epoch` returns `true`. Returns the environment steps taken.
pub fn train(
    learner: &mut Learner,
    cfg: &ExperimentConfig,
    spec: TrainSpec<'_>,
    mode: Consolidation<'_>,
    on_epoch: &mut dyn FnMut(LearnerRef<'_>, &MetricsRow) -> Result<bool>,
) -> Result<u64> {
    let pool_rng = rng_for(spec.seed, &format!("{}/pool", spec.label));
    let mut rng = rng_for(spec.seed, &format!("{}/update", spec.label));
    match learner {
        Learner::Ppo(agent) => {
            let ppo = &cfg.ppo;
            let mut pool = EnvPool::new(spec.env, ppo.threads, spec.variations, pool_rng)?;
            let (mut sampler, dapg) = match mode {
                Consolidation::Plain => (None, None),
                Consolidation::Dapg { sampler, cfg } => (Some(sampler), Some(cfg)),
                Consolidation::Sac(_) => return Err(GslError::config("sac hooks given to a ppo learner")),
            };
            let mut epoch = 0usize;
            while pool.steps + ppo.samples_per_epoch as u64 <= spec.budget {
                let mut batch =
                    collect_rollout(&agent.policy, &agent.value, &mut pool, ppo.samples_per_epoch, &mut rng)?;
                batch.compute_advantages(ppo.gamma, ppo.gae_lambda);
                let stats = match (&mut sampler, dapg) {
                    (Some(s), Some(d)) => dapg_ppo_update(agent, &batch, s, ppo, d, &mut rng)?,
                    _ => ppo_update(agent, &batch, ppo, ppo.ent_coef, &mut rng, None)?,
                };
                let row = MetricsRow {
                    epoch,
                    total_samples: spec.step_offset + pool.steps,
                    policy_loss: stats.policy_loss,
                    value_loss: stats.value_loss,
                    entropy: stats.entropy,
                    demo_loss: Some(stats.extra_loss),
                    ..MetricsRow::default()
                }
                .with_episodes(&batch.episodes);
                epoch += 1;
                if on_epoch(LearnerRef::Ppo(agent), &row)? {
                    break;
                }
            }
            Ok(pool.steps)
        }
        Learner::Sac(agent) => {
            let sac = &cfg.sac;
            let mut pool = EnvPool::new(spec.env, sac.threads, spec.variations, pool_rng)?;
            let mut replay = ReplayBuffer::new(sac.buffer_capacity);
            let mut plain = PlainSac;
            let hooks: &mut dyn SacHooks = match mode {
                Consolidation::Plain => &mut plain,
                Consolidation::Sac(h) => h,
                Consolidation::Dapg { .. } => return Err(GslError::config("dapg given to a sac learner")),
            };
            let offset = spec.step_offset;
            train_sac(
                agent,
                &mut pool,
                &mut replay,
                sac,
                spec.budget,
                hooks,
                &mut rng,
                &mut |a, rec| {
                    let row = MetricsRow {
                        epoch: rec.epoch - 1,
                        total_samples: offset + rec.total_samples,
                        policy_loss: rec.stats.policy_loss,
                        value_loss: rec.stats.q_loss,
                        entropy: rec.stats.entropy,
                        disc_loss: rec.disc.map(|d| d.0),
                        mean_d_policy: rec.disc.map(|d| d.1),
                        mean_d_demo: rec.disc.map(|d| d.2),
                        ..MetricsRow::default()
                    }
                    .with_episodes(&rec.episodes);
                    on_epoch(LearnerRef::Sac(a), &row)
                },
            )
        }
    }
}
