//! PPO's clipped loss plus a demonstration term `omega * A_hat * L1`, where
//! `L1 = -mean pi(a|s)` over demo pairs and `A_hat` is the largest
//! advantage of the epoch.

use serde::{Deserialize, Serialize};

use crate::agents::ppo::normalize_advantages;
use crate::agents::{ppo_update, PolicyNet, PolicyTerm, PpoAgent, PpoConfig, PpoStats, RolloutBatch};
use crate::autodiff::{heads, ActionBatch, HeadKind, Matrix, ParamSet, Tape, Var};
use crate::demo_store::DemoSampler;
use crate::error::{GslError, Result};
use crate::rng::JobRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DapgConfig {
    /// Demo-loss weight, kept constant.
    pub omega: f64,
    /// Entropy coefficient used while fine-tuning.
    pub ent_coef: f64,
    /// Lower bound on `A_hat`.
    pub adv_floor: f64,
    /// Per-pair cap on gaussian densities inside `L1`.
    pub density_cap: f64,
    /// Demo pairs per minibatch.
    pub demo_batch: usize,
}

impl Default for DapgConfig {
    fn default() -> Self {
        DapgConfig {
            omega: 0.5,
            ent_coef: 0.01,
            adv_floor: 1e-3,
            density_cap: 1e3,
            demo_batch: 500,
        }
    }
}

impl DapgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) {
            return Err(GslError::config("dapg.omega must be non-negative"));
        }
        if self.ent_coef < 0.0 {
            return Err(GslError::config("dapg.ent_coef must be non-negative"));
        }
        if !(self.adv_floor > 0.0) {
            return Err(GslError::config("dapg.adv_floor must be positive"));
        }
        if !(self.density_cap > 0.0) {
            return Err(GslError::config("dapg.density_cap must be positive"));
        }
        if self.demo_batch == 0 {
            return Err(GslError::config("dapg.demo_batch must be positive"));
        }
        Ok(())
    }
}

/// `omega * a_hat * (-mean pi(a|s))` on one demo batch, as a tape node.
/// Categorical heads use the probability; gaussian heads the density,
/// capped at `density_cap`.
#[allow(clippy::too_many_arguments)]
pub fn dapg_term(
    tape: &mut Tape,
    set: ParamSet,
    policy: &PolicyNet,
    obs: &Matrix,
    actions: &ActionBatch,
    omega: f64,
    a_hat: f64,
    density_cap: f64,
) -> Result<Var> {
    let x = tape.constant(obs.clone());
    let head = policy.spec.forward_tape(tape, set, &policy.params, x)?;
    let lp = heads::log_prob(tape, head, actions)?;
    let p = tape.exp(lp);
    let p = match policy.spec.head {
        HeadKind::Gaussian { .. } => tape.clamp(p, 0.0, density_cap),
        _ => p,
    };
    let m = tape.mean(p);
    Ok(tape.scale(m, -omega * a_hat))
}

/// [`PolicyTerm`] drawing a fresh demo batch for every minibatch.
pub struct DapgTerm<'a> {
    pub sampler: &'a mut DemoSampler,
    pub cfg: &'a DapgConfig,
    pub a_hat: f64,
}

impl PolicyTerm for DapgTerm<'_> {
    fn term(&mut self, tape: &mut Tape, set: ParamSet, policy: &PolicyNet) -> Result<Option<Var>> {
        let (obs, actions) = self.sampler.next_batch(self.cfg.demo_batch)?;
        let t = dapg_term(
            tape,
            set,
            policy,
            &obs,
            &actions,
            self.cfg.omega,
            self.a_hat,
            self.cfg.density_cap,
        )?;
        Ok(Some(t))
    }
}

/// `A_hat = max(adv_floor, max normalized advantage)`.
pub fn max_advantage(batch: &RolloutBatch, floor: f64) -> Result<f64> {
    let adv = batch
        .advantages
        .as_ref()
        .ok_or_else(|| GslError::contract("advantages must be computed before the DAPG update"))?;
    Ok(normalize_advantages(adv).into_iter().fold(floor, f64::max))
}

/// PPO update with the demonstration term added to every minibatch's
/// policy loss. Falls back to plain PPO when the store is empty.
pub fn dapg_ppo_update(
    agent: &mut PpoAgent,
    batch: &RolloutBatch,
    demos: &mut DemoSampler,
    ppo: &PpoConfig,
    cfg: &DapgConfig,
    rng: &mut JobRng,
) -> Result<PpoStats> {
    if demos.is_empty() {
        log::warn!("dapg: empty demo store, running plain PPO");
        return ppo_update(agent, batch, ppo, cfg.ent_coef, rng, None);
    }
    let a_hat = max_advantage(batch, cfg.adv_floor)?;
    let mut term = DapgTerm {
        sampler: demos,
        cfg,
        a_hat,
    };
    ppo_update(agent, batch, ppo, cfg.ent_coef, rng, Some(&mut term))
}
