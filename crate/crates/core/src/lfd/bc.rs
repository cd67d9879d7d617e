//! Behavior cloning: maximum likelihood on demonstration pairs.

use crate::agents::PolicyNet;
use crate::autodiff::{adam_step, clip_grad_norm, heads, ActionBatch, AdamState, Matrix, ParamSet, Tape, Var};
use crate::demo_store::DemoSampler;
use crate::error::{GslError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BcStats {
    /// Mean negative log-likelihood over the steps taken.
    pub nll: f64,
    pub steps: usize,
}

/// `-mean log pi(a|s)` as a tape node.
pub fn bc_loss(tape: &mut Tape, set: ParamSet, policy: &PolicyNet, obs: &Matrix, actions: &ActionBatch) -> Result<Var> {
    let x = tape.constant(obs.clone());
    let head = policy.spec.forward_tape(tape, set, &policy.params, x)?;
    let lp = heads::log_prob(tape, head, actions)?;
    let m = tape.mean(lp);
    Ok(tape.neg(m))
}

/// `steps` Adam steps of behavior cloning, each on a fresh demo batch.
/// Never touches an environment.
pub fn bc_update(
    policy: &mut PolicyNet,
    opt: &mut AdamState,
    demos: &mut DemoSampler,
    batch_size: usize,
    steps: usize,
    lr: f64,
    max_grad_norm: f64,
) -> Result<BcStats> {
    if demos.is_empty() {
        return Err(GslError::contract("behavior cloning needs a nonempty demo store"));
    }
    let mut total = 0.0;
    for _ in 0..steps {
        let (obs, actions) = demos.next_batch(batch_size)?;
        let mut tape = Tape::new();
        let set = tape.register(&policy.params);
        let loss = bc_loss(&mut tape, set, policy, &obs, &actions)?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(GslError::NonFinite("behavior cloning loss".into()));
        }
        let mut g = tape.grad(loss, set)?;
        clip_grad_norm(&mut g, max_grad_norm);
        adam_step(&mut policy.params, &g, opt, lr)?;
        policy.spec.project(&mut policy.params);
        total += value;
    }
    Ok(BcStats {
        nll: if steps > 0 { total / steps as f64 } else { 0.0 },
        steps,
    })
}
