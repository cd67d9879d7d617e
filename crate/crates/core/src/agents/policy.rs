use rand::Rng;

use crate::autodiff::heads::{self, argmax, sample_categorical, sample_gaussian};
use crate::autodiff::{Action, ActionBatch, HeadKind, HeadVars, Matrix, MlpSpec, ParamVector, Tape};
use crate::error::{GslError, Result};
use crate::rng::JobRng;

/// Anything that maps a batch of observations to actions.
pub trait Actor: Sync {
    fn act_batch(&self, obs: &Matrix, rng: &mut JobRng, deterministic: bool) -> Result<Vec<Action>>;
}

/// A stochastic policy network: an MLP with a categorical or gaussian head.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl PolicyNet {
    pub fn new(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        if !spec.head.is_policy() {
            return Err(GslError::config("policy network needs a categorical or gaussian head"));
        }
        if spec.param_count() != params.len() {
            return Err(GslError::config("policy parameters do not match the network"));
        }
        Ok(PolicyNet { spec, params })
    }

    /// Actions plus their log-likelihoods under the current parameters.
    ///
    /// The log-likelihood is computed with the same tape arithmetic used by
    /// the training losses, so replaying the batch reproduces it bit for bit.
    pub fn sample_with_log_prob(
        &self,
        obs: &Matrix,
        rng: &mut JobRng,
        deterministic: bool,
    ) -> Result<(ActionBatch, Vec<f64>)> {
        let mut tape = Tape::new();
        let set = tape.register(&self.params);
        let x = tape.constant(obs.clone());
        let head = self.spec.forward_tape(&mut tape, set, &self.params, x)?;
        let actions = match head {
            HeadVars::Logits(l) => {
                let logits = tape.value(l);
                ActionBatch::Discrete(
                    (0..logits.rows)
                        .map(|i| {
                            if deterministic {
                                argmax(logits.row(i))
                            } else {
                                sample_categorical(logits.row(i), rng)
                            }
                        })
                        .collect(),
                )
            }
            HeadVars::Gaussian { mean, log_std } => {
                let mean = tape.value(mean).clone();
                let std: Vec<f64> = tape.value(log_std).data.iter().map(|l| l.exp()).collect();
                let mut out = Matrix::zeros(mean.rows, mean.cols);
                for i in 0..mean.rows {
                    let row = if deterministic {
                        mean.row(i).to_vec()
                    } else {
                        sample_gaussian(mean.row(i), &std, rng)
                    };
                    out.row_mut(i).copy_from_slice(&row);
                }
                ActionBatch::Continuous(out)
            }
            HeadVars::Scalar(_) => unreachable!("checked in constructor"),
        };
        let lp = heads::log_prob(&mut tape, head, &actions)?;
        Ok((actions, tape.value(lp).data.clone()))
    }
}

impl Actor for PolicyNet {
    fn act_batch(&self, obs: &Matrix, rng: &mut JobRng, deterministic: bool) -> Result<Vec<Action>> {
        let (a, _) = self.sample_with_log_prob(obs, rng, deterministic)?;
        Ok((0..a.len()).map(|i| a.get(i)).collect())
    }
}

/// Action for one observation: the head's mode when `deterministic`
/// (argmax with lowest-index tie-break, or the gaussian mean), otherwise a
/// sample.
pub fn act(policy: &PolicyNet, obs: &[f64], deterministic: bool, rng: &mut JobRng) -> Result<Action> {
    if obs.len() != policy.spec.input_dim {
        return Err(GslError::config(format!(
            "observation has {} features, policy expects {}",
            obs.len(),
            policy.spec.input_dim
        )));
    }
    let mut a = policy.act_batch(&Matrix::row_vector(obs.to_vec()), rng, deterministic)?;
    Ok(a.remove(0))
}

/// A scalar-output network (state values, Q-values, discriminator logits).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl ValueNet {
    pub fn new(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        if spec.head != HeadKind::Scalar {
            return Err(GslError::config("value network needs a scalar head"));
        }
        Ok(ValueNet { spec, params })
    }

    pub fn predict(&self, obs: &Matrix) -> Result<Vec<f64>> {
        Ok(self.spec.forward_batch(&self.params, obs.clone())?.0.data)
    }
}

/// Uniform random actions; used for warm-up steps and as a baseline.
#[derive(Debug, Clone, Copy)]
pub struct RandomActor {
    pub space: crate::envs::ActionSpace,
}

impl Actor for RandomActor {
    fn act_batch(&self, obs: &Matrix, rng: &mut JobRng, _deterministic: bool) -> Result<Vec<Action>> {
        Ok((0..obs.rows)
            .map(|_| match self.space {
                crate::envs::ActionSpace::Discrete(n) => Action::Discrete(rng.gen_range(0..n)),
                crate::envs::ActionSpace::Continuous(d) => {
                    Action::Continuous((0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                }
            })
            .collect())
    }
}

/// Wraps a per-observation closure as an [`Actor`].
pub struct FnActor<F>(pub F);

impl<F> Actor for FnActor<F>
where
    F: Fn(&[f64]) -> Action + Sync,
{
    fn act_batch(&self, obs: &Matrix, _rng: &mut JobRng, _deterministic: bool) -> Result<Vec<Action>> {
        Ok((0..obs.rows).map(|i| (self.0)(obs.row(i))).collect())
    }
}
