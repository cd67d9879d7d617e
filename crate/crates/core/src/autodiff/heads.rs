//! Log-likelihood, entropy, and sampling for policy heads.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::{HeadOutput, HeadVars};
use super::tape::{Tape, Var};
use crate::error::{GslError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// Actions for a batch, in row order.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionBatch {
    Discrete(Vec<usize>),
    Continuous(Matrix),
}

impl ActionBatch {
    pub fn len(&self) -> usize {
        match self {
            ActionBatch::Discrete(v) => v.len(),
            ActionBatch::Continuous(m) => m.rows,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn from_actions(actions: &[Action]) -> Result<Self> {
        match actions.first() {
            None | Some(Action::Discrete(_)) => actions
                .iter()
                .map(|a| match a {
                    Action::Discrete(i) => Ok(*i),
                    _ => Err(GslError::contract("mixed action kinds in batch")),
                })
                .collect::<Result<Vec<_>>>()
                .map(ActionBatch::Discrete),
            Some(Action::Continuous(first)) => {
                let dim = first.len();
                let mut data = Vec::with_capacity(actions.len() * dim);
                for a in actions {
                    match a {
                        Action::Continuous(v) if v.len() == dim => data.extend_from_slice(v),
                        _ => return Err(GslError::contract("mixed action kinds in batch")),
                    }
                }
                Ok(ActionBatch::Continuous(Matrix::from_vec(actions.len(), dim, data)))
            }
        }
    }

    pub fn select(&self, idx: &[usize]) -> ActionBatch {
        match self {
            ActionBatch::Discrete(v) => ActionBatch::Discrete(idx.iter().map(|&i| v[i]).collect()),
            ActionBatch::Continuous(m) => ActionBatch::Continuous(m.select_rows(idx)),
        }
    }

    pub fn get(&self, i: usize) -> Action {
        match self {
            ActionBatch::Discrete(v) => Action::Discrete(v[i]),
            ActionBatch::Continuous(m) => Action::Continuous(m.row(i).to_vec()),
        }
    }
}

/// `batch x 1` log-likelihood of `actions` under the head.
pub fn log_prob(tape: &mut Tape, head: HeadVars, actions: &ActionBatch) -> Result<Var> {
    match (head, actions) {
        (HeadVars::Logits(logits), ActionBatch::Discrete(idx)) => {
            let (rows, cols) = tape.shape(logits);
            if idx.len() != rows {
                return Err(GslError::contract("action count does not match batch"));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= cols) {
                return Err(GslError::contract(format!(
                    "discrete action {bad} out of range 0..{cols}"
                )));
            }
            let lsm = tape.log_softmax(logits);
            Ok(tape.pick(lsm, idx.clone()))
        }
        (HeadVars::Gaussian { mean, log_std }, ActionBatch::Continuous(a)) => {
            let (rows, dim) = tape.shape(mean);
            if a.shape() != (rows, dim) {
                return Err(GslError::contract(format!(
                    "continuous actions shaped {:?}, head expects {:?}",
                    a.shape(),
                    (rows, dim)
                )));
            }
            let a = tape.constant(a.clone());
            Ok(gaussian_log_prob(tape, a, mean, log_std))
        }
        _ => Err(GslError::contract("action kind does not match policy head")),
    }
}

/// Diagonal-normal log density of `x` (a node, so it can be a
/// reparameterized sample).
pub fn gaussian_log_prob(tape: &mut Tape, x: Var, mean: Var, log_std: Var) -> Var {
    let dim = tape.shape(mean).1 as f64;
    let diff = tape.sub(x, mean);
    let neg_ls = tape.neg(log_std);
    let inv_std = tape.exp(neg_ls);
    let z = tape.mul(diff, inv_std);
    let z2 = tape.square(z);
    let s = tape.sum_cols(z2);
    let half = tape.scale(s, -0.5);
    let sum_ls = tape.sum(log_std);
    let lp = tape.sub(half, sum_ls);
    tape.add_scalar(lp, -0.5 * dim * (2.0 * PI).ln())
}

/// Per-sample entropy: `batch x 1` for categorical heads, `1 x 1` for
/// gaussian heads (the std does not depend on the state).
pub fn entropy(tape: &mut Tape, head: HeadVars) -> Result<Var> {
    match head {
        HeadVars::Logits(logits) => {
            let lsm = tape.log_softmax(logits);
            let p = tape.exp(lsm);
            let plogp = tape.mul(p, lsm);
            let s = tape.sum_cols(plogp);
            Ok(tape.neg(s))
        }
        HeadVars::Gaussian { log_std, .. } => {
            let dim = tape.shape(log_std).1 as f64;
            let s = tape.sum(log_std);
            Ok(tape.add_scalar(s, 0.5 * dim * (1.0 + (2.0 * PI).ln())))
        }
        HeadVars::Scalar(_) => Err(GslError::contract("scalar head has no entropy")),
    }
}

/// Log-likelihood and entropy of one action under one head output.
pub fn policy_head_eval(head: &HeadOutput, action: &Action) -> Result<(f64, f64)> {
    let mut tape = Tape::new();
    let (vars, actions) = match (head, action) {
        (HeadOutput::Logits(l), Action::Discrete(i)) => {
            let v = tape.constant(Matrix::row_vector(l.clone()));
            (HeadVars::Logits(v), ActionBatch::Discrete(vec![*i]))
        }
        (HeadOutput::Gaussian { mean, std }, Action::Continuous(a)) => {
            let m = tape.constant(Matrix::row_vector(mean.clone()));
            let ls = tape.constant(Matrix::row_vector(std.iter().map(|s| s.ln()).collect()));
            (
                HeadVars::Gaussian { mean: m, log_std: ls },
                ActionBatch::Continuous(Matrix::row_vector(a.clone())),
            )
        }
        _ => return Err(GslError::contract("action kind does not match policy head")),
    };
    let lp = log_prob(&mut tape, vars, &actions)?;
    let ent = entropy(&mut tape, vars)?;
    Ok((tape.value(lp).data[0], tape.value(ent).data[0]))
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> usize {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

pub fn sample_gaussian<R: Rng + ?Sized>(mean: &[f64], std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(std)
        .map(|(&m, &s)| m + s * rng.sample::<f64, _>(StandardNormal))
        .collect()
}
