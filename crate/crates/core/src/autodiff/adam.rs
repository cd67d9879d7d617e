use serde::{Deserialize, Serialize};

use super::mlp::ParamVector;
use crate::error::{GslError, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn for_params(params: &ParamVector) -> Self {
        Self::new(params.len())
    }
}

/// One bias-corrected Adam update. A non-finite gradient leaves both the
/// parameters and the state untouched.
pub fn adam_step(params: &mut ParamVector, grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(GslError::contract(format!(
            "adam shapes disagree: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(GslError::NonFinite(format!("gradient entry {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for (((p, &g), m), v) in params
        .values
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
    Ok(())
}

/// Rescale `grads` in place so its L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(x: f64) -> ParamVector {
        ParamVector::new(vec![x], vec![("x".into(), 1, 1)]).unwrap()
    }

    #[test]
    fn zero_gradient_only_advances_counter() {
        let mut p = scalar_params(1.5);
        let mut s = AdamState::for_params(&p);
        adam_step(&mut p, &[0.0], &mut s, 3e-4).unwrap();
        assert_eq!(p.values, vec![1.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        for g in [0.37, -12.0] {
            let mut p = scalar_params(0.0);
            let mut s = AdamState::for_params(&p);
            adam_step(&mut p, &[g], &mut s, 3e-4).unwrap();
            let delta = p.values[0];
            assert!((delta.abs() - 3e-4).abs() < 1e-9);
            assert_eq!(delta.signum(), -g.signum());
        }
    }

    #[test]
    fn three_steps_match_scalar_recurrence() {
        // hand recurrence with constant gradient g
        let (g, lr) = (0.8f64, 0.01f64);
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 2.0f64);
        for t in 1..=3 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= lr * mh / (vh.sqrt() + 1e-8);
        }
        let mut p = scalar_params(2.0);
        let mut s = AdamState::for_params(&p);
        for _ in 0..3 {
            adam_step(&mut p, &[g], &mut s, lr).unwrap();
        }
        assert!((p.values[0] - x).abs() < 1e-12);
        assert_eq!(s.step, 3);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = scalar_params(1.0);
        let mut s = AdamState::for_params(&p);
        assert!(matches!(
            adam_step(&mut p, &[f64::NAN], &mut s, 0.1),
            Err(GslError::NonFinite(_))
        ));
        assert_eq!(p.values, vec![1.0]);
        assert_eq!(s.step, 0);
    }
}
