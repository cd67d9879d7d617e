//! Plateau detection on training-return curves: Gaussian smoothing, a
//! windowed dominance test `H`, and a guarded first-trigger search.

use serde::{Deserialize, Serialize};

use crate::error::{GslError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlateauConfig {
    /// Kernel support width in epochs; `sigma = kernel / 4`.
    pub kernel: usize,
    /// Look-ahead window `W` in epochs.
    pub window: usize,
    /// Margin `epsilon`.
    pub epsilon: f64,
    /// Fraction of the budget ignored at each end.
    pub guard: f64,
    /// Epochs between online checks.
    pub check_every: usize,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            kernel: 10,
            window: 50,
            epsilon: 0.01,
            guard: 0.15,
            check_every: 10,
        }
    }
}

impl PlateauConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 {
            return Err(GslError::config("plateau.kernel must be at least 1"));
        }
        if self.window == 0 {
            return Err(GslError::config("plateau.window must be at least 1"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(GslError::config("plateau.epsilon must be non-negative"));
        }
        if !(0.0..0.5).contains(&self.guard) {
            return Err(GslError::config("plateau.guard must be in [0, 0.5)"));
        }
        if self.check_every == 0 {
            return Err(GslError::config("plateau.check_every must be at least 1"));
        }
        Ok(())
    }
}

/// Truncated Gaussian weights for offsets `-r..=r`, `r = floor(2 sigma)`.
pub fn gaussian_kernel(kernel: usize) -> Vec<f64> {
    let sigma = kernel as f64 / 4.0;
    let r = (2.0 * sigma).floor() as i64;
    (-r..=r)
        .map(|j| (-((j * j) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Gaussian-filtered curve of the same length. Near the ends the kernel is
/// cut off and its remaining weights renormalized.
pub fn smooth_returns(curve: &[f64], kernel: usize) -> Vec<f64> {
    assert!(kernel >= 1, "kernel size must be at least 1");
    let w = gaussian_kernel(kernel);
    let r = (w.len() / 2) as i64;
    let m = curve.len() as i64;
    (0..m)
        .map(|t| {
            let (mut num, mut den) = (0.0, 0.0);
            for (k, &wk) in w.iter().enumerate() {
                let j = t + k as i64 - r;
                if (0..m).contains(&j) {
                    num += wk * curve[j as usize];
                    den += wk;
                }
            }
            num / den
        })
        .collect()
}

/// `H(t) = 1[R_t + eps >= R_t' for all t' in t+1..=t+W]`, or `None` when
/// the window runs past the end of the curve.
pub fn criterion_h(smoothed: &[f64], t: usize, window: usize, epsilon: f64) -> Option<bool> {
    if t + window >= smoothed.len() {
        return None;
    }
    let rt = smoothed[t] + epsilon;
    Some(smoothed[t + 1..=t + window].iter().all(|&r| rt >= r))
}

/// Epoch range `[ceil(g B), floor((1 - g) B)]` eligible for a trigger.
pub fn guard_interval(budget_epochs: usize, guard: f64) -> (usize, usize) {
    let b = budget_epochs as f64;
    ((guard * b).ceil() as usize, ((1.0 - guard) * b).floor() as usize)
}

/// First epoch inside the guard interval where `H` holds on the smoothed
/// curve; `None` if there is none (yet).
pub fn detect_plateau(curve: &[f64], cfg: &PlateauConfig, budget_epochs: usize) -> Option<usize> {
    let smoothed = smooth_returns(curve, cfg.kernel);
    let (lo, hi) = guard_interval(budget_epochs, cfg.guard);
    (lo..=hi)
        .take_while(|&t| t + cfg.window < smoothed.len())
        .find(|&t| criterion_h(&smoothed, t, cfg.window, cfg.epsilon) == Some(true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_one_is_identity() {
        let c = [1.0, -2.0, 3.5, 0.25];
        assert_eq!(smooth_returns(&c, 1), c.to_vec());
    }

    #[test]
    fn constants_are_preserved() {
        let s = smooth_returns(&[4.0; 30], 10);
        assert!(s.iter().all(|&x| (x - 4.0).abs() < 1e-12));
    }

    #[test]
    fn ramp_triggers_at_the_bend() {
        let curve: Vec<f64> = (0..300).map(|t| (t as f64).min(100.0)).collect();
        let first = (0..300).find(|&t| criterion_h(&curve, t, 50, 0.01) == Some(true));
        assert_eq!(first, Some(100));
    }

    #[test]
    fn window_overrun_is_not_evaluable() {
        assert_eq!(criterion_h(&[1.0, 1.0, 1.0], 1, 2, 0.0), None);
        assert_eq!(criterion_h(&[1.0, 1.0, 1.0], 0, 2, 0.0), Some(true));
    }

    #[test]
    fn increasing_curve_never_triggers() {
        let curve: Vec<f64> = (0..200).map(|t| t as f64).collect();
        assert_eq!(
            detect_plateau(
                &curve,
                &PlateauConfig {
                    kernel: 1,
                    ..Default::default()
                },
                200
            ),
            None
        );
    }
}
