//! Per-variation policy evaluation.

use serde::{Deserialize, Serialize};

use super::Env;
use crate::agents::Actor;
use crate::autodiff::Matrix;
use crate::error::{GslError, Result};
use crate::rng::JobRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    /// Mean episode return per variation id.
    pub mean_returns: Vec<f64>,
    pub success_rates: Vec<f64>,
    /// `terminal_regions[v][j]`: episodes of variation `v` that ended in goal
    /// region `j`; the last column counts episodes that ended outside every
    /// region. Empty for environments without goal regions.
    pub terminal_regions: Vec<Vec<usize>>,
    pub episodes_per_variation: usize,
}

impl VariationReport {
    pub fn mean_return(&self) -> f64 {
        self.mean_returns.iter().sum::<f64>() / self.mean_returns.len() as f64
    }

    pub fn success_rate(&self) -> f64 {
        self.success_rates.iter().sum::<f64>() / self.success_rates.len() as f64
    }

    /// Mean return over a subset of variations.
    pub fn mean_return_on(&self, variations: &[usize]) -> f64 {
        variations.iter().map(|&v| self.mean_returns[v]).sum::<f64>() / variations.len() as f64
    }
}

/// Run `episodes` episodes on each variation (all episodes of one variation
/// step in lockstep as a batch) and report per-variation statistics.
pub fn evaluate_per_variation(
    actor: &dyn Actor,
    env: &dyn Env,
    episodes: usize,
    deterministic: bool,
    rng: &mut JobRng,
) -> Result<VariationReport> {
    evaluate_on(
        actor,
        env,
        &(0..env.num_variations()).collect::<Vec<_>>(),
        episodes,
        deterministic,
        rng,
    )
}

/// As [`evaluate_per_variation`], restricted to `variations`; entries for
/// other variations are left at zero.
pub fn evaluate_on(
    actor: &dyn Actor,
    env: &dyn Env,
    variations: &[usize],
    episodes: usize,
    deterministic: bool,
    rng: &mut JobRng,
) -> Result<VariationReport> {
    if episodes == 0 {
        return Err(GslError::contract(
            "evaluation needs at least one episode per variation",
        ));
    }
    let nv = env.num_variations();
    let regions = match env.num_goal_regions() {
        0 => 0,
        g => g + 1,
    };
    let mut report = VariationReport {
        mean_returns: vec![0.0; nv],
        success_rates: vec![0.0; nv],
        terminal_regions: vec![vec![0; regions]; nv],
        episodes_per_variation: episodes,
    };
    for &v in variations {
        let mut envs: Vec<Box<dyn Env>> = (0..episodes).map(|_| env.boxed_clone()).collect();
        let mut obs: Vec<Vec<f64>> = Vec::with_capacity(episodes);
        for e in envs.iter_mut() {
            obs.push(e.reset(rng, Some(v))?);
        }
        let mut live: Vec<usize> = (0..episodes).collect();
        let mut returns = vec![0.0; episodes];
        let mut successes = 0usize;
        while !live.is_empty() {
            let batch = Matrix::from_rows(&live.iter().map(|&i| obs[i].as_slice()).collect::<Vec<_>>());
            let actions = actor.act_batch(&batch, rng, deterministic)?;
            let mut still = Vec::with_capacity(live.len());
            for (&i, a) in live.iter().zip(&actions) {
                let out = envs[i].step(a)?;
                returns[i] += out.reward;
                if out.done {
                    successes += out.success as usize;
                    if regions > 0 {
                        let j = envs[i].goal_region().unwrap_or(regions - 1);
                        report.terminal_regions[v][j] += 1;
                    }
                } else {
                    obs[i] = out.obs;
                    still.push(i);
                }
            }
            live = still;
        }
        report.mean_returns[v] = returns.iter().sum::<f64>() / episodes as f64;
        report.success_rates[v] = successes as f64 / episodes as f64;
    }
    Ok(report)
}
