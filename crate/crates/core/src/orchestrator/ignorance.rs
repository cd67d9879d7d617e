//! Which goal does the policy end at, per context? A generalist that ignores
//! the context sends every variation to the same goal.

use serde::{Deserialize, Serialize};

use crate::agents::Actor;
use crate::envs::{evaluate_per_variation, Env, VariationReport};
use crate::error::{GslError, Result};
use crate::rng::JobRng;

pub const MIN_EPISODES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgnoranceReport {
    /// `matrix[i][j]`: fraction of variation-`i` episodes ending nearest
    /// goal `j`; the last column is episodes that timed out elsewhere.
    pub matrix: Vec<Vec<f64>>,
    /// `max_j mean_i matrix[i][j]`.
    pub concentration: f64,
}

impl IgnoranceReport {
    /// Build from an evaluation that recorded terminal regions.
    pub fn from_evaluation(report: &VariationReport) -> Result<Self> {
        if report.terminal_regions.iter().any(|r| r.is_empty()) {
            return Err(GslError::contract("environment reports no goal regions"));
        }
        let n = report.episodes_per_variation as f64;
        let matrix: Vec<Vec<f64>> = report
            .terminal_regions
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / n).collect())
            .collect();
        Ok(IgnoranceReport {
            concentration: concentration(&matrix),
            matrix,
        })
    }

    /// Text table, one row per variation.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let cols = self.matrix.first().map_or(0, Vec::len);
        out.push_str("ctx ");
        for j in 0..cols {
            if j + 1 == cols {
                out.push_str("   none");
            } else {
                out.push_str(&format!("  goal{}", j + 1));
            }
        }
        out.push('\n');
        for (i, row) in self.matrix.iter().enumerate() {
            out.push_str(&format!("{:>3} ", i + 1));
            for v in row {
                out.push_str(&format!(" {v:>6.2}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("concentration {:.3}\n", self.concentration));
        out
    }
}

/// Largest column mean of a row-stochastic matrix.
pub fn concentration(matrix: &[Vec<f64>]) -> f64 {
    let rows = matrix.len() as f64;
    let cols = matrix.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| matrix.iter().map(|r| r[j]).sum::<f64>() / rows)
        .fold(0.0, f64::max)
}

pub fn ignorance_report(
    actor: &dyn Actor,
    env: &dyn Env,
    episodes: usize,
    deterministic: bool,
    rng: &mut JobRng,
) -> Result<(IgnoranceReport, VariationReport)> {
    if episodes < MIN_EPISODES {
        return Err(GslError::contract(format!(
            "ignorance report needs at least {MIN_EPISODES} episodes per variation"
        )));
    }
    let eval = evaluate_per_variation(actor, env, episodes, deterministic, rng)?;
    Ok((IgnoranceReport::from_evaluation(&eval)?, eval))
}
