//! Pipeline state persisted as `plan.json`, plus the variation-selection
//! helpers that fill it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SpecialistInit;
use crate::envs::VariationReport;
use crate::error::{GslError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    GeneralistI,
    Select,
    Specialists,
    Demos,
    GeneralistII,
    Done,
}

/// Environment steps charged to each phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLedger {
    pub phase1: u64,
    pub low_finetune: u64,
    pub specialists: Vec<u64>,
    pub demos: u64,
    pub phase2: u64,
}

impl StepLedger {
    pub fn total(&self) -> u64 {
        self.phase1 + self.low_finetune + self.specialists.iter().sum::<u64>() + self.demos + self.phase2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistRecord {
    pub id: usize,
    pub variations: Vec<usize>,
    pub init: SpecialistInit,
    pub done: bool,
    pub best_epoch: Option<usize>,
    /// Evaluation return of the best checkpoint on `variations`.
    pub best_return: Option<f64>,
    pub best_success: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GslPlan {
    pub phase: Phase,
    pub seed: u64,
    pub steps: StepLedger,
    pub phase1_budget_epochs: usize,
    pub phase1_epochs: usize,
    /// Plateau trigger epoch, when the criterion fired.
    pub trigger_epoch: Option<usize>,
    pub early_exit: bool,
    pub low_variations: Vec<usize>,
    pub subsets: Vec<Vec<usize>>,
    pub specialists: Vec<SpecialistRecord>,
    /// Role name to path relative to the run directory.
    pub checkpoints: BTreeMap<String, String>,
    pub demo_files: Vec<String>,
    pub demo_counts: BTreeMap<usize, usize>,
    /// Evaluation of the generalist after phase I and after consolidation.
    pub before: Option<VariationReport>,
    pub after: Option<VariationReport>,
}

impl GslPlan {
    pub fn new(seed: u64) -> Self {
        GslPlan {
            phase: Phase::GeneralistI,
            seed,
            steps: StepLedger::default(),
            phase1_budget_epochs: 0,
            phase1_epochs: 0,
            trigger_epoch: None,
            early_exit: false,
            low_variations: Vec::new(),
            subsets: Vec::new(),
            specialists: Vec::new(),
            checkpoints: BTreeMap::new(),
            demo_files: Vec::new(),
            demo_counts: BTreeMap::new(),
            before: None,
            after: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Write through a temporary file so a crash never leaves a torn plan.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Ids of the `n` lowest returns, ties broken by smaller id, in ascending
/// id order.
pub fn select_lowest_variations(returns: &[f64], n: usize) -> Result<Vec<usize>> {
    if n > returns.len() {
        return Err(GslError::config(format!(
            "cannot select {n} variations out of {}",
            returns.len()
        )));
    }
    let mut ids: Vec<usize> = (0..returns.len()).collect();
    ids.sort_by(|&a, &b| returns[a].total_cmp(&returns[b]).then(a.cmp(&b)));
    let mut low = ids[..n].to_vec();
    low.sort_unstable();
    Ok(low)
}

/// Split sorted `low` into `n` contiguous chunks whose sizes differ by at
/// most one, larger chunks first.
pub fn split_into_subsets(low: &[usize], n: usize) -> Result<Vec<Vec<usize>>> {
    if n == 0 || n > low.len() {
        return Err(GslError::config(format!(
            "cannot split {} variations among {n} specialists",
            low.len()
        )));
    }
    let mut sorted = low.to_vec();
    sorted.sort_unstable();
    let base = sorted.len() / n;
    let extra = sorted.len() % n;
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        out.push(sorted[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}
