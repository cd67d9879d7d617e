//! Experiment configuration. Files are TOML; every section may be omitted
//! and falls back to the named preset's values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{PpoConfig, SacConfig};
use crate::demo_store::DemoFilter;
use crate::envs::EnvConfig;
use crate::error::{GslError, Result};
use crate::lfd::{DapgConfig, GailConfig, LfdMethod};
use crate::plateau::PlateauConfig;

pub const PRESET_PPO_DAPG: &str = "brushmaze-ppo-dapg";
pub const PRESET_SAC_GAIL: &str = "brushmaze-sac-gail";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Ppo,
    Sac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcConfig {
    pub batch_size: usize,
    pub lr: f64,
    /// Gradient steps. `None` matches the number of minibatch updates the
    /// consolidation budget would buy the backbone.
    pub steps: Option<usize>,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            batch_size: 2000,
            lr: 3e-4,
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LfdConfig {
    pub method: LfdMethod,
    pub dapg: DapgConfig,
    pub gail: GailConfig,
    pub bc: BcConfig,
}

impl Default for LfdConfig {
    fn default() -> Self {
        LfdConfig {
            method: LfdMethod::Dapg,
            dapg: DapgConfig::default(),
            gail: GailConfig::default(),
            bc: BcConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialistInit {
    /// Clone the generalist (or its low-variation fine-tune).
    Generalist,
    /// Fresh random networks.
    Fresh,
}

/// Budgets and switches of the generalist-specialist pipeline. Step counts
/// are environment steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GslConfig {
    pub total_steps: u64,
    pub num_specialists: usize,
    /// Size of the low-performing set handed to specialists.
    pub num_low_variations: usize,
    pub specialist_steps: u64,
    /// Kept demo steps across all specialists.
    pub specialist_demo_steps: usize,
    /// Kept demo steps from the generalist on the variations no specialist
    /// covers. `None` uses the specialists' per-variation rate.
    pub generalist_demo_steps: Option<usize>,
    pub consolidation_steps: u64,
    /// Demo filter threshold on episode return; `None` keeps successful
    /// episodes only.
    pub demo_tau: Option<f64>,
    /// Reference return for the early exit after phase I; `None` disables it.
    pub optimal_return: Option<f64>,
    pub optimal_fraction: f64,
    /// Epochs of generalist training restricted to the low set before the
    /// specialists start; 0 disables.
    pub low_finetune_epochs: usize,
    pub specialist_init: SpecialistInit,
    /// Launch specialists at this phase-I epoch instead of at the plateau.
    pub trigger_epoch: Option<usize>,
    /// Specialists are evaluated every this many epochs for best-checkpoint
    /// tracking.
    pub specialist_eval_every: usize,
}

impl Default for GslConfig {
    fn default() -> Self {
        GslConfig {
            total_steps: 5_000_000,
            num_specialists: 5,
            num_low_variations: 5,
            specialist_steps: 500_000,
            specialist_demo_steps: 10 * 150 * 5,
            generalist_demo_steps: None,
            consolidation_steps: 1_000_000,
            demo_tau: None,
            optimal_return: None,
            optimal_fraction: 0.95,
            low_finetune_epochs: 0,
            specialist_init: SpecialistInit::Generalist,
            trigger_epoch: None,
            specialist_eval_every: 10,
        }
    }
}

impl GslConfig {
    pub fn validate(&self, num_variations: usize) -> Result<()> {
        if self.num_specialists == 0 {
            return Err(GslError::config("gsl.num_specialists must be positive"));
        }
        if self.num_low_variations < self.num_specialists {
            return Err(GslError::config(format!(
                "gsl.num_low_variations ({}) must be at least gsl.num_specialists ({})",
                self.num_low_variations, self.num_specialists
            )));
        }
        if self.num_low_variations > num_variations {
            return Err(GslError::config(format!(
                "gsl.num_low_variations ({}) exceeds the environment's {num_variations} variations",
                self.num_low_variations
            )));
        }
        if self.specialist_steps == 0 {
            return Err(GslError::config("gsl.specialist_steps must be positive"));
        }
        if self.specialist_demo_steps == 0 {
            return Err(GslError::config("gsl.specialist_demo_steps must be positive"));
        }
        if !(self.optimal_fraction > 0.0 && self.optimal_fraction <= 1.0) {
            return Err(GslError::config("gsl.optimal_fraction must be in (0, 1]"));
        }
        if self.specialist_eval_every == 0 {
            return Err(GslError::config("gsl.specialist_eval_every must be positive"));
        }
        Ok(())
    }

    /// The post-phase-I budgets must fit in `total_steps`.
    pub fn check_budget(&self, samples_per_epoch: usize) -> Result<()> {
        let reserved = self.reserved_steps(samples_per_epoch);
        if reserved > self.total_steps {
            return Err(GslError::config(format!(
                "gsl budgets after phase I ({reserved} steps) exceed gsl.total_steps ({})",
                self.total_steps
            )));
        }
        Ok(())
    }

    /// Steps set aside for everything after phase I.
    pub fn reserved_steps(&self, samples_per_epoch: usize) -> u64 {
        (self.low_finetune_epochs * samples_per_epoch) as u64
            + self.num_specialists as u64 * self.specialist_steps
            + self.specialist_demo_steps as u64
            + self.generalist_demo_steps.unwrap_or(0) as u64
            + self.consolidation_steps
    }

    pub fn demo_filter(&self) -> DemoFilter {
        match self.demo_tau {
            Some(tau) => DemoFilter::ReturnAtLeast { tau },
            None => DemoFilter::Success,
        }
    }

    /// Early-exit bar: `fraction` of the reference, measured as a shortfall
    /// of `(1 - fraction) * |reference|` so negative references work.
    pub fn optimality_bar(&self) -> Option<f64> {
        self.optimal_return.map(|r| r - (1.0 - self.optimal_fraction) * r.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub deterministic: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 20,
            deterministic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset the file started from; informational.
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub parallelism: usize,
    pub backbone: Backbone,
    pub env: EnvConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub sac: SacConfig,
    #[serde(default)]
    pub lfd: LfdConfig,
    #[serde(default)]
    pub plateau: PlateauConfig,
    #[serde(default)]
    pub gsl: GslConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PRESET_PPO_DAPG => Ok(ExperimentConfig {
                name: name.into(),
                seed: 0,
                parallelism: 1,
                backbone: Backbone::Ppo,
                env: EnvConfig::brushmaze(),
                ppo: PpoConfig::default(),
                sac: SacConfig::default(),
                lfd: LfdConfig::default(),
                plateau: PlateauConfig::default(),
                gsl: GslConfig::default(),
                eval: EvalConfig::default(),
            }),
            PRESET_SAC_GAIL => Ok(ExperimentConfig {
                name: name.into(),
                backbone: Backbone::Sac,
                lfd: LfdConfig {
                    method: LfdMethod::Gail,
                    ..LfdConfig::default()
                },
                ..Self::preset(PRESET_PPO_DAPG)?
            }),
            other => Err(GslError::config(format!(
                "unknown preset '{other}' (known: {PRESET_PPO_DAPG}, {PRESET_SAC_GAIL})"
            ))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| GslError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a TOML file, or a preset when `path_or_preset` names one.
    pub fn load(path_or_preset: &str) -> Result<Self> {
        if let Ok(cfg) = Self::preset(path_or_preset) {
            return Ok(cfg);
        }
        let text = std::fs::read_to_string(path_or_preset)
            .map_err(|e| GslError::config(format!("cannot read config '{path_or_preset}': {e}")))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML form, as written into run directories.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GslError::config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Apply one `dotted.key=value` override. The value is parsed as a TOML
    /// value, falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| GslError::config(format!("override '{assignment}' is not key=value")))?;
        let key = key.trim();
        let value = parse_value(raw.trim());
        let mut tree = toml::Value::try_from(&*self).map_err(|e| GslError::config(e.to_string()))?;
        let mut node = &mut tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| GslError::config(format!("'{key}': '{part}' is not inside a table")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value);
                break;
            }
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let updated: ExperimentConfig = tree
            .try_into()
            .map_err(|e: toml::de::Error| GslError::config(format!("override '{key}': {}", e.message())))?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.parallelism == 0 {
            return Err(GslError::config("parallelism must be positive"));
        }
        if self.backbone == Backbone::Sac && !self.env.action_space().is_continuous() {
            return Err(GslError::config(format!(
                "backbone sac needs continuous actions but env '{}' is discrete",
                self.env.name
            )));
        }
        match (self.backbone, self.lfd.method) {
            (Backbone::Ppo, LfdMethod::Gail) => {
                return Err(GslError::config("lfd.method gail runs on the sac backbone"))
            }
            (Backbone::Sac, LfdMethod::Dapg) => {
                return Err(GslError::config("lfd.method dapg runs on the ppo backbone"))
            }
            _ => {}
        }
        self.ppo.validate()?;
        self.sac.validate()?;
        self.lfd.dapg.validate()?;
        self.lfd.gail.validate()?;
        if self.lfd.bc.batch_size == 0 || !(self.lfd.bc.lr > 0.0) {
            return Err(GslError::config("lfd.bc.batch_size and lfd.bc.lr must be positive"));
        }
        self.plateau.validate()?;
        self.gsl.validate(self.env.num_variations)?;
        if self.backbone == Backbone::Sac && self.lfd.method == LfdMethod::Bc {
            return Err(GslError::config("lfd.method bc runs on the ppo backbone"));
        }
        if self.eval.episodes == 0 {
            return Err(GslError::config("eval.episodes must be positive"));
        }
        Ok(())
    }

    /// Environment steps per training epoch of the configured backbone.
    pub fn samples_per_epoch(&self) -> usize {
        match self.backbone {
            Backbone::Ppo => self.ppo.samples_per_epoch,
            Backbone::Sac => self.sac.samples_per_epoch,
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
