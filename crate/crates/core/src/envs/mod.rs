//! Block-contextual environments: a context selects one of several
//! variations, each a full MDP sharing the observation and action spaces.

pub mod brushmaze;
pub mod eval;
pub mod gridworld;

use serde::{Deserialize, Serialize};

pub use crate::autodiff::Action;
use crate::error::{GslError, Result};
use crate::rng::JobRng;

pub use brushmaze::{geodesic_distance, goal_index_for_context, BrushMaze, BrushMazeState};
pub use eval::{evaluate_on, evaluate_per_variation, VariationReport};
pub use gridworld::{gridworld_generate, GridWorld, GridWorldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous(usize),
}

impl ActionSpace {
    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Discrete(n) | ActionSpace::Continuous(n) => *n,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, ActionSpace::Continuous(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// The episode ended by reaching its goal (as opposed to timing out).
    pub success: bool,
}

/// One environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// The episode ended at this step.
    pub done: bool,
    /// The episode ended by the time limit rather than by reaching a goal;
    /// value targets still bootstrap through such steps.
    pub truncated: bool,
    pub variation: usize,
}

/// How contexts map to variation ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContextSpace {
    /// The interval `(lo, hi]` split into `parts` equal half-open pieces
    /// `(lo + (i-1)w, lo + iw]`, numbered from 0.
    RealInterval { lo: f64, hi: f64, parts: usize },
    /// Integer seeds `base .. base + count`, one variation per seed.
    IntegerSeeds { base: u64, count: usize },
}

impl ContextSpace {
    pub fn num_variations(&self) -> usize {
        match self {
            ContextSpace::RealInterval { parts, .. } => *parts,
            ContextSpace::IntegerSeeds { count, .. } => *count,
        }
    }

    /// Variation id of a real context, or `None` outside the space.
    pub fn variation_of_real(&self, c: f64) -> Option<usize> {
        match *self {
            ContextSpace::RealInterval { lo, hi, parts } => {
                if !(c > lo && c <= hi) {
                    return None;
                }
                let w = (hi - lo) / parts as f64;
                (1..=parts).find(|&i| c <= lo + i as f64 * w).map(|i| i - 1)
            }
            ContextSpace::IntegerSeeds { .. } => None,
        }
    }

    pub fn variation_of_seed(&self, seed: u64) -> Option<usize> {
        match *self {
            ContextSpace::IntegerSeeds { base, count } if seed >= base && seed - base < count as u64 => {
                Some((seed - base) as usize)
            }
            _ => None,
        }
    }
}

pub trait Env: Send {
    fn name(&self) -> &str;
    fn obs_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn context_space(&self) -> ContextSpace;
    fn horizon(&self) -> usize;

    fn num_variations(&self) -> usize {
        self.context_space().num_variations()
    }

    /// Start a new episode, on `variation` if given, otherwise on a
    /// variation drawn by the environment's own reset distribution.
    fn reset(&mut self, rng: &mut JobRng, variation: Option<usize>) -> Result<Vec<f64>>;

    fn step(&mut self, action: &Action) -> Result<StepOutcome>;

    /// Variation of the current episode.
    fn variation(&self) -> usize;

    /// Which goal region the agent currently occupies, if the environment
    /// has several. Used for terminal-goal histograms.
    fn goal_region(&self) -> Option<usize> {
        None
    }

    /// Number of distinct goal regions reported by [`Env::goal_region`].
    fn num_goal_regions(&self) -> usize {
        0
    }

    fn boxed_clone(&self) -> Box<dyn Env>;
}

impl Clone for Box<dyn Env> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// `brushmaze` or `gridworld`.
    pub name: String,
    pub horizon: usize,
    pub num_variations: usize,
    pub seed_base: u64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_wall_density")]
    pub wall_density: f64,
}

fn default_grid_size() -> usize {
    8
}

fn default_wall_density() -> f64 {
    0.2
}

impl EnvConfig {
    pub fn brushmaze() -> Self {
        EnvConfig {
            name: "brushmaze".into(),
            horizon: brushmaze::HORIZON,
            num_variations: brushmaze::NUM_GOALS,
            seed_base: 0,
            grid_size: default_grid_size(),
            wall_density: default_wall_density(),
        }
    }

    pub fn gridworld(num_variations: usize) -> Self {
        EnvConfig {
            name: "gridworld".into(),
            horizon: 64,
            num_variations,
            seed_base: 1000,
            grid_size: default_grid_size(),
            wall_density: default_wall_density(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(GslError::config("env.horizon must be positive"));
        }
        if self.num_variations == 0 {
            return Err(GslError::config("env.num_variations must be positive"));
        }
        match self.name.as_str() {
            "brushmaze" if self.num_variations != brushmaze::NUM_GOALS => Err(GslError::config(format!(
                "env.num_variations must be {} for brushmaze",
                brushmaze::NUM_GOALS
            ))),
            "brushmaze" => Ok(()),
            "gridworld" if self.grid_size < 2 => Err(GslError::config("env.grid_size must be at least 2")),
            "gridworld" if !(0.0..1.0).contains(&self.wall_density) => {
                Err(GslError::config("env.wall_density must be in [0, 1)"))
            }
            "gridworld" => Ok(()),
            other => Err(GslError::config(format!("unknown env.name '{other}'"))),
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        match self.name.as_str() {
            "brushmaze" => ActionSpace::Continuous(2),
            _ => ActionSpace::Discrete(gridworld::NUM_ACTIONS),
        }
    }
}

pub fn make_env(cfg: &EnvConfig) -> Result<Box<dyn Env>> {
    cfg.validate()?;
    Ok(match cfg.name.as_str() {
        "brushmaze" => Box::new(BrushMaze::with_horizon(cfg.horizon)),
        _ => Box::new(GridWorld::new(
            cfg.seed_base,
            cfg.num_variations,
            cfg.grid_size,
            cfg.wall_density,
            cfg.horizon,
        )),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_partition_is_left_open() {
        let cs = ContextSpace::RealInterval {
            lo: 0.0,
            hi: 1.0,
            parts: 5,
        };
        assert_eq!(cs.variation_of_real(0.3), Some(1));
        assert_eq!(cs.variation_of_real(0.2), Some(0));
        assert_eq!(cs.variation_of_real(1.0), Some(4));
        assert_eq!(cs.variation_of_real(0.0), None);
        assert_eq!(cs.variation_of_real(1.01), None);
    }

    #[test]
    fn seed_space_is_contiguous() {
        let cs = ContextSpace::IntegerSeeds { base: 100, count: 3 };
        assert_eq!(cs.variation_of_seed(100), Some(0));
        assert_eq!(cs.variation_of_seed(102), Some(2));
        assert_eq!(cs.variation_of_seed(103), None);
        assert_eq!(cs.variation_of_seed(5), None);
    }

    #[test]
    fn config_validation() {
        assert!(EnvConfig::brushmaze().validate().is_ok());
        let mut bad = EnvConfig::brushmaze();
        bad.num_variations = 4;
        assert!(bad.validate().is_err());
        let mut unknown = EnvConfig::gridworld(8);
        unknown.name = "procgen".into();
        assert!(matches!(unknown.validate(), Err(GslError::Config(_))));
    }
}
