//! Seed-procedural grid mazes: each variation is a level generated from its
//! seed, with random walls and a random goal reachable from the top-left
//! start cell.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActionSpace, ContextSpace, Env, StepOutcome};
use crate::autodiff::Action;
use crate::error::{GslError, Result};
use crate::rng::JobRng;

/// Up, down, left, right, no-op.
pub const NUM_ACTIONS: usize = 5;
pub const NOOP: usize = 4;
pub const STEP_REWARD: f64 = -0.01;
pub const GOAL_REWARD: f64 = 1.0;
const OBS_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorldSpec {
    pub seed: u64,
    pub size: usize,
    pub wall_density: f64,
    pub goal: (usize, usize),
    pub horizon: usize,
    /// Row-major wall flags.
    pub walls: Vec<bool>,
}

impl GridWorldSpec {
    pub const START: (usize, usize) = (0, 0);

    pub fn is_wall(&self, cell: (usize, usize)) -> bool {
        self.walls[cell.0 * self.size + cell.1]
    }

    /// Neighbour reached by `action`, or the same cell when blocked.
    pub fn move_from(&self, cell: (usize, usize), action: usize) -> (usize, usize) {
        let (r, c) = cell;
        let next = match action {
            0 if r > 0 => (r - 1, c),
            1 if r + 1 < self.size => (r + 1, c),
            2 if c > 0 => (r, c - 1),
            3 if c + 1 < self.size => (r, c + 1),
            _ => cell,
        };
        if self.is_wall(next) {
            cell
        } else {
            next
        }
    }

    /// Breadth-first shortest path length from start to goal.
    pub fn shortest_path(&self) -> Option<usize> {
        let n = self.size;
        let mut dist = vec![usize::MAX; n * n];
        let mut queue = VecDeque::new();
        dist[0] = 0;
        queue.push_back(Self::START);
        while let Some(cell) = queue.pop_front() {
            if cell == self.goal {
                return Some(dist[cell.0 * n + cell.1]);
            }
            for a in 0..4 {
                let nb = self.move_from(cell, a);
                let k = nb.0 * n + nb.1;
                if dist[k] == usize::MAX {
                    dist[k] = dist[cell.0 * n + cell.1] + 1;
                    queue.push_back(nb);
                }
            }
        }
        None
    }
}

/// Deterministic level for `seed`: the goal cell is drawn once, then walls
/// are redrawn until the goal is reachable.
pub fn gridworld_generate(seed: u64, size: usize, wall_density: f64, horizon: usize) -> GridWorldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goal = loop {
        let cell = (rng.gen_range(0..size), rng.gen_range(0..size));
        if cell != GridWorldSpec::START {
            break cell;
        }
    };
    loop {
        let walls = (0..size * size)
            .map(|k| {
                let cell = (k / size, k % size);
                let draw = rng.gen::<f64>() < wall_density;
                draw && cell != GridWorldSpec::START && cell != goal
            })
            .collect();
        let spec = GridWorldSpec {
            seed,
            size,
            wall_density,
            goal,
            horizon,
            walls,
        };
        if spec.shortest_path().is_some() {
            return spec;
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    seed_base: u64,
    levels: Vec<GridWorldSpec>,
    current: usize,
    pos: (usize, usize),
    steps: usize,
}

impl GridWorld {
    pub fn new(seed_base: u64, num_variations: usize, size: usize, wall_density: f64, horizon: usize) -> Self {
        let levels = (0..num_variations as u64)
            .map(|v| gridworld_generate(seed_base + v, size, wall_density, horizon))
            .collect();
        GridWorld {
            seed_base,
            levels,
            current: 0,
            pos: GridWorldSpec::START,
            steps: 0,
        }
    }

    pub fn level(&self, variation: usize) -> &GridWorldSpec {
        &self.levels[variation]
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    fn observation(&self) -> Vec<f64> {
        let lvl = &self.levels[self.current];
        let s = lvl.size as f64;
        let blocked = |a: usize| {
            if lvl.move_from(self.pos, a) == self.pos {
                1.0
            } else {
                0.0
            }
        };
        vec![
            self.pos.0 as f64 / s,
            self.pos.1 as f64 / s,
            lvl.goal.0 as f64 / s,
            lvl.goal.1 as f64 / s,
            blocked(0),
            blocked(1),
            blocked(2),
            blocked(3),
        ]
    }
}

impl Env for GridWorld {
    fn name(&self) -> &str {
        "gridworld"
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(NUM_ACTIONS)
    }

    fn context_space(&self) -> ContextSpace {
        ContextSpace::IntegerSeeds {
            base: self.seed_base,
            count: self.levels.len(),
        }
    }

    fn horizon(&self) -> usize {
        self.levels[0].horizon
    }

    fn reset(&mut self, rng: &mut JobRng, variation: Option<usize>) -> Result<Vec<f64>> {
        self.current = match variation {
            Some(v) if v < self.levels.len() => v,
            Some(v) => return Err(GslError::contract(format!("variation {v} out of range"))),
            None => rng.gen_range(0..self.levels.len()),
        };
        self.pos = GridWorldSpec::START;
        self.steps = 0;
        Ok(self.observation())
    }

    fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        let Action::Discrete(a) = *action else {
            return Err(GslError::contract("grid world takes a discrete action"));
        };
        if a >= NUM_ACTIONS {
            return Err(GslError::contract(format!("action {a} out of range")));
        }
        let lvl = &self.levels[self.current];
        if self.steps >= lvl.horizon {
            return Err(GslError::contract("step called after the episode ended"));
        }
        self.pos = lvl.move_from(self.pos, a);
        self.steps += 1;
        let success = self.pos == lvl.goal;
        Ok(StepOutcome {
            obs: self.observation(),
            reward: if success { GOAL_REWARD } else { STEP_REWARD },
            done: success || self.steps >= lvl.horizon,
            success,
        })
    }

    fn variation(&self) -> usize {
        self.current
    }

    fn boxed_clone(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_layout() {
        assert_eq!(gridworld_generate(42, 8, 0.3, 50), gridworld_generate(42, 8, 0.3, 50));
        assert_ne!(gridworld_generate(42, 8, 0.3, 50), gridworld_generate(43, 8, 0.3, 50));
    }

    #[test]
    fn empty_grid_path_is_manhattan() {
        for seed in 0..20 {
            let lvl = gridworld_generate(seed, 7, 0.0, 50);
            assert!(lvl.walls.iter().all(|w| !w));
            assert_eq!(lvl.shortest_path(), Some(lvl.goal.0 + lvl.goal.1));
        }
    }

    #[test]
    fn noop_policy_collects_step_penalty() {
        let mut env = GridWorld::new(0, 3, 6, 0.2, 40);
        let mut rng = JobRng::seed_from_u64(0);
        for v in 0..3 {
            env.reset(&mut rng, Some(v)).unwrap();
            let mut ret = 0.0;
            loop {
                let out = env.step(&Action::Discrete(NOOP)).unwrap();
                ret += out.reward;
                if out.done {
                    break;
                }
            }
            assert!((ret - STEP_REWARD * 40.0).abs() < 1e-12);
        }
    }
}
