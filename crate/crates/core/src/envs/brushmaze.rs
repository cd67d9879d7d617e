//! Point-mass "brush" maze.
//!
//! The unit square holds a horizontal corridor `y in [0.45, 0.55]` with five
//! vertical branches of width 0.1 centred at `x = 0.1, 0.3, 0.5, 0.7, 0.9`
//! rising to `y = 1`. Goal `i` (1-based) sits at `(x_i, 0.95)`. The agent
//! starts at `(0.02, 0.5)`; a real context `c in (0, 1]` selects goal
//! `ceil(5c)`. Actions set the velocity, one component per axis, scaled so
//! that `[-1, 1]` maps onto `[-V_MAX, V_MAX]`.

use rand::Rng;

use super::{ActionSpace, ContextSpace, Env, StepOutcome};
use crate::autodiff::Action;
use crate::error::{GslError, Result};
use crate::rng::JobRng;

pub const NUM_GOALS: usize = 5;
pub const HORIZON: usize = 150;
pub const V_MAX: f64 = 0.05;
pub const GOAL_RADIUS: f64 = 0.02;
pub const START: [f64; 2] = [0.02, 0.5];
pub const CORRIDOR_LO: f64 = 0.45;
pub const CORRIDOR_HI: f64 = 0.55;
pub const BRANCH_HALF_WIDTH: f64 = 0.05;
pub const GOAL_Y: f64 = 0.95;
pub const BRANCH_X: [f64; NUM_GOALS] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const OBS_DIM: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct BrushMazeState {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub context: f64,
    /// 1-based goal index.
    pub goal: usize,
    pub steps: usize,
}

impl BrushMazeState {
    pub fn observation(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1], self.context]
    }
}

/// Smallest `i` in `1..=5` with `c <= i/5`.
pub fn goal_index_for_context(c: f64) -> Option<usize> {
    if !(c > 0.0 && c <= 1.0) {
        return None;
    }
    (1..=NUM_GOALS).find(|&i| c <= i as f64 / NUM_GOALS as f64)
}

/// 1-based branch whose column contains `x`, if any.
fn branch_at(x: f64) -> Option<usize> {
    BRANCH_X
        .iter()
        .position(|&bx| (x - bx).abs() <= BRANCH_HALF_WIDTH + 1e-12)
        .map(|i| i + 1)
}

pub fn is_free(pos: [f64; 2]) -> bool {
    let [x, y] = pos;
    if !(0.0..=1.0).contains(&x) {
        return false;
    }
    if (CORRIDOR_LO..=CORRIDOR_HI).contains(&y) {
        return true;
    }
    y > CORRIDOR_HI && y <= 1.0 && branch_at(x).is_some()
}

/// Free x-interval at height `y` containing `x`.
fn x_interval(x: f64, y: f64) -> (f64, f64) {
    if y <= CORRIDOR_HI {
        (0.0, 1.0)
    } else {
        let bx = BRANCH_X[branch_at(x).expect("position in free space") - 1];
        (bx - BRANCH_HALF_WIDTH, bx + BRANCH_HALF_WIDTH)
    }
}

/// Free y-interval at abscissa `x`.
fn y_interval(x: f64) -> (f64, f64) {
    if branch_at(x).is_some() {
        (CORRIDOR_LO, 1.0)
    } else {
        (CORRIDOR_LO, CORRIDOR_HI)
    }
}

/// Shortest-path length from `pos` to goal `goal` (1-based) moving through
/// free space along the axes: across the corridor, then up the goal's
/// branch. From another branch the path first drops back to the corridor.
pub fn geodesic_distance(pos: [f64; 2], goal: usize) -> Result<f64> {
    if !(1..=NUM_GOALS).contains(&goal) {
        return Err(GslError::contract(format!("goal index {goal} outside 1..={NUM_GOALS}")));
    }
    if !is_free(pos) {
        return Err(GslError::contract(format!("position {pos:?} is inside a wall")));
    }
    let [x, y] = pos;
    let gx = BRANCH_X[goal - 1];
    let dx = (x - gx).abs();
    let in_other_branch = y > CORRIDOR_HI && branch_at(x) != Some(goal);
    Ok(if in_other_branch {
        (y - CORRIDOR_HI) + dx + (GOAL_Y - CORRIDOR_HI)
    } else {
        dx + (GOAL_Y - y).abs()
    })
}

#[derive(Debug, Clone)]
pub struct BrushMaze {
    horizon: usize,
    state: BrushMazeState,
}

impl Default for BrushMaze {
    fn default() -> Self {
        Self::with_horizon(HORIZON)
    }
}

impl BrushMaze {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_horizon(horizon: usize) -> Self {
        BrushMaze {
            horizon,
            state: BrushMazeState {
                pos: START,
                vel: [0.0; 2],
                context: 1.0,
                goal: NUM_GOALS,
                steps: 0,
            },
        }
    }

    pub fn state(&self) -> &BrushMazeState {
        &self.state
    }

    /// Place the agent directly; used by tests and scripted analyses.
    pub fn set_state(&mut self, state: BrushMazeState) -> Result<()> {
        if !is_free(state.pos) {
            return Err(GslError::contract("state position inside a wall"));
        }
        if goal_index_for_context(state.context) != Some(state.goal) {
            return Err(GslError::contract("goal index disagrees with context"));
        }
        self.state = state;
        Ok(())
    }

    /// Draw a goal (uniformly, unless `variation` pins it), then a context
    /// uniformly from that goal's interval.
    pub fn reset_state(&mut self, rng: &mut JobRng, variation: Option<usize>) -> Result<BrushMazeState> {
        let goal = match variation {
            Some(v) if v < NUM_GOALS => v + 1,
            Some(v) => return Err(GslError::contract(format!("variation {v} outside 0..{NUM_GOALS}"))),
            None => rng.gen_range(1..=NUM_GOALS),
        };
        let lo = (goal - 1) as f64 / NUM_GOALS as f64;
        let hi = goal as f64 / NUM_GOALS as f64;
        // (lo, hi]: reflect the half-open [0, 1) draw
        let u: f64 = rng.gen();
        let c = hi - u * (hi - lo);
        self.state = BrushMazeState {
            pos: START,
            vel: [0.0; 2],
            context: c,
            goal,
            steps: 0,
        };
        Ok(self.state.clone())
    }

    fn apply_velocity(&mut self, vel: [f64; 2]) {
        let [x, y] = self.state.pos;
        let (xlo, xhi) = x_interval(x, y);
        let nx = (x + vel[0]).clamp(xlo, xhi);
        let (ylo, yhi) = y_interval(nx);
        let ny = (y + vel[1]).clamp(ylo, yhi);
        self.state.pos = [nx, ny];
        self.state.vel = vel;
    }
}

impl Env for BrushMaze {
    fn name(&self) -> &str {
        "brushmaze"
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(2)
    }

    fn context_space(&self) -> ContextSpace {
        ContextSpace::RealInterval {
            lo: 0.0,
            hi: 1.0,
            parts: NUM_GOALS,
        }
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, rng: &mut JobRng, variation: Option<usize>) -> Result<Vec<f64>> {
        Ok(self.reset_state(rng, variation)?.observation())
    }

    fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        let Action::Continuous(a) = action else {
            return Err(GslError::contract("brush maze takes a continuous 2-vector action"));
        };
        if a.len() != 2 {
            return Err(GslError::contract(format!(
                "brush maze action has {} components",
                a.len()
            )));
        }
        if self.state.steps >= self.horizon {
            return Err(GslError::contract("step called after the episode ended"));
        }
        let vel = [V_MAX * a[0].clamp(-1.0, 1.0), V_MAX * a[1].clamp(-1.0, 1.0)];
        let vel = vel.map(|v| if v.is_finite() { v } else { 0.0 });
        self.apply_velocity(vel);
        self.state.steps += 1;
        let dist = geodesic_distance(self.state.pos, self.state.goal)?;
        let success = dist < GOAL_RADIUS;
        Ok(StepOutcome {
            obs: self.state.observation(),
            reward: -dist,
            done: success || self.state.steps >= self.horizon,
            success,
        })
    }

    fn variation(&self) -> usize {
        self.state.goal - 1
    }

    /// 0-based branch the agent is inside, `None` while in the corridor.
    fn goal_region(&self) -> Option<usize> {
        let [x, y] = self.state.pos;
        if y > CORRIDOR_HI {
            branch_at(x).map(|b| b - 1)
        } else {
            None
        }
    }

    fn num_goal_regions(&self) -> usize {
        NUM_GOALS
    }

    fn boxed_clone(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Context-aware scripted controller that follows the shortest path to the
/// episode's goal. Returns an action in policy units.
pub fn scripted_action(state: &BrushMazeState, goal: usize) -> Vec<f64> {
    let [x, y] = state.pos;
    let gx = BRANCH_X[goal - 1];
    let in_goal_column = (x - gx).abs() <= BRANCH_HALF_WIDTH - 1e-9;
    let (tx, ty) = if y > CORRIDOR_HI && !in_goal_column {
        // wrong branch: drop back into the corridor first
        (x, CORRIDOR_HI)
    } else if in_goal_column {
        (gx, GOAL_Y)
    } else {
        (gx, CORRIDOR_HI)
    };
    vec![((tx - x) / V_MAX).clamp(-1.0, 1.0), ((ty - y) / V_MAX).clamp(-1.0, 1.0)]
}
