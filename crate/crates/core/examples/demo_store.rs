//! Record filtered demonstrations from a noisy scripted controller, write
//! them to disk, read them back and draw training batches.

use gsl::agents::Actor;
use gsl::autodiff::{Action, Matrix};
use gsl::demo_store::{record_and_filter, DemoFilter, DemoInventory, DemoSampler, DemoSource};
use gsl::envs::brushmaze::{goal_index_for_context, scripted_action};
use gsl::envs::{BrushMaze, BrushMazeState};
use gsl::rng::{rng_for, JobRng};
use rand::Rng;

/// Scripted controller that takes a uniform random action with probability `.0`.
struct Noisy(f64);

impl Actor for Noisy {
    fn act_batch(&self, obs: &Matrix, rng: &mut JobRng, _deterministic: bool) -> gsl::Result<Vec<Action>> {
        Ok((0..obs.rows)
            .map(|i| {
                let o = obs.row(i);
                if rng.gen_bool(self.0) {
                    return Action::Continuous(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                }
                let goal = goal_index_for_context(o[4]).expect("context in range");
                let state = BrushMazeState {
                    pos: [o[0], o[1]],
                    vel: [o[2], o[3]],
                    context: o[4],
                    goal,
                    steps: 0,
                };
                Action::Continuous(scripted_action(&state, goal))
            })
            .collect())
    }
}

fn main() -> gsl::Result<()> {
    let env = BrushMaze::new();
    let actor = Noisy(0.4);
    let rec = record_and_filter(
        &actor,
        &env,
        &[0, 2, 4],
        3000,
        DemoFilter::ReturnAtLeast { tau: -25.0 },
        DemoSource::Specialist(0),
        "scripted",
        &mut rng_for(2, "demo-example"),
    )?;
    let inv = rec.inventory;
    println!(
        "kept {} of {} episodes, {} transitions, per goal {:?}",
        inv.len(),
        rec.attempts,
        inv.num_steps(),
        inv.counts()
    );

    let dir = std::env::temp_dir().join("gsl-demo-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("scripted.gsldemo");
    inv.save(&path)?;
    let back = DemoInventory::load(&path)?;
    back.verify()?;
    println!(
        "{} bytes on disk, reloaded identical: {}",
        std::fs::metadata(&path)?.len(),
        back == inv
    );

    let mut sampler = DemoSampler::new(&back, rng_for(2, "sampler"));
    let (obs, actions) = sampler.next_batch(64)?;
    println!(
        "batch: {} observations of width {}, {} actions",
        obs.rows,
        obs.cols,
        actions.len()
    );
    Ok(())
}
