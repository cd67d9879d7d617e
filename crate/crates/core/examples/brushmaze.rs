//! The five-goal brush maze: geodesic distances from the start, and where a
//! scripted controller and a random policy end their episodes.

use gsl::agents::{FnActor, RandomActor};
use gsl::autodiff::Action;
use gsl::envs::brushmaze::{goal_index_for_context, scripted_action};
use gsl::envs::{evaluate_per_variation, geodesic_distance, BrushMaze, BrushMazeState, Env, VariationReport};
use gsl::rng::rng_for;

fn show(name: &str, rep: &VariationReport) {
    println!(
        "{name}: mean return {:.2}, success {:.2}",
        rep.mean_return(),
        rep.success_rate()
    );
    for (v, row) in rep.terminal_regions.iter().enumerate() {
        println!(
            "  goal {}  return {:>7.2}  ended in {row:?}",
            v + 1,
            rep.mean_returns[v]
        );
    }
}

fn main() -> gsl::Result<()> {
    let env = BrushMaze::new();
    let start = env.clone().reset_state(&mut rng_for(0, "start"), Some(0))?.pos;
    for g in 1..=5 {
        println!(
            "goal {g}: geodesic distance from start {:.3}",
            geodesic_distance(start, g)?
        );
    }

    let scripted = FnActor(|o: &[f64]| {
        let goal = goal_index_for_context(o[4]).expect("context in range");
        let state = BrushMazeState {
            pos: [o[0], o[1]],
            vel: [o[2], o[3]],
            context: o[4],
            goal,
            steps: 0,
        };
        Action::Continuous(scripted_action(&state, goal))
    });
    show(
        "scripted",
        &evaluate_per_variation(&scripted, &env, 20, true, &mut rng_for(1, "scripted"))?,
    );

    let random = RandomActor {
        space: env.action_space(),
    };
    show(
        "random",
        &evaluate_per_variation(&random, &env, 20, false, &mut rng_for(1, "random"))?,
    );
    Ok(())
}
