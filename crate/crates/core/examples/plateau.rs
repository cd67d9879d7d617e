//! Plateau detection on a noisy saturating learning curve: smooth, scan the
//! windowed slope test from the guard interval onwards, report the trigger.

use gsl::plateau::{criterion_h, detect_plateau, guard_interval, smooth_returns, PlateauConfig};
use gsl::rng::rng_for;
use rand_distr::{Distribution, Normal};

fn main() {
    let budget = 400;
    let noise = Normal::new(0.0, 4.0).unwrap();
    let mut rng = rng_for(11, "plateau-example");
    let curve: Vec<f64> = (0..budget)
        .map(|t| -100.0 + 90.0 * (1.0 - (-(t as f64) / 40.0).exp()) + noise.sample(&mut rng))
        .collect();

    let cfg = PlateauConfig::default();
    let smoothed = smooth_returns(&curve, cfg.kernel);
    let (lo, hi) = guard_interval(budget, cfg.guard);
    println!("guard interval: epochs {lo}..{hi}");
    for t in (0..budget).step_by(40) {
        let h = criterion_h(&smoothed, t, cfg.window, cfg.epsilon);
        println!(
            "epoch {t:>3}: raw {:>8.2}  smoothed {:>8.2}  H {h:?}",
            curve[t], smoothed[t]
        );
    }
    match detect_plateau(&curve, &cfg, budget) {
        Some(t) => println!("plateau confirmed at epoch {t}"),
        None => println!("no plateau within the budget"),
    }
}
