//! Demo-store contract checks shared by the unit and acceptance suites.

use super::{rng, ScriptedMaze};
use gsl::demo_store::{record_and_filter, DemoFilter, DemoInventory, DemoSource, Recording};
use gsl::envs::{make_env, EnvConfig};
use gsl::error::Result;

/// Noisy scripted brush-maze demos on every goal, kept when the return is
/// at least `tau`.
pub fn record_scripted(tau: f64, target_steps: usize, label: &str) -> Result<Recording> {
    let env = make_env(&EnvConfig::brushmaze())?;
    record_and_filter(
        &ScriptedMaze { noise: 0.3 },
        env.as_ref(),
        &[0, 1, 2, 3, 4],
        target_steps,
        DemoFilter::ReturnAtLeast { tau },
        DemoSource::Specialist(0),
        "scripted",
        &mut rng(label),
    )
}

/// Every persisted record re-sums to its stored return, which clears `tau`.
pub fn all_records_clear(inv: &DemoInventory, tau: f64) -> bool {
    !inv.is_empty()
        && inv.records.iter().all(|r| {
            r.resummed_return() >= tau
                && (r.resummed_return() - r.total_return).abs() <= 1e-9 * (1.0 + r.total_return.abs())
        })
}

/// Save, load and save again: identical bytes and bit-identical records.
pub fn round_trip_is_exact(inv: &DemoInventory, path: &std::path::Path) -> Result<bool> {
    inv.save(path)?;
    let back = DemoInventory::load(path)?;
    let bits = |i: &DemoInventory| -> Vec<u64> {
        i.records
            .iter()
            .flat_map(|r| {
                std::iter::once(r.total_return.to_bits()).chain(r.steps.iter().flat_map(|t| {
                    let a = match &t.action {
                        gsl::autodiff::Action::Continuous(v) => v.clone(),
                        gsl::autodiff::Action::Discrete(k) => vec![*k as f64],
                    };
                    t.obs
                        .iter()
                        .chain(&t.next_obs)
                        .chain(&a)
                        .chain(std::iter::once(&t.reward))
                        .map(|x| x.to_bits())
                        .collect::<Vec<_>>()
                }))
            })
            .collect()
    };
    Ok(back == *inv && back.to_bytes() == std::fs::read(path)? && bits(&back) == bits(inv))
}
