mod common;

use common::oracles::{gae_by_sum, plateau_by_scan, smooth_by_convolution, synthetic_curve};
use common::rng;
use gsl::agents::compute_gae;
use gsl::plateau::{detect_plateau, smooth_returns, PlateauConfig};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn gae_matches_truncated_sums() {
    let mut r = rng("gae-oracle");
    for _ in 0..100 {
        let n = r.gen_range(1..120);
        let rewards: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| r.gen_bool(0.05)).collect();
        let bootstrap = r.gen_range(-5.0..5.0);
        let gamma = r.gen_range(0.8..1.0);
        let lambda = r.gen_range(0.0..1.0);
        let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
        let want = gae_by_sum(&rewards, &values, &dones, bootstrap, gamma, lambda);
        for t in 0..n {
            assert!((adv[t] - want[t]).abs() < 1e-10, "t={t}: {} vs {}", adv[t], want[t]);
            assert!((ret[t] - (want[t] + values[t])).abs() < 1e-10);
        }
    }
}

#[test]
fn smoothing_matches_direct_convolution() {
    let mut r = rng("smooth-oracle");
    for _ in 0..100 {
        let curve = synthetic_curve(&mut r);
        let kernel = r.gen_range(1..40);
        let got = smooth_returns(&curve, kernel);
        let want = smooth_by_convolution(&curve, kernel);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "kernel {kernel}: {a} vs {b}");
        }
    }
}

fn random_plateau_config(r: &mut gsl::rng::JobRng) -> PlateauConfig {
    PlateauConfig {
        kernel: r.gen_range(1..20),
        window: r.gen_range(2..60),
        epsilon: r.gen_range(0.0..0.5),
        guard: r.gen_range(0.0..0.3),
        check_every: 10,
    }
}

#[test]
fn plateau_matches_exhaustive_scan() {
    let mut r = rng("plateau-oracle");
    let mut triggered = 0;
    for _ in 0..100 {
        let curve = synthetic_curve(&mut r);
        let cfg = random_plateau_config(&mut r);
        let budget = curve.len() + r.gen_range(0..100);
        let got = detect_plateau(&curve, &cfg, budget);
        let want = plateau_by_scan(
            &smooth_returns(&curve, cfg.kernel),
            cfg.window,
            cfg.epsilon,
            cfg.guard,
            budget,
        );
        assert_eq!(got, want, "{cfg:?}");
        triggered += usize::from(got.is_some());
    }
    assert!(triggered > 20 && triggered < 100, "{triggered} of 100 curves triggered");
}

#[test]
fn default_plateau_on_a_saturating_curve() {
    let curve: Vec<f64> = (0..500)
        .map(|t| -30.0 + 25.0 * (1.0 - (-(t as f64) / 40.0).exp()))
        .collect();
    let cfg = PlateauConfig::default();
    let got = detect_plateau(&curve, &cfg, 500);
    assert_eq!(got, plateau_by_scan(&smooth_returns(&curve, 10), 50, 0.01, 0.15, 500));
    assert!(got.is_some());
}

proptest! {
    #[test]
    fn shifting_returns_keeps_the_trigger(seed in any::<u64>(), shift in 0.0f64..1000.0) {
        let mut r = gsl::rng::rng_for(seed, "shift");
        let curve = synthetic_curve(&mut r);
        let cfg = random_plateau_config(&mut r);
        // dyadic shift: exact in floating point at these magnitudes
        let shift = (shift * 64.0).round() / 64.0;
        let moved: Vec<f64> = curve.iter().map(|c| c + shift).collect();
        let a = detect_plateau(&curve, &cfg, curve.len());
        let b = detect_plateau(&moved, &cfg, curve.len());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn trigger_is_inside_the_guard(seed in any::<u64>()) {
        let mut r = gsl::rng::rng_for(seed, "guard");
        let curve = synthetic_curve(&mut r);
        let cfg = random_plateau_config(&mut r);
        if let Some(t) = detect_plateau(&curve, &cfg, curve.len()) {
            let (lo, hi) = gsl::plateau::guard_interval(curve.len(), cfg.guard);
            prop_assert!(t >= lo && t <= hi && t + cfg.window < curve.len());
        }
    }
}
