mod common;

use gsl::cli::{main_with, plateau_of_file, EXIT_CONFIG, EXIT_INSUFFICIENT_DEMOS};
use gsl::config::{Backbone, ExperimentConfig, SpecialistInit, PRESET_PPO_DAPG, PRESET_SAC_GAIL};
use gsl::lfd::LfdMethod;
use gsl::orchestrator::select_lowest_variations;
use gsl::orchestrator::split_into_subsets;
use gsl::plateau::PlateauConfig;
use proptest::prelude::*;
use std::process::ExitCode;

#[test]
fn default_preset_matches_the_illustrative_setup() {
    let cfg = ExperimentConfig::preset(PRESET_PPO_DAPG).unwrap();
    assert_eq!(cfg.backbone, Backbone::Ppo);
    assert_eq!(cfg.lfd.method, LfdMethod::Dapg);
    assert_eq!(cfg.gsl.total_steps, 5_000_000);
    assert_eq!(cfg.gsl.num_specialists, 5);
    assert_eq!(cfg.gsl.num_low_variations, 5);
    assert_eq!(cfg.gsl.specialist_steps, 500_000);
    assert_eq!(cfg.gsl.consolidation_steps, 1_000_000);
    assert_eq!(cfg.gsl.specialist_demo_steps, 7500);
    assert_eq!(cfg.plateau.window, 50);
    assert_eq!(cfg.plateau.epsilon, 0.01);
    assert_eq!(cfg.ppo.lr, 3e-4);
    assert_eq!(cfg.ppo.gamma, 0.95);
    assert_eq!(cfg.ppo.gae_lambda, 0.97);
    assert_eq!(cfg.ppo.clip, 0.2);
    assert_eq!(cfg.ppo.ent_coef, 0.01);
    assert_eq!(cfg.ppo.hidden, vec![256, 256]);
    assert_eq!(cfg.ppo.threads, 5);
    assert_eq!(cfg.ppo.samples_per_epoch, 10_000);
    assert_eq!(cfg.ppo.minibatch, 2000);
    cfg.gsl.check_budget(cfg.samples_per_epoch()).unwrap();

    let sac = ExperimentConfig::preset(PRESET_SAC_GAIL).unwrap();
    assert_eq!(sac.backbone, Backbone::Sac);
    assert_eq!(sac.lfd.method, LfdMethod::Gail);
    assert_eq!(sac.sac.batch_size, 200);
    assert_eq!(sac.sac.updates_per_block, 4);
    assert_eq!(sac.sac.block, 64);
    assert_eq!(sac.sac.tau, 0.005);
    assert_eq!(sac.sac.buffer_capacity, 2_000_000);
    assert_eq!(sac.lfd.gail.disc_updates, 5);
    assert_eq!(sac.lfd.gail.per_policy_updates, 100);
}

#[test]
fn toml_round_trip() {
    for name in [PRESET_PPO_DAPG, PRESET_SAC_GAIL] {
        let cfg = ExperimentConfig::preset(name).unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }
    let mut tiny = common::tiny_config(3);
    tiny.gsl.specialist_init = SpecialistInit::Fresh;
    assert_eq!(ExperimentConfig::from_toml(&tiny.to_toml().unwrap()).unwrap(), tiny);
}

#[test]
fn overrides_parse_typed_values() {
    let mut cfg = ExperimentConfig::preset(PRESET_PPO_DAPG).unwrap();
    cfg.apply_override("gsl.total_steps=6000000").unwrap();
    cfg.apply_override("ppo.hidden=[64, 64]").unwrap();
    cfg.apply_override("gsl.specialist_init=fresh").unwrap();
    cfg.apply_override("lfd.method=bc").unwrap();
    assert_eq!(cfg.gsl.total_steps, 6_000_000);
    assert_eq!(cfg.ppo.hidden, vec![64, 64]);
    assert_eq!(cfg.gsl.specialist_init, SpecialistInit::Fresh);
    assert_eq!(cfg.lfd.method, LfdMethod::Bc);
    assert!(cfg.apply_override("gsl.no_such_field=1").is_err());
    assert!(cfg.apply_override("missing-equals").is_err());
}

#[test]
fn inconsistent_configs_are_rejected() {
    let base = ExperimentConfig::preset(PRESET_PPO_DAPG).unwrap();
    let mut c = base.clone();
    c.gsl.num_specialists = 6;
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.lfd.method = LfdMethod::Gail;
    assert!(c.validate().is_err());
    let mut c = ExperimentConfig::preset(PRESET_SAC_GAIL).unwrap();
    c.lfd.method = LfdMethod::Bc;
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.env = gsl::envs::EnvConfig::gridworld(8);
    c.backbone = Backbone::Sac;
    c.lfd.method = LfdMethod::Gail;
    assert!(c.validate().is_err());
    let mut c = base;
    c.gsl.total_steps = 1_000_000;
    assert!(c.gsl.check_budget(c.samples_per_epoch()).is_err());
}

fn code(args: &[&str]) -> ExitCode {
    main_with(std::iter::once("gsl").chain(args.iter().copied()))
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let out = out.to_str().unwrap();
    assert_eq!(code(&["no-such-command"]), ExitCode::from(EXIT_CONFIG));
    assert_eq!(
        code(&["gsl", "--config", "no-such-preset", "--out", out]),
        ExitCode::from(EXIT_CONFIG)
    );
    assert_eq!(
        code(&["gsl", "--set", "gsl.num_specialists=9", "--out", out]),
        ExitCode::from(EXIT_CONFIG)
    );

    let cfg_path = tmp.path().join("tiny.toml");
    let mut tiny = common::tiny_config(1);
    tiny.gsl.demo_tau = Some(1e9);
    tiny.save(&cfg_path).unwrap();
    let cfg_arg = cfg_path.to_str().unwrap();
    assert_eq!(
        code(&["gsl", "--config", cfg_arg, "--out", out]),
        ExitCode::from(EXIT_INSUFFICIENT_DEMOS)
    );

    let ok = tmp.path().join("ok");
    let ok = ok.to_str().unwrap();
    assert_eq!(
        code(&[
            "gsl",
            "--config",
            cfg_arg,
            "--set",
            "gsl.demo_tau=-1e9",
            "--seed",
            "2",
            "--out",
            ok
        ]),
        ExitCode::SUCCESS
    );
    let rep = tmp.path().join("report");
    assert_eq!(code(&["report", ok, "--out", rep.to_str().unwrap()]), ExitCode::SUCCESS);
    assert!(rep.join("comparison.csv").is_file());
    let metrics = tmp.path().join("ok/metrics/phase1_generalist.csv");
    assert_eq!(code(&["plateau", metrics.to_str().unwrap()]), ExitCode::SUCCESS);
}

#[test]
fn offline_plateau_on_a_metrics_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.csv");
    let mut w = gsl::metrics::MetricsWriter::create(&path).unwrap();
    for t in 0..300 {
        w.write(&gsl::metrics::MetricsRow {
            epoch: t,
            total_samples: 1000 * (t as u64 + 1),
            mean_return: (t as f64).min(120.0),
            ..Default::default()
        })
        .unwrap();
    }
    drop(w);
    let cfg = PlateauConfig::default();
    let t = plateau_of_file(&path, &cfg, None).unwrap().unwrap();
    assert!((100..=125).contains(&t), "{t}");
    assert!(plateau_of_file(&path, &cfg, Some(10)).is_err());
}

proptest! {
    #[test]
    fn selection_takes_the_lowest(returns in prop::collection::vec(-100.0f64..100.0, 1..40), n in 1usize..40) {
        let n = n.min(returns.len());
        let low = select_lowest_variations(&returns, n).unwrap();
        prop_assert_eq!(low.len(), n);
        prop_assert!(low.windows(2).all(|w| w[0] < w[1]));
        let worst_kept = low.iter().map(|&i| returns[i]).fold(f64::NEG_INFINITY, f64::max);
        for (i, &r) in returns.iter().enumerate() {
            if !low.contains(&i) {
                prop_assert!(r >= worst_kept);
            }
        }
    }

    #[test]
    fn subsets_partition_the_selection(len in 1usize..60, k in 1usize..60) {
        let k = k.min(len);
        let low: Vec<usize> = (0..len).map(|i| 3 * i + 1).collect();
        let subsets = split_into_subsets(&low, k).unwrap();
        prop_assert_eq!(subsets.len(), k);
        prop_assert_eq!(subsets.concat(), low);
        let sizes: Vec<usize> = subsets.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    }
}
