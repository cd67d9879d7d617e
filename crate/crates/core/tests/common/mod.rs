#![allow(dead_code)]

pub mod degenerate;
pub mod demos;
pub mod grad;
pub mod oracles;

use gsl::autodiff::{Activation, HeadKind, MlpSpec, ParamVector};
use gsl::rng::{rng_for, JobRng};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn rng(label: &str) -> JobRng {
    rng_for(20_240_601, label)
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut JobRng) -> gsl::autodiff::Matrix {
    gsl::autodiff::Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect(),
    )
}

/// A small tanh network with every parameter drawn at random, biases and
/// log-std included, so no gradient is structurally zero.
pub fn random_net(input: usize, hidden: Vec<usize>, head: HeadKind, rng: &mut JobRng) -> (MlpSpec, ParamVector) {
    let mut spec = MlpSpec::new(input, hidden, head);
    spec.activation = Activation::Tanh;
    let mut p = spec.init_with_gains(rng, 1.0, 1.0);
    let n = p.values.len();
    let std_tail = match spec.head {
        HeadKind::Gaussian { dim, .. } => dim,
        _ => 0,
    };
    for (i, v) in p.values.iter_mut().enumerate() {
        if i >= n - std_tail {
            *v = rng.gen_range(-1.5..-0.3);
        } else {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    (spec, p)
}

/// Fourth-order central difference of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let mut at = |d: f64| {
                y[i] = x[i] + d;
                let v = f(&y);
                y[i] = x[i];
                v
            };
            let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
        })
        .collect()
}

/// Largest `|a - n| / max(|a|, |n|)` over entries with `|a| > floor`, and
/// the number of entries compared.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> (f64, usize) {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    let mut n = 0;
    for (&a, &b) in analytic.iter().zip(numeric) {
        if a.abs() > floor {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
            n += 1;
        }
    }
    (worst, n)
}

/// A run small enough for a unit-test budget: four gridworld levels, two
/// specialists, a 16-unit network and a forced trigger after four epochs.
pub fn tiny_config(seed: u64) -> gsl::config::ExperimentConfig {
    use gsl::config::{ExperimentConfig, PRESET_PPO_DAPG};
    let mut cfg = ExperimentConfig::preset(PRESET_PPO_DAPG).unwrap();
    cfg.name = "tiny".into();
    cfg.seed = seed;
    cfg.env = gsl::envs::EnvConfig::gridworld(4);
    cfg.env.horizon = 32;
    cfg.ppo.hidden = vec![16];
    cfg.ppo.samples_per_epoch = 512;
    cfg.ppo.minibatch = 256;
    cfg.ppo.epochs = 2;
    cfg.ppo.threads = 2;
    cfg.gsl.total_steps = 16_384;
    cfg.gsl.num_specialists = 2;
    cfg.gsl.num_low_variations = 2;
    cfg.gsl.specialist_steps = 2048;
    cfg.gsl.specialist_demo_steps = 256;
    cfg.gsl.generalist_demo_steps = Some(128);
    cfg.gsl.consolidation_steps = 2048;
    cfg.gsl.demo_tau = Some(-1e9);
    cfg.gsl.trigger_epoch = Some(4);
    cfg.gsl.specialist_eval_every = 2;
    cfg.lfd.dapg.demo_batch = 64;
    cfg.eval.episodes = 20;
    cfg.validate().unwrap();
    cfg
}

/// Every file below `dir`, relative path to contents, sorted.
pub fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// The brush-maze shortest-path controller, reading the goal from the
/// context; with probability `noise` an action is uniform instead.
pub struct ScriptedMaze {
    pub noise: f64,
}

impl gsl::agents::Actor for ScriptedMaze {
    fn act_batch(
        &self,
        obs: &gsl::autodiff::Matrix,
        rng: &mut JobRng,
        _deterministic: bool,
    ) -> gsl::error::Result<Vec<gsl::autodiff::Action>> {
        use gsl::envs::brushmaze::{goal_index_for_context, scripted_action, BrushMazeState};
        Ok((0..obs.rows)
            .map(|i| {
                let o = obs.row(i);
                if rng.gen_bool(self.noise) {
                    return gsl::autodiff::Action::Continuous(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                }
                let goal = goal_index_for_context(o[4]).expect("context in (0, 1]");
                let state = BrushMazeState {
                    pos: [o[0], o[1]],
                    vel: [o[2], o[3]],
                    context: o[4],
                    goal,
                    steps: 0,
                };
                gsl::autodiff::Action::Continuous(scripted_action(&state, goal))
            })
            .collect())
    }
}
