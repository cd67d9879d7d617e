//! Analytic against finite-difference gradients for every training loss,
//! on small random networks.

use super::{max_rel_error, normal_matrix, numeric_grad, random_net, rng};
use gsl::agents::ppo::{ppo_policy_loss, value_loss};
use gsl::agents::{actor_loss, critic_loss, PolicyNet, SacAgent, SacConfig, ValueNet};
use gsl::autodiff::{heads, ActionBatch, HeadKind, Matrix, ParamSet, ParamVector, Tape, Var};
use gsl::lfd::{bc_loss, dapg_term, Discriminator};
use rand::Rng;

pub const TOL: f64 = 1e-5;
pub const FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub compared: usize,
    pub params: usize,
}

impl GradCheck {
    pub fn ok(&self) -> bool {
        self.max_rel_error < TOL && self.compared > self.params / 2
    }
}

fn check(name: &str, params: &ParamVector, build: impl Fn(&mut Tape, ParamSet, &ParamVector) -> Var) -> GradCheck {
    let mut tape = Tape::new();
    let set = tape.register(params);
    let loss = build(&mut tape, set, params);
    let analytic = tape.grad(loss, set).unwrap();
    let numeric = numeric_grad(&params.values, 1e-4, |v| {
        let mut p = params.clone();
        p.values.copy_from_slice(v);
        let mut tape = Tape::new();
        let set = tape.register(&p);
        let loss = build(&mut tape, set, &p);
        tape.scalar(loss)
    });
    let (err, n) = max_rel_error(&analytic, &numeric, FLOOR);
    GradCheck {
        name: name.to_string(),
        max_rel_error: err,
        compared: n,
        params: params.len(),
    }
}

fn gaussian(dim: usize) -> HeadKind {
    HeadKind::Gaussian {
        dim,
        min_std: 0.05,
        max_std: 1.0,
    }
}

fn policy(input: usize, head: HeadKind, label: &str) -> PolicyNet {
    let (spec, p) = random_net(input, vec![6, 5], head, &mut rng(label));
    PolicyNet::new(spec, p).unwrap()
}

/// Current log-probabilities of `actions`, used to place PPO ratios away
/// from the clip boundaries.
fn log_probs(policy: &PolicyNet, obs: &Matrix, actions: &ActionBatch) -> Vec<f64> {
    let mut tape = Tape::new();
    let set = tape.register(&policy.params);
    let x = tape.constant(obs.clone());
    let head = policy.spec.forward_tape(&mut tape, set, &policy.params, x).unwrap();
    let lp = heads::log_prob(&mut tape, head, actions).unwrap();
    tape.value(lp).data.clone()
}

fn ppo_case(head: HeadKind, actions: ActionBatch, label: &str) -> GradCheck {
    let mut r = rng(label);
    let obs = normal_matrix(actions.len(), 4, &mut r);
    let net = policy(4, head, label);
    let shifts = [-0.5, 0.0, 0.5];
    let old: Vec<f64> = log_probs(&net, &obs, &actions)
        .iter()
        .enumerate()
        .map(|(i, lp)| lp + shifts[i % 3])
        .collect();
    let adv: Vec<f64> = (0..actions.len()).map(|_| r.gen_range(-2.0..2.0)).collect();
    check(label, &net.params, |tape, set, p| {
        let net = PolicyNet {
            spec: net.spec.clone(),
            params: p.clone(),
        };
        let (loss, ent) = ppo_policy_loss(tape, set, &net, &obs, &actions, &old, &adv, 0.2).unwrap();
        let ent = tape.scale(ent, -0.01);
        tape.add(loss, ent)
    })
}

pub fn ppo_policy_loss_gaussian() -> GradCheck {
    let mut r = rng("ppo-gauss-actions");
    ppo_case(
        gaussian(2),
        ActionBatch::Continuous(normal_matrix(12, 2, &mut r)),
        "ppo gaussian",
    )
}

pub fn ppo_policy_loss_categorical() -> GradCheck {
    let mut r = rng("ppo-cat-actions");
    let a = (0..12).map(|_| r.gen_range(0..3)).collect();
    ppo_case(
        HeadKind::Categorical { actions: 3 },
        ActionBatch::Discrete(a),
        "ppo categorical",
    )
}

pub fn ppo_value_loss() -> GradCheck {
    let mut r = rng("value");
    let (spec, p) = random_net(4, vec![6, 5], HeadKind::Scalar, &mut r);
    let obs = normal_matrix(10, 4, &mut r);
    let targets: Vec<f64> = (0..10).map(|_| r.gen_range(-3.0..3.0)).collect();
    check("ppo value", &p, |tape, set, p| {
        let v = ValueNet {
            spec: spec.clone(),
            params: p.clone(),
        };
        value_loss(tape, set, &v, &obs, &targets).unwrap()
    })
}

pub fn dapg_demo_term() -> GradCheck {
    let mut r = rng("dapg");
    let net = policy(4, gaussian(2), "dapg-net");
    let obs = normal_matrix(9, 4, &mut r);
    let actions = ActionBatch::Continuous(normal_matrix(9, 2, &mut r).map(|x| 0.3 * x));
    check("dapg", &net.params, |tape, set, p| {
        let net = PolicyNet {
            spec: net.spec.clone(),
            params: p.clone(),
        };
        dapg_term(tape, set, &net, &obs, &actions, 0.1, 1.7, 1e6).unwrap()
    })
}

pub fn bc_negative_log_likelihood() -> GradCheck {
    let mut r = rng("bc");
    let net = policy(4, gaussian(2), "bc-net");
    let obs = normal_matrix(9, 4, &mut r);
    let actions = ActionBatch::Continuous(normal_matrix(9, 2, &mut r));
    check("bc", &net.params, |tape, set, p| {
        let net = PolicyNet {
            spec: net.spec.clone(),
            params: p.clone(),
        };
        bc_loss(tape, set, &net, &obs, &actions).unwrap()
    })
}

pub fn gail_discriminator_loss() -> GradCheck {
    let mut r = rng("gail");
    let mut disc = Discriminator::new(3, 2, vec![6, 5], 0.01, &mut r);
    let (spec, p) = random_net(5, vec![6, 5], HeadKind::Scalar, &mut r);
    disc.spec = spec;
    disc.params = p;
    let po = normal_matrix(8, 3, &mut r);
    let pa = normal_matrix(8, 2, &mut r);
    let dobs = normal_matrix(6, 3, &mut r);
    let da = normal_matrix(6, 2, &mut r);
    check("gail discriminator", &disc.params.clone(), |tape, set, p| {
        let mut d = disc.clone();
        d.params = p.clone();
        d.loss(tape, set, (&po, &pa), (&dobs, &da)).unwrap().0
    })
}

fn sac_agent(label: &str) -> SacAgent {
    let mut r = rng(label);
    let cfg = SacConfig {
        hidden: vec![6, 5],
        ..SacConfig::default()
    };
    let mut agent = SacAgent::new(3, 2, &cfg, &mut r).unwrap();
    let (s, p) = random_net(3, vec![6, 5], gaussian(2), &mut r);
    agent.actor = PolicyNet::new(s, p).unwrap();
    let (s, p) = random_net(5, vec![6, 5], HeadKind::Scalar, &mut r);
    agent.q1 = ValueNet::new(s, p).unwrap();
    let (s, p) = random_net(5, vec![6, 5], HeadKind::Scalar, &mut r);
    agent.q2 = ValueNet::new(s, p).unwrap();
    agent
}

pub fn sac_critic_loss_both_heads() -> Vec<GradCheck> {
    let mut r = rng("sac-critic-data");
    let agent = sac_agent("sac-critic");
    let obs = normal_matrix(10, 3, &mut r);
    let act = normal_matrix(10, 2, &mut r).map(f64::tanh);
    let y: Vec<f64> = (0..10).map(|_| r.gen_range(-2.0..2.0)).collect();
    (0..2)
        .map(|which| {
            let params = if which == 0 { &agent.q1.params } else { &agent.q2.params };
            check(&format!("sac critic q{}", which + 1), params, |tape, set, p| {
                let mut a = agent.clone();
                if which == 0 {
                    a.q1.params = p.clone();
                    let other = tape.register(&a.q2.params);
                    critic_loss(tape, (set, other), &a, &obs, &act, &y).unwrap()
                } else {
                    a.q2.params = p.clone();
                    let other = tape.register(&a.q1.params);
                    critic_loss(tape, (other, set), &a, &obs, &act, &y).unwrap()
                }
            })
        })
        .collect()
}

/// Every check, in a fixed order.
pub fn all() -> Vec<GradCheck> {
    let mut v = vec![
        ppo_policy_loss_gaussian(),
        ppo_policy_loss_categorical(),
        ppo_value_loss(),
        dapg_demo_term(),
        bc_negative_log_likelihood(),
        gail_discriminator_loss(),
    ];
    v.extend(sac_critic_loss_both_heads());
    v.push(sac_actor_loss());
    v
}

pub fn sac_actor_loss() -> GradCheck {
    let mut r = rng("sac-actor-data");
    let agent = sac_agent("sac-actor");
    let obs = normal_matrix(10, 3, &mut r);
    let eps = normal_matrix(10, 2, &mut r);
    check("sac actor", &agent.actor.params, |tape, set, p| {
        let mut a = agent.clone();
        a.actor.params = p.clone();
        let s1 = tape.register(&a.q1.params);
        let s2 = tape.register(&a.q2.params);
        actor_loss(tape, set, (s1, s2), &a, &obs, &eps, 0.2).unwrap().0
    })
}
