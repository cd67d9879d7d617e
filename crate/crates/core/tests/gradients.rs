mod common;

use common::grad::{self, GradCheck};

fn assert_ok(c: GradCheck) {
    println!(
        "{}: {} of {} parameters compared, max relative error {:.2e}",
        c.name, c.compared, c.params, c.max_rel_error
    );
    assert!(c.ok(), "{c:?}");
}

#[test]
fn ppo_policy_loss_gaussian() {
    assert_ok(grad::ppo_policy_loss_gaussian());
}

#[test]
fn ppo_policy_loss_categorical() {
    assert_ok(grad::ppo_policy_loss_categorical());
}

#[test]
fn ppo_value_loss() {
    assert_ok(grad::ppo_value_loss());
}

#[test]
fn dapg_demo_term() {
    assert_ok(grad::dapg_demo_term());
}

#[test]
fn bc_negative_log_likelihood() {
    assert_ok(grad::bc_negative_log_likelihood());
}

#[test]
fn gail_discriminator_loss() {
    assert_ok(grad::gail_discriminator_loss());
}

#[test]
fn sac_critic_loss_both_heads() {
    grad::sac_critic_loss_both_heads().into_iter().for_each(assert_ok);
}

#[test]
fn sac_actor_loss() {
    assert_ok(grad::sac_actor_loss());
}
