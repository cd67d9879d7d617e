//! Consolidating demonstrations into a policy: DAPG on top of PPO, GAIL on
//! top of SAC, and plain behavior cloning.

pub mod bc;
pub mod dapg;
pub mod gail;

use serde::{Deserialize, Serialize};

pub use bc::{bc_loss, bc_update, BcStats};
pub use dapg::{dapg_ppo_update, dapg_term, DapgConfig, DapgTerm};
pub use gail::{gail_discriminator_update, gail_mixed_reward, Discriminator, GailConfig, GailHooks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LfdMethod {
    Dapg,
    Gail,
    Bc,
}
