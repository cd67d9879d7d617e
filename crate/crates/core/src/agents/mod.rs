//! RL backbones: PPO with GAE and SAC with twin critics, plus rollout
//! collection and replay storage.

pub mod policy;
pub mod ppo;
pub mod replay;
pub mod rollout;
pub mod sac;

pub use policy::{act, Actor, FnActor, PolicyNet, RandomActor, ValueNet};
pub use ppo::{clipped_objective, ppo_update, PolicyTerm, PpoAgent, PpoConfig, PpoStats};
pub use replay::ReplayBuffer;
pub use rollout::{collect_rollout, compute_gae, EnvPool, EpisodeStat, RolloutBatch};
pub use sac::{
    actor_loss, critic_loss, sac_update, squashed_sample, train_sac, IdentityReward, RewardHook, SacAgent, SacBatch,
    SacConfig, SacHooks, SacStats,
};
