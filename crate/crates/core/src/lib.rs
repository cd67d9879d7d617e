//! Generalist-specialist policy learning.
//!
//! A generalist policy trains on every environment variation until its
//! smoothed return curve plateaus. The weakest variations are then split
//! among specialists cloned from the generalist; their demonstrations are
//! folded back into the generalist with a demonstration-augmented loss
//! (DAPG with PPO, GAIL with SAC, or plain behavior cloning).
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod agents;
pub mod autodiff;
pub mod cli;
mod codec;
pub mod config;
pub mod demo_store;
pub mod envs;
pub mod error;
pub mod lfd;
pub mod metrics;
pub mod orchestrator;
pub mod plateau;
pub mod report;
pub mod rng;

pub use error::{GslError, Result};
