//! Minimal reverse-mode differentiation, dense networks, policy heads, and
//! the Adam optimizer.

pub mod adam;
pub mod checkpoint;
pub mod heads;
pub mod matrix;
pub mod mlp;
pub mod tape;

pub use adam::{adam_step, clip_grad_norm, AdamState};
pub use checkpoint::{Checkpoint, CheckpointSection};
pub use heads::{policy_head_eval, Action, ActionBatch};
pub use matrix::Matrix;
pub use mlp::{mlp_forward, Activation, HeadKind, HeadOutput, HeadVars, MlpSpec, ParamVector};
pub use tape::{Gradients, ParamSet, Tape, Var};
