//! Sequence-conditioned actor-critic and its training by PPO.

mod agent;
mod curriculum;
mod deepsets;
pub mod dist;
mod model;
pub mod nn;
mod ppo;
mod train;

pub use agent::LearnedAgent;
pub use curriculum::{
    sample_sequence, AvoidMode, Curriculum, CurriculumStage, CurriculumState, EpisodeProgress, TaskOutcome,
};
pub use deepsets::{SetEncoder, SetKey};
pub use model::{ActionHead, ForwardCache, Input, Model, ModelConfig, ObsEncoderConfig, Output};
pub use ppo::{clip_grad_norm, gae, ppo_loss, ppo_update, Adam, Batch, PpoConfig, UpdateStats};
pub use train::{evaluate_tasks, train, Checkpoint, LogRow, TrainConfig, Trained};
