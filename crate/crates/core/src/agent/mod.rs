//! Active exploration: the agent looks at one view at a time and decides
//! whether to move the camera, commit to a class, or reject the scene.

mod env;
mod policy;
mod update;

use thiserror::Error;

pub use env::{
    build_state, env_step, AgentState, Action, RewardSpec, SceneEpisode, StepOutcome,
};
pub use policy::{
    epsilon_at, run_episode, train_policy, EpisodeOutcome, QConfig, QPolicy, TrainingPoint,
    TrainingResult, TrainingScene, Trajectory, Transition,
};
pub use update::{update_on_new_class, ClassUpdate, NewClassData, MIN_NEW_CLASS_SCENES};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("action {action:?} is infeasible: {reason}")]
    Infeasible { action: Action, reason: String },
    #[error("episode already finished")]
    Finished,
    #[error("non-finite value in transition")]
    NonFinite,
    #[error("feature length {found}, policy expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("no training scenes")]
    EmptyTraining,
    #[error("scene has no views")]
    NoViews,
    #[error("new class needs at least {needed} scenes, got {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("policy file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Pbmf(#[from] crate::pbmf::PbmfError),
    #[error(transparent)]
    Detector(#[from] crate::detector::DetectorError),
    #[error(transparent)]
    OpenSet(#[from] crate::openset::OpenSetError),
    #[error(transparent)]
    Fusion(#[from] crate::fusion::FusionError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AgentError>;
