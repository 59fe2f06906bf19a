//! Multi-stage training: ordered task stages over one model, per-group
//! learning-rate ladders and top-down unfreezing.

mod plan;
mod schedule;
mod train;

pub use plan::{preset, CurriculumPlan, PresetOptions, StageSpec, PRESETS};
pub use schedule::{freeze_schedule, lr_ladder, FreezeSchedule, LrLadder};
pub use train::{
    epochs_to_threshold, evaluate, optimizer_step, run_curriculum, run_stage, Corpora, DevScore,
    EpochRecord, StageSummary, TaskData, TrainReport,
};

use crate::model::{ModelError, Task};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("no corpus `{0}` for this plan")]
    MissingCorpus(String),
    #[error("corpus `{corpus}` is empty ({split} split)")]
    EmptyCorpus { corpus: String, split: &'static str },
    #[error("corpus `{corpus}` lacks labels for task `{task}`")]
    LabelMismatch { corpus: String, task: Task },
    #[error("training diverged in stage {stage} ({task}) epoch {epoch}: {reason}; last finite losses {last_losses:?}")]
    Divergence {
        stage: usize,
        task: Task,
        epoch: usize,
        reason: String,
        last_losses: Vec<f64>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}
