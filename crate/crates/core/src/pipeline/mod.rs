//! End-to-end orchestration: configuration, the synthetic subject,
//! checkpoints and the closed reconstruction/generation loop.

pub mod checkpoint;
pub mod config;
pub mod run;
pub mod subject;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, Cursor, RngState, Stage, CHECKPOINT_FORMAT_VERSION,
};
pub use config::{CameraConfig, LoopSchedule, MeshSource, ResolutionProfile, SceneConfig, SubjectConfig, SubjectKind};
pub use run::{
    avatar_renders, back_cameras, evaluate_back, frontal_fit, initial_checkpoint, initial_state, ori_views,
    pseudo_views, render_avatar, report_csv, resume_loop, resume_loop_until, run_loop, BackViewScore, LoopOutput,
    ReportRow,
};
pub use subject::{template_color, GroundTruth, Scene};
