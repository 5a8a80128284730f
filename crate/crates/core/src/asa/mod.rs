//! Adaptive spatial alignment: photometric and blendshape-prior losses, the
//! cosine schedule, Adam, and the alignment optimizer.

pub mod adam;
pub mod loss;
pub mod optimize;
pub mod schedule;

pub use adam::{adam_step, AdamState};
pub use loss::{flame_reg, photometric_loss};
pub use optimize::{
    objective, optimize_alignment, trace_csv, AlignmentConfig, AlignmentProblem, AlignmentResult, AlignmentState,
    KernelRates, Objective, SupervisionView, TraceRow, ViewKind,
};
pub use schedule::cosine_lr;
