//! Pseudo-supervision: the toy latent generator, hybrid inversion and
//! back-view synthesis.

pub mod cameras;
pub mod generator;
pub mod hybrid;
pub mod invert;
pub mod synth;

pub use cameras::{back_azimuths, sample_back_cameras, CameraSampling, BACK_AZIMUTH_MAX, BACK_AZIMUTH_MIN};
pub use generator::{
    generate, toy_generator, GeneratorParams, Materialized, DEFAULT_LATENT_DIM, GENERATOR_FORMAT_VERSION,
    OFFSETS_PER_KERNEL,
};
pub use hybrid::{build_hybrid_set, HybridItem, HybridSet, Origin};
pub use invert::{
    inversion_image_loss, inversion_objective, invert, sobel_l1, InversionConfig, InversionResult, InversionTraceRow,
    Phase,
};
pub use synth::{synthesize_back_views, RefinementHook};
