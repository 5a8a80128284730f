//! Mesh-anchored Gaussian splat head avatars whose unobserved back regions are
//! completed with pseudo-supervision from a subject-specific generator.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: Rodrigues rotations, similarity transforms, the linear
//!   blendshape head mesh, triangle frames and orbit cameras.
//! * [`splat`]: triangle-bound Gaussian kernels, their world placement and a
//!   differentiable forward/backward splatting renderer.
//! * [`asa`]: the adaptive spatial alignment optimizer (scale, rotation,
//!   translation and blendshape refinement under photometric loss).
//! * [`oracle`]: the generator interface, the toy latent-conditioned generator,
//!   two-phase hybrid inversion and back-view synthesis.
//! * [`metrics`]: PSNR, SSIM, FID, KID and perceptual score aggregation.
//! * [`pipeline`]: the closed reconstruction/generation loop, configuration,
//!   the bundled synthetic subject and checkpoints.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asa;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod splat;

pub use error::{Error, Result};
pub use geometry::{
    camera_from_orbit, rodrigues_exp, rodrigues_jacobian, Camera, MeshParams, ParametricMesh, Projection,
    RotationVector, SimilarityTransform, TriangleFrame,
};
pub use splat::{GaussianKernel, Image, SplatCloud, WorldKernel};

/// Shared linear-algebra aliases.
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Mat4 = nalgebra::Matrix4<f64>;
