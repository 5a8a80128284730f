//! Triangle-bound Gaussian kernels and the differentiable splatting renderer.

pub mod image;
pub mod kernel;
pub mod render;

pub use image::{Image, ImageGrad};
pub use kernel::{
    bind_kernels, globalize, globalize_backward, globalize_with_cache, logit, sigmoid, CloudGrad, GaussianKernel,
    GlobalizeCache, KernelGrad, SplatCloud, TransformGrad, WorldKernel, WorldKernelGrad, SIGMA_MAX, SIGMA_MIN,
};
pub use render::{render, render_backward, render_with_state, RenderOptions, RenderState};

use crate::Vec3;

/// Rotates every world kernel by `degrees` about the vertical axis through `pivot`.
pub fn rotate_scene(world: &[WorldKernel], degrees: f64, pivot: &Vec3) -> Vec<WorldKernel> {
    let rot = crate::geometry::vertical_rotation(degrees);
    world
        .iter()
        .map(|k| WorldKernel {
            mean: rot * (k.mean - pivot) + pivot,
            cov: rot * k.cov * rot.transpose(),
            normal: rot * k.normal,
            ..*k
        })
        .collect()
}
