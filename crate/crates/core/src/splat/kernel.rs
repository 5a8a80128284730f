//! Triangle-bound Gaussian kernels and their placement in world space.

use serde::{Deserialize, Serialize};

use crate::geometry::frames::{triangle_frame, triangle_frame_backward, TriangleFrame};
use crate::geometry::rotation::{exp_unchecked, matrix_grad_to_vector};
use crate::geometry::{RotationVector, SimilarityTransform};
use crate::{Error, Mat3, Result, Vec3};

/// Bounds on `exp(log_scale)`, in units of the triangle scale.
pub const SIGMA_MIN: f64 = 1e-3;
pub const SIGMA_MAX: f64 = 10.0;

pub const INIT_OPACITY: f64 = 0.95;
pub const INIT_SCALE: f64 = 0.7;
pub const INIT_COLOR: f64 = 0.5;

/// A kernel in the local frame of its triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    /// Offset from the triangle center, in units of the triangle scale.
    pub mean: Vec3,
    pub log_scale: Vec3,
    pub rotation: RotationVector,
    pub opacity_logit: f64,
    pub color: Vec3,
}

impl Default for GaussianKernel {
    fn default() -> Self {
        GaussianKernel {
            mean: Vec3::zeros(),
            log_scale: Vec3::repeat(INIT_SCALE.ln()),
            rotation: RotationVector::zero(),
            opacity_logit: logit(INIT_OPACITY),
            color: Vec3::repeat(INIT_COLOR),
        }
    }
}

impl GaussianKernel {
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    /// Clamps scales and color into their valid ranges.
    pub fn project_constraints(&mut self) {
        let (lo, hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
        self.log_scale.iter_mut().for_each(|s| *s = s.clamp(lo, hi));
        self.color.iter_mut().for_each(|c| *c = c.clamp(0.0, 1.0));
        self.rotation = self.rotation.canonical();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplatCloud {
    pub kernels: Vec<GaussianKernel>,
    /// Triangle index of every kernel.
    pub binding: Vec<usize>,
}

/// A kernel after mesh deformation and the alignment transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldKernel {
    pub mean: Vec3,
    pub cov: Mat3,
    pub opacity: f64,
    pub color: Vec3,
    /// Outward normal of the bound triangle; kernels facing away from the
    /// camera are culled. Zero disables culling.
    #[serde(default)]
    pub normal: Vec3,
}

/// Gradients on the world-space fields; `cov` uses the full-matrix
/// convention (entry `(i, j)` is `∂L/∂Σᵢⱼ` treating entries as independent).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldKernelGrad {
    pub mean: Vec3,
    pub cov: Mat3,
    pub opacity: f64,
    pub color: Vec3,
}

/// Gradients on the local kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelGrad {
    pub mean: Vec3,
    pub log_scale: Vec3,
    pub rotation: Vec3,
    pub opacity_logit: f64,
    pub color: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransformGrad {
    pub scale: Vec3,
    pub rotation: Vec3,
    pub translation: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudGrad {
    pub kernels: Vec<KernelGrad>,
    pub transform: TransformGrad,
    /// Gradient on the untransformed mesh vertices.
    pub vertices: Vec<Vec3>,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl SplatCloud {
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn validate(&self, num_triangles: usize) -> Result<()> {
        if self.binding.len() != self.kernels.len() {
            return Err(Error::invalid("binding length differs from kernel count"));
        }
        if let Some(bad) = self.binding.iter().find(|&&t| t >= num_triangles) {
            return Err(Error::invalid(format!(
                "kernel bound to triangle {bad}, mesh has {num_triangles}"
            )));
        }
        Ok(())
    }
}

/// Attaches `per_triangle` default kernels to every face.
pub fn bind_kernels(vertices: &[crate::Vec3], triangles: &[[usize; 3]], per_triangle: usize) -> Result<SplatCloud> {
    if per_triangle == 0 {
        return Err(Error::invalid("need at least one kernel per triangle"));
    }
    if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
        return Err(Error::invalid(format!("triangle {t:?} indexes past the vertex list")));
    }
    let binding: Vec<usize> = (0..triangles.len())
        .flat_map(|t| std::iter::repeat(t).take(per_triangle))
        .collect();
    Ok(SplatCloud {
        kernels: vec![GaussianKernel::default(); binding.len()],
        binding,
    })
}

/// Intermediate values kept for [`globalize_backward`].
#[derive(Debug, Clone)]
pub struct GlobalizeCache {
    pub transformed: Vec<Vec3>,
    pub frames: Vec<TriangleFrame>,
}

pub fn globalize(
    cloud: &SplatCloud,
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    xf: &SimilarityTransform,
) -> Result<Vec<WorldKernel>> {
    Ok(globalize_with_cache(cloud, vertices, triangles, xf)?.0)
}

pub fn globalize_with_cache(
    cloud: &SplatCloud,
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    xf: &SimilarityTransform,
) -> Result<(Vec<WorldKernel>, GlobalizeCache)> {
    xf.validate()?;
    cloud.validate(triangles.len())?;
    let linear = xf.linear_part();
    let transformed: Vec<Vec3> = if *xf == SimilarityTransform::identity() {
        vertices.to_vec()
    } else {
        vertices.iter().map(|v| linear * v + xf.translation).collect()
    };
    let frames: Vec<TriangleFrame> = triangles
        .iter()
        .map(|t| triangle_frame(&transformed[t[0]], &transformed[t[1]], &transformed[t[2]]))
        .collect();
    let world = cloud
        .kernels
        .iter()
        .zip(&cloud.binding)
        .map(|(k, &tri)| place_kernel(k, &frames[tri]))
        .collect();
    Ok((world, GlobalizeCache { transformed, frames }))
}

fn place_kernel(k: &GaussianKernel, frame: &TriangleFrame) -> WorldKernel {
    let a = frame.rotation * exp_unchecked(&k.rotation.0) * frame.scale;
    let variances = k.log_scale.map(|s| (2.0 * s).exp());
    WorldKernel {
        mean: frame.center + frame.rotation * k.mean * frame.scale,
        cov: a * Mat3::from_diagonal(&variances) * a.transpose(),
        opacity: if frame.degenerate { 0.0 } else { k.opacity() },
        color: k.color,
        normal: if frame.degenerate {
            Vec3::zeros()
        } else {
            frame.rotation.column(1).into()
        },
    }
}

/// Chains world-kernel gradients back to the local kernel parameters, the
/// transform parameters and the untransformed mesh vertices.
pub fn globalize_backward(
    cloud: &SplatCloud,
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    xf: &SimilarityTransform,
    cache: &GlobalizeCache,
    world_grads: &[WorldKernelGrad],
) -> CloudGrad {
    let mut frame_grads = vec![(Vec3::zeros(), Mat3::zeros(), 0.0); triangles.len()];
    let mut kernel_grads = Vec::with_capacity(cloud.len());
    for ((k, &tri), g) in cloud.kernels.iter().zip(&cloud.binding).zip(world_grads) {
        let frame = &cache.frames[tri];
        if frame.degenerate {
            kernel_grads.push(KernelGrad {
                color: g.color,
                ..Default::default()
            });
            frame_grads[tri].0 += g.mean;
            continue;
        }
        let sigma = frame.scale;
        let local_rot = exp_unchecked(&k.rotation.0);
        let variances = k.log_scale.map(|s| (2.0 * s).exp());
        let d = Mat3::from_diagonal(&variances);
        let a = frame.rotation * local_rot * sigma;

        // Σ = A D Aᵀ
        let g_cov = (g.cov + g.cov.transpose()) * 0.5;
        let g_a = g_cov * a * d * 2.0;
        let inner = a.transpose() * g_cov * a;
        let g_log_scale = Vec3::from_fn(|i, _| 2.0 * variances[i] * inner[(i, i)]);
        let frame_local = frame.rotation * local_rot;
        let mut g_sigma = g_a.component_mul(&frame_local).sum();
        let mut g_frame_rot = g_a * local_rot.transpose() * sigma;
        let g_local_rot = frame.rotation.transpose() * g_a * sigma;

        // μ = p + σ R μ_local
        let r_mu = frame.rotation * k.mean;
        g_sigma += g.mean.dot(&r_mu);
        g_frame_rot += g.mean * k.mean.transpose() * sigma;
        let g_mean_local = frame.rotation.transpose() * g.mean * sigma;

        let alpha = k.opacity();
        kernel_grads.push(KernelGrad {
            mean: g_mean_local,
            log_scale: g_log_scale,
            rotation: matrix_grad_to_vector(&k.rotation.0, &g_local_rot),
            opacity_logit: g.opacity * alpha * (1.0 - alpha),
            color: g.color,
        });
        let fg = &mut frame_grads[tri];
        fg.0 += g.mean;
        fg.1 += g_frame_rot;
        fg.2 += g_sigma;
    }

    let mut g_transformed = vec![Vec3::zeros(); vertices.len()];
    for (t, (tri, (gc, gr, gs))) in triangles.iter().zip(&frame_grads).enumerate() {
        if *gc == Vec3::zeros() && *gr == Mat3::zeros() && *gs == 0.0 {
            continue;
        }
        let [a, b, c] = tri.map(|i| cache.transformed[i]);
        let gv = triangle_frame_backward(&a, &b, &c, &cache.frames[t], gc, gr, *gs);
        for (i, g) in tri.iter().zip(gv) {
            g_transformed[*i] += g;
        }
    }

    // v' = R diag(s) v + t
    let rot = exp_unchecked(&xf.rotation.0);
    let linear = rot * Mat3::from_diagonal(&xf.scale);
    let mut g_linear = Mat3::zeros();
    let mut g_translation = Vec3::zeros();
    for (v, g) in vertices.iter().zip(&g_transformed) {
        g_linear += g * v.transpose();
        g_translation += g;
    }
    let g_scale = Vec3::from_fn(|i, _| rot.column(i).dot(&g_linear.column(i)));
    let g_rot = g_linear * Mat3::from_diagonal(&xf.scale);
    let g_vertices = g_transformed.iter().map(|g| linear.transpose() * g).collect();
    CloudGrad {
        kernels: kernel_grads,
        transform: TransformGrad {
            scale: g_scale,
            rotation: matrix_grad_to_vector(&xf.rotation.0, &g_rot),
            translation: g_translation,
        },
        vertices: g_vertices,
    }
}
