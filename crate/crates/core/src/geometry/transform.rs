use serde::{Deserialize, Serialize};

use super::rotation::{exp_unchecked, RotationVector};
use crate::{Error, Mat3, Mat4, Result, Vec3};

/// Learnable similarity-style transform `T = [R·diag(s) t; 0ᵀ 1]`.
///
/// Scale, rotation and translation are stored as separate low-dimensional
/// parameter vectors so each can be optimized on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: Vec3,
    pub rotation: RotationVector,
    pub translation: Vec3,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: Vec3::new(1.0, 1.0, 1.0),
            rotation: RotationVector::zero(),
            translation: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!(
                "scale components must be positive, got {:?}",
                self.scale
            )));
        }
        if !self.rotation.is_finite() || !self.translation.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("non-finite transform parameters"));
        }
        Ok(())
    }

    /// Upper-left `R·diag(s)` block.
    pub fn linear_part(&self) -> Mat3 {
        exp_unchecked(&self.rotation.0) * Mat3::from_diagonal(&self.scale)
    }

    pub fn to_matrix(&self) -> Result<Mat4> {
        to_matrix(self)
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.linear_part() * p + self.translation
    }
}

pub fn to_matrix(xf: &SimilarityTransform) -> Result<Mat4> {
    xf.validate()?;
    let mut m = Mat4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&xf.linear_part());
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&xf.translation);
    Ok(m)
}

/// Applies an affine 4×4 to every vertex: `v' = (T·[v;1]).xyz`.
pub fn apply_transform(t: &Mat4, vertices: &[Vec3]) -> Vec<Vec3> {
    let linear: Mat3 = t.fixed_view::<3, 3>(0, 0).into_owned();
    let shift: Vec3 = t.fixed_view::<3, 1>(0, 3).into_owned();
    if linear == Mat3::identity() && shift == Vec3::zeros() {
        return vertices.to_vec();
    }
    vertices.iter().map(|v| linear * v + shift).collect()
}
