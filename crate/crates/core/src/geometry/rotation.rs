//! Axis-angle rotations through the Rodrigues exponential map.

use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

/// Below this angle the Rodrigues coefficients are evaluated by Taylor series.
pub const TAYLOR_THRESHOLD: f64 = 1e-4;

/// Rotation vector `r`: the axis scaled by the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RotationVector(pub Vec3);

impl RotationVector {
    pub fn zero() -> Self {
        RotationVector(Vec3::zeros())
    }

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        RotationVector(Vec3::new(x, y, z))
    }

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        RotationVector(axis.normalize() * angle)
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// An equivalent rotation vector with norm below π when this one exceeds π.
    pub fn canonical(&self) -> Self {
        let theta = self.angle();
        if theta <= std::f64::consts::PI {
            return *self;
        }
        let turns = (theta / std::f64::consts::TAU).round();
        RotationVector(self.0 * (1.0 - turns * std::f64::consts::TAU / theta))
    }

    pub fn to_matrix(&self) -> Result<Mat3> {
        rodrigues_exp(self)
    }
}

/// Skew-symmetric cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `(sinθ/θ, (1-cosθ)/θ²)`.
fn coefficients(theta: f64) -> (f64, f64) {
    if theta < TAYLOR_THRESHOLD {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    }
}

/// Derivatives of the coefficients divided by θ: `(A'(θ)/θ, B'(θ)/θ)`.
fn coefficient_slopes(theta: f64) -> (f64, f64) {
    if theta < TAYLOR_THRESHOLD {
        let t2 = theta * theta;
        (-1.0 / 3.0 + t2 / 30.0, -1.0 / 12.0 + t2 / 180.0)
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        (
            (theta * c - s) / (t2 * theta),
            (theta * s - 2.0 * (1.0 - c)) / (t2 * t2),
        )
    }
}

pub(crate) fn exp_unchecked(r: &Vec3) -> Mat3 {
    let (a, b) = coefficients(r.norm());
    let k = skew(r);
    Mat3::identity() + k * a + k * k * b
}

/// `R = I + (sinθ/θ)[r]ₓ + ((1-cosθ)/θ²)[r]ₓ²`.
pub fn rodrigues_exp(r: &RotationVector) -> Result<Mat3> {
    if !r.is_finite() {
        return Err(Error::invalid(format!("non-finite rotation vector {:?}", r.0)));
    }
    Ok(exp_unchecked(&r.0))
}

pub(crate) fn jacobian_unchecked(r: &Vec3, v: &Vec3) -> Mat3 {
    let theta = r.norm();
    let (a, b) = coefficients(theta);
    let (da, db) = coefficient_slopes(theta);
    let rxv = r.cross(v);
    let rxrxv = r.cross(&rxv);
    // d(r×v)/dr = -[v]ₓ ; d(r×(r×v))/dr = (r·v)I + r vᵀ - 2 v rᵀ
    let d_rxrxv = Mat3::identity() * r.dot(v) + r * v.transpose() - v * r.transpose() * 2.0;
    -skew(v) * a + rxv * (r.transpose() * da) + d_rxrxv * b + rxrxv * (r.transpose() * db)
}

/// Jacobian of `rodrigues_exp(r) * v` with respect to `r`; column `j` is `∂(R v)/∂r_j`.
pub fn rodrigues_jacobian(r: &RotationVector, v: &Vec3) -> Result<Mat3> {
    if !r.is_finite() || !v.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("non-finite input to rodrigues_jacobian"));
    }
    Ok(jacobian_unchecked(&r.0, v))
}

/// Backpropagates a gradient on the matrix entries of `rodrigues_exp(r)` to `r`.
pub(crate) fn matrix_grad_to_vector(r: &Vec3, grad_matrix: &Mat3) -> Vec3 {
    let mut g = Vec3::zeros();
    for i in 0..3 {
        let jac = jacobian_unchecked(r, &Vec3::ith(i, 1.0));
        g += jac.transpose() * grad_matrix.column(i);
    }
    g
}

/// Angle in radians of the rotation `R`, recovered from its trace.
pub fn rotation_angle(rot: &Mat3) -> f64 {
    ((rot.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Rotation built from a unit quaternion, independent of the Rodrigues path.
    fn quaternion_rotation(r: &Vec3) -> Mat3 {
        let theta = r.norm();
        let axis = r / theta;
        let (s, w) = (theta / 2.0).sin_cos();
        let (x, y, z) = (axis.x * s, axis.y * s, axis.z * s);
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    #[test]
    fn zero_rotation_is_identity() {
        assert_eq!(rodrigues_exp(&RotationVector::zero()).unwrap(), Mat3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let rot = rodrigues_exp(&RotationVector::new(0.0, 0.0, FRAC_PI_2)).unwrap();
        assert_relative_eq!(rot * Vec3::x(), Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn matches_quaternion_oracle_and_inverse() {
        let r = Vec3::new(0.3, -0.1, 0.2);
        let rot = rodrigues_exp(&RotationVector(r)).unwrap();
        assert_relative_eq!(rot, quaternion_rotation(&r), epsilon = 1e-14);
        let inv = rodrigues_exp(&RotationVector(-r)).unwrap();
        assert_relative_eq!(rot.transpose(), inv, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(rodrigues_exp(&RotationVector::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(rodrigues_jacobian(&RotationVector::zero(), &Vec3::new(f64::INFINITY, 0.0, 0.0)).is_err());
    }

    #[test]
    fn jacobian_at_identity_is_negative_skew() {
        let jac = rodrigues_jacobian(&RotationVector::zero(), &Vec3::x()).unwrap();
        let expected = Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0);
        assert_eq!(jac, expected);
    }

    #[test]
    fn taylor_branch_is_continuous() {
        let below = Vec3::new(0.0, 0.0, TAYLOR_THRESHOLD * 0.999);
        let above = Vec3::new(0.0, 0.0, TAYLOR_THRESHOLD * 1.001);
        let diff = exp_unchecked(&below) - exp_unchecked(&above);
        assert!(diff.norm() < 1e-6);
        let jdiff = jacobian_unchecked(&below, &Vec3::x()) - jacobian_unchecked(&above, &Vec3::x());
        assert!(jdiff.norm() < 1e-6);
    }

    #[test]
    fn canonical_preserves_rotation() {
        let r = RotationVector::new(0.0, 3.5, 1.0);
        let c = r.canonical();
        assert!(c.angle() < PI);
        assert_relative_eq!(rodrigues_exp(&r).unwrap(), rodrigues_exp(&c).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn angle_recovery() {
        let rot = rodrigues_exp(&RotationVector::new(0.0, 0.4, 0.0)).unwrap();
        assert_relative_eq!(rotation_angle(&rot), 0.4, epsilon = 1e-12);
    }
}
