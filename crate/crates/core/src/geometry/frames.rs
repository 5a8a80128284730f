//! Per-triangle local frames that kernels are bound to.

use serde::{Deserialize, Serialize};

use super::mesh::EPS_AREA;
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleFrame {
    /// Vertex mean.
    pub center: Vec3,
    /// Columns: normalized first edge, unit normal, their cross product.
    pub rotation: Mat3,
    /// Square root of the triangle area.
    pub scale: f64,
    pub degenerate: bool,
}

pub fn triangle_frame(a: &Vec3, b: &Vec3, c: &Vec3) -> TriangleFrame {
    let center = (a + b + c) / 3.0;
    let e1 = b - a;
    let e2 = c - a;
    let normal = e1.cross(&e2);
    let area = 0.5 * normal.norm();
    let e1_len = e1.norm();
    if !(area >= EPS_AREA) || !(e1_len > 0.0) {
        return TriangleFrame {
            center,
            rotation: Mat3::identity(),
            scale: area.max(0.0).sqrt(),
            degenerate: true,
        };
    }
    let tangent = e1 / e1_len;
    let n = normal / (2.0 * area);
    let bitangent = tangent.cross(&n);
    TriangleFrame {
        center,
        rotation: Mat3::from_columns(&[tangent, n, bitangent]),
        scale: area.sqrt(),
        degenerate: false,
    }
}

pub fn triangle_frames(vertices: &[Vec3], triangles: &[[usize; 3]]) -> Vec<TriangleFrame> {
    triangles
        .iter()
        .map(|t| triangle_frame(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]))
        .collect()
}

/// Reverse pass of [`triangle_frame`]: gradients on (center, rotation, scale)
/// mapped to the three vertex positions.
pub fn triangle_frame_backward(
    a: &Vec3,
    b: &Vec3,
    c: &Vec3,
    frame: &TriangleFrame,
    grad_center: &Vec3,
    grad_rotation: &Mat3,
    grad_scale: f64,
) -> [Vec3; 3] {
    let share = grad_center / 3.0;
    if frame.degenerate {
        return [share, share, share];
    }
    let e1 = b - a;
    let e2 = c - a;
    let cross = e1.cross(&e2);
    let cross_len = cross.norm();
    let e1_len = e1.norm();
    let tangent: Vec3 = frame.rotation.column(0).into();
    let normal: Vec3 = frame.rotation.column(1).into();

    let g_bitangent: Vec3 = grad_rotation.column(2).into();
    // bitangent = tangent × normal
    let g_tangent = Vec3::from(grad_rotation.column(0)) + normal.cross(&g_bitangent);
    let g_normal = Vec3::from(grad_rotation.column(1)) + g_bitangent.cross(&tangent);

    let mut g_e1 = (g_tangent - tangent * tangent.dot(&g_tangent)) / e1_len;
    // scale = sqrt(|cross| / 2)
    let mut g_cross = (g_normal - normal * normal.dot(&g_normal)) / cross_len;
    g_cross += cross * (grad_scale / (4.0 * frame.scale * cross_len));

    g_e1 += e2.cross(&g_cross);
    let g_e2 = g_cross.cross(&e1);
    [share - g_e1 - g_e2, share + g_e1, share + g_e2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation::exp_unchecked;
    use approx::assert_relative_eq;

    #[test]
    fn unit_right_triangle() {
        let f = triangle_frame(&Vec3::zeros(), &Vec3::x(), &Vec3::y());
        assert_relative_eq!(f.center, Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(Vec3::from(f.rotation.column(1)), Vec3::z(), epsilon = 1e-15);
        assert_relative_eq!(f.scale, 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(!f.degenerate);
        assert_relative_eq!(f.rotation.determinant(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rigid_equivariance() {
        let (a, b, c) = (
            Vec3::new(0.1, -0.2, 0.3),
            Vec3::new(0.9, 0.1, 0.2),
            Vec3::new(0.2, 0.8, -0.1),
        );
        let rot = exp_unchecked(&Vec3::new(0.4, -0.7, 0.2));
        let t = Vec3::new(1.0, 2.0, -3.0);
        let f = triangle_frame(&a, &b, &c);
        let g = triangle_frame(&(rot * a + t), &(rot * b + t), &(rot * c + t));
        assert_relative_eq!(g.rotation, rot * f.rotation, epsilon = 1e-12);
        assert_relative_eq!(g.center, rot * f.center + t, epsilon = 1e-12);
        assert_relative_eq!(g.scale, f.scale, epsilon = 1e-12);
    }

    #[test]
    fn uniform_scale_doubles_sigma() {
        let (a, b, c) = (
            Vec3::new(0.1, 0.0, 0.3),
            Vec3::new(1.0, 0.1, 0.0),
            Vec3::new(0.0, 1.0, 0.2),
        );
        let f = triangle_frame(&a, &b, &c);
        let g = triangle_frame(&(a * 2.0), &(b * 2.0), &(c * 2.0));
        assert_relative_eq!(g.scale, 2.0 * f.scale, epsilon = 1e-12);
        assert_relative_eq!(g.rotation, f.rotation, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_falls_back_to_identity() {
        let f = triangle_frame(&Vec3::zeros(), &Vec3::x(), &(Vec3::x() * 2.0));
        assert!(f.degenerate);
        assert_eq!(f.rotation, Mat3::identity());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let verts = [
            Vec3::new(0.1, -0.2, 0.3),
            Vec3::new(0.9, 0.1, 0.2),
            Vec3::new(0.2, 0.8, -0.1),
        ];
        // Scalar probe L = <Gc, center> + <GR, R> + gs * scale.
        let gc = Vec3::new(0.3, -0.5, 0.7);
        let gr = Mat3::new(0.2, -0.1, 0.4, 0.5, 0.3, -0.6, -0.2, 0.9, 0.1);
        let gs = -0.8;
        let loss = |v: &[Vec3; 3]| {
            let f = triangle_frame(&v[0], &v[1], &v[2]);
            gc.dot(&f.center) + gr.component_mul(&f.rotation).sum() + gs * f.scale
        };
        let f = triangle_frame(&verts[0], &verts[1], &verts[2]);
        let grads = triangle_frame_backward(&verts[0], &verts[1], &verts[2], &f, &gc, &gr, gs);
        let h = 1e-6;
        for vi in 0..3 {
            for axis in 0..3 {
                let mut p = verts;
                p[vi][axis] += h;
                let mut m = verts;
                m[vi][axis] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                assert_relative_eq!(grads[vi][axis], fd, epsilon = 1e-7);
            }
        }
    }
}
