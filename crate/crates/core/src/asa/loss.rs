use crate::geometry::MeshParams;
use crate::metrics::ssim_with_grad;
use crate::splat::{Image, ImageGrad};
use crate::{Error, Result};

/// `w_l1·mean|a−b| + w_ssim·(1 − SSIM(a, b))` over RGB, with the gradient
/// with respect to `rendered`.
pub fn photometric_loss(rendered: &Image, target: &Image, w_l1: f64, w_ssim: f64) -> Result<(f64, ImageGrad)> {
    if !rendered.same_size(target) {
        return Err(Error::invalid(format!(
            "rendered {}x{} vs target {}x{}",
            rendered.width, rendered.height, target.width, target.height
        )));
    }
    let n = rendered.rgb.len() as f64;
    let mut grad = ImageGrad::zeros(rendered.width, rendered.height);
    let mut l1 = 0.0;
    for ((g, a), b) in grad.rgb.iter_mut().zip(&rendered.rgb).zip(&target.rgb) {
        let d = a - b;
        l1 += d.abs();
        *g = if d > 0.0 {
            w_l1 / n
        } else if d < 0.0 {
            -w_l1 / n
        } else {
            0.0
        };
    }
    let mut loss = w_l1 * l1 / n;
    if w_ssim != 0.0 {
        let (s, g_ssim) = ssim_with_grad(rendered, target)?;
        loss += w_ssim * (1.0 - s);
        for (g, gs) in grad.rgb.iter_mut().zip(g_ssim) {
            *g -= w_ssim * gs;
        }
    }
    Ok((loss, grad))
}

/// `λ·‖φ − φ_orig‖²` and its gradient `2λ(φ − φ_orig)`.
pub fn flame_reg(phi: &MeshParams, phi_orig: &MeshParams, lambda: f64) -> Result<(f64, Vec<f64>)> {
    if phi.len() != phi_orig.len() {
        return Err(Error::invalid(format!(
            "parameter dimensions differ: {} vs {}",
            phi.len(),
            phi_orig.len()
        )));
    }
    let diff: Vec<f64> = phi.0.iter().zip(&phi_orig.0).map(|(a, b)| a - b).collect();
    let value = lambda * diff.iter().map(|d| d * d).sum::<f64>();
    Ok((value, diff.iter().map(|d| 2.0 * lambda * d).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    #[test]
    fn identical_images_have_zero_loss() {
        let a = Image::filled(16, 16, Vec3::new(0.2, 0.5, 0.7), 1.0);
        let (l, g) = photometric_loss(&a, &a, 0.8, 0.2).unwrap();
        assert!(l.abs() < 1e-15);
        assert!(g.rgb.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn black_vs_white_l1() {
        let a = Image::filled(16, 16, Vec3::zeros(), 1.0);
        let b = Image::filled(16, 16, Vec3::repeat(1.0), 1.0);
        assert_eq!(photometric_loss(&a, &b, 1.0, 0.0).unwrap().0, 1.0);
    }

    #[test]
    fn resolution_mismatch() {
        let a = Image::filled(16, 16, Vec3::zeros(), 1.0);
        let b = Image::filled(12, 16, Vec3::zeros(), 1.0);
        assert!(photometric_loss(&a, &b, 0.8, 0.2).is_err());
    }

    #[test]
    fn flame_reg_values() {
        let orig = MeshParams(vec![0.3, -0.2, 0.1]);
        assert_eq!(flame_reg(&orig, &orig, 0.5).unwrap().0, 0.0);
        let phi = MeshParams(vec![1.3, -0.2, 0.1]);
        let (v, g) = flame_reg(&phi, &orig, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!(flame_reg(&phi, &MeshParams(vec![0.0]), 0.5).is_err());
    }
}
