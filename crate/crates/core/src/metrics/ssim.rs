//! Structural similarity with an 11×11 Gaussian window (σ = 1.5), evaluated
//! over valid window positions per channel and averaged, plus its gradient.

use crate::splat::Image;
use crate::{Error, Result};

pub const WINDOW: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

pub fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Single-channel plane.
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn channel(img: &Image, c: usize) -> Plane {
        Plane {
            w: img.width,
            h: img.height,
            data: img.rgb.iter().skip(c).step_by(3).copied().collect(),
        }
    }

    fn map2(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Separable valid correlation: output is `(w-10) × (h-10)`.
    fn filter_valid(&self, k: &[f64; WINDOW]) -> Plane {
        let (ow, oh) = (self.w + 1 - WINDOW, self.h + 1 - WINDOW);
        let mut tmp = vec![0.0; ow * self.h];
        for (row, out) in self.data.chunks_exact(self.w).zip(tmp.chunks_exact_mut(ow)) {
            for (i, &ki) in k.iter().enumerate() {
                for (o, v) in out.iter_mut().zip(&row[i..i + ow]) {
                    *o += ki * v;
                }
            }
        }
        let mut out = vec![0.0; ow * oh];
        for (y, dst) in out.chunks_exact_mut(ow).enumerate() {
            for (i, &ki) in k.iter().enumerate() {
                for (o, v) in dst.iter_mut().zip(&tmp[(y + i) * ow..(y + i + 1) * ow]) {
                    *o += ki * v;
                }
            }
        }
        Plane {
            w: ow,
            h: oh,
            data: out,
        }
    }

    /// Adjoint of [`Plane::filter_valid`]: scatters a valid-size map back to full size.
    fn filter_transpose(&self, k: &[f64; WINDOW], full_w: usize, full_h: usize) -> Plane {
        let ow = self.w;
        let mut tmp = vec![0.0; ow * full_h];
        for (y, src) in self.data.chunks_exact(ow).enumerate() {
            for (i, &ki) in k.iter().enumerate() {
                for (t, v) in tmp[(y + i) * ow..(y + i + 1) * ow].iter_mut().zip(src) {
                    *t += ki * v;
                }
            }
        }
        let mut out = vec![0.0; full_w * full_h];
        for (src, dst) in tmp.chunks_exact(ow).zip(out.chunks_exact_mut(full_w)) {
            for (i, &ki) in k.iter().enumerate() {
                for (o, v) in dst[i..i + ow].iter_mut().zip(src) {
                    *o += ki * v;
                }
            }
        }
        Plane {
            w: full_w,
            h: full_h,
            data: out,
        }
    }
}

fn check(a: &Image, b: &Image) -> Result<()> {
    if !a.same_size(b) {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.width < WINDOW || a.height < WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs images of at least {WINDOW}x{WINDOW}, got {}x{}",
            a.width, a.height
        )));
    }
    Ok(())
}

/// Mean SSIM over channels and valid window positions.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    Ok(ssim_impl(a, b, false)?.0)
}

/// SSIM and its gradient with respect to every RGB value of `a`.
pub fn ssim_with_grad(a: &Image, b: &Image) -> Result<(f64, Vec<f64>)> {
    let (v, g) = ssim_impl(a, b, true)?;
    Ok((v, g.expect("gradient requested")))
}

fn ssim_impl(a: &Image, b: &Image, want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    check(a, b)?;
    let k = gaussian_window();
    let (w, h) = (a.width, a.height);
    let mut total = 0.0;
    let mut grad = want_grad.then(|| vec![0.0; w * h * 3]);
    let positions = ((w + 1 - WINDOW) * (h + 1 - WINDOW)) as f64;
    let norm = 1.0 / (3.0 * positions);
    for c in 0..3 {
        let pa = Plane::channel(a, c);
        let pb = Plane::channel(b, c);
        let mu_a = pa.filter_valid(&k);
        let mu_b = pb.filter_valid(&k);
        let e_aa = pa.map2(&pa, |x, _| x * x).filter_valid(&k);
        let e_bb = pb.map2(&pb, |x, _| x * x).filter_valid(&k);
        let e_ab = pa.map2(&pb, |x, y| x * y).filter_valid(&k);
        let n = mu_a.data.len();
        let mut d_mu = vec![0.0; n];
        let mut d_var = vec![0.0; n];
        let mut d_cov = vec![0.0; n];
        for i in 0..n {
            let (ma, mb) = (mu_a.data[i], mu_b.data[i]);
            let va = e_aa.data[i] - ma * ma;
            let vb = e_bb.data[i] - mb * mb;
            let cov = e_ab.data[i] - ma * mb;
            let a1 = 2.0 * ma * mb + C1;
            let a2 = 2.0 * cov + C2;
            let b1 = ma * ma + mb * mb + C1;
            let b2 = va + vb + C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if want_grad {
                d_mu[i] = (2.0 * mb * a2 / (b1 * b2) - s * 2.0 * ma / b1) * norm;
                d_var[i] = -s / b2 * norm;
                d_cov[i] = 2.0 * a1 / (b1 * b2) * norm;
            }
        }
        if let Some(g) = grad.as_mut() {
            // dS/da_q = Σ_p w(q-p) [S_μ - 2 S_v μa - S_c μb] + 2 a_q Σ_p w S_v + b_q Σ_p w S_c
            let (vw, vh) = (mu_a.w, mu_a.h);
            let constant = Plane {
                w: vw,
                h: vh,
                data: (0..n)
                    .map(|i| d_mu[i] - 2.0 * d_var[i] * mu_a.data[i] - d_cov[i] * mu_b.data[i])
                    .collect(),
            }
            .filter_transpose(&k, w, h);
            let var = Plane {
                w: vw,
                h: vh,
                data: d_var,
            }
            .filter_transpose(&k, w, h);
            let cov = Plane {
                w: vw,
                h: vh,
                data: d_cov,
            }
            .filter_transpose(&k, w, h);
            for q in 0..w * h {
                g[3 * q + c] = constant.data[q] + 2.0 * pa.data[q] * var.data[q] + pb.data[q] * cov.data[q];
            }
        }
    }
    Ok((total * norm, grad))
}
