//! Two-phase generator inversion: the latent code first, then the linear map
//! with the latent frozen.
//!
//! Per image the loss is the mean absolute pixel error plus `lambda_grad`
//! times the mean absolute error of Sobel gradient images; the image terms
//! are averaged over the set and `lambda_latent · ‖w‖²` is added once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::GeneratorParams;
use super::hybrid::HybridSet;
use crate::asa::{cosine_lr, AdamState};
use crate::splat::{render_with_state, Image, ImageGrad, RenderOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub steps_w: usize,
    pub steps_theta: usize,
    pub lr_w: f64,
    pub lr_theta: f64,
    pub lambda_latent: f64,
    pub lambda_grad: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            steps_w: 200,
            steps_theta: 100,
            lr_w: 0.05,
            lr_theta: 0.01,
            lambda_latent: 1e-3,
            lambda_grad: 0.5,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_w > 0.0 && self.lr_theta > 0.0) {
            return Err(Error::invalid("inversion learning rates must be positive"));
        }
        if !(self.lambda_latent >= 0.0 && self.lambda_grad >= 0.0) {
            return Err(Error::invalid("inversion loss weights must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Latent,
    Weights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionTraceRow {
    pub phase: Phase,
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub params: GeneratorParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub trace: Vec<InversionTraceRow>,
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean absolute difference of Sobel responses over interior pixels, and its
/// gradient with respect to `rendered`'s RGB values.
pub fn sobel_l1(rendered: &Image, target: &Image) -> (f64, Vec<f64>) {
    let (w, h) = (rendered.width, rendered.height);
    let mut grad = vec![0.0; rendered.rgb.len()];
    if w < 3 || h < 3 {
        return (0.0, grad);
    }
    let count = ((w - 2) * (h - 2) * 3 * 2) as f64;
    let mut total = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            for c in 0..3 {
                for k in [&SOBEL_X, &SOBEL_Y] {
                    let mut d = 0.0;
                    for (dy, row) in k.iter().enumerate() {
                        for (dx, &kv) in row.iter().enumerate() {
                            let i = 3 * ((y + dy - 1) * w + x + dx - 1) + c;
                            d += kv * (rendered.rgb[i] - target.rgb[i]);
                        }
                    }
                    total += d.abs();
                    let s = sign(d) / count;
                    if s != 0.0 {
                        for (dy, row) in k.iter().enumerate() {
                            for (dx, &kv) in row.iter().enumerate() {
                                grad[3 * ((y + dy - 1) * w + x + dx - 1) + c] += s * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    (total / count, grad)
}

/// Image part of the inversion loss for one view, with its gradient.
pub fn inversion_image_loss(rendered: &Image, target: &Image, lambda_grad: f64) -> Result<(f64, ImageGrad)> {
    if !rendered.same_size(target) {
        return Err(Error::invalid("rendered and target images differ in size"));
    }
    let n = rendered.rgb.len() as f64;
    let mut grad = ImageGrad::zeros(rendered.width, rendered.height);
    let mut l1 = 0.0;
    for ((g, r), t) in grad.rgb.iter_mut().zip(&rendered.rgb).zip(&target.rgb) {
        l1 += (r - t).abs();
        *g = sign(r - t) / n;
    }
    let mut loss = l1 / n;
    if lambda_grad > 0.0 {
        let (edge, edge_grad) = sobel_l1(rendered, target);
        loss += lambda_grad * edge;
        for (g, e) in grad.rgb.iter_mut().zip(edge_grad) {
            *g += lambda_grad * e;
        }
    }
    Ok((loss, grad))
}

/// Mean image loss over the set plus the latent penalty, with gradients
/// with respect to every kernel offset (before the latent penalty).
pub fn inversion_objective(g: &GeneratorParams, set: &HybridSet, cfg: &InversionConfig) -> Result<(f64, Vec<f64>)> {
    let m = g.materialize();
    let per_item: Vec<Result<(f64, Vec<f64>)>> = set
        .items
        .par_iter()
        .map(|item| {
            let (img, state) = render_with_state(&m.kernels, &item.camera, RenderOptions::default());
            let (loss, grad) = inversion_image_loss(&img, &item.image, cfg.lambda_grad)?;
            Ok((loss, g.offset_grads(&m, &state.backward(&grad))))
        })
        .collect();
    let n = set.len() as f64;
    let mut loss = 0.0;
    let mut offsets = vec![0.0; m.kernels.len() * super::generator::OFFSETS_PER_KERNEL];
    for r in per_item {
        let (l, og) = r?;
        loss += l / n;
        for (a, b) in offsets.iter_mut().zip(og) {
            *a += b / n;
        }
    }
    loss += cfg.lambda_latent * g.w.iter().map(|x| x * x).sum::<f64>();
    Ok((loss, offsets))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits `w`, then `theta`, to the hybrid set; returns the lowest-loss
/// parameters seen in each phase.
pub fn invert(g0: &GeneratorParams, set: &HybridSet, cfg: &InversionConfig) -> Result<InversionResult> {
    set.validate()?;
    cfg.validate()?;
    g0.validate()?;
    let mut g = g0.clone();
    let mut trace = Vec::new();

    let mut adam = AdamState::new(g.w.len());
    let mut best = (f64::INFINITY, g.w.clone());
    for step in 0..=cfg.steps_w {
        let (loss, og) = inversion_objective(&g, set, cfg)?;
        trace.push(InversionTraceRow {
            phase: Phase::Latent,
            step,
            loss,
        });
        if loss < best.0 {
            best = (loss, g.w.clone());
        }
        if step == cfg.steps_w {
            break;
        }
        let grad: Vec<f64> = g
            .theta
            .iter()
            .zip(&g.w)
            .map(|(row, wk)| dot(row, &og) + 2.0 * cfg.lambda_latent * wk)
            .collect();
        adam.step(&mut g.w, &grad, cosine_lr(step, cfg.steps_w, cfg.lr_w))?;
    }
    let initial_loss = trace[0].loss;
    g.w = best.1;

    let width = g.theta.first().map_or(0, Vec::len).max(1);
    let mut flat: Vec<f64> = g.theta.concat();
    let mut adam = AdamState::new(flat.len());
    let mut best = (best.0, flat.clone());
    let mut offsets = inversion_objective(&g, set, cfg)?.1;
    for step in 0..cfg.steps_theta {
        let grad: Vec<f64> = g.w.iter().flat_map(|&wk| offsets.iter().map(move |o| wk * o)).collect();
        adam.step(&mut flat, &grad, cosine_lr(step, cfg.steps_theta, cfg.lr_theta))?;
        for (row, chunk) in g.theta.iter_mut().zip(flat.chunks_exact(width)) {
            row.copy_from_slice(chunk);
        }
        let (loss, og) = inversion_objective(&g, set, cfg)?;
        offsets = og;
        trace.push(InversionTraceRow {
            phase: Phase::Weights,
            step: step + 1,
            loss,
        });
        if loss < best.0 {
            best = (loss, flat.clone());
        }
    }
    for (row, chunk) in g.theta.iter_mut().zip(best.1.chunks_exact(width)) {
        row.copy_from_slice(chunk);
    }
    Ok(InversionResult {
        params: g,
        initial_loss,
        final_loss: best.0,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, k: f64) -> Image {
        let mut img = Image::filled(w, h, crate::Vec3::zeros(), 1.0);
        for (i, v) in img.rgb.iter_mut().enumerate() {
            *v = ((i as f64 * k).sin() + 1.0) / 2.0;
        }
        img
    }

    #[test]
    fn sobel_of_identical_images_is_zero() {
        let a = ramp(9, 7, 0.37);
        let (v, g) = sobel_l1(&a, &a);
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn image_loss_gradient_matches_finite_differences() {
        let a = ramp(8, 8, 0.37);
        let b = ramp(8, 8, 0.53);
        let (_, grad) = inversion_image_loss(&a, &b, 0.5).unwrap();
        let h = 1e-7;
        for i in [0, 17, 50, 101, 190] {
            let mut p = a.clone();
            p.rgb[i] += h;
            let mut m = a.clone();
            m.rgb[i] -= h;
            let fd = (inversion_image_loss(&p, &b, 0.5).unwrap().0 - inversion_image_loss(&m, &b, 0.5).unwrap().0)
                / (2.0 * h);
            assert!((fd - grad.rgb[i]).abs() < 1e-6, "pixel {i}: {fd} vs {}", grad.rgb[i]);
        }
    }

    #[test]
    fn tiny_images_have_no_edge_term() {
        let a = ramp(2, 2, 0.1);
        let b = ramp(2, 2, 0.9);
        assert_eq!(sobel_l1(&a, &b).0, 0.0);
    }
}
