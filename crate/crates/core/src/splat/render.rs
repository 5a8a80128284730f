//! Tile-based forward and reverse splatting.
//!
//! Each kernel is projected to a 2D Gaussian through the first-order
//! Jacobian of the pinhole projection, dilated by [`DILATION`] px², sorted
//! front-to-back and alpha-composited per pixel. Pixel `(x, y)` samples the
//! image plane at integer coordinates, so the principal point
//! `(width/2, height/2)` falls on a pixel center.
//!
//! The Gaussian falloff is cut at Mahalanobis distance 3 and shifted so it
//! reaches zero continuously at the cut:
//! `g(m) = (exp(-m/2) - exp(-9/2)) / (1 - exp(-9/2))` for `m < 9`.
//!
//! Kernels whose normal faces away from the camera are culled; the normal
//! carries no gradient.
//!
//! A pixel stops compositing once its transmittance drops below
//! [`MIN_TRANSMITTANCE`]; kernels behind that point receive no gradient.
//!
//! Work is split over fixed 16×16 tiles and per-kernel gradients are reduced
//! in tile order, so results do not depend on the thread count.

use rayon::prelude::*;

use super::image::{Image, ImageGrad};
use super::kernel::{WorldKernel, WorldKernelGrad};
use crate::geometry::camera::{Camera, NEAR_PLANE};
use crate::{Mat3, Vec3};

pub const TILE: usize = 16;
/// Variance added to both screen axes of every projected kernel.
pub const DILATION: f64 = 0.3;
/// Squared Mahalanobis cutoff (3σ).
pub const CUTOFF: f64 = 9.0;
/// A pixel stops accumulating once its transmittance falls below this.
pub const MIN_TRANSMITTANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub background: Vec3,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            background: Vec3::repeat(1.0),
        }
    }
}

#[derive(Debug, Clone)]
struct Projected {
    index: usize,
    mean_cam: Vec3,
    u: f64,
    v: f64,
    /// Inverse of the dilated screen covariance, `[q00, q01, q11]`.
    conic: [f64; 3],
    jac: nalgebra::Matrix2x3<f64>,
    cov_cam: Mat3,
    opacity: f64,
    color: Vec3,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

/// Forward-pass state needed by [`RenderState::backward`].
#[derive(Debug, Clone)]
pub struct RenderState {
    camera: Camera,
    options: RenderOptions,
    num_kernels: usize,
    projected: Vec<Projected>,
    /// Per tile, indices into `projected` in front-to-back order.
    tiles: Vec<Vec<u32>>,
    tiles_x: usize,
}

fn falloff_floor() -> f64 {
    (-0.5 * CUTOFF).exp()
}

fn project_kernel(index: usize, k: &WorldKernel, cam: &Camera, rot: &Mat3, pos: &Vec3) -> Option<Projected> {
    if !(k.opacity > 0.0) || k.normal.dot(&(k.mean - pos)) > 0.0 {
        return None;
    }
    let pc = rot * (k.mean - pos);
    if pc.z <= NEAR_PLANE {
        return None;
    }
    let f = cam.focal;
    let (cx, cy) = cam.principal_point();
    let z = pc.z;
    let jac = nalgebra::Matrix2x3::new(f / z, 0.0, -f * pc.x / (z * z), 0.0, f / z, -f * pc.y / (z * z));
    let cov_cam = rot * k.cov * rot.transpose();
    let cov2 = jac * cov_cam * jac.transpose();
    let (p, q, r) = (cov2[(0, 0)] + DILATION, cov2[(0, 1)], cov2[(1, 1)] + DILATION);
    let det = p * r - q * q;
    if !(det > 0.0) {
        return None;
    }
    let mid = 0.5 * (p + r);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    let radius = CUTOFF.sqrt() * lambda_max.sqrt();
    let u = f * pc.x / z + cx;
    let v = f * pc.y / z + cy;
    let (w, h) = (cam.width as f64, cam.height as f64);
    if u + radius < 0.0 || v + radius < 0.0 || u - radius > w - 1.0 || v - radius > h - 1.0 {
        return None;
    }
    Some(Projected {
        index,
        mean_cam: pc,
        u,
        v,
        conic: [r / det, -q / det, p / det],
        jac,
        cov_cam,
        opacity: k.opacity,
        color: k.color,
        x0: (u - radius).ceil().max(0.0) as usize,
        x1: ((u + radius).floor().min(w - 1.0)) as usize,
        y0: (v - radius).ceil().max(0.0) as usize,
        y1: ((v + radius).floor().min(h - 1.0)) as usize,
    })
}

/// Total order used for compositing: depth, then kernel content, so the
/// result does not depend on input order.
fn depth_order(a: &Projected, b: &Projected, world: &[WorldKernel]) -> std::cmp::Ordering {
    let (ka, kb) = (&world[a.index], &world[b.index]);
    a.mean_cam
        .z
        .total_cmp(&b.mean_cam.z)
        .then_with(|| {
            let fa = ka.mean.iter().chain(ka.cov.iter()).chain(ka.color.iter());
            let fb = kb.mean.iter().chain(kb.cov.iter()).chain(kb.color.iter());
            fa.zip(fb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .then_with(|| ka.opacity.total_cmp(&kb.opacity))
}

fn prepare(world: &[WorldKernel], cam: &Camera, options: RenderOptions) -> RenderState {
    let rot = cam.rotation();
    let pos = cam.position();
    let mut projected: Vec<Projected> = world
        .iter()
        .enumerate()
        .filter_map(|(i, k)| project_kernel(i, k, cam, &rot, &pos))
        .collect();
    projected.sort_by(|a, b| depth_order(a, b, world));
    let tiles_x = cam.width.div_ceil(TILE);
    let tiles_y = cam.height.div_ceil(TILE);
    let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
    for (i, p) in projected.iter().enumerate() {
        for ty in p.y0 / TILE..=p.y1 / TILE {
            for tx in p.x0 / TILE..=p.x1 / TILE {
                tiles[ty * tiles_x + tx].push(i as u32);
            }
        }
    }
    RenderState {
        camera: *cam,
        options,
        num_kernels: world.len(),
        projected,
        tiles,
        tiles_x,
    }
}

impl RenderState {
    /// Number of kernels that survived culling.
    pub fn visible(&self) -> usize {
        self.projected.len()
    }

    fn tile_bounds(&self, tile: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (tile % self.tiles_x, tile / self.tiles_x);
        let x0 = tx * TILE;
        let y0 = ty * TILE;
        (
            x0,
            (x0 + TILE).min(self.camera.width),
            y0,
            (y0 + TILE).min(self.camera.height),
        )
    }

    /// Squared Mahalanobis distance and offset of pixel `(x, y)` from `p`.
    #[inline]
    fn distance(p: &Projected, x: usize, y: usize) -> (f64, f64, f64) {
        let dx = x as f64 - p.u;
        let dy = y as f64 - p.v;
        let [a, b, c] = p.conic;
        (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy, dx, dy)
    }

    fn shade_tile(&self, tile: usize) -> Vec<(usize, Vec3, f64)> {
        let (x0, x1, y0, y1) = self.tile_bounds(tile);
        let floor = falloff_floor();
        let norm = 1.0 / (1.0 - floor);
        let list = &self.tiles[tile];
        let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            for x in x0..x1 {
                let mut transmit = 1.0;
                let mut color = Vec3::zeros();
                let mut alpha = 0.0;
                for &pi in list {
                    let p = &self.projected[pi as usize];
                    if x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1 {
                        continue;
                    }
                    let (m, _, _) = Self::distance(p, x, y);
                    if m >= CUTOFF {
                        continue;
                    }
                    let w = p.opacity * ((-0.5 * m).exp() - floor) * norm;
                    color += p.color * (w * transmit);
                    alpha += w * transmit;
                    transmit *= 1.0 - w;
                    if transmit < MIN_TRANSMITTANCE {
                        break;
                    }
                }
                color += self.options.background * transmit;
                out.push((y * self.camera.width + x, color, alpha));
            }
        }
        out
    }

    pub fn image(&self) -> Image {
        let cam = &self.camera;
        let mut img = Image::filled(cam.width, cam.height, Vec3::zeros(), 0.0);
        let shaded: Vec<Vec<(usize, Vec3, f64)>> = (0..self.tiles.len())
            .into_par_iter()
            .map(|t| self.shade_tile(t))
            .collect();
        for tile in shaded {
            for (i, c, a) in tile {
                img.rgb[3 * i..3 * i + 3].copy_from_slice(&[c.x, c.y, c.z]);
                img.alpha[i] = a;
            }
        }
        img.clamp();
        img
    }

    /// Reverse pass: gradients with respect to every input kernel.
    pub fn backward(&self, grad: &ImageGrad) -> Vec<WorldKernelGrad> {
        let per_tile: Vec<Vec<Accum>> = (0..self.tiles.len())
            .into_par_iter()
            .map(|t| self.backward_tile(t, grad))
            .collect();
        let mut accum = vec![Accum::default(); self.projected.len()];
        for (t, tile) in per_tile.iter().enumerate() {
            for (slot, a) in self.tiles[t].iter().zip(tile) {
                accum[*slot as usize].add(a);
            }
        }
        let mut out = vec![WorldKernelGrad::default(); self.num_kernels];
        let cam_rot = self.camera.rotation();
        for (p, a) in self.projected.iter().zip(&accum) {
            out[p.index] = self.chain_kernel(p, a, &cam_rot);
        }
        out
    }

    fn backward_tile(&self, tile: usize, grad: &ImageGrad) -> Vec<Accum> {
        let (x0, x1, y0, y1) = self.tile_bounds(tile);
        let list = &self.tiles[tile];
        let mut acc = vec![Accum::default(); list.len()];
        if list.is_empty() {
            return acc;
        }
        let floor = falloff_floor();
        let norm = 1.0 / (1.0 - floor);
        // (slot, w, transmittance before, m, dx, dy)
        let mut hits: Vec<(usize, f64, f64, f64, f64, f64)> = Vec::with_capacity(list.len());
        let bg = self.options.background;
        for y in y0..y1 {
            for x in x0..x1 {
                let pix = y * self.camera.width + x;
                let g_rgb = Vec3::new(grad.rgb[3 * pix], grad.rgb[3 * pix + 1], grad.rgb[3 * pix + 2]);
                let g_alpha = grad.alpha[pix];
                if g_rgb == Vec3::zeros() && g_alpha == 0.0 {
                    continue;
                }
                hits.clear();
                let mut transmit = 1.0;
                for (slot, &pi) in list.iter().enumerate() {
                    let p = &self.projected[pi as usize];
                    if x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1 {
                        continue;
                    }
                    let (m, dx, dy) = Self::distance(p, x, y);
                    if m >= CUTOFF {
                        continue;
                    }
                    let w = p.opacity * ((-0.5 * m).exp() - floor) * norm;
                    hits.push((slot, w, transmit, m, dx, dy));
                    transmit *= 1.0 - w;
                    if transmit < MIN_TRANSMITTANCE {
                        break;
                    }
                }
                // Composite of everything behind the current kernel, without its transmittance.
                let mut behind_rgb = bg;
                let mut behind_alpha = 0.0;
                for &(slot, w, t, m, dx, dy) in hits.iter().rev() {
                    let p = &self.projected[list[slot] as usize];
                    let a = &mut acc[slot];
                    a.color += g_rgb * (w * t);
                    let g_w = t * (g_rgb.dot(&(p.color - behind_rgb)) + g_alpha * (1.0 - behind_alpha));
                    behind_rgb = p.color * w + behind_rgb * (1.0 - w);
                    behind_alpha = w + behind_alpha * (1.0 - w);
                    a.opacity += g_w * (w / p.opacity);
                    let g_m = g_w * p.opacity * (-0.5 * (-0.5 * m).exp()) * norm;
                    let [qa, qb, qc] = p.conic;
                    a.mean2d[0] += g_m * -2.0 * (qa * dx + qb * dy);
                    a.mean2d[1] += g_m * -2.0 * (qb * dx + qc * dy);
                    a.conic[0] += g_m * dx * dx;
                    a.conic[1] += g_m * dx * dy;
                    a.conic[2] += g_m * dy * dy;
                }
            }
        }
        acc
    }

    fn chain_kernel(&self, p: &Projected, a: &Accum, cam_rot: &Mat3) -> WorldKernelGrad {
        let f = self.camera.focal;
        let [qa, qb, qc] = p.conic;
        let q = nalgebra::Matrix2::new(qa, qb, qb, qc);
        let g_q = nalgebra::Matrix2::new(a.conic[0], a.conic[1], a.conic[1], a.conic[2]);
        let g_cov2 = -(q * g_q * q);
        let jac = &p.jac;
        let g_cov_cam = jac.transpose() * g_cov2 * jac;
        let g_cov = cam_rot.transpose() * g_cov_cam * cam_rot;
        let g_jac = g_cov2 * jac * p.cov_cam * 2.0;

        let (x, y, z) = (p.mean_cam.x, p.mean_cam.y, p.mean_cam.z);
        let z2 = z * z;
        let z3 = z2 * z;
        let g_mean2d = nalgebra::Vector2::new(a.mean2d[0], a.mean2d[1]);
        let mut g_cam = jac.transpose() * g_mean2d;
        g_cam.x += g_jac[(0, 2)] * (-f / z2);
        g_cam.y += g_jac[(1, 2)] * (-f / z2);
        g_cam.z += (g_jac[(0, 0)] + g_jac[(1, 1)]) * (-f / z2)
            + g_jac[(0, 2)] * (2.0 * f * x / z3)
            + g_jac[(1, 2)] * (2.0 * f * y / z3);
        WorldKernelGrad {
            mean: cam_rot.transpose() * g_cam,
            cov: g_cov,
            opacity: a.opacity,
            color: a.color,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    mean2d: [f64; 2],
    conic: [f64; 3],
    opacity: f64,
    color: Vec3,
}

impl Accum {
    fn add(&mut self, o: &Accum) {
        self.mean2d[0] += o.mean2d[0];
        self.mean2d[1] += o.mean2d[1];
        for i in 0..3 {
            self.conic[i] += o.conic[i];
        }
        self.opacity += o.opacity;
        self.color += o.color;
    }
}

/// Forward pass keeping the state for a later reverse pass.
pub fn render_with_state(world: &[WorldKernel], cam: &Camera, options: RenderOptions) -> (Image, RenderState) {
    let state = prepare(world, cam, options);
    (state.image(), state)
}

pub fn render(world: &[WorldKernel], cam: &Camera, options: RenderOptions) -> Image {
    prepare(world, cam, options).image()
}

pub fn render_backward(
    world: &[WorldKernel],
    cam: &Camera,
    options: RenderOptions,
    grad: &ImageGrad,
) -> Vec<WorldKernelGrad> {
    prepare(world, cam, options).backward(grad)
}
