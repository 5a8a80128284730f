//! The latent-conditioned toy generator: a template splat scene whose kernel
//! means and colors are offset by a linear map of a latent code.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Camera;
use crate::splat::{render, Image, RenderOptions, WorldKernel, WorldKernelGrad};
use crate::{Error, Result, Vec3};

pub const DEFAULT_LATENT_DIM: usize = 16;
/// Offsets per kernel: three for the mean, three for the color.
pub const OFFSETS_PER_KERNEL: usize = 6;
pub const GENERATOR_FORMAT_VERSION: u64 = 1;

/// Latent code `w`, linear map `theta` (one row of length 6·K per latent
/// dimension) and the template kernels it offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub w: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub template: Vec<WorldKernel>,
}

/// Where a generated kernel's color was clamped into [0, 1].
#[derive(Debug, Clone)]
pub struct Materialized {
    pub kernels: Vec<WorldKernel>,
    /// Per kernel and channel: true if the unclamped color was inside [0, 1].
    pub color_active: Vec<[bool; 3]>,
}

impl GeneratorParams {
    pub fn latent_dim(&self) -> usize {
        self.w.len()
    }

    pub fn num_kernels(&self) -> usize {
        self.template.len()
    }

    pub fn validate(&self) -> Result<()> {
        let width = OFFSETS_PER_KERNEL * self.template.len();
        if self.theta.len() != self.w.len() {
            return Err(Error::invalid(format!(
                "linear map has {} rows for a {}-dimensional latent",
                self.theta.len(),
                self.w.len()
            )));
        }
        if let Some(row) = self.theta.iter().find(|r| r.len() != width) {
            return Err(Error::invalid(format!(
                "linear map row has {} entries, expected {width}",
                row.len()
            )));
        }
        let finite = self.w.iter().chain(self.theta.iter().flatten()).all(|x| x.is_finite())
            && self.template.iter().all(|k| {
                k.mean
                    .iter()
                    .chain(k.cov.iter())
                    .chain(k.color.iter())
                    .all(|x| x.is_finite())
                    && k.opacity.is_finite()
            });
        if !finite {
            return Err(Error::invalid("generator parameters contain non-finite values"));
        }
        Ok(())
    }

    /// Per-kernel offsets `thetaᵀ w`, six entries per kernel.
    pub fn offsets(&self) -> Vec<f64> {
        let mut out = vec![0.0; OFFSETS_PER_KERNEL * self.template.len()];
        for (row, &wk) in self.theta.iter().zip(&self.w) {
            if wk == 0.0 {
                continue;
            }
            for (o, t) in out.iter_mut().zip(row) {
                *o += wk * t;
            }
        }
        out
    }

    pub fn materialize(&self) -> Materialized {
        let offsets = self.offsets();
        let mut color_active = Vec::with_capacity(self.template.len());
        let kernels = self
            .template
            .iter()
            .zip(offsets.chunks_exact(OFFSETS_PER_KERNEL))
            .map(|(k, o)| {
                let raw = k.color + Vec3::new(o[3], o[4], o[5]);
                color_active.push([0, 1, 2].map(|c| (0.0..=1.0).contains(&raw[c])));
                WorldKernel {
                    mean: k.mean + Vec3::new(o[0], o[1], o[2]),
                    color: raw.map(|c| c.clamp(0.0, 1.0)),
                    ..*k
                }
            })
            .collect();
        Materialized { kernels, color_active }
    }

    /// Chains world-kernel gradients to the six offsets of every kernel.
    pub fn offset_grads(&self, m: &Materialized, grads: &[WorldKernelGrad]) -> Vec<f64> {
        let mut out = Vec::with_capacity(OFFSETS_PER_KERNEL * grads.len());
        for (g, active) in grads.iter().zip(&m.color_active) {
            out.extend(g.mean.iter());
            out.extend((0..3).map(|c| if active[c] { g.color[c] } else { 0.0 }));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GeneratorFile {
            format_version: GENERATOR_FORMAT_VERSION,
            generator: self.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let version: VersionProbe = serde_json::from_str(text)
            .map_err(|e| Error::parse("generator checkpoint", json_offset(text, &e), e.to_string()))?;
        if version.format_version != GENERATOR_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version.format_version,
                supported: GENERATOR_FORMAT_VERSION,
            });
        }
        let doc: GeneratorFile = serde_json::from_str(text)
            .map_err(|e| Error::parse("generator checkpoint", json_offset(text, &e), e.to_string()))?;
        doc.generator.validate()?;
        Ok(doc.generator)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct GeneratorFile {
    format_version: u64,
    generator: GeneratorParams,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

/// Byte offset of a serde_json error position.
pub(crate) fn json_offset(text: &str, err: &serde_json::Error) -> usize {
    let (line, column) = (err.line(), err.column());
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

/// Renders the template offset by `thetaᵀ w` over a white background.
pub fn generate(g: &GeneratorParams, cam: &Camera) -> Result<Image> {
    g.validate()?;
    cam.validate()?;
    Ok(render(&g.materialize().kernels, cam, RenderOptions::default()))
}

/// Azimuth (degrees, 0 at +z, 90 at +x) and elevation (radians) of `d`.
fn direction_angles(d: &Vec3) -> (f64, f64) {
    (d.x.atan2(d.z).to_degrees(), d.y.clamp(-1.0, 1.0).asin())
}

fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + 180.0).rem_euclid(360.0) - 180.0
}

/// Builds a toy generator over `template`: latent dimension `k` shifts the
/// colors (and, slightly, the positions along the radial direction) of the
/// kernels in an azimuthal sector centred on `k · 360° / latent_dim`.
pub fn toy_generator(
    template: Vec<WorldKernel>,
    center: Vec3,
    latent_dim: usize,
    seed: u64,
) -> Result<GeneratorParams> {
    if latent_dim == 0 {
        return Err(Error::invalid("latent dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sector_width = (360.0 / latent_dim as f64).max(20.0) * 1.5;
    let theta = (0..latent_dim)
        .map(|k| {
            let sector = k as f64 * 360.0 / latent_dim as f64;
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let tint = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize() * 0.12;
            template
                .iter()
                .flat_map(|kern| {
                    let d = (kern.mean - center).try_normalize(1e-12).unwrap_or_else(Vec3::z);
                    let (az, el) = direction_angles(&d);
                    let bump = (-0.5 * (angle_diff(az, sector) / sector_width).powi(2)).exp()
                        * (0.7 + 0.3 * (2.0 * el + phase).sin());
                    let dm = d * (0.004 * bump);
                    let dc = tint * bump;
                    [dm.x, dm.y, dm.z, dc.x, dc.y, dc.z]
                })
                .collect()
        })
        .collect();
    let g = GeneratorParams {
        w: vec![0.0; latent_dim],
        theta,
        template,
    };
    g.validate()?;
    Ok(g)
}
