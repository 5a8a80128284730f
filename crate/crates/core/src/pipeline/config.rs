//! Scene configuration: one TOML file drives the whole loop.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asa::{AlignmentConfig, KernelRates};
use crate::geometry::{OrbitRig, SimilarityTransform};
use crate::oracle::{CameraSampling, InversionConfig, RefinementHook, DEFAULT_LATENT_DIM};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub mesh: MeshSource,
    pub subject: SubjectConfig,
    pub cameras: CameraConfig,
    #[serde(rename = "loop")]
    pub schedule: LoopSchedule,
    /// Stage 1: frontal-only avatar fit.
    pub fit: AlignmentConfig,
    /// Stage 5: alignment against real and pseudo views.
    pub align: AlignmentConfig,
    pub inversion: InversionConfig,
    pub hook: Option<RefinementHook>,
}

/// Mesh files; the bundled head is used when both are absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSource {
    pub obj: Option<PathBuf>,
    pub blendshapes: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    /// The bundled synthetic subject with full ground truth.
    Synthetic,
    /// Captured frontal images read from `images_dir`.
    Images,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubjectConfig {
    pub kind: SubjectKind,
    /// PNG or PPM files `00.png`, `01.png`, ... in frontal ring order.
    pub images_dir: Option<PathBuf>,
    /// Generator checkpoint; required for image subjects.
    pub generator: Option<PathBuf>,
    /// Blendshape coefficients of the tracked mesh; zeros when absent.
    pub phi: Option<Vec<f64>>,
    /// Magnitude of the synthetic subject's latent code entries.
    pub latent_scale: f64,
    pub latent_dim: usize,
    /// Magnitude of the synthetic tracking error added to the true coefficients.
    pub phi_noise: f64,
    /// Pose of the generator's frame relative to the avatar's: places the
    /// synthetic generator and maps cameras handed to the inversion. Must be a
    /// vertical-axis rotation with uniform scale.
    pub generator_frame: SimilarityTransform,
}

impl Default for SubjectConfig {
    fn default() -> Self {
        SubjectConfig {
            kind: SubjectKind::Synthetic,
            images_dir: None,
            generator: None,
            phi: None,
            latent_scale: 1.0,
            latent_dim: DEFAULT_LATENT_DIM,
            phi_noise: 0.05,
            generator_frame: SimilarityTransform {
                scale: Vec3::repeat(0.95),
                rotation: crate::RotationVector::new(0.0, 6f64.to_radians(), 0.0),
                translation: Vec3::new(0.04, -0.02, 0.06),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionProfile {
    /// 128×128 everywhere.
    Desk,
    /// Real views at 802×550, pseudo views at 512×512.
    Full,
    /// Use `real_resolution` and `pseudo_resolution` as given.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub count: usize,
    /// Centre azimuth of the frontal ring in degrees.
    pub center: f64,
    /// Angular extent of the frontal ring in degrees.
    pub span: f64,
    pub elevation: f64,
    pub radius: f64,
    /// Focal length as a multiple of the image height.
    pub focal_ratio: f64,
    pub profile: ResolutionProfile,
    pub real_resolution: (usize, usize),
    pub pseudo_resolution: (usize, usize),
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            count: 16,
            center: 0.0,
            span: 120.0,
            elevation: 0.0,
            radius: 4.0,
            focal_ratio: 1.1,
            profile: ResolutionProfile::Desk,
            real_resolution: (128, 128),
            pseudo_resolution: (128, 128),
        }
    }
}

impl CameraConfig {
    pub fn resolutions(&self) -> ((usize, usize), (usize, usize)) {
        match self.profile {
            ResolutionProfile::Desk => ((128, 128), (128, 128)),
            ResolutionProfile::Full => ((802, 550), (512, 512)),
            ResolutionProfile::Custom => (self.real_resolution, self.pseudo_resolution),
        }
    }

    fn rig(&self, resolution: (usize, usize)) -> OrbitRig {
        OrbitRig {
            elevation: self.elevation,
            radius: self.radius,
            target: Vec3::zeros(),
            focal: self.focal_ratio * resolution.1 as f64,
            resolution,
        }
    }

    pub fn real_rig(&self) -> OrbitRig {
        self.rig(self.resolutions().0)
    }

    pub fn pseudo_rig(&self) -> OrbitRig {
        self.rig(self.resolutions().1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("frontal ring needs at least one camera"));
        }
        if !(0.0..=360.0).contains(&self.span)
            || self.center - self.span / 2.0 < -180.0
            || self.center + self.span / 2.0 > 180.0
        {
            return Err(Error::invalid(format!(
                "frontal ring {}±{} must lie within [-180°, 180°]",
                self.center,
                self.span / 2.0
            )));
        }
        let (real, pseudo) = self.resolutions();
        if real.0 == 0 || real.1 == 0 || pseudo.0 == 0 || pseudo.1 == 0 {
            return Err(Error::invalid("resolutions must be positive"));
        }
        if !(self.focal_ratio > 0.0 && self.radius > 0.0) {
            return Err(Error::invalid("focal ratio and radius must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopSchedule {
    /// Repetitions of stages 2 to 5; zero runs the frontal fit only.
    pub rounds: usize,
    /// Avatar renders added to the hybrid set, spread over `render_span`
    /// degrees around the frontal ring centre.
    pub render_views: usize,
    pub render_span: f64,
    /// Captured views handed to the inversion, evenly picked from the ring.
    pub ori_views: usize,
    pub back_views: usize,
    pub back_sampling: CameraSampling,
}

impl Default for LoopSchedule {
    fn default() -> Self {
        LoopSchedule {
            rounds: 1,
            render_views: 4,
            render_span: 100.0,
            ori_views: 1,
            back_views: 6,
            back_sampling: CameraSampling::Even,
        }
    }
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 0,
            mesh: MeshSource::default(),
            subject: SubjectConfig::default(),
            cameras: CameraConfig::default(),
            schedule: LoopSchedule::default(),
            fit: AlignmentConfig {
                max_steps: 40,
                lambda_pseudo: 0.0,
                optimize_scale: false,
                optimize_rotation: false,
                optimize_translation: false,
                kernel_lr: KernelRates {
                    color: 0.03,
                    ..KernelRates::default()
                },
                ..AlignmentConfig::default()
            },
            align: AlignmentConfig {
                max_steps: 80,
                kernel_lr: KernelRates {
                    color: 0.03,
                    ..KernelRates::default()
                },
                ..AlignmentConfig::default()
            },
            inversion: InversionConfig {
                steps_w: 80,
                steps_theta: 40,
                ..InversionConfig::default()
            },
            hook: None,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.cameras.validate()?;
        self.fit.validate()?;
        self.align.validate()?;
        self.inversion.validate()?;
        let s = &self.schedule;
        if s.rounds > 0 && (s.ori_views == 0 || s.back_views == 0) {
            return Err(Error::invalid("the loop needs at least one captured and one back view"));
        }
        if s.ori_views > self.cameras.count {
            return Err(Error::invalid("more inversion views requested than frontal cameras"));
        }
        if self.subject.kind == SubjectKind::Images
            && (self.subject.images_dir.is_none() || self.subject.generator.is_none())
        {
            return Err(Error::invalid("image subjects need `images_dir` and `generator`"));
        }
        if self.mesh.obj.is_some() != self.mesh.blendshapes.is_some() {
            return Err(Error::invalid("mesh.obj and mesh.blendshapes must be given together"));
        }
        self.subject.generator_frame.validate()?;
        crate::geometry::camera_in_frame(&self.cameras.real_rig().camera(0.0)?, &self.subject.generator_frame)?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            Error::parse("scene config", offset, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.mesh.obj,
            &mut cfg.mesh.blendshapes,
            &mut cfg.subject.images_dir,
            &mut cfg.subject.generator,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(Error::invalid(format!("{} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = SceneConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(SceneConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = SceneConfig::from_toml("seed = 3\n[loop]\nrounds = 2\n[align]\nmax_steps = 10\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.schedule.rounds, 2);
        assert_eq!(cfg.align.max_steps, 10);
        assert_eq!(cfg.align.lambda_pseudo, 0.01);
        assert_eq!(cfg.cameras.count, 16);
    }

    #[test]
    fn unknown_keys_report_offset() {
        let err = SceneConfig::from_toml("seed = 1\nbogus = 2\n").unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn profiles() {
        let mut c = CameraConfig::default();
        assert_eq!(c.resolutions(), ((128, 128), (128, 128)));
        c.profile = ResolutionProfile::Full;
        assert_eq!(c.resolutions(), ((802, 550), (512, 512)));
        assert_eq!(c.real_rig().focal, 1.1 * 550.0);
    }

    #[test]
    fn ring_outside_range_rejected() {
        let cfg = SceneConfig::from_toml("[cameras]\ncenter = 150.0\nspan = 120.0\n");
        assert!(cfg.is_err());
    }

    #[test]
    fn missing_paths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.toml");
        std::fs::write(&path, "[mesh]\nobj = \"nope.obj\"\nblendshapes = \"nope.txt\"\n").unwrap();
        assert!(SceneConfig::load(&path).is_err());
    }
}
