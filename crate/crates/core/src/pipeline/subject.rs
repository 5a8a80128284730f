//! The bundled synthetic subject and scene assembly.
//!
//! The synthetic subject is a textured head whose kernel colors lie in the
//! span of the toy generator: the generator's template is the subject's own
//! geometry with a generic texture, placed in a slightly different frame, and
//! the subject's colors are that texture plus the generator offsets of a
//! hidden latent code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{SceneConfig, SubjectKind};
use crate::geometry::{camera_in_frame, load_mesh, mesh_eval, Camera, MeshParams, ParametricMesh, SimilarityTransform};
use crate::oracle::{toy_generator, GeneratorParams, OFFSETS_PER_KERNEL};
use crate::splat::{bind_kernels, globalize, render, Image, RenderOptions, SplatCloud, WorldKernel};
use crate::{Error, Result, Vec3};

/// Hidden ground truth of the synthetic subject.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub cloud: SplatCloud,
    pub phi: MeshParams,
    pub latent: Vec<f64>,
    pub generator_frame: SimilarityTransform,
}

impl GroundTruth {
    pub fn world(&self, mesh: &ParametricMesh, xf: &SimilarityTransform) -> Result<Vec<WorldKernel>> {
        globalize(&self.cloud, &mesh_eval(mesh, &self.phi)?, &mesh.triangles, xf)
    }

    /// Render in the avatar's frame.
    pub fn render(&self, mesh: &ParametricMesh, cam: &Camera) -> Result<Image> {
        Ok(render(
            &self.world(mesh, &SimilarityTransform::identity())?,
            cam,
            RenderOptions::default(),
        ))
    }

    /// Render in the generator's frame.
    pub fn render_generator_frame(&self, mesh: &ParametricMesh, cam: &Camera) -> Result<Image> {
        Ok(render(
            &self.world(mesh, &self.generator_frame)?,
            cam,
            RenderOptions::default(),
        ))
    }
}

/// Everything the loop consumes.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub mesh: ParametricMesh,
    pub real_views: Vec<(Image, Camera)>,
    /// Tracked blendshape coefficients the prior pulls towards.
    pub phi_orig: MeshParams,
    pub generator: GeneratorParams,
    pub ground_truth: Option<GroundTruth>,
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Generic head texture by surface direction: skin on the face, striped
/// hair on the back and top, a few facial features.
pub fn template_color(d: &Vec3) -> Vec3 {
    let az = d.x.atan2(d.z);
    let skin = Vec3::new(0.85, 0.66, 0.55) + Vec3::repeat(0.04 * (5.0 * d.x).sin() * (4.0 * d.y).cos());
    let hair = Vec3::new(0.3, 0.2, 0.13) * (1.0 + 0.35 * (9.0 * az).sin() * (1.0 + 0.5 * (6.0 * d.y).cos()));
    let hairline = smoothstep(0.15, -0.15, d.z).max(smoothstep(0.45, 0.65, d.y));
    let mut c = skin * (1.0 - hairline) + hair * hairline;
    let spot = |cx: f64, cy: f64, r: f64| {
        (-((d.x - cx).powi(2) + (d.y - cy).powi(2)) / (r * r)).exp() * smoothstep(0.3, 0.6, d.z)
    };
    let eyes = spot(-0.32, 0.22, 0.12) + spot(0.32, 0.22, 0.12);
    c = c * (1.0 - eyes) + Vec3::new(0.15, 0.12, 0.12) * eyes;
    let mouth = spot(0.0, -0.42, 0.14);
    c = c * (1.0 - mouth) + Vec3::new(0.7, 0.3, 0.3) * mouth;
    c.map(|v| v.clamp(0.05, 0.95))
}

fn frontal_ring(cfg: &SceneConfig) -> Result<Vec<Camera>> {
    cfg.cameras
        .real_rig()
        .ring(cfg.cameras.count, cfg.cameras.center, cfg.cameras.span)
}

fn load_mesh_from(cfg: &SceneConfig) -> Result<ParametricMesh> {
    match (&cfg.mesh.obj, &cfg.mesh.blendshapes) {
        (Some(obj), Some(bs)) => load_mesh(obj, bs),
        _ => Ok(ParametricMesh::bundled_head()),
    }
}

impl Scene {
    pub fn build(config: SceneConfig) -> Result<Scene> {
        config.validate()?;
        match config.subject.kind {
            SubjectKind::Synthetic => Self::synthetic(config),
            SubjectKind::Images => Self::from_images(config),
        }
    }

    /// The bundled synthetic subject; `config.seed` picks its shape and latent code.
    pub fn synthetic(config: SceneConfig) -> Result<Scene> {
        let mesh = load_mesh_from(&config)?;
        let sub = &config.subject;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let k = mesh.num_params();
        let phi = MeshParams((0..k).map(|_| rng.random_range(-0.5..0.5)).collect());
        let phi_orig = MeshParams(
            phi.0
                .iter()
                .map(|p| p + rng.random_range(-sub.phi_noise..=sub.phi_noise))
                .collect(),
        );
        let latent: Vec<f64> = (0..sub.latent_dim)
            .map(|_| rng.random_range(-sub.latent_scale..=sub.latent_scale))
            .collect();

        let vertices = mesh_eval(&mesh, &phi)?;
        let mut cloud = bind_kernels(&vertices, &mesh.triangles, 1)?;
        let frame_world = globalize(&cloud, &vertices, &mesh.triangles, &sub.generator_frame)?;
        let avatar_world = globalize(&cloud, &vertices, &mesh.triangles, &SimilarityTransform::identity())?;
        let template: Vec<WorldKernel> = frame_world
            .iter()
            .zip(&avatar_world)
            .map(|(g, a)| WorldKernel {
                color: template_color(&a.mean.normalize()),
                ..*g
            })
            .collect();
        let mut generator = toy_generator(
            template,
            sub.generator_frame.translation,
            sub.latent_dim,
            config.seed ^ 0x9e37_79b9,
        )?;
        generator.w = latent.clone();
        let offsets = generator.offsets();
        for (i, kern) in cloud.kernels.iter_mut().enumerate() {
            let o = &offsets[OFFSETS_PER_KERNEL * i..OFFSETS_PER_KERNEL * (i + 1)];
            let base = generator.template[i].color;
            kern.color = Vec3::new(o[3], o[4], o[5]) + base;
            kern.color.iter_mut().for_each(|c| *c = c.clamp(0.0, 1.0));
        }
        generator.w = vec![0.0; sub.latent_dim];

        let truth = GroundTruth {
            cloud,
            phi,
            latent,
            generator_frame: sub.generator_frame,
        };
        let real_views = frontal_ring(&config)?
            .into_iter()
            .map(|cam| Ok((truth.render(&mesh, &cam)?, cam)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene {
            config,
            mesh,
            real_views,
            phi_orig,
            generator,
            ground_truth: Some(truth),
        })
    }

    fn from_images(config: SceneConfig) -> Result<Scene> {
        let mesh = load_mesh_from(&config)?;
        let dir = config.subject.images_dir.clone().expect("validated");
        let generator = GeneratorParams::load(config.subject.generator.as_ref().expect("validated"))?;
        let cams = frontal_ring(&config)?;
        let real_views = cams
            .into_iter()
            .enumerate()
            .map(|(i, cam)| {
                let png = dir.join(format!("{i:02}.png"));
                let path = if png.exists() {
                    png
                } else {
                    dir.join(format!("{i:02}.ppm"))
                };
                let img = Image::load(&path)?;
                if (img.width, img.height) != (cam.width, cam.height) {
                    return Err(Error::Image {
                        path,
                        message: format!("expected {}x{}", cam.width, cam.height),
                    });
                }
                Ok((img, cam))
            })
            .collect::<Result<Vec<_>>>()?;
        let phi_orig = match &config.subject.phi {
            Some(p) if p.len() == mesh.num_params() => MeshParams(p.clone()),
            Some(p) => {
                return Err(Error::invalid(format!(
                    "subject.phi has {} entries, mesh has {} blendshapes",
                    p.len(),
                    mesh.num_params()
                )))
            }
            None => MeshParams::zeros(mesh.num_params()),
        };
        Ok(Scene {
            config,
            mesh,
            real_views,
            phi_orig,
            generator,
            ground_truth: None,
        })
    }

    /// Camera a generator-side pose estimate assigns to an image taken by `cam`.
    pub fn generator_camera(&self, cam: &Camera) -> Result<Camera> {
        camera_in_frame(cam, &self.config.subject.generator_frame)
    }

    /// Default kernels bound to every triangle of the tracked mesh.
    pub fn initial_cloud(&self) -> Result<SplatCloud> {
        bind_kernels(&mesh_eval(&self.mesh, &self.phi_orig)?, &self.mesh.triangles, 1)
    }

    /// Held-out cameras at azimuth 180° (elevations −10°, 0°, 10°).
    pub fn back_eval_cameras(&self) -> Result<Vec<Camera>> {
        let mut rig = self.config.cameras.real_rig();
        [-10.0, 0.0, 10.0]
            .into_iter()
            .map(|el| {
                rig.elevation = el;
                rig.camera(180.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_is_darker_behind() {
        let front = template_color(&Vec3::new(0.0, 0.0, 1.0));
        let back = template_color(&Vec3::new(0.0, 0.0, -1.0));
        assert!(front.sum() > back.sum() + 0.8);
    }

    #[test]
    fn synthetic_scene_is_seeded() {
        let a = Scene::synthetic(SceneConfig::default()).unwrap();
        let b = Scene::synthetic(SceneConfig::default()).unwrap();
        assert_eq!(a.real_views, b.real_views);
        assert_eq!(a.real_views.len(), 16);
        assert_eq!(a.generator.w, vec![0.0; 16]);
        let c = Scene::synthetic(SceneConfig {
            seed: 1,
            ..SceneConfig::default()
        })
        .unwrap();
        assert_ne!(a.real_views[0].0, c.real_views[0].0);
    }
}
