//! Shared fixtures for integration and acceptance tests.
#![allow(dead_code)]

use avatarback_core::asa::{objective, AlignmentConfig, AlignmentProblem, AlignmentState, SupervisionView};
use avatarback_core::geometry::{camera_from_orbit, mesh_eval, MeshParams, ParametricMesh};
use avatarback_core::splat::{bind_kernels, Image};
use avatarback_core::{RotationVector, SimilarityTransform, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Images whose pixels are uniform noise, so L1 kinks are rarely hit.
pub fn noise_image(rng: &mut ChaCha8Rng, size: usize) -> Image {
    let mut img = Image::filled(size, size, Vec3::zeros(), 1.0);
    img.rgb.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
    img
}

/// A random alignment problem on the bundled head: one real and one pseudo
/// view with noise targets, random blendshapes, kernels and transform.
pub struct GradientCase {
    pub mesh: ParametricMesh,
    pub phi_orig: MeshParams,
    pub views: Vec<SupervisionView>,
    pub config: AlignmentConfig,
    pub state: AlignmentState,
}

pub fn gradient_case(seed: u64, size: usize) -> GradientCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = ParametricMesh::bundled_head();
    let k = mesh.num_params();
    let phi = MeshParams((0..k).map(|_| rng.random_range(-0.4..0.4)).collect());
    let phi_orig = MeshParams((0..k).map(|_| rng.random_range(-0.4..0.4)).collect());
    let mut cloud = bind_kernels(&mesh_eval(&mesh, &phi).unwrap(), &mesh.triangles, 1).unwrap();
    for kern in &mut cloud.kernels {
        kern.mean = Vec3::from_fn(|_, _| rng.random_range(-0.2..0.2));
        kern.log_scale += Vec3::from_fn(|_, _| rng.random_range(-0.2..0.2));
        kern.rotation = RotationVector(Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5)));
        kern.opacity_logit += rng.random_range(-1.0..1.0);
        kern.color = Vec3::from_fn(|_, _| rng.random_range(0.1..0.9));
    }
    let transform = SimilarityTransform {
        scale: Vec3::from_fn(|_, _| rng.random_range(0.85..1.15)),
        rotation: RotationVector(Vec3::from_fn(|_, _| rng.random_range(-0.3..0.3))),
        translation: Vec3::from_fn(|_, _| rng.random_range(-0.1..0.1)),
    };
    let focal = 1.1 * size as f64;
    let real_cam = camera_from_orbit(
        rng.random_range(-60.0..60.0),
        5.0,
        4.0,
        Vec3::zeros(),
        focal,
        (size, size),
    )
    .unwrap();
    let back_cam = camera_from_orbit(
        rng.random_range(120.0..240.0),
        -5.0,
        4.0,
        Vec3::zeros(),
        focal,
        (size, size),
    )
    .unwrap();
    let views = vec![
        SupervisionView::real(noise_image(&mut rng, size), real_cam),
        SupervisionView::pseudo(noise_image(&mut rng, size), back_cam, 0.3),
    ];
    GradientCase {
        mesh,
        phi_orig,
        views,
        config: AlignmentConfig::default(),
        state: AlignmentState { cloud, transform, phi },
    }
}

/// One scalar coordinate of the alignment state.
#[derive(Debug, Clone, Copy)]
pub enum Coord {
    Scale(usize),
    Rotation(usize),
    Translation(usize),
    Phi(usize),
    KernelMean(usize, usize),
    KernelLogScale(usize, usize),
    KernelRotation(usize, usize),
    KernelOpacity(usize),
    KernelColor(usize, usize),
}

pub fn nudge(state: &mut AlignmentState, c: Coord, h: f64) {
    let ks = &mut state.cloud.kernels;
    match c {
        Coord::Scale(i) => state.transform.scale[i] += h,
        Coord::Rotation(i) => state.transform.rotation.0[i] += h,
        Coord::Translation(i) => state.transform.translation[i] += h,
        Coord::Phi(i) => state.phi.0[i] += h,
        Coord::KernelMean(k, i) => ks[k].mean[i] += h,
        Coord::KernelLogScale(k, i) => ks[k].log_scale[i] += h,
        Coord::KernelRotation(k, i) => ks[k].rotation.0[i] += h,
        Coord::KernelOpacity(k) => ks[k].opacity_logit += h,
        Coord::KernelColor(k, i) => ks[k].color[i] += h,
    }
}

/// Analytic and central-difference derivatives of the total alignment loss
/// at the given coordinates.
pub fn derivative_pairs(case: &GradientCase, coords: &[Coord], h: f64) -> Vec<(f64, f64)> {
    let problem = AlignmentProblem {
        mesh: &case.mesh,
        phi_orig: &case.phi_orig,
        views: &case.views,
        config: &case.config,
    };
    let obj = objective(&problem, &case.state, true).unwrap();
    coords
        .iter()
        .map(|&c| {
            let analytic = match c {
                Coord::Scale(i) => obj.transform.scale[i],
                Coord::Rotation(i) => obj.transform.rotation[i],
                Coord::Translation(i) => obj.transform.translation[i],
                Coord::Phi(i) => obj.phi[i],
                Coord::KernelMean(k, i) => obj.kernels[k].mean[i],
                Coord::KernelLogScale(k, i) => obj.kernels[k].log_scale[i],
                Coord::KernelRotation(k, i) => obj.kernels[k].rotation[i],
                Coord::KernelOpacity(k) => obj.kernels[k].opacity_logit,
                Coord::KernelColor(k, i) => obj.kernels[k].color[i],
            };
            let eval = |sign: f64| {
                let mut s = case.state.clone();
                nudge(&mut s, c, sign * h);
                objective(&problem, &s, false).unwrap().total
            };
            (analytic, (eval(1.0) - eval(-1.0)) / (2.0 * h))
        })
        .collect()
}

/// Transform, blendshape and a random sample of kernel coordinates.
pub fn sample_coords(case: &GradientCase, seed: u64, kernels: usize) -> Vec<Coord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let mut out: Vec<Coord> = (0..3)
        .flat_map(|i| [Coord::Scale(i), Coord::Rotation(i), Coord::Translation(i)])
        .chain((0..case.state.phi.len()).map(Coord::Phi))
        .collect();
    let n = case.state.cloud.kernels.len();
    for _ in 0..kernels {
        let k = rng.random_range(0..n);
        let i = rng.random_range(0..3);
        out.push(match rng.random_range(0..5) {
            0 => Coord::KernelMean(k, i),
            1 => Coord::KernelLogScale(k, i),
            2 => Coord::KernelRotation(k, i),
            3 => Coord::KernelOpacity(k),
            _ => Coord::KernelColor(k, i),
        });
    }
    out
}

/// Largest per-coordinate relative error; magnitudes below a thousandth of
/// the largest derivative are compared against that floor instead.
pub fn relative_error(pairs: &[(f64, f64)]) -> f64 {
    let scale = pairs.iter().map(|p| p.0.abs().max(p.1.abs())).fold(0.0, f64::max);
    let floor = (1e-3 * scale).max(1e-12);
    pairs
        .iter()
        .map(|p| (p.0 - p.1).abs() / p.0.abs().max(p.1.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// A fast scene: four 48×48 frontal views and a handful of steps per stage.
pub fn tiny_config(seed: u64) -> avatarback_core::pipeline::SceneConfig {
    use avatarback_core::pipeline::{ResolutionProfile, SceneConfig};
    let mut cfg = SceneConfig {
        seed,
        ..SceneConfig::default()
    };
    cfg.cameras.count = 4;
    cfg.cameras.profile = ResolutionProfile::Custom;
    cfg.cameras.real_resolution = (48, 48);
    cfg.cameras.pseudo_resolution = (48, 48);
    cfg.fit.max_steps = 6;
    cfg.align.max_steps = 6;
    cfg.inversion.steps_w = 4;
    cfg.inversion.steps_theta = 3;
    cfg.schedule.render_views = 2;
    cfg.schedule.back_views = 3;
    cfg
}
