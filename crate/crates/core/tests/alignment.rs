mod common;

use avatarback_core::asa::{
    optimize_alignment, trace_csv, AlignmentConfig, AlignmentProblem, AlignmentState, SupervisionView,
};
use avatarback_core::geometry::{camera_from_orbit, rotation_angle, MeshParams};
use avatarback_core::oracle::{sample_back_cameras, CameraSampling};
use avatarback_core::pipeline::Scene;
use avatarback_core::splat::{render, RenderOptions};
use avatarback_core::{Error, RotationVector, SimilarityTransform, Vec3};
use common::tiny_config;

fn pseudo_views(scene: &Scene, xf: &SimilarityTransform, count: usize) -> Vec<SupervisionView> {
    let truth = scene.ground_truth.as_ref().unwrap();
    let world = truth.world(&scene.mesh, xf).unwrap();
    sample_back_cameras(count, &scene.config.cameras.pseudo_rig(), CameraSampling::Even)
        .unwrap()
        .into_iter()
        .map(|cam| SupervisionView::pseudo(render(&world, &cam, RenderOptions::default()), cam, 0.01))
        .collect()
}

fn truth_state(scene: &Scene) -> AlignmentState {
    let truth = scene.ground_truth.as_ref().unwrap();
    AlignmentState {
        cloud: truth.cloud.clone(),
        transform: SimilarityTransform::identity(),
        phi: truth.phi.clone(),
    }
}

#[test]
fn recovers_a_small_transform() {
    let scene = Scene::build(tiny_config(4)).unwrap();
    let xf = SimilarityTransform {
        scale: Vec3::repeat(0.95),
        rotation: RotationVector::new(0.0, 5f64.to_radians(), 0.0),
        translation: Vec3::new(0.02, 0.0, 0.03),
    };
    let views = pseudo_views(&scene, &xf, 4);
    let cfg = AlignmentConfig {
        max_steps: 150,
        train_kernels: false,
        optimize_phi: false,
        ..AlignmentConfig::default()
    };
    let truth = scene.ground_truth.as_ref().unwrap();
    let problem = AlignmentProblem {
        mesh: &scene.mesh,
        phi_orig: &truth.phi,
        views: &views,
        config: &cfg,
    };
    let r = optimize_alignment(&problem, truth_state(&scene)).unwrap();
    let b = r.best.transform;
    let rot = rotation_angle(&(b.rotation.to_matrix().unwrap().transpose() * xf.rotation.to_matrix().unwrap()));
    assert!(rot.to_degrees() < 0.5, "rotation error {}°", rot.to_degrees());
    assert!((b.scale - xf.scale).amax() < 0.01, "scale {:?}", b.scale);
    assert!((b.translation - xf.translation).norm() < 0.01);
    assert!(r.best_loss <= r.trace[0].total);
    assert_eq!(r.trace.len(), cfg.max_steps + 1);
}

#[test]
fn frozen_parameters_stay_put() {
    let scene = Scene::build(tiny_config(5)).unwrap();
    let xf = SimilarityTransform {
        scale: Vec3::repeat(0.9),
        ..SimilarityTransform::identity()
    };
    let views = pseudo_views(&scene, &xf, 3);
    let cfg = AlignmentConfig {
        max_steps: 10,
        optimize_scale: false,
        optimize_phi: false,
        train_kernels: false,
        ..AlignmentConfig::default()
    };
    let truth = scene.ground_truth.as_ref().unwrap();
    let problem = AlignmentProblem {
        mesh: &scene.mesh,
        phi_orig: &truth.phi,
        views: &views,
        config: &cfg,
    };
    let init = truth_state(&scene);
    let r = optimize_alignment(&problem, init.clone()).unwrap();
    assert_eq!(r.best.transform.scale, Vec3::repeat(1.0));
    assert_eq!(r.best.phi, init.phi);
    assert_eq!(r.best.cloud, init.cloud);
}

#[test]
fn nothing_visible_is_degenerate() {
    let scene = Scene::build(tiny_config(6)).unwrap();
    let cam = camera_from_orbit(0.0, 0.0, 4.0, Vec3::new(50.0, 0.0, 0.0), 50.0, (48, 48)).unwrap();
    let views = vec![SupervisionView::real(scene.real_views[0].0.clone(), cam)];
    let cfg = AlignmentConfig::default();
    let problem = AlignmentProblem {
        mesh: &scene.mesh,
        phi_orig: &scene.phi_orig,
        views: &views,
        config: &cfg,
    };
    let err = optimize_alignment(&problem, truth_state(&scene)).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)), "{err}");
}

#[test]
fn empty_view_list_rejected() {
    let scene = Scene::build(tiny_config(6)).unwrap();
    let cfg = AlignmentConfig::default();
    let problem = AlignmentProblem {
        mesh: &scene.mesh,
        phi_orig: &scene.phi_orig,
        views: &[],
        config: &cfg,
    };
    assert!(optimize_alignment(&problem, truth_state(&scene)).is_err());
}

#[test]
fn blendshape_prior_holds_coefficients_near_tracking() {
    let scene = Scene::build(tiny_config(7)).unwrap();
    let views: Vec<SupervisionView> = scene
        .real_views
        .iter()
        .map(|(img, cam)| SupervisionView::real(img.clone(), *cam))
        .collect();
    let perturbed = MeshParams(
        scene
            .phi_orig
            .0
            .iter()
            .enumerate()
            .map(|(i, p)| p + if i % 2 == 0 { 0.3 } else { -0.3 })
            .collect(),
    );
    let run = |lambda_flame: f64| {
        let cfg = AlignmentConfig {
            max_steps: 40,
            lambda_flame,
            lr_phi: 0.02,
            optimize_scale: false,
            optimize_rotation: false,
            optimize_translation: false,
            ..AlignmentConfig::default()
        };
        let problem = AlignmentProblem {
            mesh: &scene.mesh,
            phi_orig: &scene.phi_orig,
            views: &views,
            config: &cfg,
        };
        let init = AlignmentState {
            cloud: scene.initial_cloud().unwrap(),
            transform: SimilarityTransform::identity(),
            phi: perturbed.clone(),
        };
        optimize_alignment(&problem, init)
            .unwrap()
            .best
            .phi
            .distance(&scene.phi_orig)
    };
    let with = run(0.5);
    let without = run(0.0);
    assert!(with < without, "regularized {with} vs free {without}");
}

#[test]
fn trace_csv_has_one_row_per_step() {
    let scene = Scene::build(tiny_config(8)).unwrap();
    let views = vec![SupervisionView::real(
        scene.real_views[1].0.clone(),
        scene.real_views[1].1,
    )];
    let cfg = AlignmentConfig {
        max_steps: 3,
        ..AlignmentConfig::default()
    };
    let problem = AlignmentProblem {
        mesh: &scene.mesh,
        phi_orig: &scene.phi_orig,
        views: &views,
        config: &cfg,
    };
    let r = optimize_alignment(&problem, truth_state(&scene)).unwrap();
    let csv = trace_csv(&r.trace);
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.starts_with("step,lr,total,photometric,flame\n"));
}
