//! The closed loop: frontal fit, avatar renders, hybrid inversion, back-view
//! synthesis and alignment, with a checkpoint at every stage boundary.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, Cursor, RngState, Stage, CHECKPOINT_FORMAT_VERSION};
use super::subject::Scene;
use crate::asa::{
    optimize_alignment, AlignmentConfig, AlignmentProblem, AlignmentResult, AlignmentState, SupervisionView,
};
use crate::geometry::{mesh_eval, rotation_angle, Camera, SimilarityTransform};
use crate::metrics::mse;
use crate::oracle::{build_hybrid_set, invert, sample_back_cameras, synthesize_back_views, CameraSampling};
use crate::splat::{globalize, render, Image, RenderOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub stage: String,
    pub metric: String,
    pub value: f64,
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("stage,metric,value\n");
    for r in rows {
        out.push_str(&format!("{},{},{:?}\n", r.stage, r.metric, r.value));
    }
    out
}

#[derive(Debug, Clone)]
pub struct LoopOutput {
    pub checkpoint: Checkpoint,
    pub report: Vec<ReportRow>,
}

/// Held-out back-view error of an avatar against the synthetic ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackViewScore {
    pub l1: f64,
    pub psnr: f64,
}

pub fn render_avatar(scene: &Scene, state: &AlignmentState, xf: &SimilarityTransform, cam: &Camera) -> Result<Image> {
    let vertices = mesh_eval(&scene.mesh, &state.phi)?;
    let world = globalize(&state.cloud, &vertices, &scene.mesh.triangles, xf)?;
    Ok(render(&world, cam, RenderOptions::default()))
}

/// Mean L1 and PSNR (of the mean squared error) over the azimuth-180° cameras;
/// `None` without ground truth.
pub fn evaluate_back(scene: &Scene, state: &AlignmentState) -> Result<Option<BackViewScore>> {
    let Some(truth) = &scene.ground_truth else {
        return Ok(None);
    };
    let cams = scene.back_eval_cameras()?;
    let (mut l1, mut err) = (0.0, 0.0);
    for cam in &cams {
        let pred = render_avatar(scene, state, &SimilarityTransform::identity(), cam)?;
        let gt = truth.render(&scene.mesh, cam)?;
        l1 += pred.mean_abs_diff(&gt)?;
        err += mse(&pred, &gt)?;
    }
    let n = cams.len() as f64;
    Ok(Some(BackViewScore {
        l1: l1 / n,
        psnr: -10.0 * (err / n).log10(),
    }))
}

fn stage_err(stage: Stage) -> impl Fn(Error) -> Error {
    move |e| Error::Stage {
        stage: stage.name().to_string(),
        source: Box::new(e),
    }
}

fn align(
    scene: &Scene,
    cfg: &AlignmentConfig,
    views: &[SupervisionView],
    init: AlignmentState,
) -> Result<AlignmentResult> {
    let problem = AlignmentProblem {
        mesh: &scene.mesh,
        phi_orig: &scene.phi_orig,
        views,
        config: cfg,
    };
    optimize_alignment(&problem, init)
}

fn real_supervision(scene: &Scene) -> Vec<SupervisionView> {
    scene
        .real_views
        .iter()
        .map(|(img, cam)| SupervisionView::real(img.clone(), *cam))
        .collect()
}

pub fn initial_state(scene: &Scene) -> Result<AlignmentState> {
    Ok(AlignmentState {
        cloud: scene.initial_cloud()?,
        transform: SimilarityTransform::identity(),
        phi: scene.phi_orig.clone(),
    })
}

/// Stage 1: fit kernels (and blendshapes) to the captured frontal views only.
pub fn frontal_fit(scene: &Scene, init: AlignmentState) -> Result<AlignmentResult> {
    align(scene, &scene.config.fit, &real_supervision(scene), init)
}

/// Captured views handed to the inversion, evenly picked from the ring, with
/// cameras expressed in the generator's frame.
pub fn ori_views(scene: &Scene) -> Result<Vec<(Image, Camera)>> {
    let n = scene.real_views.len();
    let k = scene.config.schedule.ori_views.min(n);
    (0..k)
        .map(|i| {
            let idx = if k == 1 {
                n / 2
            } else {
                (i * (n - 1) + (k - 1) / 2) / (k - 1)
            };
            let (img, cam) = &scene.real_views[idx];
            Ok((img.clone(), scene.generator_camera(cam)?))
        })
        .collect()
}

/// Stage 2: novel views of the current avatar around the frontal ring
/// centre, paired with the generator-frame cameras that see them.
pub fn avatar_renders(scene: &Scene, state: &AlignmentState) -> Result<Vec<(Image, Camera)>> {
    let s = &scene.config.schedule;
    if s.render_views == 0 {
        return Ok(Vec::new());
    }
    scene
        .config
        .cameras
        .pseudo_rig()
        .ring(s.render_views, scene.config.cameras.center, s.render_span)?
        .into_iter()
        .map(|cam| {
            let img = render_avatar(scene, state, &SimilarityTransform::identity(), &cam)?;
            Ok((img, scene.generator_camera(&cam)?))
        })
        .collect()
}

/// Stage 4 output for the checkpoint's current round.
pub fn pseudo_views(scene: &Scene, ckpt: &Checkpoint) -> Result<Vec<(Image, Camera)>> {
    let cams = back_cameras(scene, ckpt.cursor.round_seed)?;
    synthesize_back_views(&ckpt.generator, &cams, scene.config.hook.as_ref())
}

pub fn back_cameras(scene: &Scene, round_seed: u64) -> Result<Vec<Camera>> {
    let s = &scene.config.schedule;
    let sampling = match s.back_sampling {
        CameraSampling::Even => CameraSampling::Even,
        CameraSampling::Random { seed } => CameraSampling::Random {
            seed: seed ^ round_seed,
        },
    };
    sample_back_cameras(s.back_views, &scene.config.cameras.pseudo_rig(), sampling)
}

pub fn initial_checkpoint(scene: &Scene) -> Result<Checkpoint> {
    let state = initial_state(scene)?;
    Ok(Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        cloud: state.cloud,
        transform: state.transform,
        phi: state.phi,
        phi_orig: scene.phi_orig.clone(),
        generator: scene.generator.clone(),
        cursor: Cursor {
            round: 0,
            next: Stage::Frontal,
            round_seed: 0,
        },
        rng: RngState {
            seed: scene.config.seed,
            word_pos: 0,
        },
    })
}

fn state_of(ckpt: &Checkpoint) -> AlignmentState {
    AlignmentState {
        cloud: ckpt.cloud.clone(),
        transform: ckpt.transform,
        phi: ckpt.phi.clone(),
    }
}

fn set_state(ckpt: &mut Checkpoint, state: AlignmentState) {
    ckpt.cloud = state.cloud;
    ckpt.transform = state.transform;
    ckpt.phi = state.phi;
}

pub fn run_loop(scene: &Scene, on_checkpoint: &mut dyn FnMut(&Checkpoint) -> Result<()>) -> Result<LoopOutput> {
    resume_loop(scene, initial_checkpoint(scene)?, on_checkpoint)
}

/// Continues from `ckpt.cursor`; `on_checkpoint` sees the checkpoint after every stage.
pub fn resume_loop(
    scene: &Scene,
    ckpt: Checkpoint,
    on_checkpoint: &mut dyn FnMut(&Checkpoint) -> Result<()>,
) -> Result<LoopOutput> {
    resume_loop_until(scene, ckpt, None, on_checkpoint)
}

/// Like [`resume_loop`], but returns right after the first run of `stop_after`.
pub fn resume_loop_until(
    scene: &Scene,
    mut ckpt: Checkpoint,
    stop_after: Option<Stage>,
    on_checkpoint: &mut dyn FnMut(&Checkpoint) -> Result<()>,
) -> Result<LoopOutput> {
    if ckpt.phi_orig != scene.phi_orig {
        return Err(Error::invalid("checkpoint was made for a different scene"));
    }
    let cfg = &scene.config;
    let mut rng = ChaCha8Rng::seed_from_u64(ckpt.rng.seed);
    rng.set_word_pos(ckpt.rng.word_pos);
    let mut report = Vec::new();
    let mut row = |stage: &str, metric: &str, value: f64| {
        report.push(ReportRow {
            stage: stage.to_string(),
            metric: metric.to_string(),
            value,
        })
    };
    let mut renders: Option<Vec<(Image, Camera)>> = None;
    let mut pseudo: Option<Vec<(Image, Camera)>> = None;

    while ckpt.cursor.next != Stage::Done {
        let stage = ckpt.cursor.next;
        let round = ckpt.cursor.round;
        let label = if stage == Stage::Frontal {
            stage.name().to_string()
        } else {
            format!("{}_{round}", stage.name())
        };
        log::info!("stage {label}");
        let next = match stage {
            Stage::Frontal => {
                let fit = frontal_fit(scene, state_of(&ckpt)).map_err(stage_err(stage))?;
                row(&label, "loss", fit.best_loss);
                set_state(&mut ckpt, fit.best);
                if let Some(score) = evaluate_back(scene, &state_of(&ckpt))? {
                    row(&label, "back_l1_180", score.l1);
                    row(&label, "back_psnr_180", score.psnr);
                }
                if cfg.schedule.rounds == 0 {
                    Stage::Done
                } else {
                    Stage::Render
                }
            }
            Stage::Render => {
                ckpt.cursor.round_seed = rng.next_u64();
                let r = avatar_renders(scene, &state_of(&ckpt)).map_err(stage_err(stage))?;
                row(&label, "views", r.len() as f64);
                renders = Some(r);
                Stage::Invert
            }
            Stage::Invert => {
                let r = match renders.take() {
                    Some(r) => r,
                    None => avatar_renders(scene, &state_of(&ckpt)).map_err(stage_err(stage))?,
                };
                let result = ori_views(scene)
                    .and_then(|ori| build_hybrid_set(ori, r))
                    .and_then(|set| invert(&ckpt.generator, &set, &cfg.inversion))
                    .map_err(stage_err(stage))?;
                row(&label, "initial_loss", result.initial_loss);
                row(&label, "final_loss", result.final_loss);
                ckpt.generator = result.params;
                Stage::Synthesize
            }
            Stage::Synthesize => {
                let views = pseudo_views(scene, &ckpt).map_err(stage_err(stage))?;
                row(&label, "views", views.len() as f64);
                pseudo = Some(views);
                Stage::Align
            }
            Stage::Align => {
                let p = match pseudo.take() {
                    Some(p) => p,
                    None => pseudo_views(scene, &ckpt).map_err(stage_err(stage))?,
                };
                let mut views = real_supervision(scene);
                views.extend(
                    p.into_iter()
                        .map(|(img, cam)| SupervisionView::pseudo(img, cam, cfg.align.lambda_pseudo)),
                );
                let result = align(scene, &cfg.align, &views, state_of(&ckpt)).map_err(stage_err(stage))?;
                row(&label, "loss", result.best_loss);
                let xf = result.best.transform;
                row(&label, "scale_mean", xf.scale.mean());
                row(
                    &label,
                    "rotation_deg",
                    rotation_angle(&xf.rotation.to_matrix()?).to_degrees(),
                );
                row(&label, "translation_norm", xf.translation.norm());
                row(&label, "phi_distance", result.best.phi.distance(&scene.phi_orig));
                set_state(&mut ckpt, result.best);
                if let Some(score) = evaluate_back(scene, &state_of(&ckpt))? {
                    row(&label, "back_l1_180", score.l1);
                    row(&label, "back_psnr_180", score.psnr);
                }
                ckpt.cursor.round += 1;
                if ckpt.cursor.round < cfg.schedule.rounds {
                    Stage::Render
                } else {
                    Stage::Done
                }
            }
            Stage::Done => unreachable!("loop exits before Done"),
        };
        ckpt.cursor.next = next;
        ckpt.rng.word_pos = rng.get_word_pos();
        on_checkpoint(&ckpt)?;
        if stop_after == Some(stage) {
            break;
        }
    }
    Ok(LoopOutput {
        checkpoint: ckpt,
        report,
    })
}
