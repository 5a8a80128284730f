//! Joint optimization of the alignment transform, blendshape coefficients
//! and (optionally) kernel parameters against weighted supervision views.
//!
//! Pseudo views are rendered with the kernels placed on `T·V(φ)`; real views
//! use the untransformed mesh `V(φ)`. Every parameter group has its own Adam
//! state and learning rate, annealed with the cosine schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::loss::{flame_reg, photometric_loss};
use super::schedule::cosine_lr;
use crate::geometry::{mesh_eval, Camera, MeshParams, ParametricMesh, SimilarityTransform};
use crate::splat::{
    globalize_backward, globalize_with_cache, render_with_state, Image, KernelGrad, RenderOptions, SplatCloud,
    TransformGrad, WorldKernel, WorldKernelGrad,
};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Real,
    Pseudo,
}

#[derive(Debug, Clone)]
pub struct SupervisionView {
    pub image: Image,
    pub camera: Camera,
    pub kind: ViewKind,
    pub weight: f64,
}

impl SupervisionView {
    pub fn real(image: Image, camera: Camera) -> Self {
        SupervisionView {
            image,
            camera,
            kind: ViewKind::Real,
            weight: 1.0,
        }
    }

    pub fn pseudo(image: Image, camera: Camera, lambda_pseudo: f64) -> Self {
        SupervisionView {
            image,
            camera,
            kind: ViewKind::Pseudo,
            weight: lambda_pseudo,
        }
    }
}

/// Loss, pixel count and optional kernel gradients of one view.
type ViewTerm = (f64, usize, Option<Vec<WorldKernelGrad>>);

/// Per-field learning rates for kernel parameters; zero freezes a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelRates {
    pub color: f64,
    pub opacity: f64,
    pub mean: f64,
    pub log_scale: f64,
    pub rotation: f64,
}

impl Default for KernelRates {
    fn default() -> Self {
        KernelRates {
            color: 0.02,
            opacity: 0.05,
            mean: 0.0,
            log_scale: 0.0,
            rotation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    /// Initial learning rate of s, r and t.
    pub lr0: f64,
    pub lr_phi: f64,
    pub max_steps: usize,
    pub lambda_flame: f64,
    pub lambda_pseudo: f64,
    pub w_l1: f64,
    pub w_ssim: f64,
    pub optimize_scale: bool,
    pub optimize_rotation: bool,
    pub optimize_translation: bool,
    pub optimize_phi: bool,
    pub train_kernels: bool,
    pub kernel_lr: KernelRates,
    pub phi_cap: f64,
    pub background: [f64; 3],
    /// Rotation vectors longer than this are replaced by their shorter equivalent.
    pub reparam_threshold: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            lr0: 0.005,
            lr_phi: 0.005,
            max_steps: 300,
            lambda_flame: 0.5,
            lambda_pseudo: 0.01,
            w_l1: 0.8,
            w_ssim: 0.2,
            optimize_scale: true,
            optimize_rotation: true,
            optimize_translation: true,
            optimize_phi: true,
            train_kernels: true,
            kernel_lr: KernelRates::default(),
            phi_cap: crate::geometry::mesh::DEFAULT_PARAM_CAP,
            background: [1.0; 3],
            reparam_threshold: 3.0,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) || !(self.lr_phi >= 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if !(self.lambda_flame >= 0.0) || !(self.lambda_pseudo >= 0.0) {
            return Err(Error::invalid("loss weights must be non-negative"));
        }
        if self.w_l1 < 0.0 || self.w_ssim < 0.0 || (self.w_l1 + self.w_ssim - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("photometric weights must be non-negative and sum to 1"));
        }
        Ok(())
    }

    pub fn render_options(&self) -> RenderOptions {
        RenderOptions {
            background: Vec3::from(self.background),
        }
    }
}

/// The quantities being optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentState {
    pub cloud: SplatCloud,
    pub transform: SimilarityTransform,
    pub phi: MeshParams,
}

pub struct AlignmentProblem<'a> {
    pub mesh: &'a ParametricMesh,
    pub phi_orig: &'a MeshParams,
    pub views: &'a [SupervisionView],
    pub config: &'a AlignmentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub photometric: f64,
    pub flame: f64,
    pub transform: TransformGrad,
    pub phi: Vec<f64>,
    pub kernels: Vec<KernelGrad>,
    /// Kernels surviving culling, summed over views.
    pub visible: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub lr: f64,
    pub total: f64,
    pub photometric: f64,
    pub flame: f64,
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// Parameters with the lowest total loss seen.
    pub best: AlignmentState,
    pub best_loss: f64,
    pub trace: Vec<TraceRow>,
    pub skipped_updates: u64,
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,lr,total,photometric,flame\n");
    for r in trace {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?}\n",
            r.step, r.lr, r.total, r.photometric, r.flame
        ));
    }
    out
}

fn add_world_grads(acc: &mut [WorldKernelGrad], g: &[WorldKernelGrad]) {
    for (a, b) in acc.iter_mut().zip(g) {
        a.mean += b.mean;
        a.cov += b.cov;
        a.opacity += b.opacity;
        a.color += b.color;
    }
}

/// Total loss and gradients with respect to every parameter group.
pub fn objective(problem: &AlignmentProblem, state: &AlignmentState, want_grad: bool) -> Result<Objective> {
    let cfg = problem.config;
    let mesh = problem.mesh;
    let vertices = mesh_eval(mesh, &state.phi)?;
    let identity = SimilarityTransform::identity();
    let has = |kind| problem.views.iter().any(|v| v.kind == kind);
    let real = has(ViewKind::Real)
        .then(|| globalize_with_cache(&state.cloud, &vertices, &mesh.triangles, &identity))
        .transpose()?;
    let pseudo = has(ViewKind::Pseudo)
        .then(|| globalize_with_cache(&state.cloud, &vertices, &mesh.triangles, &state.transform))
        .transpose()?;
    let world_for = |kind: ViewKind| -> &[WorldKernel] {
        match kind {
            ViewKind::Real => &real.as_ref().expect("real views present").0,
            ViewKind::Pseudo => &pseudo.as_ref().expect("pseudo views present").0,
        }
    };
    let options = cfg.render_options();
    let per_view: Vec<Result<ViewTerm>> = problem
        .views
        .par_iter()
        .map(|view| {
            let world = world_for(view.kind);
            let (img, st) = render_with_state(world, &view.camera, options);
            let (loss, mut grad) = photometric_loss(&img, &view.image, cfg.w_l1, cfg.w_ssim)?;
            let grads = (want_grad && view.weight != 0.0).then(|| {
                grad.scale(view.weight);
                st.backward(&grad)
            });
            Ok((view.weight * loss, st.visible(), grads))
        })
        .collect();

    let n = state.cloud.len();
    let mut photometric = 0.0;
    let mut visible = 0;
    let mut g_real: Option<Vec<WorldKernelGrad>> = None;
    let mut g_pseudo: Option<Vec<WorldKernelGrad>> = None;
    for (view, result) in problem.views.iter().zip(per_view) {
        let (loss, vis, grads) = result?;
        photometric += loss;
        visible += vis;
        if let Some(g) = grads {
            let slot = match view.kind {
                ViewKind::Real => &mut g_real,
                ViewKind::Pseudo => &mut g_pseudo,
            };
            add_world_grads(slot.get_or_insert_with(|| vec![WorldKernelGrad::default(); n]), &g);
        }
    }
    let (flame, g_flame) = flame_reg(&state.phi, problem.phi_orig, cfg.lambda_flame)?;

    let mut kernels = vec![KernelGrad::default(); n];
    let mut vertex_grads = vec![Vec3::zeros(); vertices.len()];
    let mut transform = TransformGrad::default();
    let groups = [
        (g_real, real.as_ref(), identity, false),
        (g_pseudo, pseudo.as_ref(), state.transform, true),
    ];
    for (grads, placed, xf, is_pseudo) in groups {
        let (Some(grads), Some((_, cache))) = (grads, placed) else {
            continue;
        };
        let cg = globalize_backward(&state.cloud, &vertices, &mesh.triangles, &xf, cache, &grads);
        for (k, g) in kernels.iter_mut().zip(&cg.kernels) {
            k.mean += g.mean;
            k.log_scale += g.log_scale;
            k.rotation += g.rotation;
            k.opacity_logit += g.opacity_logit;
            k.color += g.color;
        }
        for (a, b) in vertex_grads.iter_mut().zip(&cg.vertices) {
            *a += b;
        }
        if is_pseudo {
            transform = cg.transform;
        }
    }
    let phi = mesh
        .param_gradient(&vertex_grads)
        .iter()
        .zip(&g_flame)
        .map(|(a, b)| a + b)
        .collect();
    Ok(Objective {
        total: photometric + flame,
        photometric,
        flame,
        transform,
        phi,
        kernels,
        visible,
    })
}

/// Adam states for every parameter group.
struct Optimizers {
    scale: AdamState,
    rotation: AdamState,
    translation: AdamState,
    phi: AdamState,
    color: AdamState,
    opacity: AdamState,
    mean: AdamState,
    log_scale: AdamState,
    kernel_rotation: AdamState,
}

fn flatten(items: &[Vec3]) -> Vec<f64> {
    items.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
}

fn step_vec3(adam: &mut AdamState, value: &mut Vec3, grad: &Vec3, lr: f64) -> Result<()> {
    let mut p = [value.x, value.y, value.z];
    adam.step(&mut p, &[grad.x, grad.y, grad.z], lr)?;
    *value = Vec3::from(p);
    Ok(())
}

/// Applies one Adam step to a per-kernel Vec3 field.
fn step_kernel_field(
    adam: &mut AdamState,
    cloud: &mut SplatCloud,
    grads: &[KernelGrad],
    lr: f64,
    get: impl Fn(&mut crate::splat::GaussianKernel) -> &mut Vec3,
    grad_of: impl Fn(&KernelGrad) -> Vec3,
) -> Result<()> {
    let mut params: Vec<Vec3> = cloud.kernels.iter_mut().map(|k| *get(k)).collect();
    let mut flat = flatten(&params);
    let g: Vec<Vec3> = grads.iter().map(grad_of).collect();
    adam.step(&mut flat, &flatten(&g), lr)?;
    for (i, p) in params.iter_mut().enumerate() {
        *p = Vec3::new(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
    }
    for (k, p) in cloud.kernels.iter_mut().zip(params) {
        *get(k) = p;
    }
    Ok(())
}

impl Optimizers {
    fn new(kernels: usize, phi: usize) -> Self {
        Optimizers {
            scale: AdamState::new(3),
            rotation: AdamState::new(3),
            translation: AdamState::new(3),
            phi: AdamState::new(phi),
            color: AdamState::new(3 * kernels),
            opacity: AdamState::new(kernels),
            mean: AdamState::new(3 * kernels),
            log_scale: AdamState::new(3 * kernels),
            kernel_rotation: AdamState::new(3 * kernels),
        }
    }

    fn skipped(&self) -> u64 {
        [
            &self.scale,
            &self.rotation,
            &self.translation,
            &self.phi,
            &self.color,
            &self.opacity,
            &self.mean,
            &self.log_scale,
            &self.kernel_rotation,
        ]
        .iter()
        .map(|s| s.skipped)
        .sum()
    }

    fn apply(&mut self, state: &mut AlignmentState, obj: &Objective, cfg: &AlignmentConfig, step: usize) -> Result<()> {
        let lr = |base: f64| cosine_lr(step, cfg.max_steps, base);
        let xf = &mut state.transform;
        if cfg.optimize_scale {
            step_vec3(&mut self.scale, &mut xf.scale, &obj.transform.scale, lr(cfg.lr0))?;
            xf.scale.iter_mut().for_each(|s| *s = s.max(1e-3));
        }
        if cfg.optimize_rotation {
            step_vec3(
                &mut self.rotation,
                &mut xf.rotation.0,
                &obj.transform.rotation,
                lr(cfg.lr0),
            )?;
            if xf.rotation.angle() > cfg.reparam_threshold {
                let theta = xf.rotation.angle();
                xf.rotation.0 *= 1.0 - std::f64::consts::TAU / theta;
                self.rotation.reset();
            }
        }
        if cfg.optimize_translation {
            step_vec3(
                &mut self.translation,
                &mut xf.translation,
                &obj.transform.translation,
                lr(cfg.lr0),
            )?;
        }
        if cfg.optimize_phi && cfg.lr_phi > 0.0 {
            self.phi.step(&mut state.phi.0, &obj.phi, lr(cfg.lr_phi))?;
            state.phi.clamp_norm(cfg.phi_cap);
        }
        if cfg.train_kernels {
            let rates = cfg.kernel_lr;
            let cloud = &mut state.cloud;
            if rates.color > 0.0 {
                step_kernel_field(
                    &mut self.color,
                    cloud,
                    &obj.kernels,
                    lr(rates.color),
                    |k| &mut k.color,
                    |g| g.color,
                )?;
            }
            if rates.mean > 0.0 {
                step_kernel_field(
                    &mut self.mean,
                    cloud,
                    &obj.kernels,
                    lr(rates.mean),
                    |k| &mut k.mean,
                    |g| g.mean,
                )?;
            }
            if rates.log_scale > 0.0 {
                step_kernel_field(
                    &mut self.log_scale,
                    cloud,
                    &obj.kernels,
                    lr(rates.log_scale),
                    |k| &mut k.log_scale,
                    |g| g.log_scale,
                )?;
            }
            if rates.rotation > 0.0 {
                step_kernel_field(
                    &mut self.kernel_rotation,
                    cloud,
                    &obj.kernels,
                    lr(rates.rotation),
                    |k| &mut k.rotation.0,
                    |g| g.rotation,
                )?;
            }
            if rates.opacity > 0.0 {
                let mut p: Vec<f64> = cloud.kernels.iter().map(|k| k.opacity_logit).collect();
                let g: Vec<f64> = obj.kernels.iter().map(|k| k.opacity_logit).collect();
                self.opacity.step(&mut p, &g, lr(rates.opacity))?;
                for (k, v) in cloud.kernels.iter_mut().zip(p) {
                    k.opacity_logit = v;
                }
            }
            cloud.kernels.iter_mut().for_each(|k| k.project_constraints());
        }
        Ok(())
    }
}

/// Runs `max_steps` Adam updates and returns the lowest-loss parameters seen.
pub fn optimize_alignment(problem: &AlignmentProblem, init: AlignmentState) -> Result<AlignmentResult> {
    let cfg = problem.config;
    cfg.validate()?;
    if problem.views.is_empty() {
        return Err(Error::invalid("alignment needs at least one supervision view"));
    }
    init.transform.validate()?;
    init.cloud.validate(problem.mesh.num_triangles())?;
    if init.phi.len() != problem.mesh.num_params() || problem.phi_orig.len() != init.phi.len() {
        return Err(Error::invalid("blendshape coefficient dimension mismatch"));
    }
    let mut state = init;
    let mut opt = Optimizers::new(state.cloud.len(), state.phi.len());
    let mut trace = Vec::with_capacity(cfg.max_steps + 1);
    let mut best = state.clone();
    let mut best_loss = f64::INFINITY;
    for step in 0..=cfg.max_steps {
        let last = step == cfg.max_steps;
        let obj = objective(problem, &state, !last)?;
        if step == 0 && obj.visible == 0 {
            return Err(Error::Degenerate("no kernel is visible in any supervision view".into()));
        }
        trace.push(TraceRow {
            step,
            lr: cosine_lr(step, cfg.max_steps, cfg.lr0),
            total: obj.total,
            photometric: obj.photometric,
            flame: obj.flame,
        });
        if obj.total < best_loss {
            best_loss = obj.total;
            best = state.clone();
        }
        if last {
            break;
        }
        opt.apply(&mut state, &obj, cfg, step)?;
    }
    if opt.skipped() > 0 {
        log::warn!("{} parameter updates skipped on non-finite gradients", opt.skipped());
    }
    Ok(AlignmentResult {
        best,
        best_loss,
        trace,
        skipped_updates: opt.skipped(),
    })
}
