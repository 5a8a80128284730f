use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use avatarback_core::geometry::{save_mesh, OrbitRig, SimilarityTransform};
use avatarback_core::metrics::perceptual::CRITERIA;
use avatarback_core::metrics::{fid, kid, parse_score_lines, perceptual_aggregate, psnr, ssim, FeatureSet};
use avatarback_core::oracle::generate;
use avatarback_core::pipeline::{
    initial_checkpoint, load_checkpoint, pseudo_views, render_avatar, report_csv, resume_loop_until, save_checkpoint,
    Checkpoint, ReportRow, Scene, SceneConfig, Stage, SubjectKind,
};
use avatarback_core::Image;

use crate::{Cli, Command, Metric, StageArgs};

/// Azimuths of the back views written after the frontal fit and the loop.
pub const BACK_AZIMUTHS: [f64; 3] = [135.0, 180.0, 225.0];

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Fit(a) => staged(&cli, a, Some(Stage::Frontal)),
        Command::Invert(a) => staged(&cli, a, Some(Stage::Invert)),
        Command::Synthesize(a) => staged(&cli, a, Some(Stage::Synthesize)),
        Command::Align(a) => staged(&cli, a, Some(Stage::Align)),
        Command::Loop(a) => staged(&cli, a, None),
        Command::Render {
            checkpoint,
            camera_azimuth,
            camera_elevation,
            generator,
        } => render_cmd(
            &cli,
            checkpoint.as_deref(),
            *camera_azimuth,
            *camera_elevation,
            *generator,
        ),
        Command::Eval {
            pred_dir,
            ref_dir,
            metric,
            features_a,
            features_b,
            scores,
        } => {
            let mut csv = String::from("item,metric,value\n");
            let mut any = false;
            if let (Some(p), Some(r)) = (pred_dir, ref_dir) {
                csv.push_str(&eval_images(p, r, *metric)?);
                any = true;
            }
            if let (Some(a), Some(b)) = (features_a, features_b) {
                csv.push_str(&eval_features(a, b)?);
                any = true;
            }
            if let Some(s) = scores {
                csv.push_str(&eval_scores(s)?);
                any = true;
            }
            if !any {
                bail!("eval needs --pred-dir/--ref-dir, --features-a/--features-b or --scores");
            }
            match &cli.out {
                Some(path) => write(path, csv.as_bytes()),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::MakeScene => make_scene(&cli),
    }
}

fn load_config(cli: &Cli) -> Result<SceneConfig> {
    let mut cfg = match &cli.config {
        Some(path) => SceneConfig::load(path)?,
        None => SceneConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn save_png(img: &Image, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(img.save_png(path)?)
}

fn back_rig(scene: &Scene, elevation: f64) -> OrbitRig {
    OrbitRig {
        elevation,
        ..scene.config.cameras.real_rig()
    }
}

fn write_back_renders(scene: &Scene, ckpt: &Checkpoint, dir: &Path) -> Result<()> {
    let state = avatarback_core::asa::AlignmentState {
        cloud: ckpt.cloud.clone(),
        transform: ckpt.transform,
        phi: ckpt.phi.clone(),
    };
    let rig = back_rig(scene, 0.0);
    for az in BACK_AZIMUTHS {
        let img = render_avatar(scene, &state, &SimilarityTransform::identity(), &rig.camera(az)?)?;
        save_png(&img, &dir.join(format!("az{az:03.0}.png")))?;
    }
    Ok(())
}

fn staged(cli: &Cli, args: &StageArgs, stop_after: Option<Stage>) -> Result<()> {
    let scene = Scene::build(load_config(cli)?)?;
    let dir = out_dir(cli)?;
    let ckpt = match &args.checkpoint {
        Some(path) => load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?,
        None => initial_checkpoint(&scene)?,
    };
    if ckpt.cursor.next == Stage::Done {
        bail!("the checkpoint's loop is already complete");
    }
    if let Some(stop) = stop_after {
        if ckpt.cursor.next > stop {
            bail!(
                "the checkpoint is already past stage {} (next: {})",
                stop.name(),
                ckpt.cursor.next.name()
            );
        }
    }
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).with_context(|| format!("creating {}", ckpt_dir.display()))?;
    let mut prev = ckpt.cursor;
    let mut on_checkpoint = |c: &Checkpoint| -> avatarback_core::Result<()> {
        let done = prev.next;
        let label = if done == Stage::Frontal {
            done.name().to_string()
        } else {
            format!("{}_{}", done.name(), prev.round)
        };
        save_checkpoint(c, &ckpt_dir.join(format!("{label}.json")))?;
        if matches!(done, Stage::Frontal | Stage::Align) {
            write_back_renders(&scene, c, &dir.join("renders").join(&label))
                .map_err(|e| avatarback_core::Error::InvalidArgument(format!("{e:#}")))?;
        }
        prev = c.cursor;
        Ok(())
    };
    let out = resume_loop_until(&scene, ckpt, stop_after, &mut on_checkpoint)?;
    save_checkpoint(&out.checkpoint, &dir.join("checkpoint.json"))?;
    write(&dir.join("report.csv"), report_csv(&out.report).as_bytes())?;
    if stop_after == Some(Stage::Synthesize) {
        for (j, (img, _)) in pseudo_views(&scene, &out.checkpoint)?.iter().enumerate() {
            save_png(img, &dir.join("pseudo").join(format!("{j:02}.png")))?;
        }
    }
    if stop_after == Some(Stage::Invert) {
        out.checkpoint.generator.save(&dir.join("generator.json"))?;
    }
    print_report(&out.report);
    Ok(())
}

fn print_report(rows: &[ReportRow]) {
    for r in rows {
        eprintln!("{:<14} {:<18} {:.6}", r.stage, r.metric, r.value);
    }
}

fn render_cmd(cli: &Cli, checkpoint: Option<&Path>, azimuth: f64, elevation: f64, generator: bool) -> Result<()> {
    let scene = Scene::build(load_config(cli)?)?;
    let cam = back_rig(&scene, elevation).camera(azimuth)?;
    let img = match checkpoint {
        Some(path) => {
            let ckpt = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
            if generator {
                generate(&ckpt.generator, &scene.generator_camera(&cam)?)?
            } else {
                let state = avatarback_core::asa::AlignmentState {
                    cloud: ckpt.cloud,
                    transform: ckpt.transform,
                    phi: ckpt.phi,
                };
                render_avatar(&scene, &state, &SimilarityTransform::identity(), &cam)?
            }
        }
        None => {
            let truth = scene
                .ground_truth
                .as_ref()
                .ok_or_else(|| anyhow!("image subjects have no ground truth; pass --checkpoint"))?;
            truth.render(&scene.mesh, &cam)?
        }
    };
    let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("render.png"));
    save_png(&img, &path)
}

fn image_files(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        let lower = name.to_ascii_lowercase();
        if lower.ends_with(".png") || lower.ends_with(".ppm") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn eval_images(pred: &Path, reference: &Path, metric: Metric) -> Result<String> {
    let names = image_files(pred)?;
    if names.is_empty() {
        bail!("no PNG or PPM images in {}", pred.display());
    }
    let metrics: &[&str] = match metric {
        Metric::Psnr => &["psnr"],
        Metric::Ssim => &["ssim"],
        Metric::L1 => &["l1"],
        Metric::All => &["l1", "psnr", "ssim"],
    };
    let mut sums = vec![0.0; metrics.len()];
    let mut out = String::new();
    for name in &names {
        let a = Image::load(&pred.join(name))?;
        let b_path = reference.join(name);
        if !b_path.exists() {
            bail!("{} has no counterpart in {}", name, reference.display());
        }
        let b = Image::load(&b_path)?;
        for (m, sum) in metrics.iter().zip(sums.iter_mut()) {
            let v = match *m {
                "l1" => a.mean_abs_diff(&b)?,
                "psnr" => psnr(&a, &b)?,
                _ => ssim(&a, &b)?,
            };
            *sum += v;
            out.push_str(&format!("{name},{m},{v}\n"));
        }
    }
    for (m, sum) in metrics.iter().zip(sums) {
        out.push_str(&format!("mean,{m},{}\n", sum / names.len() as f64));
    }
    Ok(out)
}

fn eval_features(a: &Path, b: &Path) -> Result<String> {
    let fa = FeatureSet::load(a)?;
    let fb = FeatureSet::load(b)?;
    Ok(format!(
        "features,fid,{}\nfeatures,kid,{}\n",
        fid(&fa, &fb)?,
        kid(&fa, &fb)?
    ))
}

fn eval_scores(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report = perceptual_aggregate(&parse_score_lines(&text)?)?;
    let mut out = String::new();
    for (name, v) in CRITERIA.iter().zip(report.criterion_means) {
        out.push_str(&format!("scores,{name},{v}\n"));
    }
    for (subject, v) in &report.per_subject {
        out.push_str(&format!("{subject},score,{v}\n"));
    }
    out.push_str(&format!("scores,overall,{}\n", report.overall));
    Ok(out)
}

fn make_scene(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if cfg.subject.kind != SubjectKind::Synthetic {
        bail!("make-scene writes the synthetic subject; the config names an image subject");
    }
    let scene = Scene::build(cfg)?;
    let dir = out_dir(cli)?;
    save_mesh(&scene.mesh, &dir.join("head.obj"), &dir.join("head.blendshapes"))?;
    for (i, (img, _)) in scene.real_views.iter().enumerate() {
        save_png(img, &dir.join("frontal").join(format!("{i:02}.png")))?;
    }
    scene.generator.save(&dir.join("generator.json"))?;
    let truth = scene
        .ground_truth
        .as_ref()
        .expect("synthetic scenes carry ground truth");
    let rig = back_rig(&scene, 0.0);
    for az in BACK_AZIMUTHS {
        save_png(
            &truth.render(&scene.mesh, &rig.camera(az)?)?,
            &dir.join("truth").join(format!("az{az:03.0}.png")),
        )?;
    }

    let mut synthetic = scene.config.clone();
    synthetic.mesh.obj = Some("head.obj".into());
    synthetic.mesh.blendshapes = Some("head.blendshapes".into());
    write(&dir.join("scene.toml"), synthetic.to_toml()?.as_bytes())?;

    let mut images = synthetic;
    images.subject.kind = SubjectKind::Images;
    images.subject.images_dir = Some("frontal".into());
    images.subject.generator = Some("generator.json".into());
    images.subject.phi = Some(scene.phi_orig.0.clone());
    write(&dir.join("scene_images.toml"), images.to_toml()?.as_bytes())?;
    Ok(())
}
