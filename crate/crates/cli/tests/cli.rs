use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"seed = 3
[cameras]
count = 4
profile = "custom"
real_resolution = [48, 48]
pseudo_resolution = [48, 48]
[fit]
max_steps = 4
[align]
max_steps = 4
[inversion]
steps_w = 3
steps_theta = 2
[loop]
render_views = 2
back_views = 3
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_avatarback"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    (dir, cfg)
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p.clone());
            }
            out.push(p.strip_prefix(dir).unwrap().to_path_buf());
        }
    }
    out.sort();
    out
}

#[test]
fn usage_errors_exit_two() {
    let (dir, _) = setup();
    let out = run(dir.path(), &["--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(dir.path(), &["loop", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let (dir, _) = setup();
    let out = run(dir.path(), &["fit", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    std::fs::write(dir.path().join("bad.toml"), "seed = \"x\"\n").unwrap();
    assert_eq!(run(dir.path(), &["fit", "--config", "bad.toml"]).status.code(), Some(1));
}

#[test]
fn render_writes_a_png() {
    let (dir, cfg) = setup();
    let out = run(
        dir.path(),
        &[
            "render",
            "--config",
            cfg.to_str().unwrap(),
            "--camera-azimuth",
            "180",
            "--out",
            "back.png",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = avatarback_core::Image::load(&dir.path().join("back.png")).unwrap();
    assert_eq!((img.width, img.height), (48, 48));
}

#[test]
fn eval_prints_per_image_and_mean_rows() {
    let (dir, _) = setup();
    for d in ["a", "b"] {
        std::fs::create_dir(dir.path().join(d)).unwrap();
    }
    let gray = |v: f64| avatarback_core::Image::filled(16, 16, avatarback_core::Vec3::repeat(v), 1.0);
    gray(0.0).save_png(&dir.path().join("a/x.png")).unwrap();
    gray(0.0).save_png(&dir.path().join("a/y.png")).unwrap();
    gray(0.0).save_png(&dir.path().join("b/x.png")).unwrap();
    gray(0.1).save_png(&dir.path().join("b/y.png")).unwrap();
    let out = run(
        dir.path(),
        &["eval", "--pred-dir", "a", "--ref-dir", "b", "--metric", "psnr"],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "item,metric,value");
    assert_eq!(lines[1], "x.png,psnr,inf");
    let y: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    let expected = -10.0 * ((26.0f64 / 255.0).powi(2)).log10();
    assert!((y - expected).abs() < 1e-9, "{y} vs {expected}");
    assert!(lines[3].starts_with("mean,psnr,"));
}

#[test]
fn eval_aggregates_scores_and_features() {
    let (dir, _) = setup();
    let mut jsonl = String::new();
    for az in [135, 180, 225] {
        jsonl.push_str(&format!(
            "{{\"subject\":\"a\",\"azimuth\":{az},\"clarity\":8,\"structural_integrity\":8,\"texture_quality\":8,\"color_lighting_consistency\":8,\"overall_perception\":8}}\n"
        ));
    }
    std::fs::write(dir.path().join("s.jsonl"), jsonl).unwrap();
    std::fs::write(dir.path().join("f.txt"), "features 3 2\n1 0\n0 1\n1 1\n").unwrap();
    let out = run(
        dir.path(),
        &[
            "eval",
            "--scores",
            "s.jsonl",
            "--features-a",
            "f.txt",
            "--features-b",
            "f.txt",
            "--out",
            "r.csv",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(text.contains("scores,overall,8\n"), "{text}");
    assert!(text.contains("features,fid,"));

    let lines: String = std::fs::read_to_string(dir.path().join("s.jsonl"))
        .unwrap()
        .lines()
        .take(2)
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.path().join("s.jsonl"), lines).unwrap();
    let out = run(dir.path(), &["eval", "--scores", "s.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subject a at azimuth 225"));
}

#[test]
fn staged_commands_compose_into_the_loop() {
    let (dir, cfg) = setup();
    let cfg = cfg.to_str().unwrap();
    let before = listing(dir.path());
    assert!(run(
        dir.path(),
        &["loop", "--config", cfg, "--out", "full", "--threads", "1"]
    )
    .status
    .success());
    let steps = [
        ("fit", None, "s1"),
        ("invert", Some("s1/checkpoint.json"), "s2"),
        ("synthesize", Some("s2/checkpoint.json"), "s3"),
        ("align", Some("s3/checkpoint.json"), "s4"),
    ];
    for (cmd, ckpt, out) in steps {
        let mut args = vec![cmd, "--config", cfg, "--out", out];
        if let Some(c) = ckpt {
            args.extend(["--checkpoint", c]);
        }
        let o = run(dir.path(), &args);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("full/checkpoint.json"), read("s4/checkpoint.json"));
    assert!(dir.path().join("s2/generator.json").exists());
    assert_eq!(listing(&dir.path().join("s3/pseudo")).len(), 3);
    for f in ["az135.png", "az180.png", "az225.png"] {
        assert!(dir.path().join("full/renders/frontal").join(f).exists());
        assert!(dir.path().join("full/renders/align_0").join(f).exists());
    }
    let report = String::from_utf8(read("full/report.csv")).unwrap();
    assert!(report.starts_with("stage,metric,value\n"));
    assert!(report.contains("align_0,back_psnr_180,"));

    let o = run(
        dir.path(),
        &[
            "align",
            "--config",
            cfg,
            "--checkpoint",
            "full/checkpoint.json",
            "--out",
            "again",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run(
        dir.path(),
        &[
            "fit",
            "--config",
            cfg,
            "--checkpoint",
            "s2/checkpoint.json",
            "--out",
            "again",
        ],
    );
    assert_eq!(o.status.code(), Some(1));

    let created: Vec<PathBuf> = listing(dir.path())
        .into_iter()
        .filter(|p| !before.contains(p))
        .collect();
    let roots = ["full", "s1", "s2", "s3", "s4", "again"];
    assert!(
        created.iter().all(|p| roots.iter().any(|r| p.starts_with(r))),
        "{created:?}"
    );
}

#[test]
fn make_scene_round_trips_through_both_subject_kinds() {
    let (dir, cfg) = setup();
    let o = run(
        dir.path(),
        &["make-scene", "--config", cfg.to_str().unwrap(), "--out", "scene"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "scene.toml",
        "scene_images.toml",
        "head.obj",
        "head.blendshapes",
        "generator.json",
        "frontal/00.png",
        "truth/az180.png",
    ] {
        assert!(dir.path().join("scene").join(f).exists(), "{f}");
    }
    assert!(run(dir.path(), &["loop", "--config", "scene/scene.toml", "--out", "a"])
        .status
        .success());
    assert!(
        run(dir.path(), &["loop", "--config", cfg.to_str().unwrap(), "--out", "b"])
            .status
            .success()
    );
    assert_eq!(
        std::fs::read(dir.path().join("a/checkpoint.json")).unwrap(),
        std::fs::read(dir.path().join("b/checkpoint.json")).unwrap()
    );
    let o = run(
        dir.path(),
        &["loop", "--config", "scene/scene_images.toml", "--out", "c"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        dir.path(),
        &[
            "eval",
            "--pred-dir",
            "a/renders/align_0",
            "--ref-dir",
            "scene/truth",
            "--metric",
            "l1",
        ],
    );
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1 + 3 + 1);
}

#[test]
fn seed_flag_overrides_config() {
    let (dir, cfg) = setup();
    let cfg = cfg.to_str().unwrap();
    for (seed, out) in [("3", "x.png"), ("4", "y.png"), ("3", "z.png")] {
        assert!(
            run(dir.path(), &["render", "--config", cfg, "--seed", seed, "--out", out])
                .status
                .success()
        );
    }
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("x.png"), read("z.png"));
    assert_ne!(read("x.png"), read("y.png"));
}
