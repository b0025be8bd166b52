use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use ihc2he_core::imaging::io::{read_image, read_label_map, write_image, write_label_map};
use ihc2he_core::synthetic::{five_discs, label_shapes, paint, Ellipse, DAB_BROWN, HEMATOXYLIN_BLUE};
use ihc2he_core::RasterImage;

const TINY: &str = r#"
[prepare]
patch_size = 16
count_per_image = 2

[translation]
patch_size = 16
batch_size = 2
epochs = 1
generator_filters = 4
generator_blocks = 1
discriminator_filters = 4
discriminator_layers = 1
checkpoint_every = 0

[translate]
tile_size = 64
overlap = 8
"#;

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        let env = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        fs::write(env.path("config.toml"), TINY).unwrap();
        env
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_ihc2he"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(self.path("config.toml"))
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn images(&self, name: &str, images: &[(&str, RasterImage)]) -> PathBuf {
        let dir = self.path(name);
        fs::create_dir_all(&dir).unwrap();
        for (n, img) in images {
            write_image(&dir.join(format!("{n}.png")), img).unwrap();
        }
        dir
    }
}

fn noise(h: usize, w: usize, seed: u32) -> RasterImage {
    let samples = (0..h * w * 3).map(|i| (i as u32 * 29 + seed * 13) as u8).collect();
    RasterImage::new(h, w, 3, samples).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn full_chain_preserves_names_and_sizes() {
    let env = Env::new();
    env.images("ihc_src", &[("s1", noise(40, 40, 1))]);
    env.images("he_src", &[("s2", noise(40, 40, 2))]);
    env.ok(&["prepare", "--input", "ihc_src", "--domain", "ihc"]);
    env.ok(&["prepare", "--input", "he_src", "--domain", "he"]);
    assert!(env.path("runs/manifests/ihc/manifest.json").is_file());
    env.ok(&["train-translation", "--ihc", "runs/manifests/ihc", "--he", "runs/manifests/he", "--seed", "3"]);
    let ckpt = env.path("runs/checkpoints/final.safetensors");
    assert!(ckpt.is_file());
    assert!(env.path("runs/checkpoints/loss_history.csv").is_file());

    env.images("rois", &[("roi_1", noise(100, 90, 4)), ("roi_2", noise(30, 30, 5))]);
    env.ok(&["translate", "--checkpoint", ckpt.to_str().unwrap(), "--input", "rois"]);
    env.ok(&["segment", "--input", "runs/virtual_he", "--backend", "classical"]);
    for (name, size) in [("roi_1", (100, 90)), ("roi_2", (30, 30))] {
        let v = read_image(&env.path(&format!("runs/virtual_he/{name}.png"))).unwrap();
        assert_eq!((v.height(), v.width()), size);
        let m = read_label_map(&env.path(&format!("runs/masks/classical/{name}.png"))).unwrap();
        assert_eq!((m.height(), m.width()), size);
    }
    for dir in ["runs/manifests/ihc", "runs/checkpoints", "runs/virtual_he", "runs/masks/classical"] {
        assert!(env.path(dir).join("run_record.json").is_file(), "{dir}");
    }
    env.ok(&["detect-positive", "--ihc", "rois", "--masks", "runs/masks/classical"]);
    let csv = fs::read_to_string(env.path("runs/detections/submission.csv")).unwrap();
    assert!(csv.starts_with("image_id,x,y\n"));
}

#[test]
fn evaluate_and_report() {
    let env = Env::new();
    let (_, discs) = five_discs();
    let gt = env.path("gt");
    fs::create_dir_all(&gt).unwrap();
    write_label_map(&gt.join("a.png"), &label_shapes(128, 128, &discs)).unwrap();
    let (img, _) = five_discs();
    env.images("he", &[("a", img)]);
    env.ok(&["segment", "--input", "he", "--out", "pred"]);
    let table = env.ok(&["evaluate", "--pred", "pred", "--gt", "gt", "--method", "classical"]);
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["Method", "Dice", "Accuracy", "Precision", "Recall", "F1"]);
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(env.path("runs/metrics/classical/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["curve"].as_array().unwrap().len(), 11);
    assert_eq!(metrics["counts"]["true_positives"], 5);

    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(env.path("runs/metrics/classical/run_record.json")).unwrap()).unwrap();
    let id = record["run_id"].as_str().unwrap();
    let report = env.ok(&["report", id]);
    assert_eq!(report.lines().count(), 2);
    assert!(report.lines().nth(1).unwrap().starts_with("classical"));

    let missing = env.run(&["report", "20990101T000000000Z-deadbeef"]);
    assert_eq!(code(&missing), 3);
}

#[test]
fn detect_positive_override_is_recorded() {
    let env = Env::new();
    let brown = Ellipse::disc(10.0, 10.0, 5.0);
    let blue = Ellipse::disc(10.0, 30.0, 5.0);
    env.images("ihc", &[("r", paint(20, 40, [240, 240, 240], &[(brown, DAB_BROWN), (blue, HEMATOXYLIN_BLUE)]))]);
    let masks = env.path("masks");
    fs::create_dir_all(&masks).unwrap();
    write_label_map(&masks.join("r.png"), &label_shapes(20, 40, &[brown, blue])).unwrap();
    env.ok(&["detect-positive", "--ihc", "ihc", "--masks", "masks", "--min-fraction", "0.42"]);
    assert_eq!(
        fs::read_to_string(env.path("runs/detections/submission.csv")).unwrap(),
        "image_id,x,y\nr,10.0,10.0\n"
    );
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(env.path("runs/detections/run_record.json")).unwrap()).unwrap();
    assert_eq!(record["config"]["positivity"]["min_fraction"], 0.42);
}

#[test]
fn stub_backend_contract() {
    let env = Env::new();
    env.images("he", &[("p", noise(12, 16, 1)), ("q", noise(12, 16, 2))]);
    env.ok(&["segment", "--backend", "stub", "--input", "he", "--out", "stub_masks"]);
    let m = read_label_map(&env.path("stub_masks/q.png")).unwrap();
    assert_eq!((m.height(), m.width(), m.instance_count()), (12, 16, 0));

    let out = Command::new(env!("CARGO_BIN_EXE_ihc2he"))
        .current_dir(env.path(""))
        .env("IHC2HE_STUB_OMIT", "q")
        .args(["segment", "--backend", "stub", "--input", "he", "--out", "partial"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing outputs: q"), "{stderr}");
    assert!(!env.path("partial/p.png").exists());
}

#[test]
fn exit_codes() {
    let env = Env::new();
    env.images("he", &[("a", noise(16, 16, 1))]);
    let out = env.run(&["segment", "--backend", "hovernet", "--input", "he"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("classical"));

    fs::write(env.path("bad.toml"), "[translation]\nepochz = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ihc2he"))
        .current_dir(env.path(""))
        .args(["--config", "bad.toml", "show-config"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);

    fs::write(env.path("bad.safetensors"), b"nope").unwrap();
    let out = env.run(&["translate", "--checkpoint", "bad.safetensors", "--input", "he"]);
    assert_eq!(code(&out), 3);

    let gt = env.path("gt");
    fs::create_dir_all(&gt).unwrap();
    write_label_map(&gt.join("other.png"), &ihc2he_core::LabelMap::empty(16, 16)).unwrap();
    let out = env.run(&["evaluate", "--pred", "he", "--gt", "gt"]);
    assert_eq!(code(&out), 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("other") && stderr.contains('a'), "{stderr}");

    let out = env.run(&["train-translation", "--ihc", "missing", "--he", "missing"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn show_config_lists_defaults() {
    let out = Command::new(env!("CARGO_BIN_EXE_ihc2he")).arg("show-config").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("batch_size = 10"));
    assert!(text.contains("epochs = 30"));
    assert!(text.contains("curve_step = 0.05"));
}

