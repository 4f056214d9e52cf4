use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use placegan::data::{load_image_dir, stack_records, synthesize_paired_domains, LoadOptions};
use placegan::features::extract_features;
use placegan::nets::Networks;
use placegan::placerec::{read_pr_csv, sweep_sequence_lengths, threshold_grid};
use placegan::training::{load_checkpoint, read_loss_log, save_checkpoint};
use placegan::{Discriminator, Generator, GroundTruth, TrainerState};
use placegan_cli::{parse_svg_curves, RunConfig, FAILURE_MARKER};

fn placegan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_placegan")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = placegan(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

/// Synthetic data plus a small-network config pointing at it.
fn setup(root: &Path, count: usize) -> PathBuf {
    let data = root.join("data");
    ok(&["synth", "--seed", "4", "--count", &count.to_string(), "--size", "16", "--out", s(&data)]);
    let mut c = RunConfig::default();
    c.data.dir_a = data.join("A");
    c.data.dir_b = data.join("B");
    c.training.batch_size = 2;
    c.training.total_steps = 10;
    c.training.checkpoint_interval = 5;
    c.generator.input_size = 16;
    c.generator.encoder_channels = vec![24, 8];
    c.discriminator.input_size = 16;
    c.discriminator.encoder_channels = vec![24, 8];
    c.discriminator.feature_dim = 8;
    c.eval.lengths = vec![1, 3];
    let path = root.join("run.toml");
    fs::write(&path, c.render()).unwrap();
    path
}

#[test]
fn synth_writes_images_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["synth", "--seed", "2", "--count", "8", "--size", "16", "--out", s(out)]);
    }
    let images = files_in(&a.join("A")).len() + files_in(&a.join("B")).len();
    assert_eq!(images, 16);
    let manifest = fs::read(a.join("manifest.csv")).unwrap();
    assert_eq!(manifest, fs::read(b.join("manifest.csv")).unwrap());

    let (mem_a, _) = synthesize_paired_domains(2, 8, 16).unwrap();
    let loaded = load_image_dir(&a.join("A"), &LoadOptions::new(16, "A")).unwrap();
    for (m, l) in mem_a.iter().zip(&loaded.records) {
        let err = m.pixels.data().iter().zip(l.pixels.data()).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
        assert!(err <= 0.5 / 127.5 + 1e-6, "frame {}: {err}", m.frame_index);
    }
}

#[test]
fn train_smoke_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), 16);
    let (full, split) = (dir.path().join("full"), dir.path().join("split"));

    ok(&["--config", s(&cfg), "train", "--out", s(&full)]);
    let log = read_loss_log(&full.join("losses.csv")).unwrap();
    assert_eq!(log.len(), 10);
    assert_eq!(log.last().unwrap().step, 10);

    ok(&["--config", s(&cfg), "train", "--steps", "5", "--out", s(&split)]);
    ok(&["--config", s(&cfg), "train", "--resume", "--out", s(&split)]);
    assert_eq!(fs::read(full.join("losses.csv")).unwrap(), fs::read(split.join("losses.csv")).unwrap());
    let last = "checkpoints/step_00000010.ckpt";
    assert_eq!(fs::read(full.join(last)).unwrap(), fs::read(split.join(last)).unwrap());
}

#[test]
fn unknown_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "version = 1\n[training]\nbatch_sise = 3\n").unwrap();
    let out = placegan(&["--config", s(&cfg), "train", "--out", s(&dir.path().join("run"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch_sise"));
}

fn identity_checkpoint(path: &Path) {
    let c = RunConfig::parse(&fs::read_to_string(path.parent().unwrap().join("run.toml")).unwrap()).unwrap();
    let nets = Networks {
        g_a: Generator::<f32>::near_identity(c.generator.clone()).unwrap(),
        g_b: Generator::<f32>::near_identity(c.generator.clone()).unwrap(),
        d_a: Discriminator::new(c.discriminator.clone()).unwrap(),
        d_b: Discriminator::new(c.discriminator.clone()).unwrap(),
    };
    let state = TrainerState::from_networks(c.training, c.generator, c.discriminator, nets);
    save_checkpoint(&state, path).unwrap();
}

#[test]
fn translate_identity_and_resolution_check() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), 6);
    let ckpt = dir.path().join("identity.ckpt");
    identity_checkpoint(&ckpt);
    let input = dir.path().join("data/A");
    let out = dir.path().join("translated");
    let stdout = ok(&["translate", "--checkpoint", s(&ckpt), "--direction", "a-to-b", "--input", s(&input), "--out", s(&out)]);
    assert!(String::from_utf8_lossy(&stdout.stdout).contains("ms per image"));

    let names = |d: &Path| files_in(d).iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
    assert_eq!(names(&input), names(&out));
    let src = load_image_dir(&input, &LoadOptions::new(16, "A")).unwrap();
    let dst = load_image_dir(&out, &LoadOptions::new(16, "B")).unwrap();
    for (x, y) in src.records.iter().zip(&dst.records) {
        for (a, b) in x.pixels.data().iter().zip(y.pixels.data()) {
            assert!((a.tanh() - b).abs() < 0.01, "{} vs {b}", a.tanh());
        }
    }

    let big = dir.path().join("big");
    ok(&["synth", "--count", "2", "--size", "32", "--out", s(&big)]);
    let failed = dir.path().join("failed");
    let res = placegan(&["translate", "--checkpoint", s(&ckpt), "--input", s(&big.join("A")), "--out", s(&failed)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("expects 16x16"));
    assert!(failed.join(FAILURE_MARKER).exists());
}

#[test]
fn match_eval_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), 12);
    let run = dir.path().join("run");
    ok(&["--config", s(&cfg), "train", "--steps", "2", "--out", s(&run)]);
    let ckpt = run.join("checkpoints/step_00000002.ckpt");
    let (a, b) = (dir.path().join("data/A"), dir.path().join("data/B"));

    // self-match: untranslated A against itself
    let selfm = dir.path().join("self");
    ok(&[
        "--config", s(&cfg), "match-eval", "--checkpoint", s(&ckpt), "--query", s(&a), "--database", s(&a),
        "--direction", "b", "--lengths", "1,4", "--tolerance-frames", "0", "--out", s(&selfm),
    ]);
    let n1 = read_pr_csv(&selfm.join("pr_n1.csv")).unwrap();
    for p in n1[0].points.iter().filter(|p| p.threshold > 0.0) {
        assert_eq!((p.precision, p.recall), (1.0, 1.0));
    }
    let summary = fs::read_to_string(selfm.join("summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[1][0], "4");
    assert_eq!(rows[1][3].parse::<f64>().unwrap(), 9.0 / 12.0);
    assert!(selfm.join("heatmap.png").exists());

    // translated B queries against A; files equal a direct evaluation
    let eval = dir.path().join("eval");
    ok(&["--config", s(&cfg), "match-eval", "--checkpoint", s(&ckpt), "--query", s(&b), "--database", s(&a), "--out", s(&eval)]);
    let state = load_checkpoint::<f32>(&ckpt).unwrap();
    let qb = stack_records(&load_image_dir(&b, &LoadOptions::new(16, "B")).unwrap().records).unwrap();
    let da = stack_records(&load_image_dir(&a, &LoadOptions::new(16, "A")).unwrap().records).unwrap();
    let fq = extract_features(&state.nets.d_a, &state.nets.g_a.infer(&qb).unwrap(), 0, "B").unwrap();
    let fd = extract_features(&state.nets.d_a, &da, 0, "A").unwrap();
    let c = RunConfig::load(&cfg).unwrap();
    let expected = sweep_sequence_lengths(
        &fq,
        &fd,
        &[1, 3],
        &GroundTruth::identity(12, 2),
        &threshold_grid(200),
        c.eval.normalization,
    )
    .unwrap();
    for curve in &expected {
        let got = read_pr_csv(&eval.join(format!("pr_n{}.csv", curve.sequence_length))).unwrap();
        assert_eq!(got, vec![curve.clone()]);
    }

    // plot them and read the points back
    let svg = dir.path().join("pr.svg");
    ok(&["plot", s(&eval.join("pr_n1.csv")), s(&eval.join("pr_n3.csv")), "--out", s(&svg)]);
    let parsed = parse_svg_curves(&fs::read_to_string(&svg).unwrap()).unwrap();
    assert_eq!(parsed.len(), 2);
    for ((n, pts), curve) in parsed.iter().zip(&expected) {
        assert_eq!(*n, curve.sequence_length);
        assert_eq!(pts.len(), curve.points.len());
        for ((r, p), q) in pts.iter().zip(&curve.points) {
            assert!((r - q.recall).abs() < 1e-9 && (p - q.precision).abs() < 1e-9);
        }
    }
}

#[test]
fn plot_rejects_malformed_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "threshold,precision,recall,n\n0.1,1.5,0.2,1\n").unwrap();
    let out = placegan(&["plot", s(&bad), "--out", s(&dir.path().join("x.svg"))]);
    assert!(!out.status.success());
}

#[test]
fn help_lists_defaults() {
    let required = ["--checkpoint", "--query", "--database", "--input", "--help", "--version"];
    for sub in ["synth", "train", "translate", "match-eval", "plot", "config"] {
        let out = ok(&[sub, "--help"]);
        let text = String::from_utf8(out.stdout).unwrap();
        let mut blocks: Vec<String> = Vec::new();
        for line in text.lines() {
            let t = line.trim_start();
            if t.starts_with("--") || t.starts_with("-h") || t.starts_with("-V") {
                blocks.push(t.to_string());
            } else if let Some(b) = blocks.last_mut() {
                b.push(' ');
                b.push_str(t);
            }
        }
        assert!(!blocks.is_empty(), "{sub}");
        for b in blocks {
            let flag = b.split_whitespace().find(|w| w.starts_with("--")).unwrap_or("").trim_end_matches(',');
            if required.contains(&flag) {
                continue;
            }
            assert!(b.contains("default"), "{sub} {flag}: {b}");
        }
    }
}

#[test]
fn config_subcommand_round_trips() {
    let out = ok(&["config"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::default());
}
