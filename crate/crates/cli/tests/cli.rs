use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphmamba::hsi::{load_cube, ppm};
use graphmamba::model::checkpoint;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphmamba"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Noiseless 12×12 scene plus a small, fast model config.
fn small_setup(dir: &Path) -> (PathBuf, PathBuf) {
    let cube = dir.join("cube.hsic");
    ok(&[
        "synth",
        "--set",
        "synth.height=12",
        "--set",
        "synth.width=12",
        "--set",
        "synth.bands=6",
        "--set",
        "synth.classes=3",
        "--set",
        "synth.noise=0",
        "--set",
        "synth.seed=7",
        "--out",
        s(&cube),
    ]);
    let config = dir.join("small.cfg");
    let text = format!(
        "# small noiseless run\n[data]\ncube = {}\ntrain_fraction = 0.5\nsplit_seed = 7\n\n\
         [model]\npatch_size = 3\nfeatures = 8\nd_model = 8\n\n\
         [train]\nepochs = 60\nbatch_size = 16\nlearning_rate = 0.01\nseed = 0\n",
        s(&cube)
    );
    std::fs::write(&config, text).unwrap();
    (cube, config)
}

#[test]
fn synth_writes_loadable_deterministic_cube() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.hsic"), dir.path().join("b.hsic"));
    ok(&["synth", "--seed", "5", "--out", s(&a)]);
    ok(&["synth", "--seed", "5", "--out", s(&b)]);
    let cube = load_cube(&a).unwrap();
    assert_eq!((cube.height(), cube.width(), cube.bands(), cube.classes()), (24, 24, 8, 4));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn negative_noise_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--set", "synth.noise=-0.5", "--out", s(&dir.path().join("x.hsic"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("synth.noise") && err.contains("usage:"), "{err}");
    assert!(!dir.path().join("x.hsic").exists());
}

#[test]
fn config_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[train]\nepochz = 3\n").unwrap();
    let out = run(&["estimate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `train.epochz`"));

    let out = bin()
        .args(["estimate", "--set", "model.bands=8", "--set", "model.classes=4"])
        .env("GRAPHMAMBA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (cube_path, config) = small_setup(dir.path());
    let run_dir = dir.path().join("run");
    ok(&["train", "--config", s(&config), "--out", s(&run_dir)]);

    let history = std::fs::read_to_string(run_dir.join("history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,loss,train_oa,test_oa"));
    assert_eq!(lines.count(), 60);
    let ckpt = run_dir.join("checkpoint.gmck");
    let params = checkpoint::load(&ckpt).unwrap();

    // The noiseless scene is learned perfectly.
    let eval = ok(&["eval", "--config", s(&config), "--checkpoint", s(&ckpt)]);
    let text = String::from_utf8(eval.stdout).unwrap();
    assert!(text.lines().any(|l| l == "oa = 1"), "{text}");
    let again = ok(&["eval", "--config", s(&config), "--checkpoint", s(&ckpt), "--deterministic"]);
    assert_eq!(text, String::from_utf8(again.stdout).unwrap());

    let (m1, m2) = (dir.path().join("m1.ppm"), dir.path().join("m2.ppm"));
    ok(&["predict", "--config", s(&config), "--checkpoint", s(&ckpt), "--out", s(&m1)]);
    ok(&["predict", "--config", s(&config), "--checkpoint", s(&ckpt), "--out", s(&m2), "--deterministic"]);
    let image = std::fs::read(&m1).unwrap();
    assert_eq!(image, std::fs::read(&m2).unwrap());
    let header = b"P6\n12 12\n255\n";
    assert_eq!(&image[..header.len()], header);
    let pixels = &image[header.len()..];
    assert_eq!(pixels.len(), 12 * 12 * 3);
    let cube = load_cube(&cube_path).unwrap();
    for r in 0..12 {
        for c in 0..12 {
            let rgb = &pixels[(r * 12 + c) * 3..(r * 12 + c) * 3 + 3];
            let interior = (1..11).contains(&r) && (1..11).contains(&c);
            let expected = if interior { ppm::class_color(cube.label(r, c)) } else { [0, 0, 0] };
            assert_eq!(rgb, expected, "pixel ({r},{c})");
        }
    }

    let est = ok(&["estimate", "--config", s(&config)]);
    let report = String::from_utf8(est.stdout).unwrap();
    let parameters = format!("parameters = {}", params.element_count());
    assert!(report.lines().any(|l| l == parameters), "{report}");
    for stage in ["tokenization", "graph", "attention", "fusion", "ssm"] {
        assert!(report.contains(&format!("flops.{stage} = ")));
    }
}

#[test]
fn malformed_checkpoint_has_its_own_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let (_, config) = small_setup(dir.path());
    let bad = dir.path().join("bad.gmck");
    std::fs::write(&bad, b"definitely not a checkpoint").unwrap();
    let out = run(&["eval", "--config", s(&config), "--checkpoint", s(&bad)]);
    assert_eq!(out.status.code(), Some(4));
    let missing = run(&["eval", "--config", s(&config), "--checkpoint", s(&dir.path().join("none.gmck"))]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn estimate_needs_dimensions_without_a_cube() {
    let out = run(&["estimate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ok(&["estimate", "--set", "model.bands=8", "--set", "model.classes=4", "--set", "model.patch_size=5"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("# operations:"));
}
