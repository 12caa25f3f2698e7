use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agn::data::{Format, MotionSequence};
use tempfile::TempDir;

fn agn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agn")).args(args).env_remove("AGN_SEED").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = agn(args);
    assert!(out.status.success(), "agn {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 8] = ["--set", "d_p=8", "--set", "temporal_dim=8", "--set", "encoder_layers=1", "--set", "affm_ratio=2"];

struct Run {
    dir: TempDir,
    data: PathBuf,
    out: PathBuf,
}

/// Synthesizes a short chain and trains a small model on it.
fn trained(epochs: &str, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("chain.motb");
    ok(&["synth", "--joints", "3", "--frames", "80", "--seed", "4", "--out", p(&data)]);
    let out = dir.path().join("run");
    let mut args = vec!["train", "--data", p(&data), "--out-dir", p(&out), "--epochs", epochs, "--stride", "4"];
    args.extend(SMALL);
    args.extend(extra);
    ok(&args);
    Run { dir, data, out }
}

#[test]
fn synth_is_deterministic_and_validates_frames() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.motb"), dir.path().join("b.motb"));
    let out = ok(&["synth", "--joints", "5", "--frames", "40", "--seed", "9", "--noise", "1.5", "--out", p(&a)]);
    assert!(out.contains("joints=5 frames=40"), "{out}");
    ok(&["synth", "--joints", "5", "--frames", "40", "--seed", "9", "--noise", "1.5", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(agn(&["synth", "--frames", "0", "--out", p(&a)]).status.code(), Some(1));
    assert_eq!(agn(&["synth", "--out", p(&dir.path().join("x.bin"))]).status.code(), Some(1));
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let run = trained("3", &["--lr", "0", "--batch-size", "64"]);
    let csv = fs::read_to_string(run.out.join("loss.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,iteration,loss,lr"));
    let losses: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    // One batch holds every window, so each epoch sees the same data.
    assert_eq!(losses.len(), 3);
    assert!(losses.iter().all(|l| (l - losses[0]).abs() <= 1e-9 * losses[0]), "{losses:?}");
    let ckpts: Vec<_> = fs::read_dir(run.out.join("checkpoints")).unwrap().collect();
    assert_eq!(ckpts.len(), 3);
    let first = fs::read(run.out.join("checkpoints/epoch_000.agnc")).unwrap();
    assert_eq!(first, fs::read(run.out.join("checkpoints/epoch_002.agnc")).unwrap());
    assert_eq!(first, fs::read(run.out.join("model.agnc")).unwrap());
}

fn read_eval_csv(path: &Path) -> Vec<(usize, f64, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("horizon,model_mpjpe,baseline_mpjpe"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn eval_baseline_matches_direct_computation() {
    let run = trained("1", &[]);
    let csv = run.dir.path().join("eval.csv");
    let out = ok(&[
        "eval",
        "--checkpoint",
        p(&run.out.join("model.agnc")),
        "--data",
        p(&run.data),
        "--horizons",
        "1,3,10",
        "--stride",
        "2",
        "--csv",
        p(&csv),
    ]);
    assert!(out.contains("windows="), "{out}");
    let seq = MotionSequence::load(&run.data, Format::Motb).unwrap();
    let (n, frames) = (seq.n_joints(), seq.n_frames());
    for (h, model, baseline) in read_eval_csv(&csv) {
        let (mut total, mut count) = (0.0, 0);
        let mut start = 0;
        while start + 20 <= frames {
            let last = seq.frame(start + 9);
            let truth = seq.frame(start + 9 + h);
            let mut err = 0.0;
            for j in 0..n {
                let d: f64 = (0..3).map(|c| (last[j * 3 + c] as f64 - truth[j * 3 + c] as f64).powi(2)).sum();
                err += d.sqrt();
            }
            total += err / n as f64;
            count += 1;
            start += 2;
        }
        let expected = total / count as f64;
        assert!((baseline - expected).abs() <= 1e-5 * expected.max(1.0), "h={h}: {baseline} vs {expected}");
        assert!(model.is_finite());
    }
}

#[test]
fn eval_rejects_out_of_range_horizon() {
    let run = trained("1", &[]);
    let out = agn(&["eval", "--checkpoint", p(&run.out.join("model.agnc")), "--data", p(&run.data), "--horizons", "11"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corrupt_checkpoint_exits_with_data_error() {
    let run = trained("1", &[]);
    let ckpt = run.out.join("model.agnc");
    let mut bytes = fs::read(&ckpt).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    fs::write(&ckpt, bytes).unwrap();
    let out = agn(&["eval", "--checkpoint", p(&ckpt), "--data", p(&run.data)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    fs::write(&ckpt, b"not a checkpoint").unwrap();
    assert_eq!(agn(&["predict", "--checkpoint", p(&ckpt), "--input", p(&run.data), "--out", p(&run.dir.path().join("o.csv"))]).status.code(), Some(2));
}

#[test]
fn predicted_csv_reproduces_eval_error() {
    let run = trained("1", &[]);
    let seq = MotionSequence::load(&run.data, Format::Motb).unwrap();
    let window = seq.frames(30, 20).unwrap();
    let window_path = run.dir.path().join("window.motb");
    window.save(&window_path, Format::Motb).unwrap();
    let observed = run.dir.path().join("observed.csv");
    window.frames(0, 10).unwrap().save(&observed, Format::Csv).unwrap();

    let ckpt = run.out.join("model.agnc");
    let eval_csv = run.dir.path().join("eval.csv");
    ok(&["eval", "--checkpoint", p(&ckpt), "--data", p(&window_path), "--csv", p(&eval_csv)]);
    let pred_path = run.dir.path().join("pred.csv");
    ok(&["predict", "--checkpoint", p(&ckpt), "--input", p(&observed), "--out", p(&pred_path)]);
    let pred = MotionSequence::load(&pred_path, Format::Csv).unwrap();
    assert_eq!((pred.n_joints(), pred.n_frames()), (3, 10));

    for (h, model, _) in read_eval_csv(&eval_csv) {
        let (a, b) = (pred.frame(h - 1), window.frame(9 + h));
        let err: f64 = (0..3)
            .map(|j| (0..3).map(|c| (a[j * 3 + c] as f64 - b[j * 3 + c] as f64).powi(2)).sum::<f64>().sqrt())
            .sum::<f64>()
            / 3.0;
        assert!((err - model).abs() <= 1e-5 * model.max(1.0), "h={h}: {err} vs {model}");
    }

    let again = run.dir.path().join("again.csv");
    ok(&["predict", "--checkpoint", p(&ckpt), "--input", p(&observed), "--out", p(&again)]);
    assert_eq!(fs::read(&pred_path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn svg_prediction_is_well_formed() {
    let run = trained("1", &[]);
    let svg_path = run.dir.path().join("pred.svg");
    ok(&["predict", "--checkpoint", p(&run.out.join("checkpoints/epoch_000.agnc")), "--input", p(&run.data), "--out", p(&svg_path)]);
    let text = fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let circles = doc.descendants().filter(|n| n.has_tag_name("circle")).count();
    assert_eq!(circles, 3 * 10);
}

#[test]
fn gradcheck_passes_by_default_and_fails_at_zero_tolerance() {
    let out = ok(&["gradcheck"]);
    assert_eq!(out.matches("PASS").count(), 8, "{out}");
    assert_eq!(agn(&["gradcheck", "--tolerance", "0"]).status.code(), Some(3));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.motb");
    ok(&["synth", "--frames", "40", "--out", p(&data)]);
    let run_dir = dir.path().join("r");
    let args = ["train", "--data", p(&data), "--out-dir", p(&run_dir), "--set", "depth=3"];
    assert_eq!(agn(&args).status.code(), Some(1));
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "# comment\nd_p = 8\nwidth = 3\n").unwrap();
    let out = agn(&["train", "--data", p(&data), "--out-dir", p(&run_dir), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.cfg:3"));
}

#[test]
fn seed_comes_from_environment_unless_given() {
    let dir = tempfile::tempdir().unwrap();
    let synth = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_agn"));
        cmd.args(["synth", "--frames", "20", "--out", p(&path)]).env_remove("AGN_SEED");
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        if let Some(v) = env {
            cmd.env("AGN_SEED", v);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(path).unwrap()
    };
    let env7 = synth("a.motb", Some("7"), None);
    assert_eq!(env7, synth("b.motb", None, Some("7")));
    assert_ne!(env7, synth("c.motb", None, None));
    assert_eq!(synth("d.motb", Some("7"), Some("2")), synth("e.motb", None, Some("2")));
}
