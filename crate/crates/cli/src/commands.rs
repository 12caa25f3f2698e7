use std::fs;
use std::path::Path;

use agn::data::{self, chain_edges, synthesize, windows, ExportFormat, Format, MotionSequence, SynthSpec};
use agn::model::gradsuite::gradient_suite;
use agn::model::{load_checkpoint, save_checkpoint, Model};
use agn::training::{self, evaluate, TrainConfig, Trained};

use crate::error::CliError;
use crate::runconfig::RunConfig;
use crate::{ConfigArgs, OutputFormat};

pub const RUN_CONFIG: &str = "run.cfg";
pub const FINAL_CHECKPOINT: &str = "model.agnc";
pub const LOSS_CSV: &str = "loss.csv";

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("AGN_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::usage(format!("AGN_SEED is not an integer: {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Defaults, then AGN_SEED, then `base` (a file), then `--set`, then `--seed`.
fn resolve(args: &ConfigArgs, base: Option<&Path>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(seed) = env_seed()? {
        cfg.model.seed = seed;
    }
    if let Some(path) = args.config.as_deref().or(base) {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    for kv in &args.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(CliError::usage)?;
    }
    if let Some(seed) = args.seed {
        cfg.model.seed = seed;
    }
    Ok(cfg)
}

fn load_motion(path: &Path) -> Result<MotionSequence, CliError> {
    let format = Format::from_path(path)?;
    MotionSequence::load(path, format).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn synth(joints: usize, frames: usize, fps: f64, noise: f64, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    if !(fps > 0.0 && fps.is_finite()) || !(noise >= 0.0) {
        return Err(CliError::usage("fps must be positive and noise non-negative"));
    }
    let format = Format::from_path(out).map_err(|e| CliError::usage(e.to_string()))?;
    let seed = match seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let spec = SynthSpec { noise_sd: noise, ..SynthSpec::chain(joints - 1, frames, fps, seed) };
    let seq = synthesize(&spec)?;
    seq.save(out, format)?;
    println!("joints={} frames={} fps={}", seq.n_joints(), seq.n_frames(), seq.fps());
    Ok(())
}

pub struct TrainFlags {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub stride: Option<usize>,
    pub max_iterations: Option<usize>,
}

pub fn train(data_path: &Path, out_dir: &Path, args: &ConfigArgs, flags: TrainFlags) -> Result<(), CliError> {
    let mut cfg = resolve(args, None)?;
    let seq = load_motion(data_path)?;
    let explicit_joints = args.overrides.iter().any(|kv| kv.trim_start().starts_with("n_joints"))
        || args.config.as_deref().is_some_and(|p| fs::read_to_string(p).is_ok_and(|t| t.lines().any(|l| l.trim_start().starts_with("n_joints"))));
    if explicit_joints && cfg.model.n_joints != seq.n_joints() {
        return Err(CliError::data(format!(
            "config expects {} joints but {} has {}",
            cfg.model.n_joints,
            data_path.display(),
            seq.n_joints()
        )));
    }
    cfg.model.n_joints = seq.n_joints();
    if let Some(v) = flags.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = flags.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.lr {
        cfg.lr = v;
    }
    if let Some(v) = flags.stride {
        cfg.stride = v;
    }
    if flags.max_iterations.is_some() {
        cfg.max_iterations = flags.max_iterations;
    }
    cfg.validate()?;

    let pairs = windows(&seq, cfg.model.t_in, cfg.model.t_out, cfg.stride)?;
    if pairs.is_empty() {
        return Err(CliError::data(format!(
            "{} has {} frames; a window needs {}",
            data_path.display(),
            seq.n_frames(),
            cfg.model.t_in + cfg.model.t_out
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::data(format!("{}: {e}", out_dir.display())))?;
    fs::write(out_dir.join(RUN_CONFIG), cfg.to_text()).map_err(|e| CliError::data(e.to_string()))?;

    let (model, mut params) = Model::build::<f32>(&cfg.model)?;
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: cfg.model.seed,
        schedule: cfg.schedule(),
        max_iterations: cfg.max_iterations,
        checkpoint_dir: Some(out_dir.join("checkpoints")),
    };
    println!("windows={} parameters={} epochs={}", pairs.len(), params.num_scalars(), cfg.epochs);
    let history = training::train(&model, &mut params, &pairs, &train_cfg)?;
    history.write_csv(out_dir.join(LOSS_CSV))?;
    let final_path = out_dir.join(FINAL_CHECKPOINT);
    save_checkpoint(&params, &final_path)?;
    for epoch in 0..history.checkpoints.len() {
        if let Some(r) = history.records.iter().rev().find(|r| r.epoch == epoch) {
            println!("epoch={} iteration={} loss={:.4} lr={}", r.epoch, r.iteration, r.loss, r.lr);
        }
    }
    println!("checkpoint={}", final_path.display());
    Ok(())
}

/// Run configuration for a checkpoint: `--config`, else `run.cfg` beside it.
fn checkpoint_config(checkpoint: &Path, args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let sidecar = checkpoint
        .parent()
        .map(|dir| {
            let own = dir.join(RUN_CONFIG);
            // Per-epoch checkpoints live one level below the sidecar.
            if own.exists() { own } else { dir.join("..").join(RUN_CONFIG) }
        })
        .filter(|p| p.exists());
    if args.config.is_none() && sidecar.is_none() {
        return Err(CliError::usage(format!("no --config given and no {RUN_CONFIG} next to {}", checkpoint.display())));
    }
    let cfg = resolve(args, sidecar.as_deref())?;
    cfg.model.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn load_model(checkpoint: &Path, cfg: &RunConfig) -> Result<(Model, agn::ParamStore<f32>), CliError> {
    let params = load_checkpoint::<f32>(checkpoint).map_err(|e| CliError::data(format!("{}: {e}", checkpoint.display())))?;
    Model::with_params(&cfg.model, params).map_err(|e| CliError::data(e.to_string()))
}

pub fn eval(
    checkpoint: &Path,
    data_path: &Path,
    horizons: &[usize],
    stride: usize,
    csv: Option<&Path>,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let cfg = checkpoint_config(checkpoint, args)?;
    if stride == 0 {
        return Err(CliError::usage("--stride must be positive"));
    }
    if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > cfg.model.t_out) {
        return Err(CliError::usage(format!("horizon {h} outside 1..={}", cfg.model.t_out)));
    }
    let (model, params) = load_model(checkpoint, &cfg)?;
    let seq = load_motion(data_path)?;
    if seq.n_joints() != cfg.model.n_joints {
        return Err(CliError::data(format!("model expects {} joints, data has {}", cfg.model.n_joints, seq.n_joints())));
    }
    let pairs = windows(&seq, cfg.model.t_in, cfg.model.t_out, stride)?;
    let report = evaluate(&Trained { model: &model, params: &params }, &pairs, horizons)?;
    let ms = 1000.0 / seq.fps();
    println!("{:>8} {:>8} {:>14} {:>14}", "frames", "ms", "model (mm)", "zero-vel (mm)");
    for ((h, m), b) in report.horizons.iter().zip(&report.model).zip(&report.baseline) {
        println!("{h:>8} {:>8.0} {m:>14.3} {b:>14.3}", *h as f64 * ms);
    }
    println!("windows={}", report.samples);
    if let Some(path) = csv {
        fs::write(path, report.to_csv()).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn predict(
    checkpoint: &Path,
    input: &Path,
    out: &Path,
    format: Option<OutputFormat>,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let cfg = checkpoint_config(checkpoint, args)?;
    let format = match format {
        Some(OutputFormat::Csv) => ExportFormat::Csv,
        Some(OutputFormat::Svg) => ExportFormat::Svg,
        None => match out.extension().and_then(|e| e.to_str()) {
            Some("svg") => ExportFormat::Svg,
            _ => ExportFormat::Csv,
        },
    };
    let (model, params) = load_model(checkpoint, &cfg)?;
    let seq = load_motion(input)?;
    let t_in = cfg.model.t_in;
    if seq.n_frames() < t_in {
        return Err(CliError::data(format!("{} has {} frames, the model needs {t_in}", input.display(), seq.n_frames())));
    }
    if seq.n_joints() != cfg.model.n_joints {
        return Err(CliError::data(format!("model expects {} joints, input has {}", cfg.model.n_joints, seq.n_joints())));
    }
    let window = seq.clip(seq.n_frames() - t_in, t_in)?;
    let pred = model.predict(&params, &window)?;
    data::export(&pred, None, format, &chain_edges(seq.n_joints()), seq.fps(), out)?;
    println!("frames={} joints={} out={}", cfg.model.t_out, seq.n_joints(), out.display());
    Ok(())
}

pub fn gradcheck(tolerance: f64, eps: f64, seed: Option<u64>) -> Result<(), CliError> {
    if !(eps > 0.0) || !(tolerance >= 0.0) {
        return Err(CliError::usage("eps must be positive and tolerance non-negative"));
    }
    let seed = match seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let rows = gradient_suite(seed, eps)?;
    println!("{:<16} {:>14} {:>8}  status", "item", "max rel err", "coords");
    let mut failed = Vec::new();
    for row in &rows {
        let ok = row.report.max_relative_error < tolerance;
        println!(
            "{:<16} {:>14.3e} {:>8}  {}",
            row.name,
            row.report.max_relative_error,
            row.report.coordinates,
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed.push(row.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::numeric(format!("{} item(s) above tolerance {tolerance:e}: {}", failed.len(), failed.join(", "))))
    }
}
