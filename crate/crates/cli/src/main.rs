//! `graphmamba` command-line front-end.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use graphmamba::estimate::estimate_memory;
use graphmamba::hsi::{self, extract_patches, generate_synthetic, stratified_split};
use graphmamba::model::checkpoint;
use graphmamba::train::{evaluate, predict_map, train, EpochStats, EvalOptions};
use graphmamba::{Error, HsiCube, Params32};

use crate::config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "graphmamba", version, about = "Hyperspectral patch classification with a graph and state-space network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// Plain-text `key = value` config with [data], [model], [train] and [synth] sections.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config entry; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Replace every seed (synthesis, split, training).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Sequential evaluation on a single worker thread.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic cube.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output cube file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Train on `data.cube`; writes checkpoint.gmck, history.csv and metrics.txt.
    Train {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Metrics of a checkpoint on the held-out split of `data.cube`.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Also write the metrics to this file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Class map of `data.cube` as a binary PPM image.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Parameter, memory and operation estimates for the configured model.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Also write the report to this file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth { common, .. }
            | Command::Train { common, .. }
            | Command::Eval { common, .. }
            | Command::Predict { common, .. }
            | Command::Estimate { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Predict { .. } => "predict",
            Command::Estimate { .. } => "estimate",
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
    if let Some(seed) = common.seed {
        cfg.reseed(seed);
    }
    Ok(cfg)
}

fn thread_count(deterministic: bool) -> Result<Option<usize>> {
    if deterministic {
        return Ok(Some(1));
    }
    match std::env::var("GRAPHMAMBA_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError(format!("GRAPHMAMBA_THREADS must be a positive integer, got `{v}`")).into()),
        },
        Err(_) => Ok(None),
    }
}

fn eval_options(common: &Common) -> EvalOptions {
    EvalOptions {
        parallel: !common.deterministic,
        ..EvalOptions::default()
    }
}

fn input_cube(cfg: &RunConfig) -> Result<Arc<HsiCube>> {
    let Some(path) = &cfg.data.cube else {
        return Err(ConfigError("data.cube is required for this command".into()).into());
    };
    let cube = hsi::load_cube(path).with_context(|| format!("loading cube {}", path.display()))?;
    Ok(Arc::new(if cfg.data.normalize { cube.normalized() } else { cube }))
}

fn load_checkpoint(path: &Path) -> Result<Params32> {
    checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn check_cube_matches(params: &Params32, cube: &HsiCube) -> Result<()> {
    let m = params.config();
    if m.bands != cube.bands() || m.classes != cube.classes() as usize {
        bail!(Error::Argument(format!(
            "checkpoint expects {} bands and {} classes, cube has {} bands and {} classes",
            m.bands,
            m.classes,
            cube.bands(),
            cube.classes()
        )));
    }
    Ok(())
}

fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,loss,train_oa,test_oa\n");
    for h in history {
        let test = h.test_oa.map(|v| v.to_string()).unwrap_or_default();
        writeln!(s, "{},{},{},{}", h.epoch, h.loss, h.train_oa, test).unwrap();
    }
    s
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let cube = generate_synthetic(&cfg.synth)?;
    hsi::save_cube(&cube, out).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "wrote {}x{}x{} cube with {} classes to {}",
        cube.height(),
        cube.width(),
        cube.bands(),
        cube.classes(),
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, common: &Common, out: &Path) -> Result<()> {
    let cube = input_cube(cfg)?;
    let model = cfg.model.resolve(cube.bands(), cube.classes() as usize)?;
    let patches = extract_patches(cube, model.patch_size, cfg.data.stride)?;
    let split = stratified_split(&patches, cfg.data.train_fraction, cfg.data.split_seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let start = Instant::now();
    let outcome = train::<f32>(&patches, &split, &model, &cfg.train)?;
    let mut held_out = split.test_indices();
    if held_out.is_empty() {
        held_out = split.train_indices();
    }
    let metrics = evaluate(&outcome.params, &patches, &held_out, &eval_options(common))?;

    checkpoint::save(&outcome.params, out.join("checkpoint.gmck"))
        .with_context(|| format!("writing checkpoint in {}", out.display()))?;
    write(&out.join("history.csv"), history_csv(&outcome.history))?;
    write(&out.join("metrics.txt"), metrics.to_text())?;
    eprintln!(
        "trained {} epochs on {} patches in {:.1?}: oa = {:.4}, kappa = {:.4} on {} held-out patches",
        outcome.history.len(),
        split.train_indices().len(),
        start.elapsed(),
        metrics.oa,
        metrics.kappa,
        held_out.len()
    );
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, common: &Common, ckpt: &Path, out: Option<&Path>) -> Result<()> {
    let params = load_checkpoint(ckpt)?;
    let cube = input_cube(cfg)?;
    check_cube_matches(&params, &cube)?;
    let patches = extract_patches(cube, params.config().patch_size, cfg.data.stride)?;
    let split = stratified_split(&patches, cfg.data.train_fraction, cfg.data.split_seed)?;
    let mut indices = split.test_indices();
    if indices.is_empty() {
        indices = split.train_indices();
    }
    let text = evaluate(&params, &patches, &indices, &eval_options(common))?.to_text();
    print!("{text}");
    if let Some(path) = out {
        write(path, &text)?;
    }
    Ok(())
}

fn cmd_predict(cfg: &RunConfig, common: &Common, ckpt: &Path, out: &Path) -> Result<()> {
    let params = load_checkpoint(ckpt)?;
    let cube = input_cube(cfg)?;
    if params.config().bands != cube.bands() {
        bail!(Error::Argument(format!(
            "checkpoint expects {} bands, cube has {}",
            params.config().bands,
            cube.bands()
        )));
    }
    let (h, w) = (cube.height(), cube.width());
    let map = predict_map(&params, cube, &eval_options(common))?;
    write(out, hsi::ppm::encode_class_map(&map, h, w))?;
    eprintln!("wrote {w}x{h} class map to {}", out.display());
    Ok(())
}

fn cmd_estimate(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let model = match &cfg.data.cube {
        Some(_) => {
            let cube = input_cube(cfg)?;
            cfg.model.resolve(cube.bands(), cube.classes() as usize)?
        }
        None => cfg.model.standalone()?,
    };
    let text = estimate_memory(&model, &cfg.train).to_text();
    print!("{text}");
    if let Some(path) = out {
        write(path, &text)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let common = cli.command.common();
    let cfg = load_config(common)?;
    if let Some(n) = thread_count(common.deterministic)? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Synth { out, .. } => cmd_synth(&cfg, out),
        Command::Train { out, .. } => cmd_train(&cfg, common, out),
        Command::Eval { checkpoint, out, .. } => cmd_eval(&cfg, common, checkpoint, out.as_deref()),
        Command::Predict { checkpoint, out, .. } => cmd_predict(&cfg, common, checkpoint, out),
        Command::Estimate { out, .. } => cmd_estimate(&cfg, out.as_deref()),
    }
}

/// Exit status per error class: 2 usage or config, 3 I/O, 4 malformed
/// file, 5 numerical failure, 1 anything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Io(_) => 3,
                Error::BadMagic { .. } | Error::Truncated(_) | Error::SizeMismatch { .. } | Error::Format(_) => 4,
                Error::NonFinite(_) | Error::NonFiniteGradient(_) | Error::Diverged { .. } => 5,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = exit_code(&e);
            if code == 2 {
                eprintln!("usage: graphmamba {} --help", cli.command.name());
            }
            ExitCode::from(code)
        }
    }
}
