//! `pathovox` command-line entry point.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 1 for
//! runtime failures. Verbosity comes from `PATHOVOX_LOG`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use pathovox::architecture::{build_model, infer_frame_len, model_shape_trace, shape_trace};
use pathovox::config::RunConfig;
use pathovox::dataset::{
    generate_synthetic_corpus, load_manifest, make_split, save_manifest, split_counts, DatasetError, Manifest, Split,
    SplitSpec, SynthSpec,
};
use pathovox::evaluation::{render_report, report, ReportFormat};
use pathovox::nn::{load_checkpoint, NnError, Rng};
use pathovox::trainer::{evaluate_split, load_segments, read_sidecar, sidecar_path, train_segmented, TrainError};
use pathovox::Label;

#[derive(Parser)]
#[command(name = "pathovox", version, about = "Voice-pathology detection from raw audio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign train/val/test subsets to a manifest.
    Split(SplitArgs),
    /// Train a model on the train and val subsets of a manifest.
    Train(TrainArgs),
    /// Score a checkpoint on one manifest subset.
    Evaluate(EvaluateArgs),
    /// Print the layer table of a config or checkpoint.
    Inspect(InspectArgs),
    /// Write a synthetic two-class corpus and its manifest.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.70)]
    train: f64,
    #[arg(long, default_value_t = 0.15)]
    val: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// `key = value` run config; omitted keys keep their reference values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "test")]
    subset: String,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InspectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    healthy: usize,
    #[arg(long, default_value_t = 50)]
    pathological: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8000)]
    rate: u32,
}

/// A failed command together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PATHOVOX_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Split(args) => cmd_split(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Inspect(args) => cmd_inspect(&args),
        Command::Synth(args) => cmd_synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    if !path.is_file() {
        return Err(Failure::usage(anyhow!("manifest not found: {}", path.display())));
    }
    load_manifest(path).map_err(|e| match e {
        DatasetError::Io { .. } => Failure::runtime(e),
        other => Failure::usage(other),
    })
}

fn cmd_split(args: &SplitArgs) -> CmdResult {
    let spec = SplitSpec {
        train_fraction: args.train,
        val_fraction: args.val,
        seed: args.seed,
    };
    log::info!(
        "split: manifest={} train={} val={} seed={} out={}",
        args.manifest.display(),
        spec.train_fraction,
        spec.val_fraction,
        spec.seed,
        args.out.display()
    );
    spec.validate().map_err(Failure::usage)?;
    let manifest = read_manifest(&args.manifest)?;
    let mut split = make_split(&manifest.entries, &spec).map_err(Failure::usage)?;
    // Entry paths stay relative to the input manifest's directory.
    split.base_dir = manifest.base_dir.clone();
    let entries = rebase_entries(&split, &args.out);
    save_manifest(&Manifest::new(entries), &args.out).map_err(Failure::runtime)?;
    println!("{}", split_counts(&split));
    Ok(())
}

/// Rewrites entry paths so they resolve from the directory of `out`.
fn rebase_entries(manifest: &Manifest, out: &Path) -> Vec<pathovox::dataset::ManifestEntry> {
    let out_dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base_dir = manifest
        .base_dir
        .as_deref()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let same_dir = match (base_dir.canonicalize(), out_dir.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    manifest
        .entries
        .iter()
        .map(|e| {
            let mut entry = e.clone();
            if !same_dir && Path::new(&e.file_path).is_relative() {
                let resolved = manifest.resolve(e);
                entry.file_path = resolved
                    .canonicalize()
                    .unwrap_or(resolved)
                    .to_string_lossy()
                    .into_owned();
            }
            entry
        })
        .collect()
}

fn labeled_files(manifest: &Manifest, split: Split) -> Vec<(PathBuf, Label)> {
    manifest
        .subset(split)
        .into_iter()
        .map(|e| (manifest.resolve(e), e.label))
        .collect()
}

fn cmd_train(args: &TrainArgs) -> CmdResult {
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("config {}", path.display()))
            .map_err(Failure::usage)?,
        None => RunConfig::default(),
    };
    cfg.validate().map_err(Failure::usage)?;
    log::info!("resolved config:\n{}", cfg.to_text());

    let manifest = read_manifest(&args.manifest)?;
    let train_files = labeled_files(&manifest, Split::Train);
    let val_files = labeled_files(&manifest, Split::Val);
    if train_files.is_empty() {
        return Err(Failure::usage(anyhow!("manifest has no train rows")));
    }
    if val_files.is_empty() {
        return Err(Failure::usage(anyhow!("manifest has no val rows")));
    }

    let mut train_cfg = cfg.train_config();
    train_cfg.checkpoint_path = Some(args.out_model.clone());
    train_cfg.log_path = args.log.clone();

    let result = run_training(&cfg, &train_cfg, &train_files, &val_files);
    if result.is_err() {
        for path in [
            args.out_model.clone(),
            args.out_model.with_extension("tmp"),
            sidecar_path(&args.out_model),
        ] {
            let _ = std::fs::remove_file(path);
        }
    }
    result
}

fn run_training(
    cfg: &RunConfig,
    train_cfg: &pathovox::trainer::TrainConfig,
    train_files: &[(PathBuf, Label)],
    val_files: &[(PathBuf, Label)],
) -> CmdResult {
    let audio_failure = |e: TrainError| match e {
        TrainError::Audio { .. } => Failure::usage(e),
        other => Failure::runtime(other),
    };
    let train_set = load_segments(train_files, &cfg.frame).map_err(audio_failure)?;
    let val_set = load_segments(val_files, &cfg.frame).map_err(audio_failure)?;
    if let Some(file) = train_set
        .iter()
        .chain(&val_set)
        .find(|f| f.segments.cols != cfg.model.frame_features)
    {
        return Err(Failure::usage(anyhow!(
            "{}: frame length {} does not match frame_features {}",
            file.name,
            file.segments.cols,
            cfg.model.frame_features
        )));
    }
    let model = build_model(&cfg.model, &mut Rng::new(cfg.seed())).map_err(Failure::usage)?;
    log::info!(
        "training {} parameters on {} train / {} val files",
        model.trainable_count(),
        train_set.len(),
        val_set.len()
    );
    let outcome = train_segmented(model, &train_set, &val_set, train_cfg).map_err(Failure::runtime)?;
    let best = &outcome.logs[outcome.best_epoch - 1];
    println!(
        "best epoch {} of {}: val loss {:.4}, val accuracy {:.2}%",
        outcome.best_epoch,
        outcome.logs.len(),
        best.val_loss,
        100.0 * best.val_accuracy
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<pathovox::nn::Model, Failure> {
    if !path.is_file() {
        return Err(Failure::usage(anyhow!("model not found: {}", path.display())));
    }
    load_checkpoint(path).map_err(|e| match e {
        NnError::Io(_) => Failure::runtime(e),
        other => Failure::usage(anyhow::Error::new(other).context(format!("checkpoint {}", path.display()))),
    })
}

fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    let subset: Split = args.subset.parse().map_err(|e: String| Failure::usage(anyhow!(e)))?;
    log::info!(
        "evaluate: model={} manifest={} subset={subset}",
        args.model.display(),
        args.manifest.display()
    );
    let model = load_model(&args.model)?;
    let frame = match read_sidecar(&args.model) {
        Ok(sidecar) => sidecar.train_config.frame,
        Err(_) => {
            log::warn!("no sidecar next to {}; using reference framing", args.model.display());
            RunConfig::default().frame
        }
    };
    log::info!("framing: {frame:?}");
    let manifest = read_manifest(&args.manifest)?;
    let files = labeled_files(&manifest, subset);
    if files.is_empty() {
        return Err(Failure::usage(anyhow!("manifest has no {subset} rows")));
    }
    let segments = load_segments(&files, &frame).map_err(|e| match e {
        TrainError::Audio { .. } => Failure::usage(e),
        other => Failure::runtime(other),
    })?;
    let scored = evaluate_split(&model, &segments).map_err(Failure::runtime)?;
    let rep = report(&scored.matrix).map_err(Failure::runtime)?;
    if let Some(path) = &args.report {
        std::fs::write(path, render_report(&rep, ReportFormat::Json))
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::runtime)?;
    }
    print!("{}", String::from_utf8_lossy(&render_report(&rep, ReportFormat::Text)));
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> CmdResult {
    let trace = match (&args.config, &args.model) {
        (Some(path), _) => {
            let cfg = RunConfig::load(path)
                .with_context(|| format!("config {}", path.display()))
                .map_err(Failure::usage)?;
            cfg.validate().map_err(Failure::usage)?;
            log::info!("resolved config:\n{}", cfg.to_text());
            let specs = cfg.model.layer_specs().map_err(Failure::usage)?;
            shape_trace(&specs, cfg.model.frame_features).map_err(Failure::usage)?
        }
        (None, Some(path)) => {
            let model = load_model(path)?;
            let frame_len = match read_sidecar(path) {
                Ok(sidecar) => sidecar.frame_features,
                Err(_) => infer_frame_len(&model, 1..=1 << 20)
                    .ok_or_else(|| Failure::usage(anyhow!("cannot infer the frame length of {}", path.display())))?,
            };
            model_shape_trace(&model, frame_len).map_err(Failure::usage)?
        }
        (None, None) => unreachable!("clap requires one of --config or --model"),
    };
    println!("{}", trace.render_table());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let spec = SynthSpec {
        n_healthy: args.healthy,
        n_pathological: args.pathological,
        sample_rate_hz: args.rate,
        seed: args.seed,
        ..SynthSpec::default()
    };
    log::info!("synth: out={} {spec:?}", args.out.display());
    let min_duration_s = RunConfig::default().frame.frame_ms / 1000.0;
    spec.validate(min_duration_s).map_err(Failure::usage)?;
    let manifest = generate_synthetic_corpus(&spec, &args.out).map_err(Failure::usage)?;
    let manifest_path = args.out.join("manifest.csv");
    save_manifest(&manifest, &manifest_path).map_err(Failure::usage)?;
    println!(
        "wrote {} healthy and {} pathological files to {}",
        manifest.count(None, Label::Healthy),
        manifest.count(None, Label::Pathological),
        manifest_path.display()
    );
    Ok(())
}
