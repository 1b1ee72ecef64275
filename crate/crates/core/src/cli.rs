//! `srad` command line: `synth`, `train`, `eval`, `score`.
//!
//! Exit codes: 0 success, 1 usage, 2 data validation, 3 IO.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::clustering::KMeansConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, score_video, GroundTruth};
use crate::ingest::{
    generate_synthetic, load_manifest_with, save_dataset, LoadOptions, SyntheticConfig,
};
use crate::network::{load_checkpoint, save_checkpoint, AdamConfig};
use crate::objective::LossWeights;
use crate::rng::RngHandle;
use crate::train::{fit, Ablation, CheckpointPolicy, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => EXIT_IO,
            Error::InvalidConfig(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "srad",
    version,
    about = "Weakly-supervised video anomaly detection from video-level labels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test dataset with frame-level ground truth.
    Synth(SynthArgs),
    /// Train a scorer on a manifest; writes a checkpoint and a history CSV.
    Train(TrainArgs),
    /// Score a test manifest, print pooled frame-level AUC, write timelines.
    Eval(EvalArgs),
    /// Write the frame score timeline of a single video.
    Score(ScoreArgs),
}

/// `a` or `a-b`.
fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(
    s: &str,
) -> std::result::Result<(T, T), String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<T>()
            .map_err(|_| format!("invalid value {t:?}"))
    };
    let (lo, hi) = match s.split_once('-') {
        Some((a, b)) if !a.is_empty() => (parse(a)?, parse(b)?),
        _ => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("range {s:?} has min > max"));
    }
    Ok((lo, hi))
}

fn parse_usize_range(s: &str) -> std::result::Result<(usize, usize), String> {
    parse_range(s)
}

fn parse_f64_range(s: &str) -> std::result::Result<(f64, f64), String> {
    parse_range(s)
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub normal_videos: usize,
    #[arg(long, default_value_t = 40)]
    pub anomalous_videos: usize,
    #[arg(long, default_value_t = 10)]
    pub test_normal_videos: usize,
    #[arg(long, default_value_t = 10)]
    pub test_anomalous_videos: usize,
    /// Fragments per video, `n` or `min-max`.
    #[arg(long, default_value = "8-16", value_parser = parse_usize_range)]
    pub fragments: (usize, usize),
    /// Fraction of an anomalous video that is anomalous, `p` or `low-high`.
    #[arg(long, default_value = "0.2-0.4", value_parser = parse_f64_range)]
    pub anomaly_portion: (f64, f64),
    /// Feature dimension.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Frames per fragment.
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    /// Per-coordinate shift of the anomalous mean, in standard deviations.
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub stddev: f64,
}

impl SynthArgs {
    fn config(&self) -> SyntheticConfig {
        SyntheticConfig {
            num_normal_videos: self.normal_videos,
            num_anomalous_videos: self.anomalous_videos,
            test_normal_videos: self.test_normal_videos,
            test_anomalous_videos: self.test_anomalous_videos,
            fragments_per_video: self.fragments,
            feature_dim: self.dim,
            frames_per_fragment: self.k,
            normal_mean: vec![0.0; self.dim],
            anomalous_mean: vec![self.separation * self.stddev; self.dim],
            feature_stddev: self.stddev,
            anomaly_portion: self.anomaly_portion,
            seed: self.seed,
        }
    }
}

/// Hyperparameters not fixed by the method itself default to documented
/// assumptions: hidden width 512, dropout 0.6, 100 epochs, 5 warm-up epochs,
/// 10 k-means restarts, distance floor 1e-3.
#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Training manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for model.srck, history.csv and run.json.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Adam learning rate.
    #[arg(long, default_value_t = 5e-5)]
    pub lr: f64,
    /// Weight of the clustering distance loss.
    #[arg(long, default_value_t = 0.05)]
    pub lambda: f64,
    /// Cap on the normal-video distance loss.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Frames per fragment; must match the manifest when given (16 for C3D-style features).
    #[arg(long)]
    pub k: Option<usize>,
    /// Hidden width of FC-1 (assumption).
    #[arg(long, default_value_t = 512)]
    pub hidden: usize,
    /// Dropout rate after FC-1 (assumption).
    #[arg(long, default_value_t = 0.6)]
    pub dropout: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Epochs with all-ones anomalous targets before pseudo-labels start (assumption).
    #[arg(long, default_value_t = 5)]
    pub warmup_epochs: usize,
    /// k-means restarts per video (assumption).
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Lower clamp on the center distance before inverting it (assumption).
    #[arg(long, default_value_t = 1e-3)]
    pub d_floor: f64,
    /// full, no-lc (drop the distance loss) or no-yp (all-ones anomalous targets).
    #[arg(long, default_value = "full")]
    pub ablation: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also save a checkpoint every N epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Scale each fragment feature vector to unit L2 norm on load.
    #[arg(long)]
    pub l2_normalize: bool,
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            loss: LossWeights {
                lambda: self.lambda,
                alpha: self.alpha,
                d_floor: self.d_floor,
            },
            adam: AdamConfig {
                learning_rate: self.lr,
                ..AdamConfig::default()
            },
            hidden_width: self.hidden,
            dropout_rate: self.dropout,
            kmeans: KMeansConfig {
                restarts: self.restarts,
                max_iters: self.max_iters,
                tol: self.tol,
            },
            ablation: self.ablation.parse::<Ablation>()?,
            epochs: self.epochs,
            warmup_epochs: self.warmup_epochs,
            seed: self.seed,
            checkpoint: self.checkpoint_every.map(|every| CheckpointPolicy {
                dir: self.out.join("checkpoints"),
                every,
            }),
        };
        if self.k == Some(0) {
            return Err(Error::InvalidConfig("--k must be >= 1".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Test manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Annotation file: `video_id<TAB>start<TAB>end`, 0-indexed, end-exclusive.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Directory for per-video `<video_id>.csv` timelines.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub l2_normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub video: String,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub l2_normalize: bool,
}

#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    rng: &'static str,
    flags: &'a T,
}

fn write_run_record<T: Serialize>(dir: &Path, command: &'static str, flags: &T) -> Result<()> {
    let rec = RunRecord {
        tool: "srad",
        version: env!("CARGO_PKG_VERSION"),
        command,
        rng: RngHandle::ALGORITHM,
        flags,
    };
    let mut json = serde_json::to_string_pretty(&rec)
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize run record: {e}")))?;
    json.push('\n');
    let path = dir.join("run.json");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn out_io(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.config();
    let data = generate_synthetic(&cfg)?;
    create_dir(&args.out)?;
    save_dataset(&data.train, &args.out, "train")?;
    save_dataset(&data.test, &args.out, "test")?;
    data.train_ground_truth()
        .save(args.out.join("train_ground_truth.tsv"))?;
    data.test_ground_truth()
        .save(args.out.join("test_ground_truth.tsv"))?;
    write_run_record(&args.out, "synth", args)?;
    writeln!(
        out,
        "wrote {} train and {} test videos to {}",
        data.train.len(),
        data.test.len(),
        args.out.display()
    )
    .map_err(out_io)
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.config()?;
    let dataset = load_manifest_with(
        &args.manifest,
        LoadOptions {
            l2_normalize: args.l2_normalize,
        },
    )?;
    if let Some(k) = args.k {
        if k != dataset.frames_per_fragment {
            return Err(Error::InvalidDataset(format!(
                "--k {k} but manifest has k={}",
                dataset.frames_per_fragment
            )));
        }
    }
    create_dir(&args.out)?;
    let fitted = fit(&dataset, &cfg)?;
    save_checkpoint(&fitted.model, &fitted.adam, args.out.join("model.srck"))?;
    fitted.history.write_csv(args.out.join("history.csv"))?;
    write_run_record(&args.out, "train", args)?;
    let last = fitted.history.records.last().map(|r| r.epoch).unwrap_or(0);
    write!(
        out,
        "trained {} epochs on {} videos",
        cfg.epochs,
        dataset.len()
    )
    .map_err(out_io)?;
    if let Some(l) = fitted.history.epoch_mean_total(last) {
        write!(out, "; final epoch mean loss {l:.6}").map_err(out_io)?;
    }
    writeln!(out).map_err(out_io)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let dataset = load_manifest_with(
        &args.manifest,
        LoadOptions {
            l2_normalize: args.l2_normalize,
        },
    )?;
    let truth = GroundTruth::load(&args.ground_truth)?;
    let result = evaluate(&model, &dataset, &truth)?;
    if let Some(dir) = &args.out {
        let tdir = dir.join("timelines");
        create_dir(&tdir)?;
        for v in &result.videos {
            v.write_csv(tdir.join(format!("{}.csv", v.video_id)))?;
        }
        write_run_record(dir, "eval", args)?;
    }
    writeln!(out, "AUC={:.4}", result.auc).map_err(out_io)
}

pub fn cmd_score(args: &ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let dataset = load_manifest_with(
        &args.manifest,
        LoadOptions {
            l2_normalize: args.l2_normalize,
        },
    )?;
    let video = dataset
        .get(&args.video)
        .ok_or_else(|| Error::InvalidDataset(format!("no video {:?} in manifest", args.video)))?;
    let mut fs_ = score_video(&model, video, dataset.frames_per_fragment)?;
    if let Some(gt) = &args.ground_truth {
        fs_.ground_truth =
            Some(GroundTruth::load(gt)?.frame_labels(&video.video_id, video.num_frames)?);
    }
    match &args.out {
        Some(p) => fs_.write_csv(p),
        None => out.write_all(fs_.to_csv().as_bytes()).map_err(out_io),
    }
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Score(a) => cmd_score(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
