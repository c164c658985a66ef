//! `vadtok` command line: `gen`, `select`, `train`, `score`, `tet`, `eval`, `ablate`.
//!
//! Exit codes: 0 on success, 1 on validation or usage errors, 2 on I/O errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{
    ablate_k, frame_auc, ground_truth_span, temporal_iou, write_report, EvalReport, REPORT_NOTE,
};
use crate::sets::{process_sequence, write_token_sidecar, SelectionFile};
use crate::store::{
    generate_synthetic, read_sequence, write_sequence, LabelManifest, SyntheticSpec,
};
use crate::tetg::{
    default_categories, extract_interval, extract_islands, render_span, render_tet, score_sequence,
    smooth_scores, split_by_labels, train, AnomalyModel, ScoresFile, TimestampFormat, TrainConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "vadtok",
    version,
    about = "Effective-token pipeline over video patch embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
enum Command {
    /// Generate a synthetic embedding sequence and its label manifest.
    Gen(GenArgs),
    /// Select spatial effective tokens for every frame.
    Select(SelectArgs),
    /// Train the anomaly-aware classifier on labeled class embeddings.
    Train(TrainArgs),
    /// Score every frame of a sequence with a trained classifier.
    Score(ScoreArgs),
    /// Render the temporal prompt from a scores file.
    Tet(TetArgs),
    /// Compute frame AUC, temporal IoU and token budget for one video.
    Eval(EvalArgs),
    /// Sweep the token keep ratio and report budgets and metrics per ratio.
    Ablate(AblateArgs),
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 16)]
    patches: usize,
    #[arg(long, default_value_t = 8)]
    channels: usize,
    /// Inclusive anomalous frame span `start:end`.
    #[arg(long, value_parser = parse_span)]
    anomaly: Option<(usize, usize)>,
    /// Inclusive patch index span `start:end` receiving the shift (default: first quarter of patches).
    #[arg(long, value_parser = parse_span)]
    region: Option<(usize, usize)>,
    #[arg(long, default_value_t = 2.0)]
    mean_shift: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, default_value_t = 30.0)]
    fps: f32,
    #[arg(long, default_value = "Anomaly")]
    category: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output prefix; writes `<out>.vaeb` and `<out>.labels.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "k", default_value_t = 0.5)]
    k_ratio: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the selected token values as a VAEB file.
    #[arg(long)]
    tokens_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// VAEB input; repeat together with --labels for several videos.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, required = true)]
    labels: Vec<PathBuf>,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long = "lr", default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch loss log (JSON).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Centered moving-average window applied to the scores (off by default).
    #[arg(long)]
    smooth: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TetArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = TimestampFormat::Frames, value_parser = parse_format)]
    timestamp_format: TimestampFormat,
    /// Comma-separated category names (default: the 13 UCF-Crime classes).
    #[arg(long, value_delimiter = ',', conflicts_with = "categories_file")]
    categories: Option<Vec<String>>,
    /// File with one category name per line.
    #[arg(long)]
    categories_file: Option<PathBuf>,
    /// Emit one prompt per run of consecutive qualifying frames instead of one enclosing span.
    #[arg(long)]
    islands: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Selection JSON from `select`, for the compression ratio.
    #[arg(long)]
    selection: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AblateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    k_list: Vec<f64>,
    /// Keep ratio used for the report's headline compression ratio.
    #[arg(long = "k", default_value_t = 0.5)]
    k_ratio: f64,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_span(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected start:end, got {s:?}"))?;
    let start: usize = a
        .trim()
        .parse()
        .map_err(|e| format!("bad span start {a:?}: {e}"))?;
    let end: usize = b
        .trim()
        .parse()
        .map_err(|e| format!("bad span end {b:?}: {e}"))?;
    if start > end {
        return Err(format!("span start {start} exceeds end {end}"));
    }
    Ok((start, end))
}

fn parse_format(s: &str) -> std::result::Result<TimestampFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `argv` (including the program name), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command) -> Result<()> {
    let config = serde_json::to_value(command).map_err(|e| Error::json("run config", e))?;
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Select(args) => cmd_select(args, config),
        Command::Train(args) => cmd_train(args),
        Command::Score(args) => cmd_score(args),
        Command::Tet(args) => cmd_tet(args),
        Command::Eval(args) => cmd_eval(args, config),
        Command::Ablate(args) => cmd_ablate(args, config),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json<T: Serialize>(value: &T, path: &Path, what: &str) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(what, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let video_id = args
        .out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::invalid("--out needs a file name prefix"))?;
    let mut spec = SyntheticSpec::new(args.frames, args.patches, args.channels, args.seed);
    spec.video_id = video_id;
    spec.anomaly = args.anomaly;
    if let Some((a, b)) = args.region {
        spec.anomaly_region = (a..=b).collect();
    }
    spec.mean_shift = args.mean_shift;
    spec.noise_scale = args.noise_scale;
    spec.fps = args.fps;
    spec.category = args.category.clone();

    let (seq, labels) = generate_synthetic(&spec)?;
    write_sequence(&seq, with_suffix(&args.out, ".vaeb"))?;
    labels.write(with_suffix(&args.out, ".labels.json"))
}

fn cmd_select(args: &SelectArgs, config: serde_json::Value) -> Result<()> {
    let seq = read_sequence(&args.input)?;
    let selection = process_sequence(&seq, args.k_ratio, None)?;
    let mut file = SelectionFile::from_selection(&seq.video_id, &selection);
    file.config = Some(config);
    file.write(&args.out)?;
    if let Some(path) = &args.tokens_out {
        write_token_sidecar(&seq, &selection, path)?;
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    if args.input.len() != args.labels.len() {
        return Err(Error::invalid(format!(
            "{} --input files but {} --labels files",
            args.input.len(),
            args.labels.len()
        )));
    }
    let mut normals = Vec::new();
    let mut anomalies = Vec::new();
    for (input, labels) in args.input.iter().zip(&args.labels) {
        let seq = read_sequence(input)?;
        let manifest = LabelManifest::read(labels)?;
        let (n, a) = split_by_labels(&seq, &manifest)?;
        normals.extend(n);
        anomalies.extend(a);
    }
    let config = TrainConfig {
        hidden: args.hidden,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    let (model, log) = train(&normals, &anomalies, &config)?;
    model.save(&args.out)?;
    if let Some(path) = &args.log {
        write_json(&log, path, "training log")?;
    }
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let model = AnomalyModel::load(&args.model)?;
    let seq = read_sequence(&args.input)?;
    let mut scored = score_sequence(&model, &seq)?;
    if let Some(window) = args.smooth {
        scored.scores = smooth_scores(&scored.scores, window)?;
    }
    let file = ScoresFile::new(&scored, args.threshold);
    file.validate()?;
    file.write(&args.out)
}

fn read_categories(args: &TetArgs) -> Result<Vec<String>> {
    if let Some(path) = &args.categories_file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect());
    }
    Ok(match &args.categories {
        Some(list) => list
            .iter()
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect(),
        None => default_categories(),
    })
}

fn cmd_tet(args: &TetArgs) -> Result<()> {
    let scores = ScoresFile::read(&args.scores)?;
    let scored = scores.scored();
    let categories = read_categories(args)?;
    let mut text = String::new();
    if args.islands {
        for span in extract_islands(&scored, args.threshold)? {
            text.push_str(&render_span(span, scored.fps, &categories, args.timestamp_format)?.text);
            text.push('\n');
        }
    } else {
        let interval = extract_interval(&scored, args.threshold)?;
        if interval.is_present() {
            text = render_tet(&interval, scored.fps, &categories, args.timestamp_format)?.text;
            text.push('\n');
        }
    }
    if text.is_empty() {
        eprintln!(
            "no frame reaches threshold {}; no prompt emitted",
            args.threshold
        );
    }
    fs::write(&args.out, text).map_err(|e| Error::io(&args.out, e))
}

fn cmd_eval(args: &EvalArgs, config: serde_json::Value) -> Result<()> {
    let scores = ScoresFile::read(&args.scores)?;
    let labels = LabelManifest::read(&args.labels)?;
    let scored = scores.scored();
    let auc = frame_auc(&scored, &labels)?;
    let interval = extract_interval(&scored, args.threshold)?;
    let gt = ground_truth_span(&labels);
    let compression_ratio = match &args.selection {
        Some(path) => SelectionFile::read(path)?.compression_ratio,
        None => 0.0,
    };
    let report = EvalReport {
        note: REPORT_NOTE.into(),
        video_id: scores.video_id.clone(),
        frame_auc: auc,
        temporal_iou: temporal_iou(interval.span, gt),
        compression_ratio,
        predicted_interval: interval.span,
        ground_truth_interval: gt,
        per_k_results: Vec::new(),
        config,
    };
    write_report(&report, &args.out)
}

fn cmd_ablate(args: &AblateArgs, config: serde_json::Value) -> Result<()> {
    let seq = read_sequence(&args.input)?;
    let labels = LabelManifest::read(&args.labels)?;
    let model = AnomalyModel::load(&args.model)?;
    let rows = ablate_k(&seq, &labels, &model, &args.k_list, args.threshold)?;

    let headline = process_sequence(&seq, args.k_ratio, None)?;
    let scored = score_sequence(&model, &seq)?;
    let interval = extract_interval(&scored, args.threshold)?;
    let gt = ground_truth_span(&labels);
    let report = EvalReport {
        note: REPORT_NOTE.into(),
        video_id: seq.video_id.clone(),
        frame_auc: frame_auc(&scored, &labels)?,
        temporal_iou: temporal_iou(interval.span, gt),
        compression_ratio: headline.stats.compression_ratio,
        predicted_interval: interval.span,
        ground_truth_interval: gt,
        per_k_results: rows,
        config,
    };
    write_report(&report, &args.out)
}
