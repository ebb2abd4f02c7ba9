//! The `lpo` command line.
//!
//! Exit codes: `0` success, `1` runtime failure, `2` usage or I/O error.
//! Diagnostics go to standard error and are filtered by `LPO_LOG`
//! (`error`, `info`, `debug`, ...).

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info, warn};
use serde::Serialize;

use crate::actions::{self, Action};
use crate::config::RunConfig;
use crate::grpo::{GrpoError, IterMetrics, Trainer};
use crate::imaging;
use crate::policy::Checkpoint;
use crate::reward::{self, RewardBreakdown, RewardConfig, ScoreAggregate};
use crate::synthenv::{self, EnvSpec, SuiteManifest, Texture};
use crate::windowing::{self, EntropyMap, GridConfig};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONFIG_FILE: &str = "config.json";
pub const NONFINITE_FILE: &str = "nonfinite.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
    /// Already reported (help text or argument error); carries the exit code.
    #[error("exit {0}")]
    Reported(i32),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Reported(code) => *code,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn image_error(e: imaging::ImageError) -> CliError {
    match e {
        imaging::ImageError::Io { .. } => CliError::Io(e.to_string()),
        other => runtime(other),
    }
}

fn synth_error(e: synthenv::SynthError) -> CliError {
    match e {
        synthenv::SynthError::Io { .. } | synthenv::SynthError::Image(imaging::ImageError::Io { .. }) => {
            CliError::Io(e.to_string())
        }
        synthenv::SynthError::InvalidSpec(_) => usage(e),
        other => runtime(other),
    }
}

#[derive(Debug, Parser)]
#[command(name = "lpo", version, about = "Location preference optimization tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the per-window entropy map of a screenshot.
    EntropyMap(EntropyMapArgs),
    /// Score predicted actions in a JSONL dataset.
    Score(ScoreArgs),
    /// Generate a seeded synthetic suite.
    GenData(GenDataArgs),
    /// Train a click policy; extra `--section.key=value` flags override the config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a suite.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 50)]
    pub cell_height: usize,
    #[arg(long, default_value_t = 50)]
    pub cell_width: usize,
    #[arg(long, default_value_t = 256)]
    pub bins: usize,
}

impl GridArgs {
    fn config(&self) -> Result<GridConfig, CliError> {
        GridConfig::new(self.cell_height, self.cell_width, self.bins).map_err(usage)
    }
}

#[derive(Debug, Args)]
pub struct EntropyMapArgs {
    pub image: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Keep the native resolution.
    #[arg(long)]
    pub no_resize: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoordsFrame {
    /// Coordinates already refer to the resized image.
    Resized,
    /// Coordinates refer to the source image and are rescaled before scoring.
    Original,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = CoordsFrame::Resized)]
    pub coords_frame: CoordsFrame,
    #[arg(long)]
    pub no_rw: bool,
    #[arg(long)]
    pub no_rd: bool,
    #[arg(long)]
    pub no_resize: bool,
    #[arg(long, default_value_t = 1000.0)]
    pub d_max: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Per-record output; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the aggregate JSON.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub width: usize,
    #[arg(long, default_value_t = 500)]
    pub height: usize,
    #[arg(long, default_value_t = 3)]
    pub min_widgets: usize,
    #[arg(long, default_value_t = 6)]
    pub max_widgets: usize,
    #[arg(long, default_value_t = 40)]
    pub min_size: usize,
    #[arg(long, default_value_t = 120)]
    pub max_size: usize,
    #[arg(long, default_value_t = 200)]
    pub background: u8,
    /// Comma-separated distractor textures.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "noise,checker,stripes")]
    pub distractors: Vec<TextureArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextureArg {
    Noise,
    Checker,
    Stripes,
}

impl From<TextureArg> for Texture {
    fn from(t: TextureArg) -> Self {
        match t {
            TextureArg::Noise => Texture::Noise,
            TextureArg::Checker => Texture::Checker,
            TextureArg::Stripes => Texture::Stripes,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Output directory (same as `--paths.output_dir=...`).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Numbered checkpoint cadence (same as `checkpoint_every` in the config).
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Collected `--section.key=value` overrides.
    #[arg(skip)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Suite directory written by `gen-data`.
    #[arg(long)]
    pub suite: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
}

/// Dotted overrides look like `--train.seed=3`: a dot in the key part.
fn is_override(arg: &str) -> bool {
    arg.strip_prefix("--")
        .and_then(|body| body.split_once('='))
        .is_some_and(|(key, _)| key.contains('.'))
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let (mut rest, mut overrides) = (Vec::new(), Vec::new());
    for a in args {
        let a: OsString = a.into();
        match a.to_str() {
            Some(s) if is_override(s) => overrides.push(s.to_string()),
            _ => rest.push(a),
        }
    }
    let cli = Cli::try_parse_from(rest).map_err(|e| {
        let _ = e.print();
        CliError::Reported(e.exit_code())
    })?;
    match cli.command {
        Command::Train(mut a) => {
            a.overrides = overrides;
            cmd_train(&a)
        }
        _ if !overrides.is_empty() => Err(usage(format!("config overrides are only accepted by train: {}", overrides.join(" ")))),
        Command::EntropyMap(a) => cmd_entropy_map(&a),
        Command::Score(a) => cmd_score(&a),
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

/// Process entry point: initialize logging, run, and map errors to exit codes.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("LPO_LOG", "warn")).try_init();
    match run(std::env::args_os()) {
        Ok(()) => 0,
        Err(CliError::Reported(code)) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn cmd_entropy_map(a: &EntropyMapArgs) -> Result<(), CliError> {
    let grid = a.grid.config()?;
    let img = imaging::load(&a.image).map_err(image_error)?;
    let (gray, scale) = imaging::preprocess(&img, !a.no_resize);
    debug!("{}: {}x{} -> {}x{} (scale {scale})", a.image.display(), img.width(), img.height(), gray.width(), gray.height());
    let map = windowing::entropy_map(&gray, &grid);
    let stem = a.image.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    create_dir(&a.out_dir)?;
    write_file(&a.out_dir.join(format!("{stem}.entropy.json")), map.to_json() + "\n")?;
    let heat = map.heatmap(reward::RewardConfig::default().epsilon);
    write_file(&a.out_dir.join(format!("{stem}.heatmap.pgm")), imaging::encode_pnm(&heat))?;
    info!("{}: {}x{} windows, max entropy {}", a.image.display(), map.rows(), map.cols(), map.max_entropy());
    Ok(())
}

#[derive(Serialize)]
struct ScoredLine<'a> {
    line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    task_id: Option<&'a str>,
    #[serde(flatten)]
    breakdown: &'a RewardBreakdown,
    distance_px: Option<f64>,
}

#[derive(Serialize)]
struct ErrorLine {
    line: usize,
    error: String,
}

struct PreparedImage {
    map: EntropyMap,
    scale: f64,
}

pub fn cmd_score(a: &ScoreArgs) -> Result<(), CliError> {
    let grid = a.grid.config()?;
    let cfg = RewardConfig {
        d_max: a.d_max,
        use_rw: !a.no_rw,
        use_rd: !a.no_rd,
        ..RewardConfig::default()
    };
    cfg.validate().map_err(usage)?;
    let text = read_text(&a.dataset)?;
    let base = a.dataset.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut cache: HashMap<PathBuf, Result<PreparedImage, String>> = HashMap::new();
    let mut out = String::new();
    let mut scored = Vec::new();
    let mut errors = 0;
    for (line, raw) in actions::nonblank_lines(&text) {
        let result = score_line(raw, line, &base, &grid, &cfg, a, &mut cache);
        let json = match result {
            Ok((record_id, b, d)) => {
                let s = serde_json::to_string(&ScoredLine {
                    line,
                    task_id: record_id.as_deref(),
                    breakdown: &b,
                    distance_px: d,
                });
                scored.push((b, d));
                s
            }
            Err(error) => {
                errors += 1;
                warn!("line {line}: {error}");
                serde_json::to_string(&ErrorLine { line, error })
            }
        };
        out.push_str(&json.expect("score line serializes"));
        out.push('\n');
    }
    match &a.out {
        Some(p) => write_file(p, &out)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(out.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    let agg = ScoreAggregate::from_scored(&scored, errors);
    let agg_json = serde_json::to_string_pretty(&agg).expect("aggregate serializes");
    match &a.aggregate {
        Some(p) => write_file(p, agg_json + "\n")?,
        None => info!("aggregate: {agg_json}"),
    }
    Ok(())
}

type ScoreResult = (Option<String>, RewardBreakdown, Option<f64>);

fn score_line(
    raw: &str,
    line: usize,
    base: &Path,
    grid: &GridConfig,
    cfg: &RewardConfig,
    a: &ScoreArgs,
    cache: &mut HashMap<PathBuf, Result<PreparedImage, String>>,
) -> Result<ScoreResult, String> {
    let rec = actions::parse_record_line(raw, line).map_err(|e| e.to_string())?;
    let pred: Action = rec.predicted.clone().ok_or("record has no predicted action")?;
    let path = base.join(&rec.image);
    let prepared = cache
        .entry(path.clone())
        .or_insert_with(|| {
            let img = imaging::load(&path).map_err(|e| e.to_string())?;
            let (gray, scale) = imaging::preprocess(&img, !a.no_resize);
            Ok(PreparedImage {
                map: windowing::entropy_map(&gray, grid),
                scale,
            })
        })
        .as_ref()
        .map_err(Clone::clone)?;
    let (pred, tgt) = match a.coords_frame {
        CoordsFrame::Resized => (pred, rec.target.clone()),
        CoordsFrame::Original => (pred.scaled(prepared.scale), rec.target.scaled(prepared.scale)),
    };
    let b = reward::score_action(&prepared.map, &pred, &tgt, cfg).map_err(|e| e.to_string())?;
    Ok((rec.task_id, b, reward::primary_distance(&pred, &tgt)))
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<(), CliError> {
    let spec = EnvSpec {
        width: a.width,
        height: a.height,
        widget_count: [a.min_widgets, a.max_widgets],
        widget_size: [a.min_size, a.max_size],
        background: a.background,
        distractor_textures: a.distractors.iter().map(|&t| t.into()).collect(),
    };
    spec.validate().map_err(synth_error)?;
    let tasks = synthenv::generate_suite(a.seed, a.count, &spec).map_err(synth_error)?;
    let manifest = SuiteManifest {
        spec,
        seed: a.seed,
        count: a.count,
    };
    synthenv::write_suite(&a.out, &tasks, &manifest).map_err(synth_error)?;
    info!("wrote {} tasks to {}", tasks.len(), a.out.display());
    Ok(())
}

/// Resolve the run config: file, then `--out-dir`/`--resume`, then dotted
/// overrides.
pub fn resolve_run_config(a: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_json(&read_text(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(d) = &a.out_dir {
        cfg.paths.output_dir = d.clone();
    }
    if let Some(n) = a.checkpoint_every {
        cfg.checkpoint_every = n;
    }
    if let Some(r) = &a.resume {
        cfg.paths.checkpoint = Some(r.clone());
    }
    cfg.apply_overrides(&a.overrides).map_err(usage)?;
    cfg.grid.validate().map_err(usage)?;
    cfg.reward.validate().map_err(usage)?;
    cfg.train.validate().map_err(usage)?;
    Ok(cfg)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::from_json(&read_text(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CliError> {
    write_file(path, ckpt.to_json() + "\n")
}

/// Existing metrics lines for iterations before `start`, in order.
fn retained_metrics(path: &Path, start: u64) -> Result<Vec<String>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_error(path, e)),
    };
    let mut kept = Vec::new();
    for (n, line) in actions::nonblank_lines(&text) {
        let m: IterMetrics =
            serde_json::from_str(line).map_err(|e| runtime(format!("{}: line {n}: {e}", path.display())))?;
        if m.iter < start {
            kept.push(line.to_string());
        }
    }
    Ok(kept)
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = resolve_run_config(a)?;
    let tasks = match &cfg.paths.dataset {
        Some(dir) => synthenv::load_suite(dir, &cfg.grid).map_err(synth_error)?,
        None => {
            cfg.env.validate().map_err(synth_error)?;
            let raw = synthenv::generate_suite(cfg.suite.seed, cfg.suite.count, &cfg.env).map_err(synth_error)?;
            synthenv::prepare_suite(&raw, &cfg.grid)
        }
    };
    let digest = cfg.digest();
    let out_dir = cfg.paths.output_dir.clone();
    create_dir(&out_dir)?;
    write_file(&out_dir.join(CONFIG_FILE), cfg.to_json() + "\n")?;

    let mut trainer = match &cfg.paths.checkpoint {
        Some(p) => {
            let ckpt = load_checkpoint(p)?;
            if ckpt.config_digest != digest {
                return Err(runtime(format!(
                    "{} was written under config {}, current config is {digest}",
                    p.display(),
                    ckpt.config_digest
                )));
            }
            let params = ckpt.to_params().map_err(runtime)?;
            info!("resuming from {} at iteration {}", p.display(), ckpt.step);
            Trainer::resume(&tasks, cfg.train.clone(), cfg.reward, params, ckpt.step).map_err(runtime)?
        }
        None => Trainer::new(&tasks, cfg.train.clone(), cfg.reward).map_err(runtime)?,
    };

    let metrics_path = out_dir.join(METRICS_FILE);
    let kept = retained_metrics(&metrics_path, trainer.iteration())?;
    let file = File::create(&metrics_path).map_err(|e| io_error(&metrics_path, e))?;
    let mut metrics = BufWriter::new(file);
    for line in kept {
        writeln!(metrics, "{line}").map_err(|e| io_error(&metrics_path, e))?;
    }
    metrics.flush().map_err(|e| io_error(&metrics_path, e))?;

    let seed = cfg.train.seed;
    while trainer.iteration() < cfg.train.iterations {
        match trainer.step() {
            Ok(m) => {
                let line = serde_json::to_string(&m).expect("metrics serialize");
                writeln!(metrics, "{line}").and_then(|_| metrics.flush()).map_err(|e| io_error(&metrics_path, e))?;
                debug!("{line}");
                let done = trainer.iteration();
                if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
                    let ckpt = Checkpoint::from_params(trainer.params(), done, seed, digest.clone());
                    write_checkpoint(&out_dir.join(format!("checkpoint_{done}.json")), &ckpt)?;
                    write_checkpoint(&out_dir.join(CHECKPOINT_FILE), &ckpt)?;
                }
            }
            Err(GrpoError::NonFinite { metrics: m }) => {
                let path = out_dir.join(NONFINITE_FILE);
                write_file(&path, serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n")?;
                return Err(runtime(format!(
                    "non-finite objective or gradient at iteration {}; diagnostics in {}",
                    m.iter,
                    path.display()
                )));
            }
            Err(e) => return Err(runtime(e)),
        }
    }
    let ckpt = Checkpoint::from_params(trainer.params(), trainer.iteration(), seed, digest);
    write_checkpoint(&out_dir.join(CHECKPOINT_FILE), &ckpt)?;
    info!("finished at iteration {}", trainer.iteration());
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    if a.draws == 0 {
        return Err(usage(synthenv::SynthError::NoDraws));
    }
    let grid = a.grid.config()?;
    let params = load_checkpoint(&a.checkpoint)?.to_params().map_err(runtime)?;
    let suite = synthenv::load_suite(&a.suite, &grid).map_err(synth_error)?;
    let m = synthenv::evaluate(&params, &suite, a.draws, a.seed, &RewardConfig::default()).map_err(synth_error)?;
    println!("{}", serde_json::to_string(&m).expect("metrics serialize"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_detection() {
        assert!(is_override("--train.group_size=16"));
        assert!(!is_override("--config=a.json"));
        assert!(!is_override("--config"));
        assert!(!is_override("train.seed=1"));
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Runtime("x".into()).exit_code(), 1);
        assert_eq!(CliError::Io("x".into()).exit_code(), 2);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
    }
}
