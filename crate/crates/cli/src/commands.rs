use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{debug, info};
use ordinalflow::metrics::evaluate;
use ordinalflow::providers::{
    load_detection_sidecar, load_score_sidecar, write_detection_sidecar, write_score_sidecar,
    DetectionSet, ScoreVector,
};
use ordinalflow::synthgen::generate_corpus;
use ordinalflow::{CongestionLevel, Pipeline, PixelLayout};

use crate::config::load_config;
use crate::error::{code, CliResult, Failure};
use crate::frameio::{self, FrameSource};
use crate::render::render_at;
use crate::report::{self, RunReport, SegmentReport};

const PREFETCH_DEPTH: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "ordinalflow", version, about = "Ordinal traffic congestion classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a frame sequence into per-segment congestion levels.
    Classify(ClassifyArgs),
    /// Score a report against a truth file.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus with stub sidecars.
    Synth(SynthArgs),
    /// Write per-frame motion features as JSON lines.
    MotionDump(MotionDumpArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Frame directory or packed .ordv file.
    #[arg(long)]
    pub frames: PathBuf,
    /// Score sidecar (JSON lines).
    #[arg(long)]
    pub scores: PathBuf,
    /// Detection sidecar (JSON lines).
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Write annotated PPM frames here.
    #[arg(long)]
    pub annotate_dir: Option<PathBuf>,
    /// Per-segment truth levels; adds a metrics block.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Include per-frame traces in the report.
    #[arg(long)]
    pub trace: bool,
    /// Record engine wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Single level; all five when omitted.
    #[arg(long)]
    pub level: Option<u8>,
    /// Frames per segment.
    #[arg(long, default_value_t = 100)]
    pub frames: usize,
    /// Segments per level.
    #[arg(long, default_value_t = 1)]
    pub segments: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Log-normal noise scale of the stub scores.
    #[arg(long, default_value_t = 0.35)]
    pub noise: f64,
    /// Write frames.ordv instead of a frames/ directory.
    #[arg(long)]
    pub packed: bool,
}

#[derive(Debug, Args)]
pub struct MotionDumpArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON lines output.
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Classify(a) => classify(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Synth(a) => synth(&a),
        Command::MotionDump(a) => motion_dump(&a),
    };
    match result {
        Ok(()) => code::OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

fn open_frames(path: &Path) -> CliResult<FrameSource> {
    FrameSource::open(path).map_err(Failure::format)
}

fn read_truth(path: &Path) -> CliResult<Vec<CongestionLevel>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::io)?;
    report::parse_truth(&text).map_err(Failure::format)
}

fn check_lengths(frames: usize, scores: usize, detections: usize) -> CliResult {
    if scores != frames || detections != frames {
        return Err(Failure::alignment(anyhow!(
            "{frames} frames but {scores} score records and {detections} detection records"
        )));
    }
    Ok(())
}

pub fn classify(args: &ClassifyArgs) -> CliResult {
    let config = load_config(args.config.as_deref())?;
    let source = open_frames(&args.frames)?;
    let scores = load_score_sidecar(&args.scores)?;
    let detections = load_detection_sidecar(&args.detections)?;
    check_lengths(source.len(), scores.len(), detections.len())?;
    let truth = args.truth.as_deref().map(read_truth).transpose()?;
    if let Some(dir) = &args.annotate_dir {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::io)?;
    }

    let (width, height) = (config.pipeline.width, config.pipeline.height);
    let frame_count = source.len();
    let mut pipeline = Pipeline::new(config.clone())?;
    let mut traces = Vec::new();
    let mut annotate_time = Duration::ZERO;
    let started = Instant::now();
    for (t, frame) in source.prefetch(PREFETCH_DEPTH).enumerate() {
        let frame = frame.map_err(Failure::format)?;
        let trace = pipeline.process(&frame, &scores[t], &detections[t])?;
        if let Some(dir) = &args.annotate_dir {
            let t0 = Instant::now();
            let p = &trace.prediction;
            let img = render_at(&frame, width, height, &detections[t], &p.adjusted_scores, p.level)?;
            frameio::write_pnm(&dir.join(frameio::frame_file_name(t, PixelLayout::Rgb)), &img)
                .map_err(Failure::io)?;
            annotate_time += t0.elapsed();
        }
        debug!("frame {t}: level {} coverage {:.4}", trace.prediction.level, trace.motion.coverage);
        if args.trace {
            traces.push(trace);
        }
    }
    let segments = pipeline.finish()?;
    let engine_time = started.elapsed().saturating_sub(annotate_time);
    info!(
        "{frame_count} frames in {:.3}s ({:.1} frames/s)",
        engine_time.as_secs_f64(),
        frame_count as f64 / engine_time.as_secs_f64().max(1e-9)
    );

    let segments: Vec<SegmentReport> = segments.iter().map(SegmentReport::from).collect();
    let metrics = match truth {
        Some(truth) => Some(score(&truth, &segments)?),
        None => None,
    };
    let report = RunReport {
        config,
        frame_count,
        segments,
        frames: args.trace.then_some(traces),
        metrics,
        wall_clock_seconds: args.timing.then_some(engine_time.as_secs_f64()),
    };
    let json = report::to_stable_json(&report).map_err(Failure::io)?;
    report::write_atomic(&args.out, json.as_bytes()).map_err(Failure::io)
}

fn score(truth: &[CongestionLevel], segments: &[SegmentReport]) -> CliResult<ordinalflow::EvalReport> {
    if truth.len() != segments.len() {
        return Err(Failure::alignment(anyhow!(
            "truth has {} levels but the report has {} segments",
            truth.len(),
            segments.len()
        )));
    }
    let pred: Vec<CongestionLevel> = segments.iter().map(|s| s.smoothed_level).collect();
    Ok(evaluate(truth, &pred)?)
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> CliResult {
    let report = report::load_report(&args.report).map_err(Failure::format)?;
    let truth = read_truth(&args.truth)?;
    let metrics = score(&truth, &report.segments)?;
    let json = report::to_stable_json(&metrics).map_err(Failure::io)?;
    match &args.out {
        Some(path) => report::write_atomic(path, json.as_bytes()).map_err(Failure::io),
        None => std::io::stdout()
            .write_all(json.as_bytes())
            .map_err(Failure::io),
    }
}

pub fn synth(args: &SynthArgs) -> CliResult {
    let levels: Vec<CongestionLevel> = match args.level {
        Some(v) => vec![CongestionLevel::new(v).map_err(Failure::config)?],
        None => CongestionLevel::all().collect(),
    };
    if args.frames == 0 || args.segments == 0 {
        return Err(Failure::config(anyhow!("--frames and --segments must be at least 1")));
    }
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(Failure::config(anyhow!("--noise must be finite and non-negative")));
    }
    let clip = generate_corpus(&levels, args.segments, args.frames, args.seed, args.noise)
        .map_err(Failure::config)?;

    let out = &args.out;
    let io = |e: anyhow::Error| Failure::io(e);
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(io)?;
    if args.packed {
        frameio::write_packed(&out.join("frames.ordv"), &clip.frames).map_err(io)?;
    } else {
        frameio::write_frame_dir(&out.join("frames"), &clip.frames).map_err(io)?;
    }
    write_sidecar(&out.join("scores.jsonl"), |w| write_score_sidecar(w, &clip.scores))?;
    write_sidecar(&out.join("detections.jsonl"), |w| {
        write_detection_sidecar(w, &clip.detections)
    })?;
    let truth = report::format_truth(&clip.segment_truth(args.frames));
    fs::write(out.join("truth.txt"), truth).map_err(Failure::io)?;
    info!("wrote {} frames to {}", clip.len(), out.display());
    Ok(())
}

fn write_sidecar(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> ordinalflow::Result<()>,
) -> CliResult {
    let mut w = BufWriter::new(
        File::create(path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(Failure::io)?,
    );
    write(&mut w)?;
    w.flush().map_err(Failure::io)
}

pub fn motion_dump(args: &MotionDumpArgs) -> CliResult {
    let config = load_config(args.config.as_deref())?;
    let source = open_frames(&args.frames)?;
    let mut pipeline = Pipeline::new(config)?;
    let mut out = BufWriter::new(
        File::create(&args.out)
            .with_context(|| format!("creating {}", args.out.display()))
            .map_err(Failure::io)?,
    );
    for (t, frame) in source.prefetch(PREFETCH_DEPTH).enumerate() {
        let frame = frame.map_err(Failure::format)?;
        let empty = DetectionSet {
            frame_index: t,
            detections: Vec::new(),
        };
        let trace = pipeline.process(&frame, &ScoreVector::uniform(t), &empty)?;
        serde_json::to_writer(&mut out, &trace.motion).map_err(Failure::io)?;
        out.write_all(b"\n").map_err(Failure::io)?;
    }
    out.flush().map_err(Failure::io)
}
