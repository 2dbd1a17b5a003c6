//! `turbtrack`: run the detection pipeline or any single stage of it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use turbtrack_core::color::colorize_flow;
use turbtrack_core::decomposition::decompose_mirrored;
use turbtrack_core::detection::{detect, DetectionSet};
use turbtrack_core::evaluation::{evaluate_sequence, GroundTruth, TrackFile};
use turbtrack_core::io::{load_sequence, read_flow, read_json, write_flow, write_gray_png, write_json, write_rgb_png};
use turbtrack_core::optical_flow::compute_flow;
use turbtrack_core::pipeline::{compensate, run_pipeline, PipelineConfig};
use turbtrack_core::synth::{gen_sequence, SceneSpec};
use turbtrack_core::tracking::track_sequence;
use turbtrack_core::{Error, PixelGrid};

#[derive(Parser, Debug)]
#[command(name = "turbtrack", version, about = "Moving-object detection in turbulent, camera-moving sequences")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for synthetic scenes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every stage from the configured input.
    Run,
    /// Optical flow of an image directory.
    Flow {
        /// Frame directory (defaults to `input.directory`).
        input: Option<PathBuf>,
        #[arg(long)]
        pattern: Option<String>,
    },
    /// Egomotion compensation of a flow file.
    Compensate { flow: PathBuf },
    /// Geometric/oscillatory split of a flow file.
    Decompose { flow: PathBuf },
    /// Adaptive-threshold detection on a flow file.
    Detect {
        flow: PathBuf,
        /// Also write the per-frame masks as PNG.
        #[arg(long)]
        masks: bool,
    },
    /// Track a detections file.
    Track { detections: PathBuf },
    /// Score a detections file against ground truth.
    Evaluate {
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
    },
    /// Render a synthetic scene (frames, true flow, ground truth).
    Synth,
    /// Color-code a flow file as PNG images.
    Colorize {
        flow: PathBuf,
        /// Single frame to render (default: all).
        #[arg(long)]
        frame: Option<usize>,
        /// Magnitude mapped to full saturation (default: per-frame maximum).
        #[arg(long)]
        max: Option<f64>,
    },
}

/// Exit status 1: bad input from the user; 2: failure while running.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn classify(stage: &str, e: Error) -> Failure {
    let msg = match e {
        Error::Config(_) => e.to_string(),
        _ => format!("{stage}: {e}"),
    };
    match e {
        Error::Invalid { .. } | Error::Config(_) | Error::TooSmall { .. } => Failure::Validation(msg),
        _ => Failure::Runtime(msg),
    }
}

fn runtime(stage: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{stage}: {e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(m) => eprintln!("error: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_file(p).map_err(|e| classify("config", e))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        if let Some(scene) = cfg.input.synth.as_mut() {
            scene.seed = seed;
        }
    }
    if let Some(out) = &cli.output {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn output_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("turbtrack-out"))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("creating {}: {e}", dir.display())))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(&cli)?;
    let out = output_dir(&cfg);
    match &cli.command {
        Command::Run => {
            let result = run_pipeline(&cfg, &out).map_err(|e| {
                let msg = e.to_string();
                if e.stage == "validate" {
                    Failure::Validation(msg)
                } else {
                    Failure::Runtime(msg)
                }
            })?;
            let m = &result.manifest;
            eprintln!(
                "{} frames {}x{}; outlier frames {:?}; decomposition iterations {}",
                m.frames, m.width, m.height, m.outlier_frames, m.decomposition_iterations
            );
            if let Some(report) = &result.evaluation {
                print!("{}", report.table("detections"));
            }
            eprintln!("artifacts in {}", out.display());
            Ok(())
        }
        Command::Flow { input, pattern } => {
            cfg.flow.validate().map_err(|e| classify("flow", e))?;
            let dir = input
                .clone()
                .or_else(|| cfg.input.directory.clone())
                .ok_or_else(|| Failure::Validation("flow: no input directory".into()))?;
            let pattern = pattern.clone().unwrap_or_else(|| cfg.input.pattern.clone());
            let seq = load_sequence(&dir, &pattern).map_err(runtime("load"))?;
            let flow = compute_flow(&seq, &cfg.flow).map_err(runtime("flow"))?;
            ensure_dir(&out)?;
            write_flow(&flow, &out.join("flow.tfl")).map_err(runtime("flow"))
        }
        Command::Compensate { flow } => {
            let flow = read_flow(flow).map_err(runtime("compensate"))?;
            let grid = match cfg.motion.focal {
                Some(f) => PixelGrid::new(flow.width(), flow.height(), f),
                None => PixelGrid::with_default_focal(flow.width(), flow.height()),
            }
            .map_err(|e| classify("compensate", e))?;
            let (model, compensated, params) = compensate(&flow, &grid, &cfg.motion).map_err(|e| classify("compensate", e))?;
            ensure_dir(&out)?;
            write_flow(&model, &out.join("motion_model.tfl")).map_err(runtime("compensate"))?;
            write_flow(&compensated, &out.join("compensated.tfl")).map_err(runtime("compensate"))?;
            if !params.is_empty() {
                write_json(&params, &out.join("motion_params.json")).map_err(runtime("compensate"))?;
            }
            Ok(())
        }
        Command::Decompose { flow } => {
            let flow = read_flow(flow).map_err(runtime("decompose"))?;
            let d = decompose_mirrored(&flow, &cfg.decomposition, &cfg.wavelet, cfg.decomposition_pad)
                .map_err(|e| classify("decompose", e))?;
            eprintln!("{} iterations, final change {:.3e}", d.iterations, d.final_change);
            ensure_dir(&out)?;
            write_flow(&d.u, &out.join("u.tfl")).map_err(runtime("decompose"))?;
            write_flow(&d.v, &out.join("v.tfl")).map_err(runtime("decompose"))
        }
        Command::Detect { flow, masks } => {
            let flow = read_flow(flow).map_err(runtime("detect"))?;
            let d = detect(&flow, &cfg.detection).map_err(|e| classify("detect", e))?;
            ensure_dir(&out)?;
            write_json(&d, &out.join("detections.json")).map_err(runtime("detect"))?;
            if *masks {
                for (t, m) in d.masks.iter().enumerate() {
                    let path = out.join(format!("mask_{t:04}.png"));
                    turbtrack_core::io::write_mask_png(m, d.width, d.height, &path).map_err(runtime("detect"))?;
                }
            }
            Ok(())
        }
        Command::Track { detections } => {
            let d: DetectionSet = read_json(detections).map_err(runtime("track"))?;
            let frames: Vec<_> = d.frames.iter().map(|f| f.regions.clone()).collect();
            let set = track_sequence(&frames, &cfg.tracking).map_err(|e| classify("track", e))?;
            let file = TrackFile {
                tracks: set.confirmed(cfg.tracking.min_hits),
            };
            ensure_dir(&out)?;
            write_json(&file, &out.join("tracks.json")).map_err(runtime("track"))
        }
        Command::Evaluate { detections, ground_truth } => {
            let d: DetectionSet = read_json(detections).map_err(runtime("evaluate"))?;
            let gt: GroundTruth = read_json(ground_truth).map_err(runtime("evaluate"))?;
            let n = d.frames.len();
            let gt = if gt.max_frame() == Some(n) { gt.truncated(n) } else { gt };
            let report = evaluate_sequence(&d, &gt, cfg.evaluation.criterion).map_err(|e| classify("evaluate", e))?;
            print!("{}", report.table("detections"));
            ensure_dir(&out)?;
            write_json(&report, &out.join("evaluation.json")).map_err(runtime("evaluate"))
        }
        Command::Synth => {
            let scene = match &cfg.input.synth {
                Some(s) => s.clone(),
                None => SceneSpec::default_scene(cli.seed.unwrap_or(0)),
            };
            let s = gen_sequence(&scene).map_err(|e| classify("synth", e))?;
            let frames = out.join("frames");
            ensure_dir(&frames)?;
            for t in 0..s.images.frames() {
                let path = frames.join(format!("frame_{t:04}.png"));
                write_gray_png(s.images.frame(t), scene.width, scene.height, &path).map_err(runtime("synth"))?;
            }
            write_flow(&s.true_flow, &out.join("true_flow.tfl")).map_err(runtime("synth"))?;
            write_json(&s.ground_truth, &out.join("ground_truth.json")).map_err(runtime("synth"))?;
            let mut used = PipelineConfig::default();
            used.input.synth = Some(scene);
            let text = used.to_toml().map_err(runtime("synth"))?;
            std::fs::write(out.join("scene.toml"), text).map_err(|e| Failure::Runtime(format!("synth: {e}")))
        }
        Command::Colorize { flow, frame, max } => {
            let flow = read_flow(flow).map_err(runtime("colorize"))?;
            let frames: Vec<usize> = match frame {
                Some(t) => vec![*t],
                None => (0..flow.frames()).collect(),
            };
            ensure_dir(&out)?;
            for t in frames {
                let img = colorize_flow(&flow, t, *max).map_err(|e| classify("colorize", e))?;
                write_rgb_png(&img, &out.join(format!("flow_{t:04}.png"))).map_err(runtime("colorize"))?;
            }
            Ok(())
        }
    }
}
