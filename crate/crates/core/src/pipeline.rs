//! Config-driven end-to-end run: load or synthesize, flow, compensation,
//! outlier repair, decomposition, detection, tracking and evaluation.
//!
//! Outlier frames are detected on the motion-compensated flow, just before
//! decomposition.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::camera_motion::{estimate_analytic, estimate_empirical, MotionParams, SmoothingSpec, DEFAULT_SMOOTHING_DIVISOR};
use crate::decomposition::{decompose_mirrored, ShrinkageParams};
use crate::detection::{detect, DetectionParams, DetectionSet};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_sequence, evaluate_tracks, EvaluationReport, GroundTruth, MatchCriterion, TrackFile};
use crate::field::{FlowField, ImageSequence, PixelGrid};
use crate::io::{load_sequence, read_json, write_flow, write_json};
use crate::optical_flow::{compute_flow, HornSchunckParams};
use crate::outlier_filter::{detect_outlier_frames, repair_frames, OutlierParams};
use crate::synth::{gen_sequence, SceneSpec};
use crate::tracking::{track_sequence, TrackerParams};
use crate::wavelet::WaveletSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Directory of frames; exclusive with `synth`.
    pub directory: Option<PathBuf>,
    pub pattern: String,
    pub synth: Option<SceneSpec>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            pattern: "*.png".into(),
            synth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionModel {
    #[default]
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    pub model: MotionModel,
    /// `sigma = axis length / divisor` unless both sigmas are given.
    pub divisor: f64,
    pub sigma_rows: Option<f64>,
    pub sigma_cols: Option<f64>,
    /// Focal length in pixels for directory input; defaults to the larger
    /// image dimension. Synthetic input uses the scene's focal length.
    pub focal: Option<f64>,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            model: MotionModel::Analytic,
            divisor: DEFAULT_SMOOTHING_DIVISOR,
            sigma_rows: None,
            sigma_cols: None,
            focal: None,
        }
    }
}

impl MotionConfig {
    pub fn smoothing(&self, width: usize, height: usize) -> Result<SmoothingSpec> {
        match (self.sigma_rows, self.sigma_cols) {
            (Some(r), Some(c)) => SmoothingSpec::new(r, c),
            (None, None) => SmoothingSpec::from_divisor(width, height, self.divisor),
            _ => Err(Error::invalid("motion", "give both sigma_rows and sigma_cols or neither")),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.divisor > 0.0 && self.divisor.is_finite()) {
            return Err(Error::invalid("motion", "divisor must be > 0"));
        }
        if let Some(f) = self.focal {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::invalid("motion", "focal must be > 0"));
            }
        }
        match (self.sigma_rows, self.sigma_cols) {
            (Some(r), Some(c)) => SmoothingSpec::new(r, c).map(|_| ()),
            (None, None) => Ok(()),
            _ => Err(Error::invalid("motion", "give both sigma_rows and sigma_cols or neither")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionSource {
    /// Geometric component of the decomposition.
    #[default]
    U,
    /// Motion-compensated flow.
    Vc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Ground-truth track file; synthetic input supplies its own.
    pub ground_truth: Option<PathBuf>,
    pub criterion: MatchCriterion,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            ground_truth: None,
            criterion: MatchCriterion::CentroidInBox,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output: Option<PathBuf>,
    pub detection_source: DetectionSource,
    /// Mirror padding per side applied before decomposition.
    pub decomposition_pad: usize,
    pub input: InputConfig,
    pub flow: HornSchunckParams,
    pub motion: MotionConfig,
    pub outliers: OutlierParams,
    pub decomposition: ShrinkageParams,
    pub wavelet: WaveletSpec,
    pub detection: DetectionParams,
    pub tracking: TrackerParams,
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output: None,
            detection_source: DetectionSource::U,
            decomposition_pad: 8,
            input: InputConfig::default(),
            flow: HornSchunckParams::default(),
            motion: MotionConfig::default(),
            outliers: OutlierParams::default(),
            decomposition: ShrinkageParams::default(),
            wavelet: WaveletSpec::default(),
            detection: DetectionParams::default(),
            tracking: TrackerParams::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Parameter checks that need no input data.
    pub fn validate(&self) -> Result<()> {
        match (&self.input.directory, &self.input.synth) {
            (Some(_), Some(_)) => return Err(Error::invalid("input", "set either directory or synth, not both")),
            (None, None) => return Err(Error::invalid("input", "set input.directory or input.synth")),
            (None, Some(scene)) => scene.validate()?,
            (Some(_), None) => {}
        }
        self.flow.validate()?;
        self.motion.validate()?;
        self.outliers.validate()?;
        self.decomposition.validate()?;
        self.wavelet.validate()?;
        self.detection.validate()?;
        self.tracking.validate()?;
        Ok(())
    }
}

/// Error of one named stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub status: String,
    pub timings: Vec<StageTiming>,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub outlier_frames: Vec<usize>,
    /// Iterations of the alternating shrinkage; it runs on the whole
    /// space-time field, so every frame shares this count.
    pub decomposition_iterations: usize,
    pub decomposition_final_change: f64,
    pub wavelet_levels: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motion_params: Vec<MotionParams>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub manifest: RunManifest,
    pub flow: FlowField,
    pub compensated: FlowField,
    /// Compensated flow after outlier repair; the input of decomposition.
    pub repaired: FlowField,
    pub u: FlowField,
    pub v: FlowField,
    pub detections: DetectionSet,
    pub tracks: TrackFile,
    pub evaluation: Option<EvaluationReport>,
    pub track_evaluation: Option<EvaluationReport>,
}

/// Motion compensation by the configured model. Returns the model field,
/// the compensated field and, for the analytic model, per-frame parameters.
pub fn compensate(flow: &FlowField, grid: &PixelGrid, cfg: &MotionConfig) -> Result<(FlowField, FlowField, Vec<MotionParams>)> {
    let smoothing = cfg.smoothing(flow.width(), flow.height())?;
    match cfg.model {
        MotionModel::Analytic => {
            let e = estimate_analytic(flow, grid, &smoothing)?;
            Ok((e.model, e.compensated, e.params))
        }
        MotionModel::Empirical => {
            let e = estimate_empirical(flow, &smoothing)?;
            Ok((e.model, e.compensated, Vec::new()))
        }
    }
}

struct Run<'a> {
    out: &'a Path,
    manifest: RunManifest,
}

impl Run<'_> {
    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> std::result::Result<T, StageError> {
        let start = Instant::now();
        let result = f();
        self.manifest.timings.push(StageTiming {
            stage: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        result.map_err(|source| {
            self.manifest.status = format!("failed at {name}");
            let _ = write_json(&self.manifest, &self.out.join("manifest.json"));
            StageError { stage: name, source }
        })
    }

    fn artifact(&mut self, name: &str) -> PathBuf {
        self.manifest.artifacts.push(name.into());
        self.out.join(name)
    }

    fn write_flow(&mut self, flow: &FlowField, name: &str) -> Result<()> {
        let path = self.artifact(name);
        write_flow(flow, &path)
    }
}

fn load_input(cfg: &PipelineConfig) -> Result<(ImageSequence, Option<GroundTruth>, PixelGrid)> {
    let gt_file = match &cfg.evaluation.ground_truth {
        Some(p) => Some(read_json::<GroundTruth>(p)?),
        None => None,
    };
    if let Some(scene) = &cfg.input.synth {
        let s = gen_sequence(scene)?;
        return Ok((s.images, gt_file.or(Some(s.ground_truth)), scene.grid()?));
    }
    let dir = cfg.input.directory.as_ref().ok_or_else(|| Error::invalid("input", "no directory"))?;
    let seq = load_sequence(dir, &cfg.input.pattern)?;
    let grid = match cfg.motion.focal {
        Some(f) => PixelGrid::new(seq.width(), seq.height(), f)?,
        None => PixelGrid::with_default_focal(seq.width(), seq.height())?,
    };
    Ok((seq, gt_file, grid))
}

/// Runs every stage, writing artifacts into `output`. The output directory
/// is created only after the input has been loaded, and artifacts of
/// completed stages are kept when a later stage fails.
pub fn run_pipeline(config: &PipelineConfig, output: &Path) -> std::result::Result<PipelineOutput, StageError> {
    config.validate().map_err(|source| StageError { stage: "validate", source })?;
    let mut timings = Vec::new();
    let start = Instant::now();
    let (seq, gt, grid) = load_input(config).map_err(|source| StageError { stage: "load", source })?;
    timings.push(StageTiming {
        stage: "load".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    std::fs::create_dir_all(output).map_err(|e| StageError {
        stage: "load",
        source: Error::io(format!("creating {}", output.display()), e),
    })?;

    let mut run = Run {
        out: output,
        manifest: RunManifest {
            config: config.clone(),
            status: "running".into(),
            timings,
            width: seq.width(),
            height: seq.height(),
            frames: seq.frames(),
            outlier_frames: Vec::new(),
            decomposition_iterations: 0,
            decomposition_final_change: 0.0,
            wavelet_levels: 0,
            motion_params: Vec::new(),
            artifacts: Vec::new(),
        },
    };

    if let Some(gt) = &gt {
        let path = run.artifact("ground_truth.json");
        run.stage("load", || write_json(gt, &path))?;
    }

    let flow = run.stage("flow", || compute_flow(&seq, &config.flow))?;
    run.write_flow(&flow, "flow.tfl").map_err(|source| StageError { stage: "flow", source })?;

    let (model, compensated, params) = run.stage("compensate", || compensate(&flow, &grid, &config.motion))?;
    run.manifest.motion_params = params.clone();
    run.stage("compensate", || {
        write_flow(&model, &output.join("motion_model.tfl"))?;
        write_flow(&compensated, &output.join("compensated.tfl"))?;
        if !params.is_empty() {
            write_json(&params, &output.join("motion_params.json"))?;
        }
        Ok(())
    })?;
    run.manifest.artifacts.extend(["motion_model.tfl".to_string(), "compensated.tfl".to_string()]);
    if !params.is_empty() {
        run.manifest.artifacts.push("motion_params.json".into());
    }

    let (bad, repaired) = run.stage("outliers", || {
        let bad = if compensated.frames() >= 3 {
            detect_outlier_frames(&compensated, &config.outliers)?
        } else {
            Vec::new()
        };
        let repaired = if bad.is_empty() { compensated.clone() } else { repair_frames(&compensated, &bad)? };
        write_flow(&repaired, &output.join("repaired.tfl"))?;
        Ok((bad, repaired))
    })?;
    run.manifest.artifacts.push("repaired.tfl".into());
    run.manifest.outlier_frames = bad;

    let dec = run.stage("decompose", || {
        let d = decompose_mirrored(&repaired, &config.decomposition, &config.wavelet, config.decomposition_pad)?;
        write_flow(&d.u, &output.join("u.tfl"))?;
        write_flow(&d.v, &output.join("v.tfl"))?;
        Ok(d)
    })?;
    run.manifest.artifacts.extend(["u.tfl".to_string(), "v.tfl".to_string()]);
    run.manifest.decomposition_iterations = dec.iterations;
    run.manifest.decomposition_final_change = dec.final_change;
    let pad = |n: usize| n + 2 * config.decomposition_pad.min(n);
    run.manifest.wavelet_levels = config
        .wavelet
        .resolve_levels([pad(repaired.width()), pad(repaired.height()), pad(repaired.frames())])
        .unwrap_or(0);

    let source = match config.detection_source {
        DetectionSource::U => &dec.u,
        DetectionSource::Vc => &repaired,
    };
    let detections = run.stage("detect", || {
        let d = detect(source, &config.detection)?;
        write_json(&d, &output.join("detections.json"))?;
        Ok(d)
    })?;
    run.manifest.artifacts.push("detections.json".into());

    let tracks = run.stage("track", || {
        let frames: Vec<_> = detections.frames.iter().map(|f| f.regions.clone()).collect();
        let set = track_sequence(&frames, &config.tracking)?;
        let file = TrackFile {
            tracks: set.confirmed(config.tracking.min_hits),
        };
        write_json(&file, &output.join("tracks.json"))?;
        Ok(file)
    })?;
    run.manifest.artifacts.push("tracks.json".into());

    let (evaluation, track_evaluation) = match &gt {
        None => (None, None),
        Some(gt) => {
            let (det_report, track_report) = run.stage("evaluate", || {
                let n = detections.frames.len();
                let gt = if gt.max_frame() == Some(n) { gt.truncated(n) } else { gt.clone() };
                let det = evaluate_sequence(&detections, &gt, config.evaluation.criterion)?;
                let trk = evaluate_tracks(&tracks, n, &gt, config.evaluation.criterion)?;
                write_json(&EvaluationFile { detections: det.clone(), tracks: trk.clone() }, &output.join("evaluation.json"))?;
                let label = match config.detection_source {
                    DetectionSource::U => "u",
                    DetectionSource::Vc => "vc",
                };
                let text = format!("detections\n{}\ntracks\n{}", det.table(label), trk.table(label));
                std::fs::write(output.join("evaluation.txt"), text).map_err(|e| Error::io("writing evaluation.txt", e))?;
                Ok((det, trk))
            })?;
            run.manifest.artifacts.extend(["evaluation.json".to_string(), "evaluation.txt".to_string()]);
            (Some(det_report), Some(track_report))
        }
    };

    run.manifest.status = "ok".into();
    run.manifest.artifacts.push("manifest.json".into());
    write_json(&run.manifest, &output.join("manifest.json")).map_err(|source| StageError { stage: "manifest", source })?;

    Ok(PipelineOutput {
        manifest: run.manifest,
        flow,
        compensated,
        repaired,
        u: dec.u,
        v: dec.v,
        detections,
        tracks,
        evaluation,
        track_evaluation,
    })
}

/// Contents of `evaluation.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub detections: EvaluationReport,
    pub tracks: EvaluationReport,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(PipelineConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
        assert!(PipelineConfig::from_toml_str("[flow]\nalpha = 3\nbeta = 2").is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.input.synth = Some(SceneSpec::default());
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn input_must_be_exclusive() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate().is_err());
        cfg.input.synth = Some(SceneSpec::default());
        cfg.input.directory = Some("x".into());
        assert!(cfg.validate().is_err());
    }
}
