//! Detection and tracking of small moving objects in image sequences
//! degraded by atmospheric turbulence and camera motion.
//!
//! Optical flow is compensated for camera egomotion, the residual is split
//! into a geometric part `u` and an oscillatory part `v` by complex wavelet
//! shrinkage, and `u` is thresholded and tracked.

pub mod camera_motion;
pub mod color;
pub mod decomposition;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod field;
pub mod filter;
pub mod io;
pub mod optical_flow;
pub mod outlier_filter;
pub mod pipeline;
pub mod synth;
pub mod tracking;
pub mod wavelet;

pub use camera_motion::{
    estimate_analytic, estimate_empirical, eval_motion_model, AnalyticEstimate, EmpiricalEstimate, MotionParams,
    SmoothingSpec,
};
pub use decomposition::{cshrink, decompose, Decomposition, ShrinkageParams};
pub use detection::{detect, BoundingBox, DetectionParams, DetectionSet, Region};
pub use error::{Error, Result};
pub use evaluation::{compute_metrics, evaluate_sequence, match_frame, ConfusionCounts, GroundTruth, Metrics};
pub use field::{flow_magnitude, ComplexField, FlowField, ImageSequence, PixelGrid, ScalarField};
pub use io::{load_sequence, read_flow, write_flow};
pub use optical_flow::{compute_flow, HornSchunckParams};
pub use outlier_filter::{detect_outlier_frames, repair_frames, Deviation, OutlierParams};
pub use pipeline::{run_pipeline, PipelineConfig};
pub use synth::{gen_camera_flow, gen_sequence, gen_turbulence, SceneSpec};
pub use tracking::{assign, hungarian, KalmanCA, TrackerParams};
pub use wavelet::{inverse_wavelet3d, wavelet3d, WaveletFamily, WaveletSpec};
