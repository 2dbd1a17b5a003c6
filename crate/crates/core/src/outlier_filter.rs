//! Leave-one-out detection of flow frames with outlying magnitude and their
//! repair by linear interpolation in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FlowField;

/// Spread estimate used by the outlier test and the detection threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    /// `sqrt(Σ|x − mean| / (n − 1))`, absolute deviations under the root.
    #[default]
    RootMad,
    /// Sample standard deviation `sqrt(Σ(x − mean)² / (n − 1))`.
    Std,
}

impl Deviation {
    pub fn spread(&self, values: &[f64], mean: f64) -> f64 {
        let n = values.len();
        if n < 2 {
            return 0.0;
        }
        let acc: f64 = match self {
            Deviation::RootMad => values.iter().map(|v| (mean - v).abs()).sum(),
            Deviation::Std => values.iter().map(|v| (mean - v).powi(2)).sum(),
        };
        (acc / (n - 1) as f64).sqrt()
    }
}

/// Per-frame reduction of the flow magnitude.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameStatistic {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierParams {
    pub kappa: f64,
    pub frame_statistic: FrameStatistic,
    pub deviation: Deviation,
}

impl Default for OutlierParams {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            frame_statistic: FrameStatistic::Max,
            deviation: Deviation::RootMad,
        }
    }
}

impl OutlierParams {
    pub fn validate(&self) -> Result<()> {
        if self.kappa > 0.0 && self.kappa.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("outlier parameters", "kappa must be > 0"))
        }
    }
}

pub fn frame_statistics(flow: &FlowField, statistic: FrameStatistic) -> Vec<f64> {
    (0..flow.frames())
        .map(|t| {
            let mags = flow.frame_vx(t).iter().zip(flow.frame_vy(t)).map(|(x, y)| x.hypot(*y));
            match statistic {
                FrameStatistic::Max => mags.fold(0.0, f64::max),
                FrameStatistic::Mean => mags.sum::<f64>() / flow.frame_len() as f64,
            }
        })
        .collect()
}

/// Indices `i` whose leave-one-out mean `M_i` deviates from the mean of all
/// `M` by more than `kappa` spreads. Sorted ascending.
pub fn detect_outlier_frames(flow: &FlowField, params: &OutlierParams) -> Result<Vec<usize>> {
    params.validate()?;
    if flow.frames() < 3 {
        return Err(Error::invalid(
            "outlier detection",
            format!("{} frames, need at least 3", flow.frames()),
        ));
    }
    let stats = frame_statistics(flow, params.frame_statistic);
    Ok(outlier_indices(&stats, params.kappa, params.deviation))
}

/// Leave-one-out test on precomputed per-frame statistics.
pub fn outlier_indices(stats: &[f64], kappa: f64, deviation: Deviation) -> Vec<usize> {
    let n = stats.len();
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = stats.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum();
            s / (n - 1) as f64
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let spread = deviation.spread(&loo, mean);
    (0..n).filter(|&i| (loo[i] - mean).abs() > kappa * spread).collect()
}

/// Replaces each `bad` frame by linear interpolation between its nearest
/// clean neighbours; leading/trailing bad runs copy the nearest clean frame.
pub fn repair_frames(flow: &FlowField, bad: &[usize]) -> Result<FlowField> {
    let n = flow.frames();
    let mut is_bad = vec![false; n];
    for &i in bad {
        if i >= n {
            return Err(Error::OutOfRange { index: i, len: n });
        }
        is_bad[i] = true;
    }
    if is_bad.iter().all(|b| *b) {
        return Err(Error::NoCleanFrames(n));
    }
    let mut out = flow.clone();
    for i in (0..n).filter(|i| is_bad[*i]) {
        let prev = (0..i).rev().find(|j| !is_bad[*j]);
        let next = (i + 1..n).find(|j| !is_bad[*j]);
        let (dst_x, dst_y) = out.frame_mut(i);
        match (prev, next) {
            (Some(a), Some(b)) => {
                let s = (i - a) as f64 / (b - a) as f64;
                let lerp = |fa: &[f64], fb: &[f64], dst: &mut [f64]| {
                    for ((d, x), y) in dst.iter_mut().zip(fa).zip(fb) {
                        *d = x + s * (y - x);
                    }
                };
                lerp(flow.frame_vx(a), flow.frame_vx(b), dst_x);
                lerp(flow.frame_vy(a), flow.frame_vy(b), dst_y);
            }
            (Some(k), None) | (None, Some(k)) => {
                dst_x.copy_from_slice(flow.frame_vx(k));
                dst_y.copy_from_slice(flow.frame_vy(k));
            }
            (None, None) => unreachable!("at least one clean frame"),
        }
    }
    Ok(out)
}
