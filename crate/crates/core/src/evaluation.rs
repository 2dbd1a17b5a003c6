//! Detection scoring against per-frame ground-truth boxes.
//!
//! Frames are matched independently and their counts summed. A frame with
//! neither detections nor ground-truth boxes counts as one true negative,
//! which is the only negative class a box-level detector has.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detection::{BoundingBox, DetectionSet, Region};
use crate::error::{Error, Result};
use crate::tracking::TrackRecord;

/// Tracks (tracker output or ground truth) in their serialized form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackFile {
    pub tracks: Vec<TrackRecord>,
}

pub type GroundTruth = TrackFile;

impl TrackFile {
    pub fn boxes_in_frame(&self, frame: usize) -> Vec<BoundingBox> {
        self.tracks
            .iter()
            .flat_map(|t| t.frames.iter())
            .filter(|p| p.frame == frame)
            .map(|p| p.bbox)
            .collect()
    }

    pub fn max_frame(&self) -> Option<usize> {
        self.tracks.iter().flat_map(|t| t.frames.iter()).map(|p| p.frame).max()
    }

    /// Keeps only entries with `frame < frames`.
    pub fn truncated(&self, frames: usize) -> TrackFile {
        TrackFile {
            tracks: self
                .tracks
                .iter()
                .map(|t| TrackRecord {
                    id: t.id,
                    frames: t.frames.iter().filter(|p| p.frame < frames).cloned().collect(),
                })
                .filter(|t| !t.frames.is_empty())
                .collect(),
        }
    }

    /// Checks that every box lies inside a `width x height` image and every
    /// frame index is below `frames`.
    pub fn validate(&self, width: usize, height: usize, frames: usize) -> Result<()> {
        for p in self.tracks.iter().flat_map(|t| t.frames.iter()) {
            if p.frame >= frames {
                return Err(Error::FrameRange { frame: p.frame, frames });
            }
            let b = p.bbox;
            if b.top + b.height > height || b.left + b.width > width || b.height == 0 || b.width == 0 {
                return Err(Error::invalid("ground truth", format!("box {b:?} outside {width}x{height}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchCriterion {
    /// Detection centroid inside the truth box.
    #[default]
    CentroidInBox,
    /// Intersection-over-union of boxes at least `threshold`.
    Iou { threshold: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
        self.tn += rhs.tn;
    }
}

/// Greedy one-to-one matching of one frame, best-scoring pairs first.
pub fn match_frame(detections: &[Region], truth: &[BoundingBox], criterion: MatchCriterion) -> ConfusionCounts {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (di, d) in detections.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            let score = match criterion {
                MatchCriterion::CentroidInBox => {
                    if !t.contains(d.centroid.0, d.centroid.1) {
                        continue;
                    }
                    let (cr, cc) = t.center();
                    (d.centroid.0 - cr).hypot(d.centroid.1 - cc)
                }
                MatchCriterion::Iou { threshold } => {
                    let iou = d.bbox.iou(t);
                    if iou < threshold {
                        continue;
                    }
                    -iou
                }
            };
            candidates.push((score, di, ti));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detections.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut tp = 0;
    for (_, di, ti) in candidates {
        if !det_used[di] && !truth_used[ti] {
            det_used[di] = true;
            truth_used[ti] = true;
            tp += 1;
        }
    }
    ConfusionCounts {
        tp,
        fp: detections.len() - tp,
        fn_: truth.len() - tp,
        tn: usize::from(detections.is_empty() && truth.is_empty()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub fdr: f64,
    pub ppv: f64,
    pub acc: f64,
    pub fnr: f64,
    /// Metrics whose denominator was zero and took their sentinel value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

/// F1, FDR, PPV, ACC and FNR. Zero denominators yield 1.0 for PPV/ACC and
/// 0.0 for FDR/FNR/F1 and are listed in `degenerate`.
pub fn compute_metrics(c: &ConfusionCounts) -> Metrics {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let mut degenerate = Vec::new();
    let mut ratio = |name: &str, num: f64, den: f64, sentinel: f64| {
        if den == 0.0 {
            degenerate.push(name.to_string());
            sentinel
        } else {
            num / den
        }
    };
    let f1 = ratio("f1", 2.0 * tp, 2.0 * tp + fp + fn_, 0.0);
    let ppv = ratio("ppv", tp, tp + fp, 1.0);
    let fdr = ratio("fdr", fp, tp + fp, 0.0);
    let fnr = ratio("fnr", fn_, fn_ + tp, 0.0);
    let acc = ratio("acc", tp + tn, tp + tn + fp + fn_, 1.0);
    Metrics {
        f1,
        fdr,
        ppv,
        acc,
        fnr,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEvaluation {
    pub frame: usize,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub per_frame: Vec<FrameEvaluation>,
}

impl EvaluationReport {
    pub fn table(&self, label: &str) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}", "field", "F1", "FDR", "PPV", "ACC", "FNR");
        let _ = writeln!(
            s,
            "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            label, m.f1, m.fdr, m.ppv, m.acc, m.fnr
        );
        let c = &self.counts;
        let _ = writeln!(s, "tp={} fp={} fn={} tn={}", c.tp, c.fp, c.fn_, c.tn);
        s
    }
}

/// Scores per-frame regions (index = frame) against `gt`.
pub fn evaluate_frames(frames: &[Vec<Region>], gt: &GroundTruth, criterion: MatchCriterion) -> Result<EvaluationReport> {
    if let Some(max) = gt.max_frame() {
        if max >= frames.len() {
            return Err(Error::FrameRange {
                frame: max,
                frames: frames.len(),
            });
        }
    }
    let mut counts = ConfusionCounts::default();
    let per_frame: Vec<FrameEvaluation> = frames
        .iter()
        .enumerate()
        .map(|(t, regions)| {
            let c = match_frame(regions, &gt.boxes_in_frame(t), criterion);
            counts += c;
            FrameEvaluation { frame: t, counts: c }
        })
        .collect();
    Ok(EvaluationReport {
        metrics: compute_metrics(&counts),
        counts,
        per_frame,
    })
}

pub fn evaluate_sequence(dets: &DetectionSet, gt: &GroundTruth, criterion: MatchCriterion) -> Result<EvaluationReport> {
    let frames: Vec<Vec<Region>> = dets.frames.iter().map(|f| f.regions.clone()).collect();
    evaluate_frames(&frames, gt, criterion)
}

/// Scores matched points of tracker output as per-frame detections.
pub fn evaluate_tracks(tracks: &TrackFile, frames: usize, gt: &GroundTruth, criterion: MatchCriterion) -> Result<EvaluationReport> {
    let mut per_frame: Vec<Vec<Region>> = vec![Vec::new(); frames];
    for p in tracks.tracks.iter().flat_map(|t| t.frames.iter()) {
        if p.matched && p.frame < frames {
            let (cr, cc) = p.bbox.center();
            per_frame[p.frame].push(Region {
                centroid: (p.row.unwrap_or(cr), p.col.unwrap_or(cc)),
                bbox: p.bbox,
                area: p.bbox.area(),
            });
        }
    }
    evaluate_frames(&per_frame, gt, criterion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::TrackPoint;

    fn bbox(top: usize, left: usize, size: usize) -> BoundingBox {
        BoundingBox { top, left, height: size, width: size }
    }

    fn det(row: f64, col: f64) -> Region {
        Region {
            centroid: (row, col),
            bbox: bbox(row as usize, col as usize, 1),
            area: 1,
        }
    }

    #[test]
    fn match_examples() {
        let b = bbox(10, 10, 5);
        let c = match_frame(&[det(12.0, 12.0)], &[b], MatchCriterion::CentroidInBox);
        assert_eq!((c.tp, c.fp, c.fn_), (1, 0, 0));
        let c = match_frame(&[det(12.0, 12.0), det(11.0, 13.0)], &[b], MatchCriterion::CentroidInBox);
        assert_eq!((c.tp, c.fp, c.fn_), (1, 1, 0));
        let c = match_frame(&[], &[b], MatchCriterion::CentroidInBox);
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (0, 0, 1, 0));
        let c = match_frame(&[], &[], MatchCriterion::CentroidInBox);
        assert_eq!(c.tn, 1);
    }

    #[test]
    fn iou_criterion() {
        let truth = bbox(0, 0, 4);
        let d = Region { centroid: (1.5, 1.5), bbox: bbox(0, 0, 4), area: 16 };
        let far = Region { centroid: (1.5, 1.5), bbox: bbox(2, 2, 4), area: 16 };
        assert_eq!(match_frame(&[d], &[truth], MatchCriterion::Iou { threshold: 0.5 }).tp, 1);
        assert_eq!(match_frame(&[far], &[truth], MatchCriterion::Iou { threshold: 0.5 }).tp, 0);
    }

    #[test]
    fn metric_examples() {
        let m = compute_metrics(&ConfusionCounts { tp: 3, fp: 3, fn_: 1, tn: 0 });
        assert_eq!((m.ppv, m.fdr), (0.5, 0.5));
        let m = compute_metrics(&ConfusionCounts { tp: 10, fp: 0, fn_: 0, tn: 0 });
        assert_eq!((m.f1, m.acc, m.fnr), (1.0, 1.0, 0.0));
        let m = compute_metrics(&ConfusionCounts { tp: 30, fp: 10, fn_: 10, tn: 0 });
        assert_eq!(m.f1, 0.75);
        assert!(m.degenerate.is_empty());
    }

    #[test]
    fn degenerate_metrics_use_sentinels() {
        let m = compute_metrics(&ConfusionCounts::default());
        assert_eq!((m.ppv, m.acc, m.fdr, m.fnr, m.f1), (1.0, 1.0, 0.0, 0.0, 0.0));
        assert_eq!(m.degenerate.len(), 5);
    }

    fn gt_single(frames: usize) -> GroundTruth {
        TrackFile {
            tracks: vec![TrackRecord {
                id: 0,
                frames: (0..frames)
                    .map(|t| TrackPoint { frame: t, row: None, col: None, bbox: bbox(t, 5, 4), matched: true })
                    .collect(),
            }],
        }
    }

    #[test]
    fn sequence_scores() {
        let gt = gt_single(4);
        let perfect: Vec<Vec<Region>> = (0..4).map(|t| vec![det(t as f64 + 1.5, 6.5)]).collect();
        let r = evaluate_frames(&perfect, &gt, MatchCriterion::CentroidInBox).unwrap();
        assert_eq!(r.metrics.f1, 1.0);
        let none: Vec<Vec<Region>> = vec![Vec::new(); 4];
        let r = evaluate_frames(&none, &gt, MatchCriterion::CentroidInBox).unwrap();
        assert_eq!((r.metrics.fnr, r.metrics.f1), (1.0, 0.0));
        assert!(matches!(
            evaluate_frames(&none[..3], &gt, MatchCriterion::CentroidInBox),
            Err(Error::FrameRange { .. })
        ));
    }

    #[test]
    fn ground_truth_json_schema() {
        let text = r#"{"tracks":[{"id":3,"frames":[{"frame":0,"bbox":{"top":1,"left":2,"height":3,"width":4}}]}]}"#;
        let gt: GroundTruth = serde_json::from_str(text).unwrap();
        assert_eq!(gt.boxes_in_frame(0), vec![BoundingBox { top: 1, left: 2, height: 3, width: 4 }]);
        assert!(gt.validate(8, 8, 1).is_ok());
        assert!(gt.validate(5, 8, 1).is_err());
        assert!(gt.validate(8, 8, 0).is_err());
    }
}
