//! Multi-object tracking: detections are assigned to Kalman-predicted tracks
//! by gated optimal assignment.

pub mod assignment;
pub mod kalman;

use serde::{Deserialize, Serialize};

use crate::detection::{BoundingBox, Region};
use crate::error::{Error, Result};

pub use assignment::{assign, hungarian, Assignment};
pub use kalman::{kalman_predict, kalman_update, KalmanCA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    /// Largest predicted-position to centroid distance that may be matched, pixels.
    pub gate_distance: f64,
    /// A track is dropped once it has gone unmatched for more than this many frames.
    pub max_misses: usize,
    /// Matches needed before a track is reported.
    pub min_hits: usize,
    pub q: f64,
    pub r: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            gate_distance: 30.0,
            max_misses: 5,
            min_hits: 3,
            q: 1e-2,
            r: 1.0,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gate_distance > 0.0
            && self.max_misses > 0
            && self.min_hits > 0
            && self.q > 0.0
            && self.r > 0.0
            && self.gate_distance.is_finite()
            && self.q.is_finite()
            && self.r.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("tracker parameters", "all values must be positive"))
        }
    }
}

/// One per-frame entry of a track or ground-truth object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col: Option<f64>,
    pub bbox: BoundingBox,
    #[serde(default = "default_matched")]
    pub matched: bool,
}

fn default_matched() -> bool {
    true
}

/// Serialized form shared by tracker output and ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub id: u64,
    pub frames: Vec<TrackPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub kalman: KalmanCA,
    pub age: usize,
    pub hits: usize,
    pub misses: usize,
    pub history: Vec<TrackPoint>,
}

impl Track {
    fn last_bbox(&self) -> BoundingBox {
        self.history.last().expect("tracks start with a detection").bbox
    }

    pub fn record(&self) -> TrackRecord {
        TrackRecord {
            id: self.id,
            frames: self.history.clone(),
        }
    }
}

/// Tracker state carried from frame to frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    pub active: Vec<Track>,
    pub finished: Vec<Track>,
    pub next_id: u64,
    /// Index of the next frame to be processed.
    pub frame: usize,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tracks with at least `min_hits` matches, live or finished, by id.
    pub fn confirmed(&self, min_hits: usize) -> Vec<TrackRecord> {
        let mut out: Vec<TrackRecord> = self
            .active
            .iter()
            .chain(&self.finished)
            .filter(|t| t.hits >= min_hits)
            .map(Track::record)
            .collect();
        out.sort_by_key(|r| r.id);
        out
    }
}

fn recentre(bbox: BoundingBox, row: f64, col: f64) -> BoundingBox {
    let top = (row - (bbox.height as f64 - 1.0) / 2.0).round().max(0.0) as usize;
    let left = (col - (bbox.width as f64 - 1.0) / 2.0).round().max(0.0) as usize;
    BoundingBox { top, left, ..bbox }
}

/// Advances every track by one frame using `detections`.
pub fn step_tracks(tracks: &TrackSet, detections: &[Region], params: &TrackerParams) -> Result<TrackSet> {
    params.validate()?;
    let frame = tracks.frame;
    let mut predicted: Vec<Track> = tracks
        .active
        .iter()
        .map(|t| Track {
            kalman: t.kalman.predict(),
            age: t.age + 1,
            ..t.clone()
        })
        .collect();
    let cost: Vec<Vec<f64>> = predicted
        .iter()
        .map(|t| {
            let (pr, pc) = t.kalman.position();
            detections
                .iter()
                .map(|d| (d.centroid.0 - pr).hypot(d.centroid.1 - pc))
                .collect()
        })
        .collect();
    let matching = assign(&cost, detections.len(), params.gate_distance);

    for &(ti, di) in &matching.pairs {
        let det = &detections[di];
        let track = &mut predicted[ti];
        track.kalman = track.kalman.update(det.centroid)?;
        track.hits += 1;
        track.misses = 0;
        let (row, col) = track.kalman.position();
        track.history.push(TrackPoint {
            frame,
            row: Some(row),
            col: Some(col),
            bbox: det.bbox,
            matched: true,
        });
    }
    for &ti in &matching.unmatched_tracks {
        let track = &mut predicted[ti];
        track.misses += 1;
        let (row, col) = track.kalman.position();
        let bbox = recentre(track.last_bbox(), row, col);
        track.history.push(TrackPoint {
            frame,
            row: Some(row),
            col: Some(col),
            bbox,
            matched: false,
        });
    }

    let mut next = TrackSet {
        active: Vec::with_capacity(predicted.len() + matching.unmatched_detections.len()),
        finished: tracks.finished.clone(),
        next_id: tracks.next_id,
        frame: frame + 1,
    };
    for t in predicted {
        if t.misses > params.max_misses {
            next.finished.push(t);
        } else {
            next.active.push(t);
        }
    }
    for &di in &matching.unmatched_detections {
        let det = &detections[di];
        let (row, col) = det.centroid;
        next.active.push(Track {
            id: next.next_id,
            kalman: KalmanCA::new(row, col, params.q, params.r)?,
            age: 0,
            hits: 1,
            misses: 0,
            history: vec![TrackPoint {
                frame,
                row: Some(row),
                col: Some(col),
                bbox: det.bbox,
                matched: true,
            }],
        });
        next.next_id += 1;
    }
    Ok(next)
}

/// Runs the tracker over a whole sequence of per-frame detections.
pub fn track_sequence(frames: &[Vec<Region>], params: &TrackerParams) -> Result<TrackSet> {
    let mut set = TrackSet::new();
    for dets in frames {
        set = step_tracks(&set, dets, params)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(row: f64, col: f64) -> Region {
        Region {
            centroid: (row, col),
            bbox: BoundingBox {
                top: (row - 2.0).max(0.0) as usize,
                left: (col - 2.0).max(0.0) as usize,
                height: 5,
                width: 5,
            },
            area: 25,
        }
    }

    #[test]
    fn new_detections_spawn_tracks() {
        let set = step_tracks(&TrackSet::new(), &[region(5.0, 5.0), region(20.0, 30.0)], &TrackerParams::default()).unwrap();
        assert_eq!(set.active.len(), 2);
        assert_ne!(set.active[0].id, set.active[1].id);
        assert_eq!(set.next_id, 2);
    }

    #[test]
    fn nearby_detection_is_matched_and_pulls_state() {
        let p = TrackerParams::default();
        let set = step_tracks(&TrackSet::new(), &[region(10.0, 10.0)], &p).unwrap();
        let set = step_tracks(&set, &[region(11.0, 10.0)], &p).unwrap();
        assert_eq!(set.active.len(), 1);
        let t = &set.active[0];
        assert_eq!((t.hits, t.misses), (2, 0));
        let (r, c) = t.kalman.position();
        assert!(r > 10.0 && r <= 11.0, "{r}");
        assert!((c - 10.0).abs() < 1e-9);
    }

    #[test]
    fn unmatched_tracks_are_deleted_after_max_misses() {
        let p = TrackerParams {
            max_misses: 2,
            ..Default::default()
        };
        let mut set = step_tracks(&TrackSet::new(), &[region(10.0, 10.0)], &p).unwrap();
        for k in 1..=3 {
            set = step_tracks(&set, &[], &p).unwrap();
            assert_eq!(set.active.len(), if k <= 2 { 1 } else { 0 });
        }
        assert_eq!(set.finished.len(), 1);
        assert_eq!(set.finished[0].misses, 3);
    }

    #[test]
    fn ids_are_never_reused() {
        let p = TrackerParams {
            max_misses: 1,
            ..Default::default()
        };
        let mut set = TrackSet::new();
        let mut seen = std::collections::HashSet::new();
        for k in 0..12 {
            let dets = if k % 3 == 0 { vec![region(50.0 * (k % 2) as f64, 5.0)] } else { vec![] };
            set = step_tracks(&set, &dets, &p).unwrap();
            for t in &set.active {
                seen.insert(t.id);
            }
        }
        let all: Vec<u64> = set.active.iter().chain(&set.finished).map(|t| t.id).collect();
        let unique: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
        assert_eq!(seen.len() as u64, set.next_id);
    }

    #[test]
    fn deterministic() {
        let p = TrackerParams::default();
        let frames: Vec<Vec<Region>> = (0..10)
            .map(|t| vec![region(10.0 + t as f64, 20.0), region(40.0, 5.0 + 2.0 * t as f64)])
            .collect();
        assert_eq!(track_sequence(&frames, &p).unwrap(), track_sequence(&frames, &p).unwrap());
    }
}
