use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use turbtrack_core::detection::{BoundingBox, Region};
use turbtrack_core::tracking::kalman::{Covariance, State};
use turbtrack_core::tracking::{
    assign, kalman_predict, kalman_update, step_tracks, track_sequence, KalmanCA, TrackSet, TrackerParams,
};

fn region(row: f64, col: f64) -> Region {
    Region {
        centroid: (row, col),
        bbox: BoundingBox {
            top: (row - 3.0).max(0.0).round() as usize,
            left: (col - 3.0).max(0.0).round() as usize,
            height: 7,
            width: 7,
        },
        area: 37,
    }
}

/// Best gated matching by exhaustive search: most admissible pairs, then
/// least cost.
fn brute_force(cost: &[Vec<f64>], cols: usize, gate: f64) -> (usize, f64) {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, gate: f64, n: usize, c: f64, best: &mut (usize, f64)) {
        if row == cost.len() {
            if n > best.0 || (n == best.0 && c < best.1) {
                *best = (n, c);
            }
            return;
        }
        go(cost, row + 1, used, gate, n, c, best);
        for j in 0..used.len() {
            if !used[j] && cost[row][j] <= gate {
                used[j] = true;
                go(cost, row + 1, used, gate, n + 1, c + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    go(cost, 0, &mut vec![false; cols], gate, 0, 0.0, &mut best);
    best
}

#[test]
fn predict_moves_by_velocity() {
    let mut s = State::zeros();
    s[2] = 1.0;
    let k = KalmanCA::with_state(s, Covariance::identity(), 1e-2, 1.0);
    let p = kalman_predict(&k);
    assert_eq!(p.position(), (1.0, 0.0));
    assert_eq!(p.velocity(), (1.0, 0.0));
}

#[test]
fn update_at_predicted_position_keeps_state() {
    let mut s = State::zeros();
    s[0] = 4.0;
    s[1] = -2.0;
    s[3] = 0.5;
    let k = kalman_predict(&KalmanCA::with_state(s, Covariance::identity() * 3.0, 1e-2, 1.0));
    let u = kalman_update(&k, k.position()).unwrap();
    assert!((u.position().0 - k.position().0).abs() < 1e-12);
    assert!((u.position().1 - k.position().1).abs() < 1e-12);
    assert!(u.covariance_is_spd());
}

#[test]
fn follows_unit_acceleration() {
    let mut k = KalmanCA::new(0.0, 0.0, 1e-2, 1.0).unwrap();
    for t in 1..=20 {
        let p = (t * t) as f64 / 2.0;
        k = kalman_update(&kalman_predict(&k), (p, 0.0)).unwrap();
    }
    assert!((k.position().0 - 200.0).abs() < 0.5, "{:?}", k.position());
    assert!(k.position().1.abs() < 0.5);
}

#[test]
fn zero_measurement_noise_is_rejected() {
    assert!(KalmanCA::new(0.0, 0.0, 1e-2, 0.0).is_err());
    let k = KalmanCA::with_state(State::zeros(), Covariance::zeros(), 0.0, 0.0);
    assert!(kalman_update(&k, (1.0, 1.0)).is_err());
}

#[test]
fn assignment_examples() {
    let cost = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
    let a = assign(&cost, 2, 10.0);
    assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
    assert_eq!(a.total_cost(&cost), 2.0);

    let a = assign(&[vec![5.0]], 1, 3.0);
    assert!(a.pairs.is_empty());
    assert_eq!(a.unmatched_tracks, vec![0]);
    assert_eq!(a.unmatched_detections, vec![0]);

    let a = assign(&[], 3, 3.0);
    assert_eq!(a.unmatched_detections, vec![0, 1, 2]);
}

#[test]
fn step_examples() {
    let params = TrackerParams::default();
    let set = step_tracks(&TrackSet::new(), &[region(5.0, 5.0), region(40.0, 30.0)], &params).unwrap();
    assert_eq!(set.active.len(), 2);
    assert_ne!(set.active[0].id, set.active[1].id);

    let one = step_tracks(&TrackSet::new(), &[region(10.0, 10.0)], &params).unwrap();
    let next = step_tracks(&one, &[region(11.0, 10.0)], &params).unwrap();
    assert_eq!(next.active.len(), 1);
    let t = &next.active[0];
    assert_eq!((t.id, t.hits, t.misses), (one.active[0].id, 2, 0));
    let (r, c) = t.kalman.position();
    assert!(r > 10.0 && r <= 11.0, "{r}");
    assert!((c - 10.0).abs() < 1e-12);
}

#[test]
fn noisy_constant_velocity_object_is_one_track() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let frames: Vec<Vec<Region>> = (0..30)
        .map(|t| {
            let (r, c) = (20.0 + 2.0 * t as f64, 15.0 + 0.5 * t as f64);
            vec![region(r + noise.sample(&mut rng), c + noise.sample(&mut rng))]
        })
        .collect();
    let params = TrackerParams::default();
    let set = track_sequence(&frames, &params).unwrap();
    let confirmed = set.confirmed(params.min_hits);
    assert_eq!(confirmed.len(), 1);
    assert!(confirmed[0].frames.len() >= 27);
}

#[test]
fn covariance_stays_spd_over_many_cycles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut k = KalmanCA::new(50.0, 50.0, 1e-2, 1.0).unwrap();
    for _ in 0..1000 {
        k = kalman_predict(&k);
        assert!(k.covariance_is_spd());
        if rng.random_bool(0.8) {
            let z = (k.position().0 + rng.random_range(-3.0..3.0), k.position().1 + rng.random_range(-3.0..3.0));
            k = kalman_update(&k, z).unwrap();
            assert!(k.covariance_is_spd());
        }
    }
}

#[test]
fn ids_are_never_reused() {
    // Objects appear and vanish; every new track takes a fresh id.
    let mut frames = Vec::new();
    for t in 0..40usize {
        let mut dets = Vec::new();
        if t % 20 < 5 {
            dets.push(region(10.0 + t as f64, 10.0));
        }
        if t % 13 < 3 {
            dets.push(region(80.0, 80.0 - t as f64));
        }
        frames.push(dets);
    }
    let params = TrackerParams {
        max_misses: 2,
        ..TrackerParams::default()
    };
    let set = track_sequence(&frames, &params).unwrap();
    let mut ids: Vec<u64> = set.active.iter().chain(&set.finished).map(|t| t.id).collect();
    let n = ids.len();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), n);
    assert_eq!(set.next_id as usize, n);
}

fn cost_matrix() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (0usize..=6, 0usize..=6).prop_flat_map(|(r, c)| {
        (prop::collection::vec(prop::collection::vec(0.0f64..20.0, c), r), Just(c))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn assignment_is_a_valid_optimal_matching((cost, cols) in cost_matrix(), gate in 1.0f64..25.0) {
        let a = assign(&cost, cols, gate);
        let mut rows_seen = vec![false; cost.len()];
        let mut cols_seen = vec![false; cols];
        for &(t, d) in &a.pairs {
            prop_assert!(!rows_seen[t] && !cols_seen[d]);
            prop_assert!(cost[t][d] <= gate);
            rows_seen[t] = true;
            cols_seen[d] = true;
        }
        for &t in &a.unmatched_tracks {
            prop_assert!(!rows_seen[t]);
            rows_seen[t] = true;
        }
        for &d in &a.unmatched_detections {
            prop_assert!(!cols_seen[d]);
            cols_seen[d] = true;
        }
        prop_assert!(rows_seen.iter().all(|v| *v) && cols_seen.iter().all(|v| *v));
        let (n, best) = brute_force(&cost, cols, gate);
        prop_assert_eq!(a.pairs.len(), n);
        prop_assert!((a.total_cost(&cost) - best).abs() < 1e-9);
    }

    #[test]
    fn stepping_is_deterministic(pts in prop::collection::vec(prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 0..4), 1..8)) {
        let frames: Vec<Vec<Region>> = pts.iter().map(|f| f.iter().map(|&(r, c)| region(r, c)).collect()).collect();
        let a = track_sequence(&frames, &TrackerParams::default()).unwrap();
        let b = track_sequence(&frames, &TrackerParams::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}
