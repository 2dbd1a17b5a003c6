//! Minimum-cost one-to-one assignment (Hungarian method with potentials).

/// Optimal assignment of every row of a rectangular cost matrix with
/// `rows <= cols`. Returns the column for each row.
fn solve_wide(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let n = cost.len();
    let m = cols;
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Minimum-cost assignment covering `min(rows, cols)` pairs, as
/// `(row, col)` sorted by row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows <= cols {
        solve_wide(cost, cols).into_iter().enumerate().collect()
    } else {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| cost[r][c]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = solve_wide(&transposed, rows)
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        pairs
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    /// `(track, detection)` pairs sorted by track.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, cost: &[Vec<f64>]) -> f64 {
        self.pairs.iter().map(|&(t, d)| cost[t][d]).sum()
    }
}

/// Gated assignment: among matchings that use only pairs with cost `<= gate`,
/// the one with the most pairs and, among those, the least total cost.
/// `cost` is `tracks x detections`; `detections` gives the column count
/// when there are no rows.
pub fn assign(cost: &[Vec<f64>], detections: usize, gate: f64) -> Assignment {
    let rows = cost.len();
    let cols = detections;
    debug_assert!(cost.iter().all(|r| r.len() == cols));
    let allowed = |c: f64| c <= gate;
    let pairs = if rows == 0 || cols == 0 {
        Vec::new()
    } else {
        // Any matching with one more admissible pair is cheaper than every
        // matching without it.
        let penalty = gate.max(0.0) * (rows.min(cols) + 1) as f64 + 1.0;
        let padded: Vec<Vec<f64>> = cost
            .iter()
            .map(|row| row.iter().map(|&c| if allowed(c) { c } else { penalty }).collect())
            .collect();
        hungarian(&padded)
            .into_iter()
            .filter(|&(r, c)| allowed(cost[r][c]))
            .collect::<Vec<_>>()
    };
    let mut track_used = vec![false; rows];
    let mut det_used = vec![false; cols];
    for &(t, d) in &pairs {
        track_used[t] = true;
        det_used[d] = true;
    }
    Assignment {
        unmatched_tracks: (0..rows).filter(|t| !track_used[*t]).collect(),
        unmatched_detections: (0..cols).filter(|d| !det_used[*d]).collect(),
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_example() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let a = assign(&cost, cost[0].len(), 10.0);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost(&cost), 2.0);
        assert!(a.unmatched_tracks.is_empty() && a.unmatched_detections.is_empty());
    }

    #[test]
    fn gate_rejects_far_pair() {
        let a = assign(&[vec![5.0]], 1, 3.0);
        assert!(a.pairs.is_empty());
        assert_eq!(a.unmatched_tracks, vec![0]);
        assert_eq!(a.unmatched_detections, vec![0]);
    }

    #[test]
    fn empty_inputs() {
        let a = assign(&[], 0, 1.0);
        assert_eq!(a, Assignment::default());
        let a = assign(&[], 2, 1.0);
        assert_eq!(a.unmatched_detections, vec![0, 1]);
        let a = assign(&[vec![], vec![]], 0, 1.0);
        assert_eq!(a.unmatched_tracks, vec![0, 1]);
    }

    #[test]
    fn tall_matrix() {
        let cost = vec![vec![4.0], vec![1.0], vec![3.0]];
        let a = assign(&cost, cost[0].len(), 10.0);
        assert_eq!(a.pairs, vec![(1, 0)]);
        assert_eq!(a.unmatched_tracks, vec![0, 2]);
    }

    #[test]
    fn gating_prefers_more_pairs() {
        // Without gating (0,0)+(1,1) = 2.0 + 9.0; with gate 5 only (0,1),(1,0) fit.
        let cost = vec![vec![2.0, 4.0], vec![3.0, 9.0]];
        let a = assign(&cost, cost[0].len(), 5.0);
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
    }
}
