//! The system under test: seeded k-means clustering of detections and the
//! centroid-distance metric comparing simulated against reference runs.

use serde::{Deserialize, Serialize};

use crate::radar::DetectionSet;
use crate::rng::{stream, CounterRng};
use crate::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Output of one k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub centroids: Vec<(f64, f64)>,
    /// Point index -> cluster index.
    pub assignment: Vec<usize>,
    /// Total within-cluster sum of squares.
    pub inertia: f64,
}

/// Per-run evaluation: per-frame centroid distances and their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub per_frame_distance: Vec<f64>,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Frames dropped because either side had fewer than k detections.
    pub skipped_frames: usize,
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    dx * dx + dy * dy
}

fn count_distinct(points: &[(f64, f64)]) -> usize {
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    distinct.len()
}

/// k-means++ style seeded initialization: first center uniform, each
/// further center drawn proportionally to squared distance from the
/// nearest chosen center.
fn init_centroids(points: &[(f64, f64)], k: usize, rng: &mut CounterRng) -> Vec<(f64, f64)> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.index(points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|&p| sq_dist(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // remaining mass zero: pick any point not yet a centroid
            points
                .iter()
                .position(|p| !centroids.contains(p))
                .unwrap_or(0)
        } else {
            let mut target = rng.uniform() * total;
            let mut idx = 0;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                idx = i;
                if target <= 0.0 {
                    break;
                }
            }
            idx
        };
        let c = points[next];
        centroids.push(c);
        for (i, &p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, c));
        }
    }
    centroids
}

/// Restarts per call; the best final inertia wins. Keeps small instances
/// near the global optimum while staying fully deterministic.
const N_INIT: usize = 10;

/// Lloyd's algorithm with seeded k-means++ initialization and `N_INIT`
/// deterministic restarts; the run with the lowest final inertia is
/// returned. Iterates until the largest centroid shift is below `tol` or
/// `max_iter` is reached. Inertia is non-increasing across iterations.
pub fn kmeans(
    points: &[(f64, f64)],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterResult> {
    if points.is_empty() {
        return Err(Error::validation("kmeans needs at least one point"));
    }
    if k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if count_distinct(points) < k {
        return Err(Error::validation(format!(
            "k = {k} exceeds the number of distinct points ({})",
            count_distinct(points)
        )));
    }
    let mut best: Option<ClusterResult> = None;
    for init in 0..N_INIT {
        let run = lloyd(points, k, seed, init as u64, max_iter, tol);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn lloyd(
    points: &[(f64, f64)],
    k: usize,
    seed: u64,
    init: u64,
    max_iter: usize,
    tol: f64,
) -> ClusterResult {
    let mut rng = CounterRng::new(&[stream::KMEANS, seed, init]);
    let mut centroids = init_centroids(points, k, &mut rng);
    let mut assignment = vec![0usize; points.len()];
    let mut inertia = f64::INFINITY;

    for _ in 0..max_iter {
        // assignment step
        let mut new_inertia = 0.0;
        for (i, &p) in points.iter().enumerate() {
            let (best, best_d2) = centroids
                .iter()
                .enumerate()
                .map(|(c, &ctr)| (c, sq_dist(p, ctr)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assignment[i] = best;
            new_inertia += best_d2;
        }
        debug_assert!(
            new_inertia <= inertia + 1e-9,
            "Lloyd inertia increased: {new_inertia} > {inertia}"
        );
        inertia = new_inertia;

        // update step
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (i, &p) in points.iter().enumerate() {
            let s = &mut sums[assignment[i]];
            s.0 += p.0;
            s.1 += p.1;
            s.2 += 1;
        }
        let mut shift: f64 = 0.0;
        for (c, &(sx, sy, n)) in sums.iter().enumerate() {
            if n == 0 {
                // empty cluster: reseed at the point farthest from its centroid
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|a, b| {
                        sq_dist(*a.1, centroids[assignment[a.0]])
                            .partial_cmp(&sq_dist(*b.1, centroids[assignment[b.0]]))
                            .unwrap()
                    })
                    .map(|(_, &p)| p)
                    .unwrap();
                shift = shift.max(sq_dist(centroids[c], far).sqrt());
                centroids[c] = far;
                continue;
            }
            let next = (sx / n as f64, sy / n as f64);
            shift = shift.max(sq_dist(centroids[c], next).sqrt());
            centroids[c] = next;
        }
        if shift < tol {
            break;
        }
    }

    // final assignment against the converged centroids
    let mut final_inertia = 0.0;
    for (i, &p) in points.iter().enumerate() {
        let (best, best_d2) = centroids
            .iter()
            .enumerate()
            .map(|(c, &ctr)| (c, sq_dist(p, ctr)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assignment[i] = best;
        final_inertia += best_d2;
    }

    ClusterResult {
        centroids,
        assignment,
        inertia: final_inertia,
    }
}

/// Minimum-cost perfect assignment (Jonker-Volgenant style shortest
/// augmenting paths) for a square cost matrix; returns row -> column.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_of = vec![0usize; n + 1]; // column -> assigned row (1-based)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
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
            for j in 0..=n {
                if used[j] {
                    u[col_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_of[j0] = col_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0usize; n];
    for j in 1..=n {
        result[col_of[j] - 1] = j - 1;
    }
    result
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..n {
            let mut p: Vec<usize> = perm.iter().map(|&x| if x >= pos { x + 1 } else { x }).collect();
            p.insert(0, pos);
            out.push(p);
        }
    }
    out
}

/// Mean euclidean distance under the minimum-cost matching of the two
/// centroid sets. Cluster labels are arbitrary, so index order is ignored.
pub fn match_and_distance(sim: &ClusterResult, ref_: &ClusterResult) -> Result<f64> {
    let k = sim.centroids.len();
    if k != ref_.centroids.len() {
        return Err(Error::validation(format!(
            "cluster count mismatch: {k} vs {}",
            ref_.centroids.len()
        )));
    }
    let dist = |i: usize, j: usize| sq_dist(sim.centroids[i], ref_.centroids[j]).sqrt();
    let total = if k <= 6 {
        permutations(k)
            .iter()
            .map(|p| (0..k).map(|i| dist(i, p[i])).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    } else {
        let cost: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| dist(i, j)).collect())
            .collect();
        let assign = min_cost_assignment(&cost);
        (0..k).map(|i| dist(i, assign[i])).sum()
    };
    Ok(total / k as f64)
}

/// Cluster both detection streams frame by frame and summarize the
/// matched centroid distances. Frames where either side has fewer than k
/// detections (or fewer than k distinct positions) are skipped and
/// counted.
pub fn evaluate_run(
    sim_frames: &[DetectionSet],
    ref_frames: &[DetectionSet],
    k: usize,
    seed: u64,
    dt: f64,
) -> Result<EvalSummary> {
    if sim_frames.len() != ref_frames.len() {
        return Err(Error::validation(format!(
            "frame count mismatch: {} simulated vs {} reference",
            sim_frames.len(),
            ref_frames.len()
        )));
    }
    let mut distances = Vec::new();
    let mut skipped = 0usize;
    for (idx, (sim, rf)) in sim_frames.iter().zip(ref_frames).enumerate() {
        if (sim.frame_t - rf.frame_t).abs() > dt / 2.0 {
            return Err(Error::validation(format!(
                "frame {idx} not time-aligned: {} vs {}",
                sim.frame_t, rf.frame_t
            )));
        }
        let sim_pts: Vec<(f64, f64)> = sim.detections.iter().map(|d| (d.x, d.y)).collect();
        let ref_pts: Vec<(f64, f64)> = rf.detections.iter().map(|d| (d.x, d.y)).collect();
        if count_distinct(&sim_pts) < k || count_distinct(&ref_pts) < k {
            skipped += 1;
            continue;
        }
        let sim_clusters = kmeans(&sim_pts, k, crate::rng::key(&[seed, idx as u64, 0]), DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        let ref_clusters = kmeans(&ref_pts, k, crate::rng::key(&[seed, idx as u64, 1]), DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        distances.push(match_and_distance(&sim_clusters, &ref_clusters)?);
    }
    if distances.is_empty() {
        return Err(Error::Evaluation(format!(
            "no frame retained a metric ({skipped} skipped)"
        )));
    }
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(EvalSummary {
        per_frame_distance: distances,
        min,
        mean,
        max,
        skipped_frames: skipped,
    })
}
