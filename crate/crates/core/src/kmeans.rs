//! K-Means clustering and capped per-cluster sampling for building a
//! topically diverse annotation pool.
//!
//! Lloyd's algorithm with k-means++ seeding. Distances are squared
//! Euclidean; on L2-normalized rows this orders pairs exactly like cosine
//! distance. A cluster that loses all its members is re-seeded with the
//! point farthest from its current centroid (taken from a cluster that has
//! more than one member).

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::rng::XorShift64Star;
use crate::taxonomy::FactRecord;

pub const DEFAULT_K: usize = 1000;
pub const DEFAULT_CAP: usize = 3;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KMeansError {
    #[error("k must be positive")]
    ZeroK,
    #[error("k = {k} exceeds the {n} available points")]
    KTooLarge { k: usize, n: usize },
    #[error("{facts} facts but {assignments} cluster assignments")]
    AlignmentError { facts: usize, assignments: usize },
    #[error("per-cluster cap must be positive")]
    ZeroCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub k: usize,
    pub dim: usize,
    /// `k × dim`, row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub inertia: f64,
    /// Inertia after every Lloyd iteration, ending with the final value.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansModel {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn plus_plus_init(points: &Points, k: usize, rng: &mut XorShift64Star) -> Vec<f64> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k * points.dim);
    let first = rng.index(n);
    centroids.extend_from_slice(points.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for _ in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` a hair below `target`; fall back to
            // the last point with positive weight.
            chosen.unwrap_or_else(|| closest.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            rng.index(n)
        };
        let row = points.row(pick);
        centroids.extend_from_slice(row);
        for (i, d) in closest.iter_mut().enumerate() {
            let nd = sq_dist(points.row(i), row);
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn cost(points: &Points, centroids: &[f64], assignments: &[usize]) -> f64 {
    let dim = points.dim;
    assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points.row(i), &centroids[c * dim..(c + 1) * dim]))
        .sum()
}

/// Fits `k` clusters to the rows of `m`. Deterministic for a given seed.
pub fn kmeans_fit(
    m: &EmbeddingMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansModel, KMeansError> {
    if k == 0 {
        return Err(KMeansError::ZeroK);
    }
    let n = m.rows();
    if k > n {
        return Err(KMeansError::KTooLarge { k, n });
    }
    let dim = m.dim();
    let points = Points {
        dim,
        data: m.data().iter().map(|&v| f64::from(v)).collect(),
    };
    let mut rng = XorShift64Star::new(seed);
    let mut centroids = plus_plus_init(&points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut distances = vec![0.0f64; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let previous = centroids.clone();
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centroids, dim);
            assignments[i] = c;
            distances[i] = d;
        }

        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| sizes[assignments[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if distances[b] >= distances[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = donor {
                sizes[assignments[i]] -= 1;
                sizes[c] = 1;
                assignments[i] = c;
                distances[i] = 0.0;
                centroids[c * dim..(c + 1) * dim].copy_from_slice(points.row(i));
            }
        }

        let mut sums = vec![0.0f64; k * dim];
        for (i, &c) in assignments.iter().enumerate() {
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut movement = 0.0f64;
        for c in 0..k {
            if sizes[c] == 0 {
                continue;
            }
            let inv = 1.0 / sizes[c] as f64;
            for (slot, s) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                *slot = s * inv;
            }
        }
        for (new, old) in centroids.chunks_exact(dim).zip(previous.chunks_exact(dim)) {
            movement = movement.max(libm::sqrt(sq_dist(new, old)));
        }
        history.push(cost(&points, &centroids, &assignments));
        if movement < tol {
            converged = true;
            break;
        }
    }

    // Final assignment step so every point sits with its nearest centroid.
    for (i, a) in assignments.iter_mut().enumerate() {
        let (c, d) = nearest(points.row(i), &centroids, dim);
        if d < sq_dist(points.row(i), &centroids[*a * dim..(*a + 1) * dim]) {
            *a = c;
        }
    }
    let inertia = cost(&points, &centroids, &assignments);
    history.push(inertia);

    Ok(KMeansModel {
        k,
        dim,
        centroids,
        assignments,
        inertia,
        inertia_history: history,
        iterations,
        converged,
    })
}

/// Picks up to `cap` facts per cluster by seeded sampling without
/// replacement. Output is ordered by cluster index, then original position.
pub fn cluster_sample(
    facts: &[FactRecord],
    model: &KMeansModel,
    cap: usize,
    seed: u64,
) -> Result<Vec<FactRecord>, KMeansError> {
    if facts.len() != model.assignments.len() {
        return Err(KMeansError::AlignmentError {
            facts: facts.len(),
            assignments: model.assignments.len(),
        });
    }
    if cap == 0 {
        return Err(KMeansError::ZeroCap);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); model.k];
    for (i, &c) in model.assignments.iter().enumerate() {
        members[c].push(i);
    }
    let mut rng = XorShift64Star::new(seed);
    let mut out = Vec::new();
    for mut cluster in members {
        let take = cap.min(cluster.len());
        for i in 0..take {
            let j = i + rng.index(cluster.len() - i);
            cluster.swap(i, j);
        }
        let mut chosen = cluster[..take].to_vec();
        chosen.sort_unstable();
        out.extend(chosen.into_iter().map(|i| facts[i].clone()));
    }
    Ok(out)
}
