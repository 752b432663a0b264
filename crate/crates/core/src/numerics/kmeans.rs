//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::DenseMatrix;
use crate::error::{invalid, Result};
use crate::graph::Partition;

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub partition: Partition,
    pub centroids: DenseMatrix,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
}

/// Clusters the rows of `points` into `k` groups.
///
/// Deterministic for a fixed seed. Iteration stops at an assignment fixpoint
/// or after `max_iters` assignment steps. A centroid that loses all its points
/// is moved onto the point farthest from its current centroid.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 {
        return invalid("k-means needs k >= 1");
    }
    if k > n {
        return invalid(format!("k-means with k = {k} > n = {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let (best, d) = nearest(points.row(i), &centroids);
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
            dist[i] = d;
            inertia += d;
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        update_centroids(points, &assignment, &mut centroids, &dist);
    }

    let inertia = *trace.last().unwrap_or(&0.0);
    Ok(KMeansResult {
        partition: Partition::from_labels(&assignment),
        centroids,
        inertia,
        iterations,
        inertia_trace: trace,
    })
}

/// Runs [`kmeans`] `restarts` times with seeds derived from `seed` and keeps
/// the lowest-inertia result (earliest restart wins ties).
pub fn kmeans_restarts(
    points: &DenseMatrix,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iters: usize,
) -> Result<KMeansResult> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = kmeans(points, k, seeder.random(), max_iters)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.rows() {
        let d = sq_dist(p, centroids.row(c));
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

fn seed_plus_plus(points: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            while d2[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            pick
        } else {
            // every remaining point coincides with a centre
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(points.row(i), points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

fn update_centroids(points: &DenseMatrix, assignment: &[usize], centroids: &mut DenseMatrix, dist: &[f64]) {
    let k = centroids.rows();
    let d = points.cols();
    let mut sums = DenseMatrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, &x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    let mut taken = vec![false; points.rows()];
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s * inv;
            }
        } else {
            let far = (0..points.rows())
                .filter(|&i| !taken[i])
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                taken[i] = true;
                centroids.row_mut(c).copy_from_slice(points.row(i));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_separated_pairs() {
        let pts = DenseMatrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]]).unwrap();
        let r = kmeans(&pts, 2, 3, 100).unwrap();
        let a = r.partition.assignment();
        assert_eq!(a[0], a[1]);
        assert_eq!(a[2], a[3]);
        assert_ne!(a[0], a[2]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let pts = DenseMatrix::from_rows(&[[0.0], [1.0], [5.0], [9.0]]).unwrap();
        let r = kmeans(&pts, 4, 0, 50).unwrap();
        assert_eq!(r.partition.num_clusters(), 4);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn k_above_n_is_rejected() {
        let pts = DenseMatrix::zeros(2, 2);
        assert!(kmeans(&pts, 3, 0, 10).is_err());
    }

    #[test]
    fn inertia_never_increases() {
        let pts = DenseMatrix::from_fn(60, 2, |i, j| ((i * 7 + j * 13) % 17) as f64 + 0.1 * i as f64);
        for seed in 0..10 {
            let r = kmeans(&pts, 5, seed, 100).unwrap();
            for w in r.inertia_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", r.inertia_trace);
            }
        }
    }

    #[test]
    fn duplicate_points_do_not_panic() {
        let pts = DenseMatrix::from_rows(&[[1.0], [1.0], [1.0], [2.0]]).unwrap();
        let r = kmeans(&pts, 3, 1, 20).unwrap();
        assert!(r.partition.num_clusters() <= 3);
        assert_eq!(r.inertia, 0.0);
    }
}
