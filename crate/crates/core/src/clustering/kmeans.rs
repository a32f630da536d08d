use rand::seq::index::sample;

use super::{ClusterAssignment, Stopwatch};
use crate::encoding::{squared_distance, EncodedMatrix};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;

/// Diagnostics of the restart that produced the returned assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub wcss: f64,
    pub iterations: usize,
    /// Within-cluster sum of squares after each centroid update.
    pub wcss_history: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
}

/// Lloyd's k-means, best of [`KMEANS_RESTARTS`] random initializations.
pub fn kmeans(x: &EncodedMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans_detailed(x, k, seed).map(|(a, _)| a)
}

pub fn kmeans_detailed(x: &EncodedMatrix, k: usize, seed: u64) -> Result<(ClusterAssignment, KMeansRun)> {
    let n = x.n_rows();
    if k == 0 || k > n {
        return Err(Error::config(format!("kmeans needs 1 <= k <= {n}, got k = {k}")));
    }
    let watch = Stopwatch::start();
    let mut work = 0u64;
    let mut best: Option<(Vec<usize>, KMeansRun)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = rng_for(seed, restart as u64);
        let init: Vec<Vec<f64>> = sample(&mut rng, n, k)
            .into_iter()
            .map(|i| x.row(i).to_vec())
            .collect();
        let (labels, run) = lloyd(x, init, &mut work);
        if best.as_ref().is_none_or(|(_, b)| run.wcss < b.wcss) {
            best = Some((labels, run));
        }
    }
    let (labels, run) = best.expect("at least one restart");
    let raw: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
    Ok((ClusterAssignment::from_raw(&raw, watch.seconds(), work), run))
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn wcss(x: &EncodedMatrix, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(x.row(i), &centroids[c]))
        .sum()
}

fn lloyd(x: &EncodedMatrix, mut centroids: Vec<Vec<f64>>, work: &mut u64) -> (Vec<usize>, KMeansRun) {
    let n = x.n_rows();
    let d = x.n_cols();
    let k = centroids.len();
    let mut labels = vec![0usize; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, dist) = nearest(x.row(i), &centroids);
            labels[i] = c;
            dists[i] = dist;
        }
        *work += (n * k * d) as u64;

        // An empty cluster takes over the point farthest from its centroid.
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                sizes[labels[i]] -= 1;
                labels[i] = c;
                sizes[c] = 1;
                dists[i] = 0.0;
            }
        }

        let mut next = vec![vec![0.0; d]; k];
        for (i, &l) in labels.iter().enumerate() {
            for (acc, v) in next[l].iter_mut().zip(x.row(i)) {
                *acc += v;
            }
        }
        for (c, centroid) in next.iter_mut().enumerate() {
            if sizes[c] == 0 {
                centroid.clone_from(&centroids[c]);
            } else {
                centroid.iter_mut().for_each(|v| *v /= sizes[c] as f64);
            }
        }
        *work += (n * d) as u64;

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        history.push(wcss(x, &labels, &centroids));
        if shift < KMEANS_TOL {
            break;
        }
    }

    // final assignment against the converged centroids
    for i in 0..n {
        labels[i] = nearest(x.row(i), &centroids).0;
    }
    *work += (n * k * d) as u64;
    let total = wcss(x, &labels, &centroids);
    (
        labels,
        KMeansRun {
            wcss: total,
            iterations,
            wcss_history: history,
            centroids,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::adjusted_rand_index;
    use crate::clustering::testutil::blobs;

    #[test]
    fn k_equals_n_gives_singletons() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let x = EncodedMatrix::from_rows(&rows).unwrap();
        let (a, run) = kmeans_detailed(&x, 6, 3).unwrap();
        assert_eq!(a.n_clusters, 6);
        assert_eq!(run.wcss, 0.0);
    }

    #[test]
    fn recovers_three_blobs() {
        let (rows, truth) = blobs(&[[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]], 40, 0.1, 8);
        let x = EncodedMatrix::from_rows(&rows).unwrap();
        let a = kmeans(&x, 3, 42).unwrap();
        assert_eq!(adjusted_rand_index(&a.labels, &truth), 1.0);
    }

    #[test]
    fn identical_rows() {
        let x = EncodedMatrix::from_rows(&vec![vec![2.0, 2.0]; 8]).unwrap();
        let (a, run) = kmeans_detailed(&x, 2, 5).unwrap();
        assert_eq!(run.wcss, 0.0);
        let (b, _) = kmeans_detailed(&x, 2, 5).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn k_larger_than_n_is_config_error() {
        let x = EncodedMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(kmeans(&x, 3, 0), Err(Error::Config(_))));
    }

    #[test]
    fn wcss_never_increases() {
        for seed in 0..20 {
            let (rows, _) = blobs(&[[0.0, 0.0], [1.0, 0.5], [0.3, 2.0], [2.0, 2.0]], 25, 0.7, seed);
            let x = EncodedMatrix::from_rows(&rows).unwrap();
            let (_, run) = kmeans_detailed(&x, 5, seed).unwrap();
            for w in run.wcss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", run.wcss_history);
            }
            assert!(run.wcss <= run.wcss_history.last().unwrap() + 1e-9);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let (rows, _) = blobs(&[[0.0, 0.0], [1.0, 1.0]], 30, 0.8, 1);
        let x = EncodedMatrix::from_rows(&rows).unwrap();
        let a = kmeans(&x, 4, 77).unwrap();
        let b = kmeans(&x, 4, 77).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.work, b.work);
    }
}
