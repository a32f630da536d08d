use std::collections::VecDeque;

use super::{ClusterAssignment, Stopwatch};
use crate::encoding::{distance, EncodedMatrix};

const UNVISITED: i64 = -2;
const NOISE: i64 = -1;

/// Density-based clustering. A point is core when at least `min_samples`
/// points (itself included) lie within `eps`; clusters are expanded from
/// core points in row order, and unreachable points are noise.
pub fn dbscan(x: &EncodedMatrix, eps: f64, min_samples: usize) -> ClusterAssignment {
    let watch = Stopwatch::start();
    let n = x.n_rows();
    let d = x.n_cols() as u64;

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        neighbors[i].push(i);
        for j in i + 1..n {
            if distance(x.row(i), x.row(j)) <= eps {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }
    let work = (n as u64 * n.saturating_sub(1) as u64 / 2) * d;

    let mut labels = vec![UNVISITED; n];
    let mut cluster = 0i64;
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        if neighbors[i].len() < min_samples {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster;
        let mut queue: VecDeque<usize> = neighbors[i].iter().copied().collect();
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = cluster;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            if neighbors[j].len() >= min_samples {
                queue.extend(neighbors[j].iter().copied());
            }
        }
        cluster += 1;
    }
    ClusterAssignment::from_raw(&labels, watch.seconds(), work)
}
