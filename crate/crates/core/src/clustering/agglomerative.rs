use super::{ClusterAssignment, Stopwatch};
use crate::encoding::{squared_distance, EncodedMatrix};
use crate::error::{Error, Result};

/// One merge of the Ward dendrogram: cluster `absorbed` joins cluster `kept`
/// (slot indices; the merged cluster keeps the smaller index).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub kept: usize,
    pub absorbed: usize,
    /// Ward merge cost on squared Euclidean distances.
    pub cost: f64,
}

/// Bottom-up Ward clustering down to `k` clusters.
pub fn agglomerative(x: &EncodedMatrix, k: usize) -> Result<ClusterAssignment> {
    agglomerative_detailed(x, k).map(|(a, _)| a)
}

/// Like [`agglomerative`], also returning the merge sequence. Among equal
/// merge costs the pair with the smallest (lower, higher) slot indices wins.
pub fn agglomerative_detailed(x: &EncodedMatrix, k: usize) -> Result<(ClusterAssignment, Vec<Merge>)> {
    let n = x.n_rows();
    if k == 0 || k > n {
        return Err(Error::config(format!(
            "agglomerative clustering needs 1 <= k <= {n}, got k = {k}"
        )));
    }
    let watch = Stopwatch::start();
    let d = x.n_cols() as u64;
    let mut work = 0u64;

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = squared_distance(x.row(i), x.row(j));
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    work += (n as u64 * n.saturating_sub(1) as u64 / 2) * d;

    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut parent: Vec<usize> = (0..n).collect();

    let nearest_of = |i: usize, active: &[bool], dist: &[f64]| -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if j != i && active[j] && dist[i * n + j] < best.0 {
                best = (dist[i * n + j], j);
            }
        }
        best
    };
    let mut nn: Vec<(f64, usize)> = (0..n).map(|i| nearest_of(i, &active, &dist)).collect();
    work += (n * n) as u64;

    let mut merges = Vec::with_capacity(n - k);
    let mut remaining = n;
    while remaining > k {
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            let (c, j) = nn[i];
            let cand = (c, i.min(j), i.max(j));
            let better = match pick {
                None => true,
                Some(p) => cand.0 < p.0 || (cand.0 == p.0 && (cand.1, cand.2) < (p.1, p.2)),
            };
            if better {
                pick = Some(cand);
            }
        }
        let (cost, a, b) = pick.expect("at least two active clusters");

        // Lance-Williams update for Ward linkage
        let (na, nb) = (size[a] as f64, size[b] as f64);
        let dab = dist[a * n + b];
        for m in (0..n).filter(|&m| active[m] && m != a && m != b) {
            let nm = size[m] as f64;
            let v = ((na + nm) * dist[a * n + m] + (nb + nm) * dist[b * n + m] - nm * dab) / (na + nb + nm);
            dist[a * n + m] = v;
            dist[m * n + a] = v;
        }
        work += n as u64;
        active[b] = false;
        size[a] += size[b];
        parent[b] = a;
        merges.push(Merge {
            kept: a,
            absorbed: b,
            cost,
        });
        remaining -= 1;

        nn[a] = nearest_of(a, &active, &dist);
        work += n as u64;
        for m in (0..n).filter(|&m| active[m] && m != a) {
            if nn[m].1 == a || nn[m].1 == b {
                nn[m] = nearest_of(m, &active, &dist);
                work += n as u64;
            } else {
                let v = dist[m * n + a];
                if v < nn[m].0 || (v == nn[m].0 && a < nn[m].1) {
                    nn[m] = (v, a);
                }
            }
        }
    }

    let root = |mut i: usize| {
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    let raw: Vec<i64> = (0..n).map(|i| root(i) as i64).collect();
    Ok((ClusterAssignment::from_raw(&raw, watch.seconds(), work), merges))
}
