//! Clustering of encoded traces under Euclidean distance.
//!
//! Every algorithm reports the wall time of the call and a deterministic work
//! count (scalar distance-component operations), which can stand in for wall
//! time when rankings must be reproducible.

mod agglomerative;
mod dbscan;
mod kmeans;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::encoding::EncodedMatrix;
use crate::error::{Error, Result};

pub use agglomerative::{agglomerative, agglomerative_detailed, Merge};
pub use dbscan::dbscan;
pub use kmeans::{kmeans, kmeans_detailed, KMeansRun, KMEANS_MAX_ITER, KMEANS_RESTARTS, KMEANS_TOL};

pub const NOISE: i32 = -1;
pub const DBSCAN_MIN_SAMPLES: usize = 5;
pub const EPS_GRID: [f64; 10] = [0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0];
pub const K_GRID: [usize; 9] = [2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusteringConfig {
    Dbscan { eps: f64 },
    KMeans { k: usize },
    Agglomerative { k: usize },
}

impl ClusteringConfig {
    /// The 28 configurations of the evaluation grid, dbscan first.
    pub fn grid() -> Vec<ClusteringConfig> {
        EPS_GRID
            .iter()
            .map(|&eps| ClusteringConfig::Dbscan { eps })
            .chain(K_GRID.iter().map(|&k| ClusteringConfig::KMeans { k }))
            .chain(K_GRID.iter().map(|&k| ClusteringConfig::Agglomerative { k }))
            .collect()
    }

    pub fn algorithm(&self) -> &'static str {
        match self {
            ClusteringConfig::Dbscan { .. } => "dbscan",
            ClusteringConfig::KMeans { .. } => "kmeans",
            ClusteringConfig::Agglomerative { .. } => "agglomerative",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClusteringConfig::Dbscan { eps } if !(eps > 0.0 && eps.is_finite()) => {
                Err(Error::config(format!("eps must be positive, got {eps}")))
            }
            ClusteringConfig::KMeans { k } | ClusteringConfig::Agglomerative { k } if k < 1 => {
                Err(Error::config("k must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn run(&self, x: &EncodedMatrix, seed: u64) -> Result<ClusterAssignment> {
        self.validate()?;
        match *self {
            ClusteringConfig::Dbscan { eps } => Ok(dbscan(x, eps, DBSCAN_MIN_SAMPLES)),
            ClusteringConfig::KMeans { k } => kmeans(x, k, seed),
            ClusteringConfig::Agglomerative { k } => agglomerative(x, k),
        }
    }
}

impl fmt::Display for ClusteringConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusteringConfig::Dbscan { eps } => write!(f, "dbscan_eps{eps}"),
            ClusteringConfig::KMeans { k } => write!(f, "kmeans_k{k}"),
            ClusteringConfig::Agglomerative { k } => write!(f, "agglomerative_k{k}"),
        }
    }
}

impl FromStr for ClusteringConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("unknown clustering configuration '{s}'"));
        let parsed = if let Some(eps) = s.strip_prefix("dbscan_eps") {
            ClusteringConfig::Dbscan {
                eps: eps.parse().map_err(|_| bad())?,
            }
        } else if let Some(k) = s.strip_prefix("kmeans_k") {
            ClusteringConfig::KMeans {
                k: k.parse().map_err(|_| bad())?,
            }
        } else if let Some(k) = s.strip_prefix("agglomerative_k") {
            ClusteringConfig::Agglomerative {
                k: k.parse().map_err(|_| bad())?,
            }
        } else {
            return Err(bad());
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// One label per row; [`NOISE`] marks dbscan noise.
    pub labels: Vec<i32>,
    pub n_clusters: usize,
    /// Wall time of the clustering call in seconds.
    pub elapsed: f64,
    /// Deterministic operation count of the call.
    pub work: u64,
}

impl ClusterAssignment {
    /// Renumbers non-noise labels to `0..n` in order of first appearance.
    pub(crate) fn from_raw(raw: &[i64], elapsed: f64, work: u64) -> Self {
        let mut map: HashMap<i64, i32> = HashMap::new();
        let labels = raw
            .iter()
            .map(|&l| {
                if l < 0 {
                    NOISE
                } else {
                    let next = map.len() as i32;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        ClusterAssignment {
            labels,
            n_clusters: map.len(),
            elapsed: elapsed.max(1e-9),
            work,
        }
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trace_index", "label"])?;
        for (i, l) in self.labels.iter().enumerate() {
            w.write_record([i.to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Adjusted Rand index between two labelings (noise is an ordinary label here).
pub fn adjusted_rand_index(a: &[i32], b: &[i32]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut table: HashMap<(i32, i32), u64> = HashMap::new();
    let mut rows: HashMap<i32, u64> = HashMap::new();
    let mut cols: HashMap<i32, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if max_index == expected {
        // both partitions trivial in the same way
        return if index == expected { 1.0 } else { 0.0 };
    }
    (index - expected) / (max_index - expected)
}

/// True if the two labelings induce the same partition of the rows.
pub fn same_partition(a: &[i32], b: &[i32]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut ab: HashMap<i32, i32> = HashMap::new();
    let mut ba: HashMap<i32, i32> = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x
    })
}
