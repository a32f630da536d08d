//! Pipeline quality metrics (silhouette, variant score, time) and the
//! aggregation of per-metric ranks into a final rank.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::index::sample;

use crate::clustering::{ClusterAssignment, ClusteringConfig};
use crate::encoding::{distance, EncodedMatrix, Encoding};
use crate::error::{Error, Result};
use crate::features::format_float;
use crate::log::EventLog;
use crate::seed::rng_for;

pub const METRICS_SCHEMA_VERSION: &str = "clustersel.metrics/1";
/// Silhouette is computed on a seeded subsample above this many rows.
pub const SILHOUETTE_MAX_SAMPLES: usize = 2000;

/// An ⟨encoding, clustering, hyperparameter⟩ triple, e.g. `onehot_kmeans_k3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineId {
    pub encoding: Encoding,
    pub clustering: ClusteringConfig,
}

impl PipelineId {
    pub fn new(encoding: Encoding, clustering: ClusteringConfig) -> Self {
        PipelineId { encoding, clustering }
    }

    /// All 112 pipelines, grouped by encoding.
    pub fn grid() -> Vec<PipelineId> {
        Encoding::ALL
            .iter()
            .flat_map(|&e| ClusteringConfig::grid().into_iter().map(move |c| PipelineId::new(e, c)))
            .collect()
    }
}

impl fmt::Display for PipelineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.encoding, self.clustering)
    }
}

impl FromStr for PipelineId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        for e in Encoding::ALL {
            if let Some(rest) = s.strip_prefix(e.as_str()).and_then(|r| r.strip_prefix('_')) {
                return Ok(PipelineId::new(e, rest.parse()?));
            }
        }
        Err(Error::Invalid(format!("unknown pipeline '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTriple {
    /// Silhouette, higher is better.
    pub s: f64,
    /// Variant score, lower is better.
    pub v: f64,
    /// Clustering time in seconds, lower is better.
    pub t: f64,
}

/// Pairwise Euclidean distances over a (possibly subsampled) set of rows.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    /// Rows of the source matrix the distances refer to, ascending.
    pub rows: Vec<usize>,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn full(x: &EncodedMatrix) -> Self {
        Self::over(x, (0..x.n_rows()).collect())
    }

    /// Uses every row when `N <= SILHOUETTE_MAX_SAMPLES`, otherwise a seeded
    /// uniform subsample of that size.
    pub fn sampled(x: &EncodedMatrix, seed: u64) -> Self {
        let n = x.n_rows();
        if n <= SILHOUETTE_MAX_SAMPLES {
            return Self::full(x);
        }
        let mut rows = sample(&mut rng_for(seed, 0), n, SILHOUETTE_MAX_SAMPLES).into_vec();
        rows.sort_unstable();
        Self::over(x, rows)
    }

    fn over(x: &EncodedMatrix, rows: Vec<usize>) -> Self {
        let m = rows.len();
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            for j in i + 1..m {
                let v = distance(x.row(rows[i]), x.row(rows[j]));
                d[i * m + j] = v;
                d[j * m + i] = v;
            }
        }
        DistanceMatrix { rows, d }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.rows.len() + j]
    }
}

/// Mean silhouette of the clustering under Euclidean distance.
///
/// Noise is one more cluster. Samples alone in their cluster score 0, as do
/// samples with `a = b = 0`; with fewer than two clusters the result is -1.
pub fn silhouette(x: &EncodedMatrix, assignment: &ClusterAssignment) -> f64 {
    silhouette_seeded(x, assignment, 0)
}

pub fn silhouette_seeded(x: &EncodedMatrix, assignment: &ClusterAssignment, seed: u64) -> f64 {
    silhouette_from_distances(&DistanceMatrix::sampled(x, seed), &assignment.labels)
}

/// Silhouette over the rows covered by `dm`; `labels` indexes source rows.
pub fn silhouette_from_distances(dm: &DistanceMatrix, labels: &[i32]) -> f64 {
    let m = dm.len();
    let mut ids: HashMap<i32, usize> = HashMap::new();
    let local: Vec<usize> = dm
        .rows
        .iter()
        .map(|&r| {
            let next = ids.len();
            *ids.entry(labels[r]).or_insert(next)
        })
        .collect();
    let n_clusters = ids.len();
    if n_clusters < 2 {
        return -1.0;
    }
    let mut sizes = vec![0usize; n_clusters];
    for &c in &local {
        sizes[c] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; n_clusters];
    for i in 0..m {
        let own = local[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..m {
            sums[local[j]] += dm.get(i, j);
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_clusters)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / m as f64
}

/// Σ over clusters of (#variants in cluster − 1), divided by #traces.
/// Noise traces count as singleton clusters and add nothing.
pub fn variant_score(log: &EventLog, assignment: &ClusterAssignment) -> Result<f64> {
    variant_score_labels(log, &assignment.labels)
}

pub fn variant_score_labels(log: &EventLog, labels: &[i32]) -> Result<f64> {
    if labels.len() != log.len() {
        return Err(Error::DimensionMismatch {
            expected: log.len(),
            found: labels.len(),
        });
    }
    let mut per_cluster: HashMap<i32, HashSet<Vec<&str>>> = HashMap::new();
    for (trace, &l) in log.traces().iter().zip(labels) {
        if l >= 0 {
            per_cluster.entry(l).or_default().insert(trace.activities().collect());
        }
    }
    let excess: usize = per_cluster.values().map(|v| v.len() - 1).sum();
    Ok(excess as f64 / log.len() as f64)
}

/// Fractional ranking: rank 1 is best, ties share the mean of their positions.
pub fn fractional_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub pipeline: PipelineId,
    pub metrics: MetricTriple,
    pub r_s: f64,
    pub r_v: f64,
    pub r_t: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    /// Rows in input order.
    pub rows: Vec<RankRow>,
    /// Index of the winning row.
    pub winner: usize,
}

impl RankTable {
    pub fn winner_row(&self) -> &RankRow {
        &self.rows[self.winner]
    }

    pub fn get(&self, pipeline: &PipelineId) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.pipeline == *pipeline)
    }
}

/// Ranks every metric, averages the ranks into R and picks the row with the
/// smallest R. Ties go to lower v, then lower t, then the smaller pipeline id.
pub fn rank_pipelines(results: &[(PipelineId, MetricTriple)]) -> Result<RankTable> {
    if results.is_empty() {
        return Err(Error::Invalid("cannot rank an empty result set".into()));
    }
    let col = |f: fn(&MetricTriple) -> f64| results.iter().map(|(_, m)| f(m)).collect::<Vec<_>>();
    let r_s = fractional_ranks(&col(|m| m.s), true);
    let r_v = fractional_ranks(&col(|m| m.v), false);
    let r_t = fractional_ranks(&col(|m| m.t), false);
    let rows: Vec<RankRow> = results
        .iter()
        .enumerate()
        .map(|(i, (p, m))| RankRow {
            pipeline: *p,
            metrics: *m,
            r_s: r_s[i],
            r_v: r_v[i],
            r_t: r_t[i],
            r: (r_s[i] + r_v[i] + r_t[i]) / 3.0,
        })
        .collect();
    let winner = (0..rows.len())
        .min_by(|&a, &b| {
            let (x, y) = (&rows[a], &rows[b]);
            x.r.total_cmp(&y.r)
                .then(x.metrics.v.total_cmp(&y.metrics.v))
                .then(x.metrics.t.total_cmp(&y.metrics.t))
                .then_with(|| x.pipeline.to_string().cmp(&y.pipeline.to_string()))
        })
        .expect("non-empty");
    Ok(RankTable { rows, winner })
}

/// Writes `log,pipeline,s,v,t,R_s,R_v,R_t,R,winner` rows for each log's table.
pub fn write_metrics_csv<W: Write>(tables: &[(String, RankTable)], mut out: W) -> Result<()> {
    writeln!(out, "#schema={METRICS_SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["log", "pipeline", "s", "v", "t", "R_s", "R_v", "R_t", "R", "winner"])?;
    for (log, table) in tables {
        for (i, row) in table.rows.iter().enumerate() {
            w.write_record([
                log.clone(),
                row.pipeline.to_string(),
                format_float(row.metrics.s),
                format_float(row.metrics.v),
                format_float(row.metrics.t),
                format_float(row.r_s),
                format_float(row.r_v),
                format_float(row.r_t),
                format_float(row.r),
                u8::from(i == table.winner).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the raw (s, v, t) columns back, grouped per log in file order.
/// Rank columns are ignored; they are recomputed from the raw metrics.
pub fn read_metrics_csv<R: Read>(source: R) -> Result<Vec<(String, Vec<(PipelineId, MetricTriple)>)>> {
    let (schema, body) = crate::metadb::split_schema_line(source)?;
    crate::metadb::expect_schema("metrics table", METRICS_SCHEMA_VERSION, schema.as_deref())?;
    let mut r = csv::Reader::from_reader(body.as_slice());
    let mut out: Vec<(String, Vec<(PipelineId, MetricTriple)>)> = Vec::new();
    let num = |v: &str| {
        v.parse::<f64>()
            .map_err(|e| Error::Invalid(format!("bad metric value '{v}': {e}")))
    };
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 5 {
            return Err(Error::Invalid("metrics row has fewer than 5 columns".into()));
        }
        let triple = MetricTriple {
            s: num(&rec[2])?,
            v: num(&rec[3])?,
            t: num(&rec[4])?,
        };
        let entry = (rec[1].parse()?, triple);
        match out.last_mut() {
            Some((log, rows)) if log == &rec[0] => rows.push(entry),
            _ => out.push((rec[0].to_string(), vec![entry])),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pid(s: &str) -> PipelineId {
        s.parse().unwrap()
    }

    fn assignment(labels: Vec<i32>) -> ClusterAssignment {
        let raw: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
        ClusterAssignment::from_raw(&raw, 1.0, 0)
    }

    /// Per-sample silhouette straight from the definition.
    fn naive_silhouette(rows: &[Vec<f64>], labels: &[i32]) -> f64 {
        let n = rows.len();
        let clusters: Vec<i32> = {
            let mut c: Vec<i32> = labels.to_vec();
            c.sort_unstable();
            c.dedup();
            c
        };
        if clusters.len() < 2 {
            return -1.0;
        }
        let mean_to = |i: usize, c: i32| {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c && j != i).collect();
            members.iter().map(|&j| distance(&rows[i], &rows[j])).sum::<f64>() / members.len() as f64
        };
        let mut total = 0.0;
        for i in 0..n {
            if labels.iter().filter(|&&l| l == labels[i]).count() == 1 {
                continue;
            }
            let a = mean_to(i, labels[i]);
            let b = clusters
                .iter()
                .filter(|&&c| c != labels[i])
                .map(|&c| mean_to(i, c))
                .fold(f64::INFINITY, f64::min);
            if a.max(b) > 0.0 {
                total += (b - a) / a.max(b);
            }
        }
        total / n as f64
    }

    #[test]
    fn pipeline_names() {
        let p = pid("onehot_agglomerative_k10");
        assert_eq!(p.encoding, Encoding::OneHot);
        assert_eq!(p.clustering, ClusteringConfig::Agglomerative { k: 10 });
        assert_eq!(pid("position_profile_dbscan_eps0.001").to_string(), "position_profile_dbscan_eps0.001");
        assert_eq!(PipelineId::grid().len(), 112);
        assert!("onehot_spectral_k2".parse::<PipelineId>().is_err());
    }

    #[test]
    fn table_one() {
        let results = vec![
            (pid("onehot_kmeans_k2"), MetricTriple { s: 0.9, v: 0.5, t: 50.0 }),
            (pid("bigram_kmeans_k3"), MetricTriple { s: 0.3, v: 0.0, t: 10.0 }),
            (pid("trigram_kmeans_k4"), MetricTriple { s: 0.8, v: 0.7, t: 15.0 }),
        ];
        let table = rank_pipelines(&results).unwrap();
        let r: Vec<String> = table.rows.iter().map(|r| format!("{:.2}", r.r)).collect();
        assert_eq!(r, ["2.00", "1.67", "2.33"]);
        assert_eq!(table.winner, 1);
    }

    #[test]
    fn single_and_tied_pipelines() {
        let m = MetricTriple { s: 0.1, v: 0.2, t: 0.3 };
        let table = rank_pipelines(&[(pid("onehot_kmeans_k2"), m)]).unwrap();
        assert_eq!(table.rows[0].r, 1.0);
        let table = rank_pipelines(&[(pid("trigram_kmeans_k2"), m), (pid("bigram_kmeans_k2"), m)]).unwrap();
        assert_eq!(table.rows[0].r, 1.5);
        assert_eq!(table.rows[1].r, 1.5);
        assert_eq!(table.winner, 1);
        assert!(rank_pipelines(&[]).is_err());
    }

    #[test]
    fn silhouette_hand_case() {
        let rows = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let x = EncodedMatrix::from_rows(&rows).unwrap();
        let s = silhouette(&x, &assignment(vec![0, 0, 1, 1]));
        let expected = (2.0 * (1.0 - 1.0 / 10.5) + 2.0 * (1.0 - 1.0 / 9.5)) / 4.0;
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 0.8997).abs() < 1e-4);
    }

    #[test]
    fn silhouette_degenerate_cases() {
        let x = EncodedMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(silhouette(&x, &assignment(vec![0, 0, 0])), -1.0);
        let same = EncodedMatrix::from_rows(&vec![vec![3.0]; 4]).unwrap();
        assert_eq!(silhouette(&same, &assignment(vec![0, 0, 1, 1])), 0.0);
        // singletons contribute 0; noise is its own cluster
        let x = EncodedMatrix::from_rows(&[vec![0.0], vec![0.0], vec![5.0]]).unwrap();
        assert_eq!(silhouette(&x, &assignment(vec![0, 0, 1])), 2.0 / 3.0);
        assert_eq!(silhouette(&x, &assignment(vec![0, 0, -1])), 2.0 / 3.0);
    }

    #[test]
    fn silhouette_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(2..=30);
            let d = rng.random_range(1..=4);
            let k = rng.random_range(2..=4);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let labels: Vec<i32> = (0..n).map(|_| rng.random_range(-1..k)).collect();
            let x = EncodedMatrix::from_rows(&rows).unwrap();
            let got = silhouette(&x, &assignment(labels.clone()));
            assert!((got - naive_silhouette(&rows, &labels)).abs() < 1e-9);
        }
    }

    #[test]
    fn silhouette_subsamples_large_inputs() {
        let rows: Vec<Vec<f64>> = (0..2100).map(|i| vec![(i % 2) as f64 * 10.0 + (i as f64) * 1e-4]).collect();
        let x = EncodedMatrix::from_rows(&rows).unwrap();
        let dm = DistanceMatrix::sampled(&x, 4);
        assert_eq!(dm.len(), SILHOUETTE_MAX_SAMPLES);
        assert_eq!(dm.rows, DistanceMatrix::sampled(&x, 4).rows);
        let labels: Vec<i32> = (0..2100).map(|i| i % 2).collect();
        assert!(silhouette_from_distances(&dm, &labels) > 0.99);
    }

    #[test]
    fn variant_score_cases() {
        let log = EventLog::from_sequences(
            "l",
            &[vec!["a"], vec!["a"], vec!["b"], vec!["c"], vec!["c"], vec!["c"]],
        )
        .unwrap();
        // cluster 0 = {A, B}, cluster 1 = {C}
        assert_eq!(variant_score_labels(&log, &[0, 0, 0, 1, 1, 1]).unwrap(), 1.0 / 6.0);
        assert_eq!(variant_score_labels(&log, &[0, 0, 1, 2, 2, 2]).unwrap(), 0.0);
        assert_eq!(variant_score_labels(&log, &[-1, -1, -1, -1, -1, -1]).unwrap(), 0.0);
        let distinct = EventLog::from_sequences("d", &[vec!["a"], vec!["b"], vec!["c"], vec!["d"]]).unwrap();
        assert_eq!(variant_score_labels(&distinct, &[0, 0, 0, 0]).unwrap(), 0.75);
        assert!(variant_score_labels(&distinct, &[0]).is_err());
    }

    #[test]
    fn metrics_csv_round_trip() {
        let results = vec![
            (pid("onehot_dbscan_eps0.5"), MetricTriple { s: 0.25, v: 0.1, t: 1e-3 }),
            (pid("bigram_agglomerative_k2"), MetricTriple { s: -1.0, v: 0.0, t: 2e-3 }),
        ];
        let table = rank_pipelines(&results).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&[("log1".into(), table.clone()), ("log2".into(), table)], &mut buf).unwrap();
        let back = read_metrics_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "log1");
        assert_eq!(back[1].1, results);
    }

    proptest! {
        #[test]
        fn mean_rank_is_midpoint(triples in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0, 0.001f64..10.0), 1..40)) {
            let results: Vec<(PipelineId, MetricTriple)> = triples
                .iter()
                .zip(PipelineId::grid())
                .map(|(&(s, v, t), p)| (p, MetricTriple { s, v, t }))
                .collect();
            let table = rank_pipelines(&results).unwrap();
            let p = results.len() as f64;
            let mean = table.rows.iter().map(|r| r.r).sum::<f64>() / p;
            prop_assert!((mean - (p + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn monotone_transforms_keep_ranks(triples in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0, 0.001f64..10.0), 1..40)) {
            let results: Vec<(PipelineId, MetricTriple)> = triples
                .iter()
                .zip(PipelineId::grid())
                .map(|(&(s, v, t), p)| (p, MetricTriple { s, v, t }))
                .collect();
            let transformed: Vec<(PipelineId, MetricTriple)> = results
                .iter()
                .map(|&(p, m)| (p, MetricTriple { s: -(-m.s).exp(), v: m.v, t: m.t.ln() * 3.0 + 7.0 }))
                .collect();
            let a = rank_pipelines(&results).unwrap();
            let b = rank_pipelines(&transformed).unwrap();
            prop_assert_eq!(a.winner, b.winner);
            for (x, y) in a.rows.iter().zip(&b.rows) {
                prop_assert_eq!((x.r_s, x.r_v, x.r_t), (y.r_s, y.r_v, y.r_t));
            }
        }
    }
}
