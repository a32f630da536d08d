//! Log meta-features.
//!
//! [`extract_all`] produces a [`MetaFeatureVector`] of [`FEATURE_COUNT`] values
//! in the order listed by [`feature_names`]:
//!
//! | group | count |
//! |---|---|
//! | activity counts (all, start, end activities) | 3 x 12 |
//! | trace lengths | 29 |
//! | variants | 11 |
//! | log size | 4 |
//! | entropy | 14 |

pub mod entropy;
pub mod stats;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::log::{variants_of, EventLog};
use stats::{histogram, mode, shannon, sorted, DescriptiveStats, Moments};

pub const FEATURE_SCHEMA_VERSION: &str = "clustersel.meta-features/1";
pub const FEATURE_COUNT: usize = 94;

const STAT_SUFFIXES: [&str; 12] = [
    "n", "min", "max", "mean", "median", "std", "variance", "q1", "q3", "iqr", "skewness",
    "kurtosis",
];
const TRACE_LEN_SUFFIXES: [&str; 15] = [
    "min", "max", "mean", "median", "mode", "std", "variance", "q1", "q3", "iqr", "geometric_mean",
    "geometric_std", "harmonic_mean", "coefficient_variation", "entropy",
];
const TOP_VARIANT_PERCENTS: [usize; 6] = [1, 5, 10, 20, 50, 75];
const BLOCK_KS: [usize; 3] = [1, 3, 5];
const KNN_KS: [usize; 3] = [3, 5, 7];
const HIST_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityGroup {
    All,
    Start,
    End,
}

impl ActivityGroup {
    fn prefix(self) -> &'static str {
        match self {
            ActivityGroup::All => "activities",
            ActivityGroup::Start => "start_activities",
            ActivityGroup::End => "end_activities",
        }
    }
}

/// Feature names in schema order.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names = Vec::with_capacity(FEATURE_COUNT);
        for group in [ActivityGroup::All, ActivityGroup::Start, ActivityGroup::End] {
            for s in STAT_SUFFIXES {
                names.push(format!("{}_{s}", group.prefix()));
            }
        }
        for s in TRACE_LEN_SUFFIXES {
            names.push(format!("trace_len_{s}"));
        }
        for b in 1..=HIST_BINS {
            names.push(format!("trace_len_hist{b}"));
        }
        names.extend(
            [
                "trace_len_hist_skewness",
                "trace_len_hist_kurtosis",
                "trace_len_skewness",
                "trace_len_kurtosis",
                "variants_mean",
                "variants_std",
                "variants_skewness",
                "variants_kurtosis",
                "ratio_most_common_variant",
            ]
            .map(String::from),
        );
        for p in TOP_VARIANT_PERCENTS {
            names.push(format!("ratio_top_{p}_variants"));
        }
        names.extend(
            ["n_traces", "n_unique_traces", "ratio_unique_traces_per_trace", "n_events"]
                .map(String::from),
        );
        names.push("entropy_trace".into());
        names.push("entropy_prefix".into());
        for k in BLOCK_KS {
            names.push(format!("entropy_k_block_diff_{k}"));
        }
        for k in BLOCK_KS {
            names.push(format!("entropy_k_block_ratio_{k}"));
        }
        names.push("entropy_global_block".into());
        for k in KNN_KS {
            names.push(format!("entropy_knn_{k}"));
        }
        names.push("entropy_lempel_ziv".into());
        names.push("entropy_kozachenko_leonenko".into());
        debug_assert_eq!(names.len(), FEATURE_COUNT);
        names
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatureVector {
    values: Vec<f64>,
}

impl MetaFeatureVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_COUNT {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "feature {} is not finite",
                feature_names()[i]
            )));
        }
        Ok(MetaFeatureVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn schema_version(&self) -> &'static str {
        FEATURE_SCHEMA_VERSION
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_names()
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        feature_names()
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }
}

fn stats_values(s: &DescriptiveStats, n: f64) -> [f64; 12] {
    [
        n, s.min, s.max, s.mean, s.median, s.std, s.variance, s.p25, s.p75, s.iqr, s.skewness,
        s.kurtosis,
    ]
}

/// Statistics of per-activity occurrence counts within one group. The first
/// value is the number of distinct activities in the group.
pub fn activity_features(log: &EventLog, group: ActivityGroup) -> [f64; 12] {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for trace in log.traces() {
        let events = trace.events();
        let selected: &[_] = match group {
            ActivityGroup::All => events,
            ActivityGroup::Start => &events[..1],
            ActivityGroup::End => &events[events.len() - 1..],
        };
        for e in selected {
            *counts.entry(e.activity.as_str()).or_default() += 1;
        }
    }
    let values: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    stats_values(&DescriptiveStats::of(&values), counts.len() as f64)
}

pub fn trace_length_features(log: &EventLog) -> [f64; 29] {
    let lengths = sorted(&log.traces().iter().map(|t| t.len() as f64).collect::<Vec<_>>());
    let s = DescriptiveStats::of(&lengths);
    let n = lengths.len() as f64;

    let has_zero = lengths.iter().any(|&x| x <= 0.0);
    let (geo_mean, geo_std) = if has_zero || lengths.is_empty() {
        (0.0, 0.0)
    } else {
        let logs: Vec<f64> = lengths.iter().map(|x| x.ln()).collect();
        let m = Moments::of(&logs);
        (m.mean.exp(), m.variance.sqrt().exp())
    };
    let harmonic = if has_zero || lengths.is_empty() {
        0.0
    } else {
        n / lengths.iter().map(|x| 1.0 / x).sum::<f64>()
    };
    let cv = if s.mean == 0.0 { 0.0 } else { s.std / s.mean };

    let mut by_value: BTreeMap<u64, usize> = BTreeMap::new();
    for &x in &lengths {
        *by_value.entry(x.to_bits()).or_default() += 1;
    }
    let entropy = shannon(by_value.into_values());

    let hist = histogram(&lengths, HIST_BINS);
    let hist_moments = Moments::of(&sorted(&hist));

    let mut out = [0.0; 29];
    out[..15].copy_from_slice(&[
        s.min,
        s.max,
        s.mean,
        s.median,
        mode(&lengths),
        s.std,
        s.variance,
        s.p25,
        s.p75,
        s.iqr,
        geo_mean,
        geo_std,
        harmonic,
        cv,
        entropy,
    ]);
    out[15..25].copy_from_slice(&hist);
    out[25..].copy_from_slice(&[
        hist_moments.skewness,
        hist_moments.kurtosis,
        s.skewness,
        s.kurtosis,
    ]);
    out
}

pub fn variant_features(log: &EventLog) -> [f64; 11] {
    let variants = variants_of(log);
    let n_traces = log.len() as f64;
    let counts: Vec<usize> = variants.iter().map(|v| v.count).collect();
    let m = Moments::of(&sorted(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>()));

    let mut out = [0.0; 11];
    out[0] = m.mean;
    out[1] = m.variance.sqrt();
    out[2] = m.skewness;
    out[3] = m.kurtosis;
    out[4] = counts.first().copied().unwrap_or(0) as f64 / n_traces;
    for (slot, pct) in out[5..].iter_mut().zip(TOP_VARIANT_PERCENTS) {
        // ceil(pct% of the variant count), at least one variant
        let top = ((pct * counts.len()).div_ceil(100)).max(1);
        *slot = counts.iter().take(top).sum::<usize>() as f64 / n_traces;
    }
    out
}

/// Number of traces, number of variants, their ratio, and number of events.
pub fn log_features(log: &EventLog) -> [f64; 4] {
    let n_traces = log.len() as f64;
    let n_variants = variants_of(log).len() as f64;
    [n_traces, n_variants, n_variants / n_traces, log.n_events() as f64]
}

pub fn entropy_features(log: &EventLog) -> [f64; 14] {
    let (alphabet, traces) = log.symbolized();
    let a = alphabet.len();
    let mut out = [0.0; 14];
    out[0] = entropy::trace_entropy(&traces);
    out[1] = entropy::prefix_entropy(&traces);
    for (i, k) in BLOCK_KS.iter().enumerate() {
        out[2 + i] = entropy::block_entropy_difference(&traces, *k);
        out[5 + i] = entropy::block_entropy_ratio(&traces, *k);
    }
    out[8] = entropy::global_block_entropy(&traces);
    for (i, k) in KNN_KS.iter().enumerate() {
        out[9 + i] = entropy::knn_entropy(&traces, a, *k);
    }
    out[12] = entropy::lempel_ziv(&traces, a);
    out[13] = entropy::knn_entropy(&traces, a, 1);
    out
}

pub fn extract_all(log: &EventLog) -> MetaFeatureVector {
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    for group in [ActivityGroup::All, ActivityGroup::Start, ActivityGroup::End] {
        values.extend(activity_features(log, group));
    }
    values.extend(trace_length_features(log));
    values.extend(variant_features(log));
    values.extend(log_features(log));
    values.extend(entropy_features(log));
    MetaFeatureVector::from_values(values).expect("feature extraction yields finite values")
}

/// Markdown document listing the schema, one feature per row.
pub fn schema_document() -> String {
    let mut doc = format!("# Meta-feature schema `{FEATURE_SCHEMA_VERSION}`\n\n| # | name |\n|---|---|\n");
    for (i, n) in feature_names().iter().enumerate() {
        doc.push_str(&format!("| {i} | {n} |\n"));
    }
    doc
}

/// Writes the feature table: a `#schema=` comment line, then a header
/// `log,<feature names...>` and one row per log.
pub fn write_feature_csv<W: Write>(rows: &[(String, MetaFeatureVector)], mut out: W) -> Result<()> {
    writeln!(out, "#schema={FEATURE_SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["log".to_string()];
    header.extend(feature_names().iter().cloned());
    w.write_record(&header)?;
    for (name, fv) in rows {
        let mut rec = vec![name.clone()];
        rec.extend(fv.values().iter().map(|v| format_float(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(source: R) -> Result<Vec<(String, MetaFeatureVector)>> {
    let (schema, body) = crate::metadb::split_schema_line(source)?;
    crate::metadb::expect_schema("feature table", FEATURE_SCHEMA_VERSION, schema.as_deref())?;
    let mut r = csv::Reader::from_reader(body.as_slice());
    let header = r.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("log")
        .chain(feature_names().iter().map(String::as_str))
        .collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Schema {
            artifact: "feature table".into(),
            expected: format!("{} feature columns", FEATURE_COUNT),
            found: format!("{} columns with different names", header.len().saturating_sub(1)),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| Error::Invalid(format!("bad feature value {v}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((rec[0].to_string(), MetaFeatureVector::from_values(values)?));
    }
    Ok(rows)
}

/// Shortest representation that parses back to the same f64.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(seqs: &[&[&str]]) -> EventLog {
        let seqs: Vec<Vec<&str>> = seqs.iter().map(|s| s.to_vec()).collect();
        EventLog::from_sequences("t", &seqs).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn schema_has_fixed_length_and_paper_names() {
        let names = feature_names();
        assert_eq!(names.len(), FEATURE_COUNT);
        for n in ["n_events", "activities_max", "trace_len_entropy"] {
            assert!(names.iter().any(|x| x == n), "{n}");
        }
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), FEATURE_COUNT);
    }

    #[test]
    fn activity_groups() {
        let l = log(&[&["a", "b"], &["a", "c"]]);
        let start = activity_features(&l, ActivityGroup::Start);
        assert_eq!(start[0], 1.0);
        assert_eq!((start[1], start[2], start[3], start[5]), (2.0, 2.0, 2.0, 0.0));

        let all = activity_features(&l, ActivityGroup::All);
        // naive recount: a appears twice, b and c once each
        let recount: Vec<f64> = ["a", "b", "c"]
            .iter()
            .map(|x| l.traces().iter().flat_map(|t| t.activities()).filter(|a| a == x).count() as f64)
            .collect();
        assert_eq!(all[0], 3.0);
        assert!(close(all[3], recount.iter().sum::<f64>() / 3.0));
        assert!(close(all[3], 4.0 / 3.0));

        let end = activity_features(&l, ActivityGroup::End);
        assert_eq!((end[0], end[3]), (2.0, 1.0));
    }

    #[test]
    fn constant_trace_lengths() {
        let l = log(&[&["a", "b", "c", "d", "e"][..]; 3]);
        let f = trace_length_features(&l);
        for i in [0, 1, 2, 3, 4] {
            assert_eq!(f[i], 5.0);
        }
        assert_eq!(f[5], 0.0); // std
        assert_eq!(f[13], 0.0); // cv
        assert_eq!(f[14], 0.0); // entropy
        let hist = &f[15..25];
        assert_eq!(hist.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(hist.iter().filter(|&&x| x == 0.0).count(), 9);
        assert!(f.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn geometric_and_harmonic_means() {
        let l = log(&[&["a", "b"], &["a", "b", "c", "d"]]);
        let f = trace_length_features(&l);
        assert!((f[10] - 8f64.sqrt()).abs() < 1e-4);
        assert!((f[12] - 2.6667).abs() < 1e-4);
        // closed forms: sqrt(2*4) and 2 / (1/2 + 1/4)
        assert!(close(f[10], 8f64.sqrt()));
        assert!(close(f[12], 8.0 / 3.0));
    }

    #[test]
    fn uniform_lengths_histogram() {
        let seqs: Vec<Vec<String>> = (1..=10).map(|n| vec!["a".to_string(); n]).collect();
        let l = EventLog::from_sequences("u", &seqs).unwrap();
        let f = trace_length_features(&l);
        assert!(f[15..25].iter().all(|&x| close(x, 0.1)));
        assert!(close(f[14], 10f64.ln()));
    }

    #[test]
    fn variant_descriptors() {
        let one = variant_features(&log(&[&["a"][..]; 4]));
        assert_eq!(one[0], 4.0);
        assert_eq!(one[4], 1.0);
        assert!(one[5..].iter().all(|&x| x == 1.0));

        let four = variant_features(&log(&[&["a"], &["b"], &["c"], &["d"]]));
        assert_eq!((four[0], four[1], four[4]), (1.0, 0.0, 0.25));
        assert_eq!(four[9], 0.5); // top 50%

        let skewed = variant_features(&log(&[&["a"], &["a"], &["a"], &["b"]]));
        assert_eq!(skewed[4], 0.75);
        assert_eq!(skewed[9], 0.75);
    }

    #[test]
    fn top_share_rounding_is_exact() {
        // 30 variants: 10% is exactly 3 variants, not 4
        let seqs: Vec<Vec<String>> = (0..30).map(|i| vec![format!("x{i:02}")]).collect();
        let l = EventLog::from_sequences("v", &seqs).unwrap();
        let f = variant_features(&l);
        assert!(close(f[7], 3.0 / 30.0));
    }

    #[test]
    fn log_level() {
        assert_eq!(log_features(&log(&[&["a", "b"], &["a", "b"]])), [2.0, 1.0, 0.5, 4.0]);
        assert_eq!(log_features(&log(&[&["a"]])), [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            log_features(&log(&[&["a"], &["a", "b"], &["a", "b", "c"]])),
            [3.0, 3.0, 1.0, 6.0]
        );
    }

    #[test]
    fn entropy_group() {
        let two = entropy_features(&log(&[&["a"], &["b"], &["a"], &["b"]]));
        assert!((two[0] - std::f64::consts::LN_2).abs() < 1e-12);
        let single = entropy_features(&log(&[&["a", "b"][..]; 3]));
        assert_eq!(single[0], 0.0);
        assert!(close(single[1], 2f64.ln()));
    }

    #[test]
    fn extract_is_deterministic_and_finite() {
        let l = log(&[&["a"]]);
        let a = extract_all(&l);
        let b = extract_all(&l);
        assert_eq!(a, b);
        assert_eq!(a.values().len(), FEATURE_COUNT);
        assert!(a.values().iter().all(|v| v.is_finite()));
        assert_eq!(a.get("n_events"), Some(1.0));
    }

    #[test]
    fn feature_csv_round_trip() {
        let l = log(&[&["a", "b"], &["c"]]);
        let rows = vec![("one".to_string(), extract_all(&l))];
        let mut buf = Vec::new();
        write_feature_csv(&rows, &mut buf).unwrap();
        let back = read_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }
}
