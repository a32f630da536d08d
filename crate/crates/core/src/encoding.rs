//! Trace encoders: every trace becomes one fixed-length real row.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::log::EventLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Encoding {
    OneHot,
    Bigram,
    Trigram,
    PositionProfile,
}

impl Encoding {
    pub const ALL: [Encoding; 4] = [
        Encoding::OneHot,
        Encoding::Bigram,
        Encoding::Trigram,
        Encoding::PositionProfile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::OneHot => "onehot",
            Encoding::Bigram => "bigram",
            Encoding::Trigram => "trigram",
            Encoding::PositionProfile => "position_profile",
        }
    }

    pub fn encode(self, log: &EventLog) -> EncodedMatrix {
        match self {
            Encoding::OneHot => encode_onehot(log),
            Encoding::Bigram => encode_ngram(log, 2),
            Encoding::Trigram => encode_ngram(log, 3),
            Encoding::PositionProfile => {
                let profile = build_position_profile(log);
                encode_position_profile(log, &profile)
            }
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Encoding::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown encoding '{s}'")))
    }
}

/// Row-major N x d matrix; row `i` encodes trace `i` of the source log.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub encoder: String,
    pub columns: Vec<String>,
    data: Vec<f64>,
    n_rows: usize,
}

impl EncodedMatrix {
    pub fn new(encoder: impl Into<String>, columns: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(Error::Invalid("encoded matrix needs at least one column".into()));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: data.len() % d,
            });
        }
        Ok(EncodedMatrix {
            encoder: encoder.into(),
            n_rows: data.len() / d,
            columns,
            data,
        })
    }

    /// Builds a matrix from explicit rows, with generated column names.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let columns = (0..d).map(|j| format!("x{j}")).collect();
        EncodedMatrix::new("raw", columns, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_cols())
    }

    /// Returns a matrix holding only the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> EncodedMatrix {
        let data = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        EncodedMatrix {
            encoder: self.encoder.clone(),
            columns: self.columns.clone(),
            data,
            n_rows: indices.len(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| crate::features::format_float(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Binary activity-occurrence vectors, columns in alphabet order.
pub fn encode_onehot(log: &EventLog) -> EncodedMatrix {
    let (alphabet, traces) = log.symbolized();
    let d = alphabet.len();
    let mut data = vec![0.0; traces.len() * d];
    for (i, t) in traces.iter().enumerate() {
        for &s in t {
            data[i * d + s] = 1.0;
        }
    }
    EncodedMatrix::new(Encoding::OneHot.as_str(), alphabet, data).expect("non-empty alphabet")
}

/// Binary occurrence of contiguous n-grams. The vocabulary is the set of
/// n-grams observed in the log, in lexicographic order; no padding tokens.
/// A log where no trace reaches length `n` gets a single all-zero column.
pub fn encode_ngram(log: &EventLog, n: usize) -> EncodedMatrix {
    assert!(n == 2 || n == 3, "n-gram encoder supports n = 2 or 3");
    let id = if n == 2 { Encoding::Bigram } else { Encoding::Trigram };
    let grams: Vec<BTreeSet<Vec<&str>>> = log
        .traces()
        .iter()
        .map(|t| {
            let acts: Vec<&str> = t.activities().collect();
            acts.windows(n).map(<[&str]>::to_vec).collect()
        })
        .collect();
    let vocab: BTreeSet<&Vec<&str>> = grams.iter().flatten().collect();
    let index: HashMap<&Vec<&str>, usize> = vocab.iter().enumerate().map(|(i, g)| (*g, i)).collect();
    let mut columns: Vec<String> = vocab.iter().map(|g| g.join("|")).collect();
    if columns.is_empty() {
        columns.push(format!("no_{}gram", n));
    }
    let d = columns.len();
    let mut data = vec![0.0; grams.len() * d];
    for (i, set) in grams.iter().enumerate() {
        for g in set {
            data[i * d + index[g]] = 1.0;
        }
    }
    EncodedMatrix::new(id.as_str(), columns, data).expect("at least one column")
}

/// Per-position activity frequencies of a log.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionProfile {
    freq: Vec<BTreeMap<String, f64>>,
}

impl PositionProfile {
    pub fn max_len(&self) -> usize {
        self.freq.len()
    }

    pub fn freq(&self, position: usize, activity: &str) -> f64 {
        self.freq
            .get(position)
            .and_then(|m| m.get(activity))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn position(&self, position: usize) -> Option<&BTreeMap<String, f64>> {
        self.freq.get(position)
    }
}

/// `freq(p, a)` = traces with `a` at position `p` / traces longer than `p`.
pub fn build_position_profile(log: &EventLog) -> PositionProfile {
    let max_len = log.traces().iter().map(|t| t.len()).max().unwrap_or(0);
    let mut counts: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); max_len];
    let mut totals = vec![0usize; max_len];
    for t in log.traces() {
        for (p, a) in t.activities().enumerate() {
            *counts[p].entry(a.to_string()).or_default() += 1;
            totals[p] += 1;
        }
    }
    let freq = counts
        .into_iter()
        .zip(totals)
        .map(|(m, total)| {
            m.into_iter()
                .map(|(a, c)| (a, c as f64 / total as f64))
                .collect()
        })
        .collect();
    PositionProfile { freq }
}

/// Row entry `p` is the profile frequency of the trace's activity at position
/// `p`; positions past the end of the trace are 0.
pub fn encode_position_profile(log: &EventLog, profile: &PositionProfile) -> EncodedMatrix {
    let d = profile.max_len().max(1);
    let mut data = vec![0.0; log.len() * d];
    for (i, t) in log.traces().iter().enumerate() {
        for (p, a) in t.activities().enumerate().take(d) {
            data[i * d + p] = profile.freq(p, a);
        }
    }
    let columns = (0..d).map(|p| format!("pos{p}")).collect();
    EncodedMatrix::new(Encoding::PositionProfile.as_str(), columns, data).expect("at least one column")
}
