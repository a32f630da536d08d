//! Descriptive statistics with the conventions used by every feature group:
//! population moments, linear-interpolated percentiles, excess kurtosis, and
//! zero for moments that are undefined on constant samples.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DescriptiveStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub variance: f64,
    pub p25: f64,
    pub p75: f64,
    pub iqr: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl DescriptiveStats {
    /// Statistics of a sample. The input is sorted internally, so the result
    /// does not depend on input order.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return DescriptiveStats::default();
        }
        let sorted = sorted(values);
        let m = Moments::of(&sorted);
        let p25 = percentile_sorted(&sorted, 0.25);
        let p75 = percentile_sorted(&sorted, 0.75);
        DescriptiveStats {
            count: sorted.len(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            mean: m.mean,
            median: percentile_sorted(&sorted, 0.5),
            std: m.variance.sqrt(),
            variance: m.variance,
            p25,
            p75,
            iqr: p75 - p25,
            skewness: m.skewness,
            kurtosis: m.kurtosis,
        }
    }
}

pub(crate) fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl Moments {
    /// Expects a sorted slice so that summation order is canonical.
    pub fn of(sorted: &[f64]) -> Self {
        let n = sorted.len() as f64;
        if sorted.is_empty() {
            return Moments {
                mean: 0.0,
                variance: 0.0,
                skewness: 0.0,
                kurtosis: 0.0,
            };
        }
        let mean = sorted.iter().sum::<f64>() / n;
        let constant = sorted[0] == sorted[sorted.len() - 1];
        if constant {
            return Moments {
                mean: sorted[0],
                variance: 0.0,
                skewness: 0.0,
                kurtosis: 0.0,
            };
        }
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in sorted {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        Moments {
            mean,
            variance: m2,
            skewness: m3 / m2.powf(1.5),
            kurtosis: m4 / (m2 * m2) - 3.0,
        }
    }
}

/// Percentile with linear interpolation between closest ranks (`q` in [0, 1]).
pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Natural-log Shannon entropy of a frequency table.
pub(crate) fn shannon<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let mut sorted = counts;
    sorted.sort_unstable();
    -sorted
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Smallest among the most frequent values.
pub(crate) fn mode(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &v in values {
        counts.entry(v.to_bits()).or_insert((v, 0)).1 += 1;
    }
    let mut best: Option<(f64, usize)> = None;
    for (v, c) in counts.into_values() {
        best = match best {
            Some((bv, bc)) if bc > c || (bc == c && bv <= v) => Some((bv, bc)),
            _ => Some((v, c)),
        };
    }
    best.map_or(0.0, |b| b.0)
}

/// Equal-width histogram normalized to frequencies. A constant sample is
/// binned over `[x - 0.5, x + 0.5]`; the right edge is inclusive.
pub(crate) fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut out = vec![0.0; bins];
    if values.is_empty() {
        return out;
    }
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edge = |i: usize| lo + i as f64 * width;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let mut idx = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        idx = idx.min(bins - 1);
        if idx > 0 && v < edge(idx) {
            idx -= 1;
        } else if idx + 1 < bins && v >= edge(idx + 1) {
            idx += 1;
        }
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    for (o, c) in out.iter_mut().zip(counts) {
        *o = c as f64 / n;
    }
    out
}
