//! Entropy-based log complexity measures.
//!
//! Traces are handled as sequences of alphabet indices. Every measure is
//! computed over a canonical (sorted) arrangement of the traces so the result
//! is independent of trace order.

use std::collections::{BTreeMap, HashMap};

use statrs::function::gamma::{digamma, ln_gamma};

use super::stats::shannon;

/// Shannon entropy of the variant frequency distribution.
pub fn trace_entropy(traces: &[Vec<usize>]) -> f64 {
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    for t in traces {
        *counts.entry(t.as_slice()).or_default() += 1;
    }
    shannon(counts.into_values())
}

/// Shannon entropy over all prefixes (of every length) of all traces.
pub fn prefix_entropy(traces: &[Vec<usize>]) -> f64 {
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    for t in traces {
        for end in 1..=t.len() {
            *counts.entry(&t[..end]).or_default() += 1;
        }
    }
    shannon(counts.into_values())
}

/// Entropy of the pooled length-`k` contiguous blocks; zero for `k == 0` or
/// when no trace is long enough.
pub fn block_entropy(traces: &[Vec<usize>], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    for t in traces {
        for w in t.windows(k) {
            *counts.entry(w).or_default() += 1;
        }
    }
    shannon(counts.into_values())
}

pub fn block_entropy_difference(traces: &[Vec<usize>], k: usize) -> f64 {
    block_entropy(traces, k) - block_entropy(traces, k.saturating_sub(1))
}

pub fn block_entropy_ratio(traces: &[Vec<usize>], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    block_entropy(traces, k) / k as f64
}

/// Entropy of the pooled multiset of all blocks of every length.
pub fn global_block_entropy(traces: &[Vec<usize>]) -> f64 {
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    for t in traces {
        for start in 0..t.len() {
            for end in start + 1..=t.len() {
                *counts.entry(&t[start..end]).or_default() += 1;
            }
        }
    }
    shannon(counts.into_values())
}

/// Kozachenko-Leonenko k-nearest-neighbour differential entropy of the
/// one-hot (activity occurrence) vectors of the traces.
///
/// `H = psi(N) - psi(k) + ln V_d + (d / N) * sum ln eps_i`, where `eps_i` is
/// the Euclidean distance from point `i` to its k-th neighbour and `V_d` the
/// volume of the unit d-ball. Points whose k-th neighbour is a duplicate
/// (`eps_i = 0`) contribute nothing to the sum. `k` is capped at `N - 1`.
pub fn knn_entropy(traces: &[Vec<usize>], alphabet_size: usize, k: usize) -> f64 {
    let n = traces.len();
    if n < 2 || alphabet_size == 0 || k == 0 {
        return 0.0;
    }
    let k = k.min(n - 1);
    let d = alphabet_size as f64;

    // Unique one-hot rows with multiplicities, in canonical order.
    let mut unique: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    for t in traces {
        let mut row = vec![false; alphabet_size];
        for &s in t {
            row[s] = true;
        }
        *unique.entry(row).or_default() += 1;
    }
    let rows: Vec<(Vec<bool>, usize)> = unique.into_iter().collect();

    let mut log_sum = 0.0;
    for (i, (row, mult)) in rows.iter().enumerate() {
        let duplicates = mult - 1;
        if duplicates >= k {
            continue;
        }
        let mut dists: Vec<(usize, usize)> = rows
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, (other, m))| {
                let hamming = row.iter().zip(other).filter(|(a, b)| a != b).count();
                (hamming, *m)
            })
            .collect();
        dists.sort_unstable();
        let mut needed = k - duplicates;
        let mut kth = 0;
        for (dist, m) in dists {
            if m >= needed {
                kth = dist;
                break;
            }
            needed -= m;
        }
        // binary vectors: Euclidean distance is the square root of the Hamming distance
        if kth > 0 {
            log_sum += *mult as f64 * 0.5 * (kth as f64).ln();
        }
    }

    let ln_unit_ball = (d / 2.0) * std::f64::consts::PI.ln() - ln_gamma(d / 2.0 + 1.0);
    digamma(n as f64) - digamma(k as f64) + ln_unit_ball + d / n as f64 * log_sum
}

/// Lempel-Ziv (1976) phrase count via the Kaspar-Schuster scan.
pub fn lz76_complexity(s: &[usize]) -> usize {
    let n = s.len();
    if n < 2 {
        return n;
    }
    let (mut i, mut k, mut l) = (0usize, 1usize, 1usize);
    let mut k_max = 1usize;
    let mut c = 1usize;
    loop {
        if s[i + k - 1] == s[l + k - 1] {
            k += 1;
            if l + k > n {
                c += 1;
                break;
            }
        } else {
            if k > k_max {
                k_max = k;
            }
            i += 1;
            if i == l {
                c += 1;
                l += k_max;
                if l + 1 > n {
                    break;
                }
                i = 0;
                k = 1;
                k_max = 1;
            } else {
                k = 1;
            }
        }
    }
    c
}

/// LZ76 complexity of all traces concatenated in sorted order with a
/// separator symbol between traces, normalized by `n / log2 n`.
pub fn lempel_ziv(traces: &[Vec<usize>], alphabet_size: usize) -> f64 {
    let mut ordered: Vec<&Vec<usize>> = traces.iter().collect();
    ordered.sort();
    let mut seq = Vec::new();
    for (i, t) in ordered.iter().enumerate() {
        if i > 0 {
            seq.push(alphabet_size);
        }
        seq.extend_from_slice(t);
    }
    let n = seq.len();
    if n < 2 {
        return 0.0;
    }
    let n = n as f64;
    lz76_complexity(&seq) as f64 / (n / n.log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct LZ76 parse: each phrase is the longest prefix of the remainder
    /// that can be copied from an earlier start position, plus one symbol.
    fn lz76_oracle(s: &[usize]) -> usize {
        let n = s.len();
        let mut c = 0;
        let mut p = 0;
        while p < n {
            let mut len = 0;
            while p + len < n {
                let target = &s[p..p + len + 1];
                let found = (0..p).any(|j| j + len < n && &s[j..j + len + 1] == target);
                if !found {
                    break;
                }
                len += 1;
            }
            c += 1;
            p += len + 1;
        }
        c
    }

    /// Naive O(N^2) Kozachenko-Leonenko estimate over explicit rows.
    fn knn_oracle(traces: &[Vec<usize>], a: usize, k: usize) -> f64 {
        let rows: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| {
                let mut r = vec![0.0; a];
                for &s in t {
                    r[s] = 1.0;
                }
                r
            })
            .collect();
        let n = rows.len();
        let k = k.min(n - 1);
        let d = a as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let mut ds: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            ds.sort_by(f64::total_cmp);
            if ds[k - 1] > 0.0 {
                sum += ds[k - 1].ln();
            }
        }
        let ln_v = (d / 2.0) * std::f64::consts::PI.ln() - ln_gamma(d / 2.0 + 1.0);
        digamma(n as f64) - digamma(k as f64) + ln_v + d / n as f64 * sum
    }

    #[test]
    fn lz76_known_sequence() {
        let s: Vec<usize> = "0001101001000101".bytes().map(|b| (b - b'0') as usize).collect();
        assert_eq!(lz76_oracle(&s), 6);
        assert_eq!(lz76_complexity(&s), 6);
    }

    #[test]
    fn lz76_matches_oracle_on_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..60);
            let a = rng.random_range(1..5);
            let s: Vec<usize> = (0..n).map(|_| rng.random_range(0..a)).collect();
            assert_eq!(lz76_complexity(&s), lz76_oracle(&s), "{s:?}");
        }
    }

    #[test]
    fn periodic_is_simpler_than_random() {
        let periodic: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let random: Vec<usize> = (0..40).map(|_| rng.random_range(0..8)).collect();
        let (p, r) = (lz76_oracle(&periodic), lz76_oracle(&random));
        assert!(p < r, "oracle: periodic {p} vs random {r}");
        assert_eq!(lz76_complexity(&periodic), p);
        assert_eq!(lz76_complexity(&random), r);
    }

    #[test]
    fn knn_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let a = rng.random_range(2..6);
            let n = rng.random_range(2..30);
            let traces: Vec<Vec<usize>> = (0..n)
                .map(|_| {
                    let len = rng.random_range(1..5);
                    (0..len).map(|_| rng.random_range(0..a)).collect()
                })
                .collect();
            for k in [1, 3, 5, 7] {
                let fast = knn_entropy(&traces, a, k);
                let slow = knn_oracle(&traces, a, k);
                assert!((fast - slow).abs() < 1e-9, "k={k}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn block_entropies() {
        let traces = vec![vec![0, 1], vec![0, 2]];
        // blocks of length 1: {0:2, 1:1, 2:1}
        let h1 = -(0.5f64 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!((block_entropy(&traces, 1) - h1).abs() < 1e-12);
        assert!((block_entropy_difference(&traces, 1) - h1).abs() < 1e-12);
        assert!((block_entropy(&traces, 2) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(block_entropy(&traces, 3), 0.0);
        assert!((block_entropy_ratio(&traces, 2) - std::f64::consts::LN_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_variant_prefixes() {
        let traces = vec![vec![0, 1, 2]; 4];
        assert_eq!(trace_entropy(&traces), 0.0);
        assert!((prefix_entropy(&traces) - 3f64.ln()).abs() < 1e-12);
    }
}
