use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Row indices of the three parts, each in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded order in which every stratum is spread evenly: row `r` of a class
/// with `n_c` members gets key `(r + 0.5) / n_c`, and rows are sorted by key.
/// Any prefix of the order is then close to proportional.
pub(crate) fn interleaved_order(strata: &[String], seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, 0);
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(strata.len());
    for (g, members) in groups.values_mut().enumerate() {
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        for (r, &i) in members.iter().enumerate() {
            keyed.push(((r as f64 + 0.5) / n, g, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Splits `strata.len()` rows into train, validation and test with the given
/// fractions. Stratified by `strata` when every class has at least 3 rows,
/// otherwise a plain seeded shuffle.
pub fn split_indices(strata: &[String], fractions: [f64; 3], seed: u64) -> Result<Split> {
    let n = strata.len();
    if n < 3 {
        return Err(Error::TooFewInstances(format!("need at least 3 instances to split, got {n}")));
    }
    if fractions.iter().any(|&f| !(f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config("split fractions must be positive and sum to 1"));
    }
    let n_test = ((fractions[2] * n as f64).round() as usize).max(1);
    let n_val = ((fractions[1] * n as f64).round() as usize).max(1);
    if n_test + n_val >= n {
        return Err(Error::TooFewInstances(format!("{n} instances leave no training rows")));
    }

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in strata {
        *counts.entry(s).or_default() += 1;
    }
    let order = if counts.values().all(|&c| c >= 3) {
        interleaved_order(strata, seed)
    } else {
        log::warn!("some class has fewer than 3 instances; using an unstratified split");
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(seed, 0));
        order
    };
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    Ok(Split {
        test: sorted(order[..n_test].to_vec()),
        validation: sorted(order[n_test..n_test + n_val].to_vec()),
        train: sorted(order[n_test + n_val..].to_vec()),
    })
}

/// `folds` disjoint, stratified, seeded folds covering `0..strata.len()`.
pub fn kfold(strata: &[String], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let folds = folds.clamp(1, strata.len().max(1));
    let mut out = vec![Vec::new(); folds];
    for (pos, i) in interleaved_order(strata, seed).into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(spec: &[(&str, usize)]) -> Vec<String> {
        spec.iter().flat_map(|(l, n)| std::iter::repeat_n(l.to_string(), *n)).collect()
    }

    #[test]
    fn proportions() {
        let s = split_indices(&labels(&[("a", 50), ("b", 30), ("c", 20)]), [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 10, 10));
        let s = split_indices(&labels(&[("a", 10)]), [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn partition_and_determinism() {
        let y = labels(&[("a", 40), ("b", 17), ("c", 3), ("d", 7)]);
        let s = split_indices(&y, [0.8, 0.1, 0.1], 5).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        assert_eq!(s, split_indices(&y, [0.8, 0.1, 0.1], 5).unwrap());
        assert_ne!(s, split_indices(&y, [0.8, 0.1, 0.1], 6).unwrap());
    }

    #[test]
    fn stratification_keeps_class_shares() {
        let y = labels(&[("a", 60), ("b", 40)]);
        let s = split_indices(&y, [0.8, 0.1, 0.1], 3).unwrap();
        let a_in_test = s.test.iter().filter(|&&i| y[i] == "a").count();
        assert_eq!(a_in_test, 6);
    }

    #[test]
    fn too_small() {
        assert!(split_indices(&labels(&[("a", 2)]), [0.8, 0.1, 0.1], 0).is_err());
        assert!(split_indices(&labels(&[("a", 5)]), [0.5, 0.1, 0.1], 0).is_err());
    }

    #[test]
    fn folds_cover_rows() {
        let y = labels(&[("a", 13), ("b", 9)]);
        let f = kfold(&y, 5, 2);
        assert_eq!(f.len(), 5);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..22).collect::<Vec<_>>());
        assert!(f.iter().all(|fold| fold.len() == 4 || fold.len() == 5));
    }
}
