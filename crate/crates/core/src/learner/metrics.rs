use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Per-class (true positives, false positives, false negatives), over the
/// union of labels seen in truth and predictions.
fn confusion<'a>(y_true: &'a [String], y_pred: &'a [String]) -> Result<BTreeMap<&'a str, (usize, usize, usize)>> {
    if y_true.is_empty() {
        return Err(Error::Invalid("cannot score an empty prediction set".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let mut table: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (t, p) in y_true.iter().zip(y_pred) {
        if t == p {
            table.entry(t).or_default().0 += 1;
        } else {
            table.entry(p).or_default().1 += 1;
            table.entry(t).or_default().2 += 1;
        }
    }
    Ok(table)
}

fn f1(tp: usize, fp: usize, fneg: usize) -> f64 {
    let denom = 2 * tp + fp + fneg;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Unweighted mean of per-class F1 over every class present in either input.
pub fn macro_f1(y_true: &[String], y_pred: &[String]) -> Result<f64> {
    let table = confusion(y_true, y_pred)?;
    Ok(table.values().map(|&(tp, fp, fneg)| f1(tp, fp, fneg)).sum::<f64>() / table.len() as f64)
}

/// Per-class F1 weighted by true support.
pub fn weighted_f1(y_true: &[String], y_pred: &[String]) -> Result<f64> {
    let table = confusion(y_true, y_pred)?;
    let n = y_true.len() as f64;
    Ok(table
        .values()
        .map(|&(tp, fp, fneg)| f1(tp, fp, fneg) * (tp + fneg) as f64 / n)
        .sum())
}

pub fn accuracy(y_true: &[String], y_pred: &[String]) -> Result<f64> {
    confusion(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

impl Scores {
    pub fn of(y_true: &[String], y_pred: &[String]) -> Result<Self> {
        Ok(Scores {
            macro_f1: macro_f1(y_true, y_pred)?,
            weighted_f1: weighted_f1(y_true, y_pred)?,
            accuracy: accuracy(y_true, y_pred)?,
        })
    }
}

/// Most frequent label; ties go to the lexicographically smallest.
pub fn majority_label(labels: &[String]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (l, c) in counts {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((l, c));
        }
    }
    best.map(|(l, _)| l.to_string())
}

/// Scores of predicting the training majority label for every test row.
pub fn majority_baseline(train: &[String], test: &[String]) -> Result<Scores> {
    let label = majority_label(train).ok_or_else(|| Error::Invalid("empty training labels".into()))?;
    Scores::of(test, &vec![label; test.len()])
}

/// Mean and standard deviation of the scores of uniform draws over the
/// distinct training labels, across `repeats` seeded repetitions.
pub fn random_baseline(train: &[String], test: &[String], repeats: usize, seed: u64) -> Result<(Scores, Scores)> {
    let mut labels: Vec<String> = train.to_vec();
    labels.sort();
    labels.dedup();
    if labels.is_empty() || repeats == 0 {
        return Err(Error::Invalid("random baseline needs training labels and at least one repeat".into()));
    }
    let runs = (0..repeats)
        .map(|r| {
            let mut rng = rng_for(seed, r as u64);
            let pred: Vec<String> = test.iter().map(|_| labels.choose(&mut rng).expect("non-empty").clone()).collect();
            Scores::of(test, &pred)
        })
        .collect::<Result<Vec<_>>>()?;
    let stat = |f: fn(&Scores) -> f64| {
        let v: Vec<f64> = runs.iter().map(f).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        (mean, var.sqrt())
    };
    let (m1, s1) = stat(|s| s.macro_f1);
    let (m2, s2) = stat(|s| s.weighted_f1);
    let (m3, s3) = stat(|s| s.accuracy);
    Ok((
        Scores {
            macro_f1: m1,
            weighted_f1: m2,
            accuracy: m3,
        },
        Scores {
            macro_f1: s1,
            weighted_f1: s2,
            accuracy: s3,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn hand_cases() {
        assert_eq!(macro_f1(&s(&["a", "b"]), &s(&["a", "b"])).unwrap(), 1.0);
        let one_class = macro_f1(&s(&["a", "a", "b", "b"]), &s(&["a", "a", "a", "a"])).unwrap();
        assert!((one_class - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(macro_f1(&s(&["a", "a"]), &s(&["a", "a"])).unwrap(), 1.0);
        assert!(macro_f1(&[], &[]).is_err());
        assert!(macro_f1(&s(&["a"]), &s(&["a", "b"])).is_err());
        let w = weighted_f1(&s(&["a", "a", "a", "b"]), &s(&["a", "a", "a", "a"])).unwrap();
        assert!((w - 0.75 * (6.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn baselines() {
        let train = s(&["x", "y", "y"]);
        let test = s(&["x", "y", "x", "y"]);
        assert_eq!(majority_baseline(&train, &test).unwrap().accuracy, 0.5);
        let single = s(&["z", "z"]);
        assert_eq!(majority_baseline(&single, &single).unwrap().macro_f1, 1.0);
        let (mean, std) = random_baseline(&single, &single, 30, 1).unwrap();
        assert_eq!((mean.macro_f1, std.macro_f1), (1.0, 0.0));
        assert_eq!(random_baseline(&train, &test, 30, 4).unwrap(), random_baseline(&train, &test, 30, 4).unwrap());
    }

    #[test]
    fn random_accuracy_near_one_over_k() {
        let classes = ["a", "b", "c", "d"];
        let test: Vec<String> = (0..400).map(|i| classes[i % 4].to_string()).collect();
        let (mean, std) = random_baseline(&test, &test, 200, 8).unwrap();
        // per-repeat std, so the mean of 200 repeats lies well within 3 std of 1/4
        assert!((mean.accuracy - 0.25).abs() < 3.0 * std.accuracy, "{mean:?} {std:?}");
        assert_eq!(majority_label(&s(&["b", "a", "b", "a"])).as_deref(), Some("a"));
    }

    proptest! {
        #[test]
        fn macro_f1_bounds(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..60)) {
            let t: Vec<String> = pairs.iter().map(|p| p.0.to_string()).collect();
            let p: Vec<String> = pairs.iter().map(|p| p.1.to_string()).collect();
            let f = macro_f1(&t, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f == 1.0, t == p);
        }
    }
}
