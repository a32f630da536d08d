use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// ⌈√F⌉ features per split.
    Sqrt,
    /// ⌈f·F⌉ features per split, `0 < f <= 1`.
    Fraction(f64),
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::Fraction(f) => (f * n_features as f64).ceil() as usize,
        };
        m.clamp(1, n_features.max(1))
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Fraction(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_trees: usize,
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    /// Train each tree on a bootstrap sample; otherwise on every row once.
    pub bootstrap: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            n_trees: 100,
            criterion: Criterion::Gini,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::config("n_trees must be at least 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::config("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        if let MaxFeatures::Fraction(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config(format!("max_features fraction must lie in (0, 1], got {f}")));
            }
        }
        Ok(())
    }

    /// The 72-point default tuning grid in canonical order.
    pub fn default_grid() -> Vec<HyperParams> {
        Self::grid(
            &[50, 100, 200],
            &[Criterion::Gini, Criterion::Entropy],
            &[2, 5],
            &[1, 3],
            &[MaxFeatures::Sqrt, MaxFeatures::Fraction(0.5), MaxFeatures::Fraction(1.0)],
        )
    }

    /// Eight points at 50 trees, for quick runs.
    pub fn small_grid() -> Vec<HyperParams> {
        Self::grid(
            &[50],
            &[Criterion::Gini, Criterion::Entropy],
            &[2],
            &[1, 3],
            &[MaxFeatures::Sqrt, MaxFeatures::Fraction(0.5)],
        )
    }

    /// Cartesian product, varying the last axis fastest.
    pub fn grid(
        n_trees: &[usize],
        criteria: &[Criterion],
        min_samples_split: &[usize],
        min_samples_leaf: &[usize],
        max_features: &[MaxFeatures],
    ) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for &n in n_trees {
            for &c in criteria {
                for &s in min_samples_split {
                    for &l in min_samples_leaf {
                        for &m in max_features {
                            out.push(HyperParams {
                                n_trees: n,
                                criterion: c,
                                min_samples_split: s,
                                min_samples_leaf: l,
                                max_features: m,
                                bootstrap: true,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_trees={} criterion={} min_samples_split={} min_samples_leaf={} max_features={}",
            self.n_trees,
            match self.criterion {
                Criterion::Gini => "gini",
                Criterion::Entropy => "entropy",
            },
            self.min_samples_split,
            self.min_samples_leaf,
            self.max_features
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    /// Class labels in lexicographic order; leaf counts are indexed by them.
    pub classes: Vec<String>,
    pub n_features: usize,
    pub hyperparams: HyperParams,
    pub seed: u64,
    pub trees: Vec<DecisionTree>,
}

pub(crate) fn check_matrix(x: &[Vec<f64>], n_features: usize) -> Result<()> {
    match x.iter().find(|r| r.len() != n_features) {
        Some(r) => Err(Error::DimensionMismatch {
            expected: n_features,
            found: r.len(),
        }),
        None => Ok(()),
    }
}

/// Bagged CART trees. Tree `t` draws from its own generator derived from
/// `(seed, t)`, so parallel and sequential training agree.
pub fn fit_forest(x: &[Vec<f64>], y: &[String], hp: &HyperParams, seed: u64) -> Result<RandomForest> {
    hp.validate()?;
    if x.is_empty() {
        return Err(Error::TooFewInstances("a forest needs at least one sample".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n_features = x[0].len();
    if n_features == 0 {
        return Err(Error::config("feature matrix has no columns"));
    }
    check_matrix(x, n_features)?;

    let mut classes: Vec<String> = y.to_vec();
    classes.sort();
    classes.dedup();
    let codes: Vec<usize> = y.iter().map(|l| classes.binary_search(l).expect("present")).collect();
    let params = TreeParams {
        criterion: hp.criterion,
        min_samples_split: hp.min_samples_split,
        min_samples_leaf: hp.min_samples_leaf,
        max_features: hp.max_features.count(n_features),
    };
    let n = x.len();
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t as u64);
            let samples: Vec<usize> = if hp.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit(x, &codes, classes.len(), samples, &params, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        classes,
        n_features,
        hyperparams: *hp,
        seed,
        trees,
    })
}

impl RandomForest {
    /// Mean of the trees' normalized leaf distributions.
    pub fn predict_proba_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        let mut p = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            let counts = tree.leaf(row);
            let total: u32 = counts.iter().sum();
            if total > 0 {
                for (acc, &c) in p.iter_mut().zip(counts) {
                    *acc += c as f64 / total as f64;
                }
            }
        }
        p.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        Ok(p)
    }

    /// Argmax class per row; ties go to the lexicographically smallest label.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<String>> {
        x.iter()
            .map(|row| {
                let p = self.predict_proba_row(row)?;
                Ok(self.classes[argmax_first(&p)].clone())
            })
            .collect()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            y.push(if row[0] + 0.5 * row[1] > 0.0 { "pos" } else { "neg" }.to_string());
            x.push(row);
        }
        (x, y)
    }

    #[test]
    fn single_class() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let y = vec!["a".to_string(); 3];
        let f = fit_forest(&x, &y, &HyperParams::default(), 1).unwrap();
        assert_eq!(f.predict(&[vec![-100.0], vec![100.0]]).unwrap(), ["a", "a"]);
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = separable(100, 3);
        let f = fit_forest(&x, &y, &HyperParams::default(), 7).unwrap();
        assert_eq!(f.predict(&x).unwrap(), y);
    }

    #[test]
    fn single_unbagged_tree_is_the_stump() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let y: Vec<String> = (0..12).map(|i| if i < 5 { "a" } else { "b" }.to_string()).collect();
        let hp = HyperParams {
            n_trees: 1,
            max_features: MaxFeatures::Fraction(1.0),
            bootstrap: false,
            ..HyperParams::default()
        };
        let f = fit_forest(&x, &y, &hp, 0).unwrap();
        assert_eq!(f.trees[0].nodes.len(), 3);
        assert_eq!(f.predict(&[vec![4.4], vec![4.6]]).unwrap(), ["a", "b"]);
    }

    #[test]
    fn deduplicated_data_is_memorized() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let y: Vec<String> = (0..60).map(|_| ["a", "b", "c"][rng.random_range(0..3)].to_string()).collect();
        let hp = HyperParams {
            n_trees: 1,
            max_features: MaxFeatures::Fraction(1.0),
            bootstrap: false,
            ..HyperParams::default()
        };
        let f = fit_forest(&x, &y, &hp, 0).unwrap();
        assert_eq!(f.predict(&x).unwrap(), y);
    }

    #[test]
    fn deterministic_and_order_free() {
        let (x, y) = separable(80, 4);
        let hp = HyperParams {
            n_trees: 25,
            ..HyperParams::default()
        };
        let a = fit_forest(&x, &y, &hp, 11).unwrap();
        let b = fit_forest(&x, &y, &hp, 11).unwrap();
        assert_eq!(a, b);
        let mut reversed = a.clone();
        reversed.trees.reverse();
        let (test, _) = separable(50, 5);
        assert_eq!(a.predict(&test).unwrap(), reversed.predict(&test).unwrap());
    }

    #[test]
    fn tie_goes_to_smallest_label() {
        let x = vec![vec![0.0], vec![0.0]];
        let y = vec!["b".to_string(), "a".to_string()];
        let hp = HyperParams {
            n_trees: 1,
            bootstrap: false,
            ..HyperParams::default()
        };
        let f = fit_forest(&x, &y, &hp, 0).unwrap();
        assert_eq!(f.predict(&[vec![0.0]]).unwrap(), ["a"]);
    }

    #[test]
    fn errors() {
        let y = vec!["a".to_string()];
        assert!(fit_forest(&[vec![]], &y, &HyperParams::default(), 0).unwrap_err().is_config());
        let f = fit_forest(&[vec![1.0]], &y, &HyperParams::default(), 0).unwrap();
        assert!(matches!(f.predict(&[vec![1.0, 2.0]]), Err(Error::DimensionMismatch { .. })));
        let bad = HyperParams {
            max_features: MaxFeatures::Fraction(0.0),
            ..HyperParams::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(HyperParams::default_grid().len(), 72);
        assert_eq!(MaxFeatures::Sqrt.count(94), 10);
    }
}
