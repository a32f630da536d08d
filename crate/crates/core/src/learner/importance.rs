use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::metrics::macro_f1;
use super::multi::{Dataset, MultiOutputModel, Output};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};

/// Relative permutation importance per feature, each vector summing to 1
/// (or all zero when no permutation ever hurt the model).
#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    pub encoding: Vec<f64>,
    pub clustering: Vec<f64>,
    /// Based on the mean of both outputs' macro F1.
    pub combined: Vec<f64>,
}

impl Importance {
    /// Feature indices ordered by combined importance, largest first.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.combined.len()).collect();
        idx.sort_by(|&a, &b| self.combined[b].total_cmp(&self.combined[a]).then(a.cmp(&b)));
        idx
    }
}

fn output_f1(model: &MultiOutputModel, x: &[Vec<f64>], test: &Dataset) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for (slot, output) in Output::BOTH.into_iter().enumerate() {
        out[slot] = macro_f1(test.labels(output), &model.output(output).predict(x)?)?;
    }
    Ok(out)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|d| *d = d.max(0.0));
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|d| *d /= total);
    }
    v
}

/// Mean drop in macro F1 when one feature column of `test` is shuffled,
/// over `repeats` seeded shuffles; negative drops count as zero.
pub fn permutation_importance(model: &MultiOutputModel, test: &Dataset, repeats: usize, seed: u64) -> Result<Importance> {
    if test.is_empty() || repeats == 0 {
        return Err(Error::Invalid("permutation importance needs test rows and at least one repeat".into()));
    }
    let base = output_f1(model, &test.x, test)?;
    let drops = (0..model.n_features)
        .into_par_iter()
        .map(|j| {
            let mut sum = [0.0; 2];
            let mut x = test.x.clone();
            let mut column: Vec<f64> = test.x.iter().map(|r| r[j]).collect();
            for r in 0..repeats {
                column.shuffle(&mut rng_for(derive_seed(seed, j as u64), r as u64));
                for (row, &v) in x.iter_mut().zip(&column) {
                    row[j] = v;
                }
                let f = output_f1(model, &x, test)?;
                sum[0] += base[0] - f[0];
                sum[1] += base[1] - f[1];
            }
            Ok([sum[0] / repeats as f64, sum[1] / repeats as f64])
        })
        .collect::<Result<Vec<[f64; 2]>>>()?;
    Ok(Importance {
        encoding: normalize(drops.iter().map(|d| d[0]).collect()),
        clustering: normalize(drops.iter().map(|d| d[1]).collect()),
        combined: normalize(drops.iter().map(|d| (d[0] + d[1]) / 2.0).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::forest::HyperParams;
    use crate::learner::multi::fit_multi_output;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Dataset::default();
        for _ in 0..n {
            let mut row: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            row[5] = 3.0;
            d.encoding.push(if row[1] > 0.0 { "p" } else { "q" }.into());
            d.clustering.push(if row[1] > 0.0 { "x" } else { "y" }.into());
            d.x.push(row);
        }
        d
    }

    #[test]
    fn deciding_feature_dominates() {
        let train = data(150, 1);
        let hp = HyperParams {
            n_trees: 40,
            ..HyperParams::default()
        };
        let model = fit_multi_output(&train, &hp, &hp, 2).unwrap();
        let imp = permutation_importance(&model, &data(60, 3), 5, 4).unwrap();
        assert!(imp.combined[1] >= 0.9, "{:?}", imp.combined);
        assert_eq!(imp.combined[5], 0.0);
        assert_eq!(imp.ranking()[0], 1);
        assert!((imp.encoding.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unused_feature_has_zero_importance() {
        let train = data(80, 5);
        let hp = HyperParams {
            n_trees: 10,
            ..HyperParams::default()
        };
        let model = fit_multi_output(&train, &hp, &hp, 2).unwrap();
        let used: std::collections::BTreeSet<usize> = model
            .encoding
            .forests
            .iter()
            .chain(&model.clustering.forests)
            .flat_map(|f| f.trees.iter().flat_map(|t| t.used_features()))
            .collect();
        let imp = permutation_importance(&model, &data(30, 6), 3, 1).unwrap();
        for j in 0..6 {
            if !used.contains(&j) {
                assert_eq!(imp.combined[j], 0.0);
            }
        }
        assert_eq!(imp, permutation_importance(&model, &data(30, 6), 3, 1).unwrap());
    }
}
