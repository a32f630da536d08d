use super::forest::HyperParams;
use super::metrics::macro_f1;
use super::multi::{BinaryRelevance, Dataset, Output};
use super::split::kfold;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTuning {
    pub best: HyperParams,
    /// Mean cross-validated macro F1 of every grid point, in grid order.
    pub cv_scores: Vec<f64>,
    /// Validation macro F1 of the two best grid points (grid index, score).
    pub validation_top2: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tuning {
    pub encoding: OutputTuning,
    pub clustering: OutputTuning,
}

impl Tuning {
    pub fn output(&self, output: Output) -> &OutputTuning {
        match output {
            Output::Encoding => &self.encoding,
            Output::Clustering => &self.clustering,
        }
    }
}

/// Mean macro F1 of one output's BR model over seeded stratified folds.
pub fn cross_validate(data: &Dataset, output: Output, hp: &HyperParams, folds: usize, seed: u64) -> Result<f64> {
    let y = data.labels(output);
    let parts = kfold(y, folds, seed);
    if parts.len() < 2 {
        return Err(Error::TooFewInstances("cross-validation needs at least 2 rows".into()));
    }
    let mut total = 0.0;
    for (f, test) in parts.iter().enumerate() {
        let train: Vec<usize> = parts
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        let tr = data.subset(&train);
        let te = data.subset(test);
        let model = BinaryRelevance::fit(&tr.x, tr.labels(output), hp, derive_seed(seed, f as u64))?;
        total += macro_f1(te.labels(output), &model.predict(&te.x)?)?;
    }
    Ok(total / parts.len() as f64)
}

/// Exhaustive search per output. The winner has the highest mean CV macro F1
/// (first in grid order on ties); the validation set only reports how the
/// top two grid points compare on held-out rows.
pub fn grid_search(train: &Dataset, validation: &Dataset, grid: &[HyperParams], folds: usize, seed: u64) -> Result<Tuning> {
    if grid.is_empty() {
        return Err(Error::config("hyperparameter grid is empty"));
    }
    let tune = |output: Output| -> Result<OutputTuning> {
        let cv_scores = if grid.len() == 1 {
            vec![f64::NAN]
        } else {
            grid.iter()
                .map(|hp| cross_validate(train, output, hp, folds, seed))
                .collect::<Result<Vec<_>>>()?
        };
        let mut ranked: Vec<usize> = (0..grid.len()).collect();
        // stable sort keeps grid order among equal scores
        ranked.sort_by(|&a, &b| cv_scores[b].total_cmp(&cv_scores[a]));
        let best = if grid.len() == 1 { 0 } else { ranked[0] };
        let mut validation_top2 = Vec::new();
        if !validation.is_empty() {
            for &g in ranked.iter().take(2) {
                let model = BinaryRelevance::fit(&train.x, train.labels(output), &grid[g], seed)?;
                let f1 = macro_f1(validation.labels(output), &model.predict(&validation.x)?)?;
                validation_top2.push((g, f1));
            }
        }
        for (g, f1) in &validation_top2 {
            log::info!("{} tuning: grid point {g} ({}) validation macro F1 {f1:.4}", output.as_str(), grid[*g]);
        }
        Ok(OutputTuning {
            best: grid[best],
            cv_scores,
            validation_top2,
        })
    };
    Ok(Tuning {
        encoding: tune(Output::Encoding)?,
        clustering: tune(Output::Clustering)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Dataset::default();
        for _ in 0..n {
            let row: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut pos = row[0] + row[1] > 0.0;
            if rng.random_bool(0.1) {
                pos = !pos;
            }
            d.encoding.push(if pos { "a" } else { "b" }.into());
            d.clustering.push(if row[2] > 0.0 { "c" } else { "d" }.into());
            d.x.push(row);
        }
        d
    }

    #[test]
    fn single_point_grid() {
        let d = noisy(30, 1);
        let hp = HyperParams {
            n_trees: 5,
            ..HyperParams::default()
        };
        let t = grid_search(&d, &Dataset::default(), &[hp], 5, 0).unwrap();
        assert_eq!(t.encoding.best, hp);
        assert!(grid_search(&d, &d, &[], 5, 0).is_err());
    }

    #[test]
    fn duplicates_pick_first() {
        let d = noisy(40, 2);
        let a = HyperParams {
            n_trees: 5,
            ..HyperParams::default()
        };
        let t = grid_search(&d, &d, &[a, a], 3, 0).unwrap();
        assert_eq!(t.encoding.cv_scores[0], t.encoding.cv_scores[1]);
        assert_eq!(t.encoding.validation_top2[0].0, 0);
    }

    #[test]
    fn more_trees_win_on_noisy_data() {
        let train = noisy(200, 3);
        let one = HyperParams {
            n_trees: 1,
            ..HyperParams::default()
        };
        let fifty = HyperParams {
            n_trees: 50,
            ..HyperParams::default()
        };
        let t = grid_search(&train, &noisy(40, 4), &[one, fifty], 5, 7).unwrap();
        assert!(t.encoding.cv_scores[1] > t.encoding.cv_scores[0], "{:?}", t.encoding.cv_scores);
        assert_eq!(t.encoding.best, fifty);
    }
}
