//! The meta-model: one-vs-rest random forests per output, tuned by grid
//! search and evaluated against majority and random baselines.

mod forest;
mod importance;
mod metrics;
mod multi;
mod split;
mod tree;
mod tuning;

use std::fmt::Write as _;
use std::io::Write;

pub use forest::{fit_forest, HyperParams, MaxFeatures, RandomForest};
pub use importance::{permutation_importance, Importance};
pub use metrics::{accuracy, macro_f1, majority_baseline, majority_label, random_baseline, weighted_f1, Scores};
pub use multi::{fit_multi_output, BinaryRelevance, Dataset, MultiOutputModel, Output, Recommendation, MODEL_SCHEMA_VERSION};
pub use split::{kfold, split_indices, Split};
pub use tree::{Criterion, DecisionTree, Node};
pub use tuning::{cross_validate, grid_search, OutputTuning, Tuning};

use crate::error::Result;
use crate::features::format_float;
use crate::metadb::MetaDatabase;
use crate::seed::derive_seed;

pub const SPLIT_FRACTIONS: [f64; 3] = [0.8, 0.1, 0.1];
pub const DEFAULT_FOLDS: usize = 5;
pub const RANDOM_BASELINE_REPEATS: usize = 30;

/// Splits a meta-database 80/10/10, stratified by clustering target.
pub fn split(db: &MetaDatabase, seed: u64) -> Result<Split> {
    let strata: Vec<String> = db.instances.iter().map(|i| i.clustering_target.clone()).collect();
    split_indices(&strata, SPLIT_FRACTIONS, seed)
}

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub encoding: Scores,
    pub clustering: Scores,
    /// Spread over repeats, for the random baseline.
    pub encoding_std: Option<Scores>,
    pub clustering_std: Option<Scores>,
}

impl ReportRow {
    /// Mean macro F1 over both outputs.
    pub fn mean_f1(&self) -> f64 {
        (self.encoding.macro_f1 + self.clustering.macro_f1) / 2.0
    }

    pub fn mean_weighted_f1(&self) -> f64 {
        (self.encoding.weighted_f1 + self.clustering.weighted_f1) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub n_train: usize,
    pub n_test: usize,
    /// Meta-model, majority baseline, random baseline.
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn row(&self, model: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut s = format!("test instances: {} (trained on {})\n", self.n_test, self.n_train);
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "model", "enc_f1", "enc_wf1", "enc_acc", "clu_f1", "clu_wf1", "clu_acc", "mean_f1"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<12} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                r.model,
                r.encoding.macro_f1,
                r.encoding.weighted_f1,
                r.encoding.accuracy,
                r.clustering.macro_f1,
                r.clustering.weighted_f1,
                r.clustering.accuracy,
                r.mean_f1()
            );
            if let (Some(e), Some(c)) = (&r.encoding_std, &r.clustering_std) {
                let _ = writeln!(
                    s,
                    "{:<12} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    "  (std)", e.macro_f1, e.weighted_f1, e.accuracy, c.macro_f1, c.weighted_f1, c.accuracy
                );
            }
        }
        s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "output", "macro_f1", "weighted_f1", "accuracy", "macro_f1_std", "weighted_f1_std", "accuracy_std"])?;
        for r in &self.rows {
            for (output, scores, std) in [
                ("encoding", r.encoding, r.encoding_std),
                ("clustering", r.clustering, r.clustering_std),
            ] {
                let sd = |f: fn(&Scores) -> f64| std.as_ref().map(|s| format_float(f(s))).unwrap_or_default();
                w.write_record([
                    r.model.clone(),
                    output.to_string(),
                    format_float(scores.macro_f1),
                    format_float(scores.weighted_f1),
                    format_float(scores.accuracy),
                    sd(|s| s.macro_f1),
                    sd(|s| s.weighted_f1),
                    sd(|s| s.accuracy),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Scores the model and both baselines on `test`.
pub fn evaluate(model: &MultiOutputModel, train: &Dataset, test: &Dataset, seed: u64) -> Result<EvaluationReport> {
    let pred_enc = model.encoding.predict(&test.x)?;
    let pred_clu = model.clustering.predict(&test.x)?;
    let (enc_mean, enc_std) = random_baseline(&train.encoding, &test.encoding, RANDOM_BASELINE_REPEATS, derive_seed(seed, 0))?;
    let (clu_mean, clu_std) = random_baseline(&train.clustering, &test.clustering, RANDOM_BASELINE_REPEATS, derive_seed(seed, 1))?;
    Ok(EvaluationReport {
        n_train: train.len(),
        n_test: test.len(),
        rows: vec![
            ReportRow {
                model: "meta-model".into(),
                encoding: Scores::of(&test.encoding, &pred_enc)?,
                clustering: Scores::of(&test.clustering, &pred_clu)?,
                encoding_std: None,
                clustering_std: None,
            },
            ReportRow {
                model: "majority".into(),
                encoding: majority_baseline(&train.encoding, &test.encoding)?,
                clustering: majority_baseline(&train.clustering, &test.clustering)?,
                encoding_std: None,
                clustering_std: None,
            },
            ReportRow {
                model: "random".into(),
                encoding: enc_mean,
                clustering: clu_mean,
                encoding_std: Some(enc_std),
                clustering_std: Some(clu_std),
            },
        ],
    })
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub seed: u64,
    pub grid: Vec<HyperParams>,
    pub folds: usize,
}

impl TrainOptions {
    pub fn new(seed: u64) -> Self {
        TrainOptions {
            seed,
            grid: HyperParams::default_grid(),
            folds: DEFAULT_FOLDS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MultiOutputModel,
    pub split: Split,
    pub tuning: Tuning,
    pub report: EvaluationReport,
    pub train: Dataset,
    pub test: Dataset,
}

/// Split, tune on the training part, fit, and evaluate on the test part.
pub fn train(db: &MetaDatabase, options: &TrainOptions) -> Result<TrainOutcome> {
    let data = Dataset::from_metadb(db);
    let split = split(db, derive_seed(options.seed, 0))?;
    let train = data.subset(&split.train);
    let validation = data.subset(&split.validation);
    let test = data.subset(&split.test);
    let tuning = grid_search(&train, &validation, &options.grid, options.folds, derive_seed(options.seed, 1))?;
    let model = fit_multi_output(&train, &tuning.encoding.best, &tuning.clustering.best, derive_seed(options.seed, 2))?;
    let report = evaluate(&model, &train, &test, derive_seed(options.seed, 3))?;
    Ok(TrainOutcome {
        model,
        split,
        tuning,
        report,
        train,
        test,
    })
}
