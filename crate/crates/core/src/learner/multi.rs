use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{argmax_first, check_matrix, fit_forest, HyperParams, RandomForest};
use super::metrics::majority_label;
use crate::error::{Error, Result};
use crate::features::{FEATURE_COUNT, FEATURE_SCHEMA_VERSION};
use crate::metadb::MetaDatabase;
use crate::seed::derive_seed;

pub const MODEL_SCHEMA_VERSION: &str = "clustersel.model/1";

const POSITIVE: &str = "1";
const NEGATIVE: &str = "0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Output {
    Encoding,
    Clustering,
}

impl Output {
    pub const BOTH: [Output; 2] = [Output::Encoding, Output::Clustering];

    pub fn as_str(self) -> &'static str {
        match self {
            Output::Encoding => "encoding",
            Output::Clustering => "clustering",
        }
    }
}

/// Feature rows with the two target columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub encoding: Vec<String>,
    pub clustering: Vec<String>,
}

impl Dataset {
    pub fn from_metadb(db: &MetaDatabase) -> Self {
        Dataset {
            x: db.instances.iter().map(|i| i.features.values().to_vec()).collect(),
            encoding: db.instances.iter().map(|i| i.encoding_target.clone()).collect(),
            clustering: db.instances.iter().map(|i| i.clustering_target.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn labels(&self, output: Output) -> &[String] {
        match output {
            Output::Encoding => &self.encoding,
            Output::Clustering => &self.clustering,
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            encoding: rows.iter().map(|&i| self.encoding[i].clone()).collect(),
            clustering: rows.iter().map(|&i| self.clustering[i].clone()).collect(),
        }
    }
}

/// One-vs-rest forests for a single-valued output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryRelevance {
    /// The q labels seen in training, lexicographic.
    pub labels: Vec<String>,
    /// `forests[j]` separates `labels[j]` from the rest.
    pub forests: Vec<RandomForest>,
    /// Fallback when no binary forest gives any positive score.
    pub majority: String,
}

impl BinaryRelevance {
    pub fn fit(x: &[Vec<f64>], y: &[String], hp: &HyperParams, seed: u64) -> Result<Self> {
        let majority = majority_label(y).ok_or_else(|| Error::TooFewInstances("no training rows".into()))?;
        let mut labels: Vec<String> = y.to_vec();
        labels.sort();
        labels.dedup();
        if labels.len() == 1 {
            log::warn!("only one label ({majority}) in training data; the output is constant");
        }
        let forests = labels
            .par_iter()
            .enumerate()
            .map(|(j, label)| {
                let binary: Vec<String> = y
                    .iter()
                    .map(|l| if l == label { POSITIVE } else { NEGATIVE }.to_string())
                    .collect();
                fit_forest(x, &binary, hp, derive_seed(seed, j as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BinaryRelevance {
            labels,
            forests,
            majority,
        })
    }

    pub fn q(&self) -> usize {
        self.labels.len()
    }

    /// Positive-class score of every binary forest.
    pub fn scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.forests
            .iter()
            .map(|f| {
                let p = f.predict_proba_row(row)?;
                Ok(f.class_index(POSITIVE).map_or(0.0, |i| p[i]))
            })
            .collect()
    }

    /// Highest-scoring label (ties lexicographic), or the training majority
    /// when every score is zero.
    pub fn predict_row(&self, row: &[f64]) -> Result<(String, f64)> {
        let scores = self.scores(row)?;
        let best = argmax_first(&scores);
        if scores[best] > 0.0 {
            Ok((self.labels[best].clone(), scores[best]))
        } else {
            Ok((self.majority.clone(), 0.0))
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<String>> {
        x.iter().map(|r| self.predict_row(r).map(|(l, _)| l)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiOutputModel {
    pub schema_version: String,
    pub feature_schema: String,
    pub n_features: usize,
    pub encoding: BinaryRelevance,
    pub clustering: BinaryRelevance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub encoding: String,
    pub clustering: String,
    pub encoding_score: f64,
    pub clustering_score: f64,
}

impl Recommendation {
    /// Canonical pipeline id, e.g. `onehot_agglomerative_k10`.
    pub fn pipeline(&self) -> String {
        format!("{}_{}", self.encoding, self.clustering)
    }
}

/// Binary-relevance forests for both outputs, trained on the full feature matrix.
pub fn fit_multi_output(
    data: &Dataset,
    hp_encoding: &HyperParams,
    hp_clustering: &HyperParams,
    seed: u64,
) -> Result<MultiOutputModel> {
    let n_features = data.x.first().map_or(0, Vec::len);
    check_matrix(&data.x, n_features)?;
    let (encoding, clustering) = rayon::join(
        || BinaryRelevance::fit(&data.x, &data.encoding, hp_encoding, derive_seed(seed, 0)),
        || BinaryRelevance::fit(&data.x, &data.clustering, hp_clustering, derive_seed(seed, 1)),
    );
    Ok(MultiOutputModel {
        schema_version: MODEL_SCHEMA_VERSION.into(),
        feature_schema: if n_features == FEATURE_COUNT {
            FEATURE_SCHEMA_VERSION.into()
        } else {
            format!("custom/{n_features}")
        },
        n_features,
        encoding: encoding?,
        clustering: clustering?,
    })
}

impl MultiOutputModel {
    pub fn output(&self, output: Output) -> &BinaryRelevance {
        match output {
            Output::Encoding => &self.encoding,
            Output::Clustering => &self.clustering,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<Recommendation> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        let (encoding, encoding_score) = self.encoding.predict_row(row)?;
        let (clustering, clustering_score) = self.clustering.predict_row(row)?;
        Ok(Recommendation {
            encoding,
            clustering,
            encoding_score,
            clustering_score,
        })
    }

    /// Predicts for a meta-feature vector, checking its schema first.
    pub fn recommend(&self, features: &crate::features::MetaFeatureVector) -> Result<Recommendation> {
        if features.schema_version() != self.feature_schema {
            return Err(Error::Schema {
                artifact: "model".into(),
                expected: self.feature_schema.clone(),
                found: features.schema_version().into(),
            });
        }
        self.predict_row(features.values())
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    /// Loads a model file, rejecting other model or feature schema versions.
    pub fn load<R: Read>(source: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(source)?;
        let tag = |k: &str| value.get(k).and_then(|v| v.as_str()).unwrap_or("none").to_string();
        let found = tag("schema_version");
        if found != MODEL_SCHEMA_VERSION {
            return Err(Error::Schema {
                artifact: "model".into(),
                expected: MODEL_SCHEMA_VERSION.into(),
                found,
            });
        }
        let features = tag("feature_schema");
        if features != FEATURE_SCHEMA_VERSION {
            return Err(Error::Schema {
                artifact: "model feature schema".into(),
                expected: FEATURE_SCHEMA_VERSION.into(),
                found: features,
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}
