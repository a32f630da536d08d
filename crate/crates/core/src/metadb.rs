//! Grid evaluation per log and assembly of the meta-database.
//!
//! Every log is scored on all 112 pipelines. The winner of the log's rank
//! table becomes its meta-target, and pairs that are too rare are filtered out.
//!
//! Silhouette and variant score are computed in parallel. Time is filled in
//! afterwards: in [`TimingMode::Wall`] by a sequential pass that reruns each
//! clustering call alone, in [`TimingMode::Work`] from the deterministic
//! operation count of the call.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};

use rayon::prelude::*;

use crate::clustering::ClusteringConfig;
use crate::encoding::Encoding;
use crate::error::{Error, Result};
use crate::features::{extract_all, feature_names, format_float, MetaFeatureVector, FEATURE_SCHEMA_VERSION};
use crate::log::EventLog;
use crate::ranking::{rank_pipelines, silhouette_from_distances, variant_score_labels, DistanceMatrix, MetricTriple, PipelineId, RankTable};
use crate::seed::derive_seed;

pub const METADB_SCHEMA_VERSION: &str = "clustersel.metadb/1";
pub const DEFAULT_MINORITY_THRESHOLD: usize = 5;
/// Nominal seconds per unit of work in [`TimingMode::Work`].
pub const WORK_UNIT_SECONDS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimingMode {
    /// Wall time of each clustering call, measured one call at a time.
    #[default]
    Wall,
    /// Operation count of each clustering call, scaled by [`WORK_UNIT_SECONDS`].
    Work,
}

impl std::str::FromStr for TimingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wall" => Ok(TimingMode::Wall),
            "work" => Ok(TimingMode::Work),
            _ => Err(Error::config(format!("unknown timing mode '{s}' (expected wall or work)"))),
        }
    }
}

/// Scores every pipeline of the grid on `log`, timing by wall clock.
pub fn evaluate_grid(log: &EventLog, seed: u64) -> Vec<(PipelineId, MetricTriple)> {
    evaluate_grid_with(log, seed, TimingMode::Wall)
}

/// Pipelines whose clustering fails (k larger than the trace count) are
/// left out of the result.
pub fn evaluate_grid_with(log: &EventLog, seed: u64, timing: TimingMode) -> Vec<(PipelineId, MetricTriple)> {
    evaluate_logs(std::slice::from_ref(log), seed, timing).pop().unwrap_or_default()
}

/// [`evaluate_grid_with`] over many logs: metrics in parallel across logs and
/// pipelines, then (wall mode) one sequential timing pass over everything.
pub fn evaluate_logs(logs: &[EventLog], seed: u64, timing: TimingMode) -> Vec<Vec<(PipelineId, MetricTriple)>> {
    let mut results: Vec<Vec<(PipelineId, MetricTriple)>> = logs.par_iter().map(|log| metric_pass(log, seed)).collect();
    if timing == TimingMode::Wall {
        for (log, rows) in logs.iter().zip(&mut results) {
            timing_pass(log, seed, rows);
        }
    }
    results
}

fn clustering_seed(seed: u64, pipeline: &PipelineId) -> u64 {
    let grid = ClusteringConfig::grid();
    let index = grid.iter().position(|c| *c == pipeline.clustering).unwrap_or(grid.len());
    derive_seed(seed, index as u64)
}

fn metric_pass(log: &EventLog, seed: u64) -> Vec<(PipelineId, MetricTriple)> {
    Encoding::ALL
        .par_iter()
        .enumerate()
        .flat_map_iter(|(e, &encoding)| {
            let x = encoding.encode(log);
            let dm = DistanceMatrix::sampled(&x, derive_seed(seed, 1000 + e as u64));
            ClusteringConfig::grid()
                .into_par_iter()
                .filter_map(|config| {
                    let pipeline = PipelineId::new(encoding, config);
                    match config.run(&x, clustering_seed(seed, &pipeline)) {
                        Ok(a) => {
                            let s = silhouette_from_distances(&dm, &a.labels);
                            let v = variant_score_labels(log, &a.labels).expect("one label per trace");
                            let t = (a.work as f64 * WORK_UNIT_SECONDS).max(WORK_UNIT_SECONDS);
                            Some((pipeline, MetricTriple { s, v, t }))
                        }
                        Err(err) => {
                            log::debug!("{}: skipping {pipeline}: {err}", log.name);
                            None
                        }
                    }
                })
                .collect::<Vec<_>>()
                .into_iter()
        })
        .collect()
}

fn timing_pass(log: &EventLog, seed: u64, rows: &mut [(PipelineId, MetricTriple)]) {
    let mut current: Option<(Encoding, crate::encoding::EncodedMatrix)> = None;
    for (pipeline, metrics) in rows.iter_mut() {
        if current.as_ref().is_none_or(|(e, _)| *e != pipeline.encoding) {
            current = Some((pipeline.encoding, pipeline.encoding.encode(log)));
        }
        let x = &current.as_ref().expect("set above").1;
        if let Ok(a) = pipeline.clustering.run(x, clustering_seed(seed, pipeline)) {
            metrics.t = a.elapsed;
        }
    }
}

/// The winning pipeline as (encoding target, clustering target), or `None`
/// when no pipeline produced a result.
pub fn select_meta_target(results: &[(PipelineId, MetricTriple)]) -> Option<(String, String)> {
    let table = rank_pipelines(results).ok()?;
    let w = table.winner_row().pipeline;
    Some((w.encoding.to_string(), w.clustering.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaInstance {
    pub log_name: String,
    pub features: MetaFeatureVector,
    pub encoding_target: String,
    pub clustering_target: String,
}

impl MetaInstance {
    pub fn pair(&self) -> (&str, &str) {
        (&self.encoding_target, &self.clustering_target)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetaDatabase {
    pub instances: Vec<MetaInstance>,
}

impl MetaDatabase {
    pub fn new(instances: Vec<MetaInstance>) -> Self {
        MetaDatabase { instances }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn schema_version(&self) -> String {
        metadb_schema()
    }

    /// Occurrences of each (encoding, clustering) target pair.
    pub fn pair_counts(&self) -> BTreeMap<(String, String), usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            *counts
                .entry((inst.encoding_target.clone(), inst.clustering_target.clone()))
                .or_default() += 1;
        }
        counts
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#schema={}", metadb_schema())?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["log_name".to_string()];
        header.extend(feature_names().iter().cloned());
        header.push("encoding_target".into());
        header.push("clustering_target".into());
        w.write_record(&header)?;
        for inst in &self.instances {
            let mut rec = vec![inst.log_name.clone()];
            rec.extend(inst.features.values().iter().map(|v| format_float(*v)));
            rec.push(inst.encoding_target.clone());
            rec.push(inst.clustering_target.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let (schema, body) = split_schema_line(source)?;
        expect_schema("meta-database", &metadb_schema(), schema.as_deref())?;
        let mut r = csv::Reader::from_reader(body.as_slice());
        let header = r.headers()?.clone();
        let width = feature_names().len() + 3;
        if header.len() != width
            || header.iter().skip(1).take(width - 3).ne(feature_names().iter().map(String::as_str))
        {
            return Err(Error::Schema {
                artifact: "meta-database".into(),
                expected: format!("{width} columns in feature schema order"),
                found: format!("{} columns", header.len()),
            });
        }
        let mut instances = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let values = rec
                .iter()
                .skip(1)
                .take(width - 3)
                .map(|v| v.parse::<f64>().map_err(|e| Error::Invalid(format!("bad feature value '{v}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            instances.push(MetaInstance {
                log_name: rec[0].to_string(),
                features: MetaFeatureVector::from_values(values)?,
                encoding_target: rec[width - 2].to_string(),
                clustering_target: rec[width - 1].to_string(),
            });
        }
        Ok(MetaDatabase { instances })
    }
}

/// Schema tag of the meta-database file; it embeds the feature schema.
pub fn metadb_schema() -> String {
    format!("{METADB_SCHEMA_VERSION}+{FEATURE_SCHEMA_VERSION}")
}

/// Drops instances whose target pair occurs fewer than `threshold` times.
pub fn filter_minority(db: &MetaDatabase, threshold: usize) -> Result<MetaDatabase> {
    let counts = db.pair_counts();
    let kept: Vec<MetaInstance> = db
        .instances
        .iter()
        .filter(|i| counts[&(i.encoding_target.clone(), i.clustering_target.clone())] >= threshold)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::NoClassesSurvive);
    }
    let dropped = db.len() - kept.len();
    if dropped > 0 {
        log::info!("minority filter removed {dropped} of {} instances", db.len());
    }
    Ok(MetaDatabase { instances: kept })
}

/// Joins feature rows with per-log grid results by log name, in feature-row
/// order. Logs without results or without any valid pipeline are skipped.
pub fn build_instances(
    features: &[(String, MetaFeatureVector)],
    results: &[(String, Vec<(PipelineId, MetricTriple)>)],
) -> Vec<MetaInstance> {
    let by_name: HashMap<&str, &[(PipelineId, MetricTriple)]> =
        results.iter().map(|(n, r)| (n.as_str(), r.as_slice())).collect();
    features
        .iter()
        .filter_map(|(name, fv)| {
            let Some(rows) = by_name.get(name.as_str()) else {
                log::warn!("{name}: no grid results, excluded");
                return None;
            };
            let Some((encoding_target, clustering_target)) = select_meta_target(rows) else {
                log::warn!("{name}: no valid pipeline, excluded");
                return None;
            };
            Some(MetaInstance {
                log_name: name.clone(),
                features: fv.clone(),
                encoding_target,
                clustering_target,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    pub seed: u64,
    pub timing: TimingMode,
    pub minority_threshold: usize,
}

impl AssembleOptions {
    pub fn new(seed: u64) -> Self {
        AssembleOptions {
            seed,
            timing: TimingMode::Wall,
            minority_threshold: DEFAULT_MINORITY_THRESHOLD,
        }
    }
}

/// Everything produced while assembling, kept for reporting.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub db: MetaDatabase,
    /// Instances before minority filtering.
    pub unfiltered: MetaDatabase,
    pub features: Vec<(String, MetaFeatureVector)>,
    pub tables: Vec<(String, RankTable)>,
}

/// Features, grid evaluation and meta-target for every log, then minority
/// filtering with the default threshold.
pub fn assemble(logs: &[EventLog], seed: u64) -> Result<MetaDatabase> {
    assemble_with(logs, &AssembleOptions::new(seed)).map(|a| a.db)
}

pub fn assemble_with(logs: &[EventLog], options: &AssembleOptions) -> Result<Assembly> {
    if logs.is_empty() {
        return Err(Error::Invalid("no logs to assemble".into()));
    }
    let features: Vec<(String, MetaFeatureVector)> =
        logs.par_iter().map(|l| (l.name.clone(), extract_all(l))).collect();
    let results = evaluate_logs(logs, options.seed, options.timing);
    let mut tables = Vec::new();
    let mut instances = Vec::new();
    for ((name, fv), rows) in features.iter().zip(&results) {
        let Ok(table) = rank_pipelines(rows) else {
            log::warn!("{name}: no valid pipeline, excluded");
            continue;
        };
        let w = table.winner_row().pipeline;
        instances.push(MetaInstance {
            log_name: name.clone(),
            features: fv.clone(),
            encoding_target: w.encoding.to_string(),
            clustering_target: w.clustering.to_string(),
        });
        tables.push((name.clone(), table));
    }
    let unfiltered = MetaDatabase::new(instances);
    let db = filter_minority(&unfiltered, options.minority_threshold)?;
    Ok(Assembly {
        db,
        unfiltered,
        features,
        tables,
    })
}

/// Splits off a leading `#schema=<tag>` line, returning the tag (if any) and
/// the remaining bytes.
pub fn split_schema_line<R: Read>(source: R) -> Result<(Option<String>, Vec<u8>)> {
    let mut reader = std::io::BufReader::new(source);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let mut rest = Vec::new();
    match first.strip_prefix("#schema=") {
        Some(tag) => {
            reader.read_to_end(&mut rest)?;
            Ok((Some(tag.trim().to_string()), rest))
        }
        None => {
            rest.extend_from_slice(first.as_bytes());
            reader.read_to_end(&mut rest)?;
            Ok((None, rest))
        }
    }
}

pub fn expect_schema(artifact: &str, expected: &str, found: Option<&str>) -> Result<()> {
    match found {
        Some(f) if f == expected => Ok(()),
        other => Err(Error::Schema {
            artifact: artifact.into(),
            expected: expected.into(),
            found: other.unwrap_or("no schema tag").into(),
        }),
    }
}
