//! `clustersel`: generate logs, build the meta-database, train the
//! meta-model and recommend trace-clustering pipelines.
//!
//! Exit status: 0 on success, 1 on runtime failures, 2 on bad configuration
//! or artifact schema mismatches.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use clustersel::features::{extract_all, read_feature_csv, schema_document, write_feature_csv, feature_names, FEATURE_SCHEMA_VERSION};
use clustersel::learner::{self, permutation_importance, train, Dataset, HyperParams, MultiOutputModel, TrainOptions, DEFAULT_FOLDS, MODEL_SCHEMA_VERSION};
use clustersel::log::{parse_csv, parse_xes, write_csv, write_xes, CorpusSpec, CsvColumns, EventLog};
use clustersel::metadb::{build_instances, evaluate_logs, filter_minority, metadb_schema, MetaDatabase, TimingMode, DEFAULT_MINORITY_THRESHOLD};
use clustersel::ranking::{rank_pipelines, read_metrics_csv, write_metrics_csv, METRICS_SCHEMA_VERSION};
use clustersel::{derive_seed, Error, Result};

#[derive(Parser)]
#[command(name = "clustersel", version, about = "Trace-clustering pipeline recommendation for event logs")]
struct Cli {
    /// Base seed of every random choice; required by commands that use randomness.
    #[arg(long, global = true, env = "CLUSTERSEL_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "CLUSTERSEL_THREADS")]
    threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogFormat {
    Csv,
    Xes,
}

#[derive(Clone, Copy, ValueEnum)]
enum Timing {
    Wall,
    Work,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Small,
    Full,
}

#[derive(clap::Args)]
struct LogInputs {
    /// Log files (.xes or .csv) or directories containing them.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    #[arg(long, default_value = clustersel::log::DEFAULT_CASE_COLUMN)]
    case_column: String,
    #[arg(long, default_value = clustersel::log::DEFAULT_ACTIVITY_COLUMN)]
    activity_column: String,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus described by a TOML file.
    Generate {
        /// Corpus description (seed, n_logs, [[regimes]]).
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "xes")]
        format: LogFormat,
    },
    /// Extract the meta-feature vector of every log.
    Featurize {
        #[command(flatten)]
        inputs: LogInputs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every pipeline of the grid on every log and rank them.
    Evaluate {
        #[command(flatten)]
        inputs: LogInputs,
        #[arg(long)]
        out: PathBuf,
        /// `work` replaces wall time with a deterministic operation count.
        #[arg(long, value_enum, default_value = "wall", env = "CLUSTERSEL_TIMING")]
        timing: Timing,
    },
    /// Join features and ranked metrics into the meta-database.
    BuildMetadb {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Drop (encoding, clustering) targets with fewer instances than this.
        #[arg(long, default_value_t = DEFAULT_MINORITY_THRESHOLD, env = "CLUSTERSEL_MINORITY_THRESHOLD")]
        minority_threshold: usize,
    },
    /// Tune, fit and evaluate the meta-model.
    Train {
        #[arg(long)]
        metadb: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Evaluation report as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        grid: Grid,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
    },
    /// Recommend a pipeline for each log.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        inputs: LogInputs,
    },
    /// Permutation importance of each meta-feature on the test split used by `train`.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        metadb: PathBuf,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Print only the most important features.
        #[arg(long, default_value_t = 20)]
        top: usize,
        /// Full table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print artifact schema versions and the meta-feature schema.
    Schema,
}

fn seed(cli: &Cli) -> Result<u64> {
    cli.seed
        .ok_or_else(|| Error::Config("--seed (or CLUSTERSEL_SEED) is required for this command".into()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn log_files(inputs: &LogInputs) -> Result<Vec<PathBuf>> {
    let is_log = |p: &Path| matches!(p.extension().and_then(|e| e.to_str()), Some("xes" | "csv"));
    let mut files = Vec::new();
    for path in &inputs.logs {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_log(p))
                .collect();
            found.sort();
            files.extend(found);
        } else if is_log(path) {
            files.push(path.clone());
        } else {
            return Err(Error::Config(format!("{}: expected a .xes or .csv file or a directory", path.display())));
        }
    }
    if files.is_empty() {
        return Err(Error::Config("no .xes or .csv logs found".into()));
    }
    Ok(files)
}

fn read_logs(inputs: &LogInputs) -> Result<Vec<EventLog>> {
    let columns = CsvColumns {
        case: inputs.case_column.clone(),
        activity: inputs.activity_column.clone(),
    };
    log_files(inputs)?
        .iter()
        .map(|path| {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
            let parsed = if path.extension().is_some_and(|e| e == "xes") {
                parse_xes(open(path)?).map(|mut log| {
                    if log.name.is_empty() {
                        log.name = name.to_string();
                    }
                    log
                })
            } else {
                parse_csv(open(path)?, name, &columns)
            };
            parsed.map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn load_model(path: &Path) -> Result<MultiOutputModel> {
    MultiOutputModel::load(open(path)?)
}

fn load_metadb(path: &Path) -> Result<MetaDatabase> {
    MetaDatabase::read_csv(open(path)?)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { spec, out, format } => {
            let text = fs::read_to_string(spec).map_err(|e| Error::Config(format!("cannot read {}: {e}", spec.display())))?;
            let mut corpus: CorpusSpec =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", spec.display())))?;
            if let Some(s) = cli.seed {
                corpus.seed = s;
            }
            let logs = corpus.generate()?;
            fs::create_dir_all(out)?;
            for log in &logs {
                match format {
                    LogFormat::Csv => write_csv(log, create(&out.join(format!("{}.csv", log.name)))?)?,
                    LogFormat::Xes => write_xes(log, create(&out.join(format!("{}.xes", log.name)))?)?,
                }
            }
            println!("wrote {} logs to {}", logs.len(), out.display());
        }
        Command::Featurize { inputs, out } => {
            let logs = read_logs(inputs)?;
            let rows: Vec<_> = logs.iter().map(|l| (l.name.clone(), extract_all(l))).collect();
            let mut w = create(out)?;
            write_feature_csv(&rows, &mut w)?;
            w.flush()?;
            println!("wrote {} feature vectors to {}", rows.len(), out.display());
        }
        Command::Evaluate { inputs, out, timing } => {
            let seed = seed(cli)?;
            let logs = read_logs(inputs)?;
            let timing = match timing {
                Timing::Wall => TimingMode::Wall,
                Timing::Work => TimingMode::Work,
            };
            let results = evaluate_logs(&logs, seed, timing);
            let mut tables = Vec::new();
            for (log, rows) in logs.iter().zip(results) {
                match rank_pipelines(&rows) {
                    Ok(table) => tables.push((log.name.clone(), table)),
                    Err(e) => log::warn!("{}: {e}", log.name),
                }
            }
            let mut w = create(out)?;
            write_metrics_csv(&tables, &mut w)?;
            w.flush()?;
            let mut stdout = io::stdout().lock();
            for (name, table) in &tables {
                let best = table.winner_row();
                writeln!(stdout, "{name}\t{}\tR={:.2}", best.pipeline, best.r)?;
            }
        }
        Command::BuildMetadb {
            features,
            metrics,
            out,
            minority_threshold,
        } => {
            let features = read_feature_csv(open(features)?)?;
            let metrics = read_metrics_csv(open(metrics)?)?;
            let all = MetaDatabase::new(build_instances(&features, &metrics));
            let db = filter_minority(&all, *minority_threshold)?;
            let mut w = create(out)?;
            db.write_csv(&mut w)?;
            w.flush()?;
            println!("{} of {} instances kept (minority threshold {minority_threshold})", db.len(), all.len());
            for ((enc, clu), n) in db.pair_counts() {
                println!("  {enc}_{clu}\t{n}");
            }
        }
        Command::Train {
            metadb,
            out,
            report,
            grid,
            folds,
        } => {
            let db = load_metadb(metadb)?;
            let grid = match grid {
                Grid::Small => HyperParams::small_grid(),
                Grid::Full => HyperParams::default_grid(),
            };
            let outcome = train(
                &db,
                &TrainOptions {
                    seed: seed(cli)?,
                    grid,
                    folds: *folds,
                },
            )?;
            for (name, t) in [("encoding", &outcome.tuning.encoding), ("clustering", &outcome.tuning.clustering)] {
                println!("{name}: {}", t.best);
            }
            print!("{}", outcome.report.to_table());
            let mut w = create(out)?;
            outcome.model.save(&mut w)?;
            w.flush()?;
            if let Some(path) = report {
                let mut w = create(path)?;
                outcome.report.write_csv(&mut w)?;
                w.flush()?;
            }
        }
        Command::Recommend { model, inputs } => {
            let model = load_model(model)?;
            let logs = read_logs(inputs)?;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "log\tpipeline\tencoding_score\tclustering_score")?;
            for log in &logs {
                let rec = model.recommend(&extract_all(log))?;
                writeln!(
                    stdout,
                    "{}\t{}\t{:.4}\t{:.4}",
                    log.name,
                    rec.pipeline(),
                    rec.encoding_score,
                    rec.clustering_score
                )?;
            }
        }
        Command::Importance {
            model,
            metadb,
            repeats,
            top,
            out,
        } => {
            let seed = seed(cli)?;
            let model = load_model(model)?;
            let db = load_metadb(metadb)?;
            // same split as `train` with this seed
            let split = learner::split(&db, derive_seed(seed, 0))?;
            let test = Dataset::from_metadb(&db).subset(&split.test);
            let imp = permutation_importance(&model, &test, *repeats, derive_seed(seed, 4))?;
            let names = feature_names();
            println!("permutation importance on {} test instances ({repeats} shuffles)", test.len());
            println!("{:<36} {:>9} {:>9} {:>9}", "feature", "combined", "encoding", "clustering");
            for &j in imp.ranking().iter().take(*top) {
                println!(
                    "{:<36} {:>9.4} {:>9.4} {:>9.4}",
                    names[j], imp.combined[j], imp.encoding[j], imp.clustering[j]
                );
            }
            if let Some(path) = out {
                let mut w = create(path)?;
                writeln!(w, "feature,combined,encoding,clustering")?;
                for j in imp.ranking() {
                    writeln!(w, "{},{},{},{}", names[j], imp.combined[j], imp.encoding[j], imp.clustering[j])?;
                }
                w.flush()?;
            }
        }
        Command::Schema => {
            println!("features: {FEATURE_SCHEMA_VERSION}");
            println!("metrics: {METRICS_SCHEMA_VERSION}");
            println!("meta-database: {}", metadb_schema());
            println!("model: {MODEL_SCHEMA_VERSION}");
            println!();
            print!("{}", schema_document());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
