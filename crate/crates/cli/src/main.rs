//! `typoguard`: scan package names for confusion attacks and run the
//! evaluation harness.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use typoguard_core::candidate_index::CandidateIndex;
use typoguard_core::eval::{self, AblationConfig, PairDataset, Strategy};
use typoguard_core::features::{FeatureTable, N_FEATURES};
use typoguard_core::forest::{train_with_cv, Metrics, TreeParams};
use typoguard_core::namevec::EmbeddingProvider;
use typoguard_core::pipeline::{build_index, Decision, FinalReport, ScanConfig, Scanner};
use typoguard_core::registry::{Ecosystem, MetadataStore};

const EXIT_CONFUSION: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "typoguard", version, about = "Package confusion detection for npm, PyPI and crates.io")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    #[arg(long, global = true, default_value = "npm")]
    ecosystem: Ecosystem,
    /// Metadata store (JSONL, one record per line).
    #[arg(long, global = true, default_value = "store.jsonl")]
    store: PathBuf,
    #[arg(long, global = true, default_value = "index.bin")]
    index: PathBuf,
    #[arg(long, global = true, default_value = "model.bin")]
    model: PathBuf,
    /// Archive cache; content features are absent without it.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Never contact registries.
    #[arg(long, global = true)]
    offline: bool,
    /// Skip archive profiling and use the metadata-only model.
    #[arg(long, global = true)]
    no_content: bool,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// RFC 3339 timestamp used as "now"; also drops timings from reports.
    #[arg(long, global = true)]
    snapshot_time: Option<DateTime<Utc>>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    output: OutputFormat,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Tree counts to try.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 300])]
    trees: Vec<usize>,
    /// Depth limits to try; `none` means unbounded.
    #[arg(long, value_delimiter = ',', default_values = ["none", "8"])]
    max_depth: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3])]
    min_leaf: Vec<usize>,
}

impl GridArgs {
    fn grid(&self) -> Result<Vec<TreeParams>> {
        let depths = self
            .max_depth
            .iter()
            .map(|d| match d.trim().to_ascii_lowercase().as_str() {
                "none" | "unbounded" => Ok(None),
                v => v.parse::<usize>().map(Some).with_context(|| format!("invalid --max-depth value '{d}'")),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grid = Vec::new();
        for &n_trees in &self.trees {
            for &max_depth in &depths {
                for &min_leaf in &self.min_leaf {
                    grid.push(TreeParams { n_trees, max_depth, min_leaf, ..TreeParams::default() });
                }
            }
        }
        Ok(grid)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the candidate index from the metadata store.
    IndexBuild {
        #[arg(long, default_value_t = 128)]
        dim: usize,
        /// Pre-trained subword vectors (word2vec text format) instead of hashing.
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Scan one package name.
    Scan { name: String },
    /// Scan many names (arguments, or one per line with --file).
    ScanBatch {
        names: Vec<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Cross-validate, pick a threshold and fit the final model.
    Train {
        features: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Target discovery rate for one or all retrieval strategies.
    EvalTdr {
        pairs: PathBuf,
        #[arg(long, default_value = "hybrid")]
        strategy: String,
        #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_TDR_KS)]
        k: Vec<usize>,
    },
    /// Clean metrics per feature-group configuration.
    Ablate {
        features: PathBuf,
        #[arg(long, value_delimiter = ',')]
        configs: Vec<String>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Recall before and after the metadata-quality flip.
    Adversarial {
        features: PathBuf,
        #[arg(long, value_delimiter = ',')]
        configs: Vec<String>,
        #[command(flatten)]
        grid: GridArgs,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::IndexBuild { dim, vectors } => index_build(g, *dim, vectors.as_deref()),
        Command::Scan { name } => scan(g, name),
        Command::ScanBatch { names, file } => scan_batch(g, names, file.as_deref()),
        Command::Train { features, grid } => train(g, features, grid),
        Command::EvalTdr { pairs, strategy, k } => eval_tdr(g, pairs, strategy, k),
        Command::Ablate { features, configs, grid } => ablate(g, features, configs, grid),
        Command::Adversarial { features, configs, grid } => adversarial(g, features, configs, grid),
    }
}

fn csv_out() -> csv::Writer<io::Stdout> {
    csv::Writer::from_writer(io::stdout())
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn index_build(g: &Global, dim: usize, vectors: Option<&Path>) -> Result<u8> {
    let store = MetadataStore::open(&g.store)?;
    if let Some(w) = store.warnings().first() {
        bail!("{w}");
    }
    let provider = match vectors {
        Some(path) => EmbeddingProvider::from_vector_file(path, g.seed)?,
        None => EmbeddingProvider::hashed(dim, g.seed),
    };
    let index = build_index(&store.records(g.ecosystem), g.ecosystem, provider)?;
    index.save(&g.index).with_context(|| format!("writing {}", g.index.display()))?;
    println!("indexed {} {} entries into {}", index.len(), g.ecosystem, g.index.display());
    Ok(0)
}

fn scan_config(g: &Global) -> ScanConfig {
    let mut config = ScanConfig::new(g.ecosystem, g.index.clone(), g.model.clone(), g.store.clone());
    config.offline = g.offline;
    config.content_enabled = !g.no_content;
    config.cache_dir = g.cache_dir.clone();
    config.snapshot_time = g.snapshot_time;
    config
}

const REPORT_COLUMNS: [&str; 7] = ["name", "best_target", "probability", "threshold", "decision", "model_route", "error"];

fn label(value: impl serde::Serialize) -> String {
    serde_json::to_value(value).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn report_record(name: &str, r: Result<&FinalReport, String>) -> Vec<String> {
    match r {
        Ok(r) => vec![
            name.to_string(),
            r.threat_report.best.as_ref().map(|b| b.record.name.clone()).unwrap_or_default(),
            r.probability.to_string(),
            r.threshold.to_string(),
            label(r.decision),
            label(r.model_route),
            String::new(),
        ],
        Err(e) => {
            let mut rec = vec![name.to_string()];
            rec.extend(std::iter::repeat(String::new()).take(5));
            rec.push(e);
            rec
        }
    }
}

fn scan(g: &Global, name: &str) -> Result<u8> {
    let scanner = Scanner::open(scan_config(g))?;
    let report = scanner.scan(name)?;
    match g.output {
        OutputFormat::Json => println!("{}", report.to_json()),
        OutputFormat::Csv => {
            let mut w = csv_out();
            w.write_record(REPORT_COLUMNS)?;
            w.write_record(report_record(name, Ok(&report)))?;
            w.flush()?;
        }
    }
    Ok(if report.decision == Decision::Confusion { EXIT_CONFUSION } else { 0 })
}

fn scan_batch(g: &Global, names: &[String], file: Option<&Path>) -> Result<u8> {
    let mut all = names.to_vec();
    if let Some(path) = file {
        let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
        for line in BufReader::new(f).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                all.push(line.trim().to_string());
            }
        }
    }
    let scanner = Scanner::open(scan_config(g))?;
    let results = scanner.scan_batch(&all);
    let confusion = results.iter().any(|r| matches!(r, Ok(rep) if rep.decision == Decision::Confusion));
    let failed = results.iter().any(Result::is_err);
    match g.output {
        OutputFormat::Json => {
            let items: Vec<serde_json::Value> = all
                .iter()
                .zip(&results)
                .map(|(n, r)| match r {
                    Ok(rep) => serde_json::to_value(rep).expect("report serializes"),
                    Err(e) => json!({ "name": n, "error": e.to_string() }),
                })
                .collect();
            print_json(&serde_json::Value::Array(items))?;
        }
        OutputFormat::Csv => {
            let mut w = csv_out();
            w.write_record(REPORT_COLUMNS)?;
            for (n, r) in all.iter().zip(&results) {
                w.write_record(report_record(n, r.as_ref().map_err(|e| e.to_string())))?;
            }
            w.flush()?;
        }
    }
    Ok(if confusion {
        EXIT_CONFUSION
    } else if failed {
        1
    } else {
        0
    })
}

fn read_table(path: &Path) -> Result<FeatureTable> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    FeatureTable::read_csv(f).with_context(|| format!("feature table {}", path.display()))
}

fn metrics_json(m: &Metrics) -> serde_json::Value {
    json!({
        "threshold": m.threshold,
        "auc": m.auc,
        "accuracy": m.accuracy,
        "fpr": m.fpr,
        "confusion": m.confusion,
        "benign": m.benign,
        "weighted": m.weighted,
    })
}

fn train(g: &Global, features: &Path, grid: &GridArgs) -> Result<u8> {
    let table = read_table(features)?;
    let all: Vec<usize> = (0..N_FEATURES).collect();
    let out = train_with_cv(&table, &all, &grid.grid()?, g.seed)?;
    out.model.save(&g.model).with_context(|| format!("writing {}", g.model.display()))?;
    let m = &out.oof_metrics;
    match g.output {
        OutputFormat::Json => print_json(&json!({
            "model": g.model.display().to_string(),
            "rows": table.len(),
            "params": out.cv.params,
            "companion_threshold": out.model.companion.as_ref().map(|c| c.threshold),
            "oof": metrics_json(m),
            "roc": m.roc,
        }))?,
        OutputFormat::Csv => {
            let mut w = csv_out();
            w.write_record(["class", "precision", "recall", "f1", "support"])?;
            for (class, c) in [("benign", &m.benign), ("confusion", &m.confusion), ("weighted", &m.weighted)] {
                w.write_record([class.to_string(), c.precision.to_string(), c.recall.to_string(), c.f1.to_string(), c.support.to_string()])?;
            }
            w.flush()?;
            eprintln!(
                "threshold {} auc {} accuracy {}",
                m.threshold,
                m.auc.map_or("n/a".into(), |a| a.to_string()),
                m.accuracy
            );
        }
    }
    Ok(0)
}

fn eval_tdr(g: &Global, pairs: &Path, strategy: &str, ks: &[usize]) -> Result<u8> {
    let strategies: Vec<Strategy> = if strategy.eq_ignore_ascii_case("all") {
        Strategy::ALL.to_vec()
    } else {
        vec![strategy.parse().map_err(anyhow::Error::msg)?]
    };
    let f = File::open(pairs).with_context(|| format!("reading {}", pairs.display()))?;
    let dataset = PairDataset::read_csv(f, &pairs.display().to_string())?;
    let rows: Vec<_> = dataset.rows.into_iter().filter(|r| r.ecosystem == g.ecosystem).collect();
    let tables = if rows.is_empty() {
        Vec::new()
    } else {
        let index = CandidateIndex::load(&g.index)?;
        strategies.iter().map(|&s| eval::tdr(&index, &rows, s, ks)).collect::<Result<Vec<_>, _>>()?
    };
    for t in tables.iter().filter(|t| t.skipped > 0) {
        eprintln!("{}: skipped {} confusion rows without a ground-truth target", t.strategy, t.skipped);
    }
    match g.output {
        OutputFormat::Json => print_json(&serde_json::to_value(&tables)?)?,
        OutputFormat::Csv => {
            let mut w = csv_out();
            w.write_record(["strategy", "k", "hits", "total", "tdr"])?;
            for t in &tables {
                for r in &t.rows {
                    w.write_record([t.strategy.to_string(), r.k.to_string(), r.hits.to_string(), r.total.to_string(), r.tdr.to_string()])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(0)
}

fn parse_configs(configs: &[String]) -> Result<Vec<AblationConfig>> {
    let parsed = if configs.is_empty() {
        AblationConfig::standard()
    } else {
        configs.iter().map(|c| AblationConfig::parse(c)).collect::<Result<Vec<_>, _>>()?
    };
    let (kept, warnings) = eval::dedup_configs(parsed);
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(kept)
}

fn ablate(g: &Global, features: &Path, configs: &[String], grid: &GridArgs) -> Result<u8> {
    let table = read_table(features)?;
    let rows = eval::ablate(&table, &parse_configs(configs)?, &grid.grid()?, g.seed)?;
    match g.output {
        OutputFormat::Json => print_json(&serde_json::to_value(&rows)?)?,
        OutputFormat::Csv => {
            let mut w = csv_out();
            w.write_record(["config", "auc", "f1", "recall_clean", "threshold"])?;
            for r in &rows {
                w.write_record([
                    r.config.clone(),
                    r.auc.map_or(String::new(), |a| a.to_string()),
                    r.f1.to_string(),
                    r.recall.to_string(),
                    r.threshold.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(0)
}

fn adversarial(g: &Global, features: &Path, configs: &[String], grid: &GridArgs) -> Result<u8> {
    let table = read_table(features)?;
    let rows = eval::adversarial(&table, &parse_configs(configs)?, &grid.grid()?, g.seed)?;
    match g.output {
        OutputFormat::Json => print_json(&serde_json::to_value(&rows)?)?,
        OutputFormat::Csv => {
            let mut w = csv_out();
            w.write_record(["config", "recall_clean", "recall_adv", "delta_recall", "threshold"])?;
            for r in &rows {
                w.write_record([
                    r.config.clone(),
                    r.recall_clean.to_string(),
                    r.recall_adv.to_string(),
                    r.delta_recall.to_string(),
                    r.threshold.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(0)
}
