//! The `tsasd` command line.
//!
//! Exit codes: 0 clean run, 3 anomaly detected (`detect` only), 1 usage or
//! configuration error, 2 data or I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::bench::{self, persist, report, BenchBundle, MonotonicClock};
use crate::config::{keys_help, Config};
use crate::datagen::{build_bundle, generate_synthetic_categorical, read_categorical_csv, DatasetBundle};
use crate::difficulty;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::evaluate;
use crate::pipeline;
use crate::series::AlignedScores;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ANOMALY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tsasd", version, about = "One-class time-series anomaly state detection")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (or file, for `evaluate` and `difficulty`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Window selectors, comma separated (`acf`, `fft` or a length).
    #[arg(long, global = true, value_delimiter = ',')]
    pub window: Vec<String>,
    /// Detectors, comma separated, by key or name.
    #[arg(long, global = true, value_delimiter = ',')]
    pub detector: Vec<String>,
    /// Worker threads for `bench`; 0 uses all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build anomaly-state bundles from categorical data (synthetic unless
    /// `dataset.input` is set).
    BuildDataset {
        /// UCR-style input file; overrides `dataset.input`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Source class; overrides `dataset.source_class`.
        #[arg(long)]
        class: Option<i64>,
    },
    /// Train on a standard series and judge a test series.
    Detect {
        #[arg(long)]
        standard: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Run every detector and window on every bundle matching a glob.
    Bench {
        /// Glob of bundle directories, e.g. `data/bundle_*`.
        #[arg(long)]
        bundles: String,
    },
    /// Compute the eight accuracy measures from score and label files.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        /// Predicted labels, e.g. the `labels.csv` written by `detect`.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth labels, e.g. a bundle's `labels.csv`.
        #[arg(long)]
        truth: PathBuf,
    },
    /// KNC, RC, NC and NA of a bundle.
    Difficulty {
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Render Markdown and SVG from persisted bench results.
    Report {
        /// Directory written by `bench`.
        #[arg(long)]
        results: PathBuf,
    },
}

/// What a successful command observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Anomaly,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = Cli::command().after_long_help(keys_help());
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN };
        }
    };
    match execute(&cli) {
        Ok(Outcome::Clean) => EXIT_CLEAN,
        Ok(Outcome::Anomaly) => EXIT_ANOMALY,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(g: &GlobalArgs) -> Result<Config> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if !g.window.is_empty() {
        cfg.windows = g.window.clone();
    }
    if !g.detector.is_empty() {
        cfg.detectors = g.detector.clone();
    }
    if let Some(j) = g.jobs {
        cfg.bench.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let mut cfg = resolve_config(&cli.global)?;
    let out = cli.global.out.clone();
    match &cli.command {
        Command::BuildDataset { input, class } => {
            if let Some(i) = input {
                cfg.dataset.input = Some(i.clone());
            }
            if let Some(c) = class {
                cfg.dataset.source_class = *c;
            }
            let out = out.unwrap_or_else(|| PathBuf::from("bundle"));
            for (dir, b) in cmd_build_dataset(&cfg, &out)? {
                match b.meta.knc {
                    Some(k) => println!("{}: KNC = {k:.4}", dir.display()),
                    None => println!("{}: KNC undefined (no anomalies)", dir.display()),
                }
            }
            Ok(Outcome::Clean)
        }
        Command::Detect { standard, test } => {
            let out = out.unwrap_or_else(|| PathBuf::from("."));
            let flagged = cmd_detect(standard, test, &cfg, &out)?;
            println!("{flagged} point(s) flagged as anomalous");
            Ok(if flagged > 0 { Outcome::Anomaly } else { Outcome::Clean })
        }
        Command::Bench { bundles } => {
            let out = out.unwrap_or_else(|| PathBuf::from("bench_out"));
            let summary = cmd_bench(bundles, &cfg, &out)?;
            if let Some(m) = summary.metrics.iter().find(|m| m.metric == "auc_roc") {
                for a in &m.aggregates {
                    let v = a.mean.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
                    println!("{:<18} AUC-ROC {v}", a.detector.name());
                }
            }
            println!("results written to {}", out.display());
            Ok(Outcome::Clean)
        }
        Command::Evaluate { scores, pred, truth } => {
            let json = serde_json::to_string_pretty(&cmd_evaluate(scores, pred, truth, &cfg)?)?;
            emit(&json, out.as_deref())
        }
        Command::Difficulty { bundle } => {
            let json = serde_json::to_string_pretty(&cmd_difficulty(bundle, &cfg)?)?;
            emit(&json, out.as_deref())
        }
        Command::Report { results } => {
            let out = out.unwrap_or_else(|| results.clone());
            cmd_report(results, &out, cfg.seed)?;
            println!("report written to {}", out.join("report.md").display());
            Ok(Outcome::Clean)
        }
    }
}

fn emit(json: &str, out: Option<&Path>) -> Result<Outcome> {
    println!("{json}");
    if let Some(p) = out {
        io::atomic_write(p, format!("{json}\n").as_bytes())?;
    }
    Ok(Outcome::Clean)
}

/// Builds `dataset.bundles` bundles. A single bundle is written to `out`;
/// several go to `out/bundle_NNN`, where bundle `i` uses source class
/// `source_class + i` (cycling over the classes) and seed `seed + i`.
pub fn cmd_build_dataset(cfg: &Config, out: &Path) -> Result<Vec<(PathBuf, DatasetBundle)>> {
    let d = &cfg.dataset;
    let data = match &d.input {
        Some(p) => read_categorical_csv(p)?,
        None => generate_synthetic_categorical(d.n_classes, d.per_class, d.instance_length, d.noise_sigma, cfg.seed)?,
    };
    let classes = data.classes();
    let start = classes.iter().position(|&c| c == d.source_class).ok_or_else(|| {
        Error::Dataset(format!("class {} not present (classes {classes:?})", d.source_class))
    })?;
    let mut built = Vec::new();
    for i in 0..d.bundles {
        let class = classes[(start + i) % classes.len()];
        let dir = if d.bundles == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("bundle_{i:03}"))
        };
        let b = build_bundle(&data, class, &cfg.bundle_params(i))?;
        b.write(&dir)?;
        built.push((dir, b));
    }
    Ok(built)
}

/// Writes `scores.csv`, `health.csv`, `labels.csv` and `model.json`; returns
/// the number of flagged points.
pub fn cmd_detect(standard: &Path, test: &Path, cfg: &Config, out: &Path) -> Result<usize> {
    let std_series = io::read_series_csv(standard)?;
    let test_series = io::read_series_csv(test)?;
    let spec = cfg.detector_specs()?.remove(0);
    let window = cfg.window_selectors()?[0];
    let trained = pipeline::train(&std_series, &cfg.pipeline_config(spec, window))?;
    let res = pipeline::test(&trained, &test_series)?;
    io::write_column_csv(&out.join("scores.csv"), "score", res.scores.as_slice())?;
    io::write_column_csv(&out.join("health.csv"), "health", res.health.as_slice())?;
    io::write_labels_csv(&out.join("labels.csv"), &res.labels)?;
    io::atomic_write(&out.join("model.json"), trained.to_json()?.as_bytes())?;
    Ok(res.labels.as_slice().iter().filter(|&&l| l == 1).count())
}

pub fn cmd_evaluate(scores: &Path, pred: &Path, truth: &Path, cfg: &Config) -> Result<crate::metrics::MetricRecord> {
    let s = AlignedScores::new(io::read_column_csv(scores)?)?;
    let p = io::read_labels_csv(pred)?;
    let t = io::read_labels_csv(truth)?;
    evaluate(&s, &p, &t, &cfg.metrics.base)
}

pub fn cmd_difficulty(bundle: &Path, cfg: &Config) -> Result<difficulty::DifficultyReport> {
    let b = DatasetBundle::read(bundle)?;
    let sets = b.sequence_sets(cfg.difficulty.knc_k)?;
    Ok(difficulty::report(&sets, cfg.difficulty.na_clusters, cfg.seed))
}

const BUNDLE_FILES: [&str; 4] = ["standard.csv", "test.csv", "labels.csv", "meta.json"];

/// Bundle directories matching `pattern`, sorted, with their ids.
pub fn find_bundles(pattern: &str) -> Result<Vec<(String, PathBuf)>> {
    let paths = glob::glob(pattern).map_err(|e| Error::Config(format!("bad glob `{pattern}`: {e}")))?;
    let mut dirs: Vec<PathBuf> = paths
        .filter_map(|p| p.ok())
        .filter(|p| p.join("meta.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Dataset(format!("no bundle directories match `{pattern}`")));
    }
    let mut out: Vec<(String, PathBuf)> = Vec::new();
    for d in dirs {
        let id = d
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| d.display().to_string());
        if out.iter().any(|(o, _)| *o == id) {
            return Err(Error::Dataset(format!("two bundle directories are named `{id}`")));
        }
        out.push((id, d));
    }
    Ok(out)
}

/// Runs (or reloads from cache) the matrix and writes results, summary and
/// report into `out`.
pub fn cmd_bench(pattern: &str, cfg: &Config, out: &Path) -> Result<bench::BenchSummary> {
    let bcfg = cfg.bench_config()?;
    let found = find_bundles(pattern)?;
    let mut files = Vec::new();
    let mut bundles = Vec::new();
    for (id, dir) in &found {
        for f in BUNDLE_FILES {
            let p = dir.join(f);
            let bytes = std::fs::read(&p).map_err(|e| Error::Io {
                context: format!("reading {}", p.display()),
                source: e,
            })?;
            files.push((format!("{id}/{f}"), bytes));
        }
        bundles.push(BenchBundle::from_dataset(id.clone(), &DatasetBundle::read(dir)?)?);
    }
    let key = persist::cache_key(&bcfg, &files)?;
    let records = match persist::load_cached(out, &key) {
        Some(r) => {
            eprintln!("reusing cached results in {}", out.display());
            r
        }
        None => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.bench.jobs)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let r = pool.install(|| bench::run_matrix(&bundles, &bcfg, &MonotonicClock))?;
            persist::write_records(out, &r)?;
            persist::store_cache_key(out, &key)?;
            r
        }
    };
    let knc: BTreeMap<String, Option<f64>> = bundles.iter().map(|b| (b.id.clone(), b.knc)).collect();
    let summary = bench::summarize(&records, &knc, &bcfg);
    persist::write_summary(out, &summary)?;
    let timing = bench::timing_report(&records, cfg.seed);
    report::write_report(out, &records, &summary, Some(&timing))?;
    Ok(summary)
}

pub fn cmd_report(results: &Path, out: &Path, seed: u64) -> Result<()> {
    let records = persist::read_records(results)?;
    let summary: bench::BenchSummary =
        serde_json::from_str(&io::read_to_string(&results.join(persist::SUMMARY_JSON))?)?;
    let timing = records
        .iter()
        .any(|r| r.timing.is_some())
        .then(|| bench::timing_report(&records, seed));
    report::write_report(out, &records, &summary, timing.as_ref())
}
