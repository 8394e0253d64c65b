mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use surveysim::backend::{
    Generator, HttpBackend, HttpConfig, ResponseCache, ScriptedBackend, TextBackend,
};
use surveysim::corpus::{load_corpus, sample_respondents, Corpus};
use surveysim::metrics::{compare_runs, disparity_matrix, Embedding, TTestUnit};
use surveysim::pipeline::{
    run_experiment, ContextMode, ExperimentConfig, FeatureSelector, MethodKind,
};
use surveysim::report::{
    self, disparity_csv, load_run, ttest_csv, write_plots, EvaluationReport, TTestRow,
};

use config::{parse_duration, BackendKind, Config};

#[derive(Parser)]
#[command(
    name = "surveysim",
    version,
    about = "Simulate survey respondents with LLMs and evaluate the simulations"
)]
struct Cli {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a corpus file.
    Validate {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Print the respondent ids drawn by the seeded sampler.
    Sample {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate every (sampled respondent, question) pair.
    Run(RunArgs),
    /// Score run directories against the corpus gold answers.
    Evaluate {
        /// Run directories (one per repetition, any number of methods).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated: json, csv.
        #[arg(long, value_delimiter = ',')]
        formats: Option<Vec<String>>,
        /// Divide distances by K-1.
        #[arg(long)]
        normalized: bool,
    },
    /// Welch t-tests of per-domain accuracies of two runs.
    Ttest {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_parser = parse_unit)]
        unit: Option<TTestUnit>,
        /// Write the table as CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Share of pairwise demographic group comparisons whose answer
    /// distributions differ by at least the threshold.
    Disparity {
        run: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Comma-separated demographic categories.
        #[arg(long, value_delimiter = ',')]
        categories: Option<Vec<String>>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        normalized: bool,
        /// Directory for disparity.csv and disparity.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bar charts of predicted vs gold distributions from an evaluation report.
    Plot {
        /// report.json written by `evaluate`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove cached responses.
    CachePurge {
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Only entries older than this (e.g. 90s, 15m, 2h, 1d).
        #[arg(long, value_parser = parse_duration)]
        older_than: Option<Duration>,
        /// Only entries of this method (e.g. claimsim, direct).
        #[arg(long)]
        method: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_method)]
    method: Option<MethodKind>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// A number (first N profile features) or comma-separated categories.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    claims_per_feature: Option<usize>,
    #[arg(long, value_parser = parse_context_mode)]
    context_mode: Option<ContextMode>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long)]
    base_url: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    /// Largest tolerated share of failed pairs, in [0, 1].
    #[arg(long)]
    failure_ceiling: Option<f64>,
    #[arg(long)]
    max_reasks: Option<u32>,
    #[arg(long)]
    random_seed: Option<u64>,
}

fn parse_method(s: &str) -> Result<MethodKind, String> {
    s.parse().map_err(|e: surveysim::Error| e.to_string())
}

fn parse_context_mode(s: &str) -> Result<ContextMode, String> {
    s.parse().map_err(|e: surveysim::Error| e.to_string())
}

fn parse_unit(s: &str) -> Result<TTestUnit, String> {
    s.parse().map_err(|e: surveysim::Error| e.to_string())
}

/// Exit code 1 for user and validation errors, 2 for backend failures.
enum Failure {
    User(String),
    Backend(String),
}

impl From<surveysim::Error> for Failure {
    fn from(e: surveysim::Error) -> Self {
        match e {
            surveysim::Error::Backend(_) | surveysim::Error::FailureCeiling { .. } => {
                Failure::Backend(e.to_string())
            }
            _ => Failure::User(e.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::User(s)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = Config::load(cli.config.as_deref())
        .map_err(Failure::User)
        .and_then(|cfg| dispatch(cli.command, cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Backend(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command, mut cfg: Config) -> CmdResult {
    match command {
        Command::Validate { corpus } => {
            override_opt(&mut cfg.paths.corpus, corpus);
            cmd_validate(&cfg)
        }
        Command::Sample { corpus, n, seed } => {
            override_opt(&mut cfg.paths.corpus, corpus);
            set(&mut cfg.run.n, n);
            set(&mut cfg.run.seed, seed);
            cmd_sample(&cfg)
        }
        Command::Run(args) => {
            apply_run_args(&mut cfg, args);
            cmd_run(&cfg)
        }
        Command::Evaluate {
            runs,
            corpus,
            out,
            formats,
            normalized,
        } => {
            override_opt(&mut cfg.paths.corpus, corpus);
            set(&mut cfg.report.formats, formats);
            if normalized {
                cfg.report.embedding = Embedding::Normalized;
            }
            cmd_evaluate(&cfg, &runs, &out)
        }
        Command::Ttest {
            run_a,
            run_b,
            corpus,
            unit,
            out,
        } => {
            override_opt(&mut cfg.paths.corpus, corpus);
            set(&mut cfg.report.ttest_unit, unit);
            cmd_ttest(&cfg, &run_a, &run_b, out.as_deref())
        }
        Command::Disparity {
            run,
            corpus,
            categories,
            threshold,
            normalized,
            out,
        } => {
            override_opt(&mut cfg.paths.corpus, corpus);
            set(&mut cfg.report.disparity_categories, categories);
            set(&mut cfg.report.disparity_threshold, threshold);
            if normalized {
                cfg.report.embedding = Embedding::Normalized;
            }
            cmd_disparity(&cfg, &run, out.as_deref())
        }
        Command::Plot { report, out } => cmd_plot(&report, &out),
        Command::CachePurge {
            cache_dir,
            older_than,
            method,
        } => {
            set(&mut cfg.paths.cache_dir, cache_dir);
            cmd_cache_purge(&cfg, older_than, method.as_deref())
        }
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn override_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn apply_run_args(cfg: &mut Config, a: RunArgs) {
    set(&mut cfg.run.method, a.method);
    set(&mut cfg.backend.model, a.model);
    set(&mut cfg.backend.temperature, a.temperature);
    override_opt(&mut cfg.paths.corpus, a.corpus);
    set(&mut cfg.run.n, a.n);
    set(&mut cfg.run.seed, a.seed);
    set(&mut cfg.run.repetitions, a.repetitions);
    set(&mut cfg.run.features, a.features);
    set(&mut cfg.run.claims_per_feature, a.claims_per_feature);
    set(&mut cfg.run.context_mode, a.context_mode);
    set(&mut cfg.run.concurrency, a.concurrency);
    set(&mut cfg.paths.cache_dir, a.cache_dir);
    set(&mut cfg.paths.out_dir, a.out);
    set(&mut cfg.backend.kind, a.backend);
    set(&mut cfg.backend.base_url, a.base_url);
    set(&mut cfg.backend.api_key_env, a.api_key_env);
    set(&mut cfg.run.failure_ceiling, a.failure_ceiling);
    set(&mut cfg.run.max_reasks, a.max_reasks);
    set(&mut cfg.backend.random_seed, a.random_seed);
}

fn corpus_of(cfg: &Config) -> Result<Corpus, Failure> {
    Ok(load_corpus(cfg.corpus()?)?)
}

fn cmd_validate(cfg: &Config) -> CmdResult {
    let corpus = corpus_of(cfg)?;
    println!("questions: {}", corpus.questions.len());
    for (domain, count) in corpus.domain_counts() {
        println!("  {domain}: {count}");
    }
    println!("respondents: {}", corpus.respondents.len());
    println!("gold answers: {}", corpus.gold.len());
    println!("checksum: {}", corpus.checksum());
    Ok(())
}

fn cmd_sample(cfg: &Config) -> CmdResult {
    let corpus = corpus_of(cfg)?;
    for r in sample_respondents(&corpus, cfg.run.n, cfg.run.seed)? {
        println!("{}", r.respondent_id);
    }
    Ok(())
}

fn build_backend(cfg: &Config, corpus: &Corpus) -> Result<Arc<dyn TextBackend>, Failure> {
    Ok(match cfg.backend.kind {
        BackendKind::Http => {
            let http = HttpConfig {
                base_url: cfg.backend.base_url.clone(),
                api_key_env: cfg.backend.api_key_env.clone(),
                timeout: Duration::from_secs(cfg.backend.timeout_secs),
            };
            Arc::new(HttpBackend::from_env(&http).map_err(|e| Failure::Backend(e.to_string()))?)
        }
        BackendKind::Scripted => Arc::new(ScriptedBackend::gold_oracle(corpus)),
        BackendKind::Random => Arc::new(ScriptedBackend::uniform_random(cfg.backend.random_seed)),
    })
}

fn cmd_run(cfg: &Config) -> CmdResult {
    let corpus = corpus_of(cfg)?;
    let features: FeatureSelector = cfg.run.features.parse()?;
    let experiment = ExperimentConfig {
        method: cfg.run.method,
        model: cfg.backend.model.clone(),
        temperature: cfg.backend.temperature,
        seed: cfg.run.seed,
        n: cfg.run.n,
        repetitions: cfg.run.repetitions,
        features,
        claims_per_feature: cfg.run.claims_per_feature,
        context_mode: cfg.run.context_mode,
        max_reasks: cfg.run.max_reasks,
        concurrency: cfg.run.concurrency,
        failure_ceiling: cfg.run.failure_ceiling,
        out_dir: cfg.paths.out_dir.clone(),
    };
    experiment.validate()?;
    let backend = build_backend(cfg, &corpus)?;
    let cache =
        ResponseCache::open(&cfg.paths.cache_dir).map_err(|e| Failure::User(e.to_string()))?;
    let generator = Generator::new(backend).with_cache(cache);

    let outcomes = run_experiment(&corpus, &generator, &experiment)?;
    let mut written = 0;
    for o in &outcomes {
        written += o.written;
        println!(
            "run {}: {} records written, {} resumed, {} failed, {} unanswered -> {}",
            o.manifest.run_id,
            o.written,
            o.resumed,
            o.failed.len(),
            o.manifest.unanswered,
            o.dir.display()
        );
        for (r, q, e) in &o.failed {
            log::warn!("{}: {r}/{q} failed: {e}", o.manifest.run_id);
        }
    }
    let calls = generator.backend_calls();
    println!("backend calls: {calls}");
    println!("cache hits: {}", generator.cache_hits());
    if written > 0 {
        println!("calls per pair: {}", calls as f64 / written as f64);
    }
    Ok(())
}

fn load_runs(dirs: &[PathBuf]) -> Result<Vec<report::LoadedRun>, Failure> {
    dirs.iter()
        .map(|d| load_run(d).map_err(Failure::from))
        .collect()
}

fn cmd_evaluate(cfg: &Config, run_dirs: &[PathBuf], out: &Path) -> CmdResult {
    let corpus = corpus_of(cfg)?;
    let runs = load_runs(run_dirs)?;
    let echo = serde_json::json!({
        "effective_config": cfg,
        "run_dirs": run_dirs,
    });
    let report = report::evaluate(&runs, &corpus, cfg.report.embedding, echo)?;
    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    for format in &cfg.report.formats {
        let (name, body) = match format.as_str() {
            "json" => ("report.json", report.to_json()),
            "csv" => ("report.csv", report.to_csv()?),
            other => return Err(Failure::User(format!("unknown report format `{other}`"))),
        };
        let path = out.join(name);
        std::fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }
    println!(
        "{:<9} {:<24} {:<9} {:<7} {:>6} {:>8} {:>7} {:>9}",
        "method", "model", "domain", "group", "acc", "stddev", "scored", "excluded"
    );
    for a in &report.accuracy {
        println!(
            "{:<9} {:<24} {:<9} {:<7} {:>6.3} {:>8.3} {:>7} {:>9}",
            a.method.as_str(),
            a.model,
            a.domain.as_str(),
            a.grouping.as_str(),
            a.mean,
            a.stddev,
            a.n_scored,
            a.n_excluded
        );
    }
    for d in &report.distances {
        println!(
            "wasserstein {} {} {}: {:.4}",
            d.method, d.model, d.domain, d.distance
        );
    }
    Ok(())
}

fn cmd_ttest(cfg: &Config, a: &Path, b: &Path, out: Option<&Path>) -> CmdResult {
    let corpus = corpus_of(cfg)?;
    let runs = load_runs(&[a.to_path_buf(), b.to_path_buf()])?;
    report::check_checksums(&runs, &corpus)?;
    let unit = cfg.report.ttest_unit;
    let rows: Vec<TTestRow> = compare_runs(&runs[0].records, &runs[1].records, &corpus, unit)?
        .into_iter()
        .map(|(domain, grouping, result)| TTestRow {
            domain,
            grouping,
            unit,
            result,
        })
        .collect();
    println!(
        "{:<9} {:<7} {:>10} {:>10} {:>8}",
        "domain", "group", "t", "p", "df"
    );
    for r in &rows {
        println!(
            "{:<9} {:<7} {:>10.6} {:>10.6} {:>8.3}",
            r.domain.as_str(),
            r.grouping.as_str(),
            r.result.t,
            r.result.p,
            r.result.df
        );
    }
    if let Some(path) = out {
        std::fs::write(path, ttest_csv(&rows)?).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn cmd_disparity(cfg: &Config, run_dir: &Path, out: Option<&Path>) -> CmdResult {
    let corpus = corpus_of(cfg)?;
    let run = load_run(run_dir)?;
    report::check_checksums(std::slice::from_ref(&run), &corpus)?;
    let cells = disparity_matrix(
        &run.records,
        &corpus,
        &run.manifest.model,
        &cfg.report.disparity_categories,
        cfg.report.disparity_threshold,
        cfg.report.embedding,
    )?;
    println!(
        "{:<42} {:<9} {:>9} {:>11}",
        "category", "domain", "fraction", "comparisons"
    );
    for c in &cells {
        println!(
            "{:<42} {:<9} {:>9.4} {:>11}",
            c.category,
            c.domain.as_str(),
            c.disparate_fraction,
            c.comparisons
        );
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let csv_path = dir.join("disparity.csv");
        std::fs::write(&csv_path, disparity_csv(&cells)?)
            .map_err(|e| format!("{}: {e}", csv_path.display()))?;
        let json_path = dir.join("disparity.json");
        let json = serde_json::json!({
            "threshold": cfg.report.disparity_threshold,
            "embedding": cfg.report.embedding,
            "run": run.manifest.run_id,
            "cells": cells,
        });
        std::fs::write(
            &json_path,
            serde_json::to_string_pretty(&json).expect("json") + "\n",
        )
        .map_err(|e| format!("{}: {e}", json_path.display()))?;
    }
    Ok(())
}

fn cmd_plot(report_path: &Path, out: &Path) -> CmdResult {
    let report = EvaluationReport::from_json_file(report_path)?;
    for path in write_plots(&report, out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_cache_purge(cfg: &Config, older_than: Option<Duration>, method: Option<&str>) -> CmdResult {
    let cache =
        ResponseCache::existing(&cfg.paths.cache_dir).map_err(|e| Failure::User(e.to_string()))?;
    let removed = cache
        .purge(older_than, method)
        .map_err(|e| Failure::User(e.to_string()))?;
    println!("removed {removed} entries");
    Ok(())
}
