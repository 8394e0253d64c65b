//! Experiment loop: every (sampled respondent, question) pair for each
//! repetition, persisted incrementally to a run directory.
//!
//! Layout of one run directory:
//!
//! ```text
//! <out>/<method>-<model>-s<seed>-r<repetition>/
//!     manifest.json
//!     records.jsonl   (append-only, one record per line)
//! ```
//!
//! Pairs already present in `records.jsonl` are skipped on re-run, and the
//! response cache makes regenerated pairs free.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ContextMode, FeatureSelector, MethodKind, SimulationRecord, Simulator};
use crate::backend::{BackendError, Generator, DEFAULT_TEMPERATURE};
use crate::corpus::{sample_respondents, Corpus, SAMPLER_ID};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: MethodKind,
    pub model: String,
    pub temperature: f64,
    pub seed: u64,
    /// Respondents sampled from the corpus.
    pub n: usize,
    pub repetitions: u32,
    pub features: FeatureSelector,
    pub claims_per_feature: usize,
    pub context_mode: ContextMode,
    pub max_reasks: u32,
    /// Worker pool width.
    pub concurrency: usize,
    /// Largest tolerated share of failed pairs, in [0, 1].
    pub failure_ceiling: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: MethodKind::Direct,
            model: "gpt-4o-mini".into(),
            temperature: DEFAULT_TEMPERATURE,
            seed: 0,
            n: 100,
            repetitions: 3,
            features: FeatureSelector::default(),
            claims_per_feature: super::DEFAULT_CLAIMS_PER_FEATURE,
            context_mode: ContextMode::Summary,
            max_reasks: super::DEFAULT_MAX_REASKS,
            concurrency: 8,
            failure_ceiling: 0.05,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.model.trim().is_empty() {
            return bad("model must be non-empty");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must lie in [0, 2]");
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.claims_per_feature == 0 {
            return bad("claims per feature must be at least 1");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.failure_ceiling) {
            return bad("failure ceiling must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub method: MethodKind,
    pub model: String,
    pub temperature: f64,
    pub seed: u64,
    pub corpus_checksum: String,
    pub respondent_count: usize,
    /// Sampled respondents in sampled order.
    pub respondent_ids: Vec<String>,
    pub question_ids: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub repetition_index: u32,
    pub backend_id: String,
    pub sampler: String,
    pub features: FeatureSelector,
    pub claims_per_feature: usize,
    pub context_mode: ContextMode,
    pub max_reasks: u32,
    /// Records with no parsed label.
    #[serde(default)]
    pub unanswered: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// Records produced by this invocation.
    pub written: usize,
    /// Pairs skipped because a record already existed.
    pub resumed: usize,
    pub failed: Vec<(String, String, String)>,
}

fn slug(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '_' {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

pub fn run_id(method: MethodKind, model: &str, seed: u64, repetition: u32) -> String {
    format!("{method}-{}-s{seed}-r{repetition}", slug(model))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&tmp, json + "\n").map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
}

pub fn load_manifest(dir: impl AsRef<Path>) -> Result<RunManifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Records of a run directory sorted by (question, respondent). A truncated
/// final line, left by an interrupted writer, is ignored.
pub fn load_records(dir: impl AsRef<Path>) -> Result<Vec<SimulationRecord>> {
    let path = dir.as_ref().join(RECORDS_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(&path, e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(&path, e))?;
    let last = lines.len().saturating_sub(1);
    let mut records = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SimulationRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if i == last => {
                log::warn!("{}: ignoring truncated final record", path.display())
            }
            Err(e) => {
                return Err(Error::Parse {
                    path: path.clone(),
                    line: i + 1,
                    column: e.column(),
                    message: e.to_string(),
                })
            }
        }
    }
    records.sort_by(|a, b| {
        (&a.question_id, &a.respondent_id).cmp(&(&b.question_id, &b.respondent_id))
    });
    Ok(records)
}

/// Append-only record sink; each record is written with one `write_all`.
struct RecordSink {
    file: Mutex<File>,
    path: PathBuf,
}

impl RecordSink {
    fn open(path: PathBuf) -> Result<Self> {
        // drop a truncated final line left by an interrupted writer
        if let Ok(bytes) = std::fs::read(&path) {
            if bytes.last().is_some_and(|b| *b != b'\n') {
                let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
                let f = OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .map_err(|e| Error::io(&path, e))?;
                f.set_len(keep as u64).map_err(|e| Error::io(&path, e))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            file: Mutex::new(file),
            path,
        })
    }

    fn append(&self, record: &SimulationRecord) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())
            .map_err(|e| Error::io(&self.path, e))?;
        f.flush().map_err(|e| Error::io(&self.path, e))
    }
}

enum PairResult {
    Done,
    Failed(String, String, String),
}

/// Run `config.repetitions` repetitions of `config.method` over `config.n`
/// sampled respondents and every corpus question.
pub fn run_experiment(
    corpus: &Corpus,
    generator: &Generator,
    config: &ExperimentConfig,
) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    let respondents = sample_respondents(corpus, config.n, config.seed)?;
    let checksum = corpus.checksum();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;

    let mut outcomes = Vec::with_capacity(config.repetitions as usize);
    for repetition in 0..config.repetitions {
        let id = run_id(config.method, &config.model, config.seed, repetition);
        let dir = config.out_dir.join(&id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let started_at = match load_manifest(&dir) {
            Ok(previous) => {
                if previous.corpus_checksum != checksum {
                    return Err(Error::ChecksumMismatch(format!(
                        "run directory {} was produced from a different corpus",
                        dir.display()
                    )));
                }
                previous.started_at
            }
            Err(_) => Utc::now(),
        };
        let mut manifest = RunManifest {
            run_id: id.clone(),
            method: config.method,
            model: config.model.clone(),
            temperature: config.temperature,
            seed: config.seed,
            corpus_checksum: checksum.clone(),
            respondent_count: respondents.len(),
            respondent_ids: respondents
                .iter()
                .map(|r| r.respondent_id.clone())
                .collect(),
            question_ids: corpus
                .questions
                .iter()
                .map(|q| q.question_id.clone())
                .collect(),
            started_at,
            finished_at: None,
            repetition_index: repetition,
            backend_id: generator.backend_id(),
            sampler: SAMPLER_ID.to_string(),
            features: config.features.clone(),
            claims_per_feature: config.claims_per_feature,
            context_mode: config.context_mode,
            max_reasks: config.max_reasks,
            unanswered: 0,
        };
        write_manifest(&dir, &manifest)?;

        let existing = load_records(&dir)?;
        let done: HashSet<(String, String)> = existing
            .iter()
            .map(|r| (r.respondent_id.clone(), r.question_id.clone()))
            .collect();
        let pending: Vec<_> = respondents
            .iter()
            .flat_map(|r| corpus.questions.iter().map(move |q| (r, q)))
            .filter(|(r, q)| !done.contains(&(r.respondent_id.clone(), q.question_id.clone())))
            .collect();
        let resumed = respondents.len() * corpus.questions.len() - pending.len();

        let sink = RecordSink::open(dir.join(RECORDS_FILE))?;
        let simulator = Simulator {
            generator,
            templates: crate::prompts::builtin(),
            model: config.model.clone(),
            temperature: config.temperature,
            max_reasks: config.max_reasks,
            claims_per_feature: config.claims_per_feature,
            context_mode: config.context_mode,
            repetition,
            run_id: id.clone(),
        };
        log::info!(
            "{id}: {} pairs to simulate, {resumed} already recorded",
            pending.len()
        );

        let results: Vec<PairResult> = pool.install(|| {
            pending
                .par_iter()
                .map(|(profile, question)| {
                    match simulator.simulate(config.method, profile, question, &config.features) {
                        Ok(record) => {
                            sink.append(&record)?;
                            Ok(PairResult::Done)
                        }
                        Err(Error::Backend(BackendError::Authentication(m))) => {
                            Err(Error::Backend(BackendError::Authentication(m)))
                        }
                        Err(e @ Error::Backend(_)) => Ok(PairResult::Failed(
                            profile.respondent_id.clone(),
                            question.question_id.clone(),
                            e.to_string(),
                        )),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()
        })?;

        let mut failed = Vec::new();
        let mut written = 0;
        for r in results {
            match r {
                PairResult::Done => written += 1,
                PairResult::Failed(a, b, c) => failed.push((a, b, c)),
            }
        }
        let total = respondents.len() * corpus.questions.len();
        if failed.len() as f64 > config.failure_ceiling * total as f64 {
            let summary = failed
                .iter()
                .take(5)
                .map(|(r, q, e)| format!("{r}/{q}: {e}"))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::FailureCeiling {
                failed: failed.len(),
                total,
                ceiling: config.failure_ceiling * 100.0,
                summary,
            });
        }

        manifest.unanswered = load_records(&dir)?
            .iter()
            .filter(|r| !r.is_answered())
            .count();
        if failed.is_empty() {
            manifest.finished_at = Some(Utc::now());
        }
        write_manifest(&dir, &manifest)?;
        outcomes.push(RunOutcome {
            dir,
            manifest,
            written,
            resumed,
            failed,
        });
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ResponseCache, RetryPolicy, ScriptedBackend};
    use crate::corpus::load_corpus;
    use std::sync::Arc;

    fn mini() -> Corpus {
        load_corpus(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/mini.json"
        ))
        .unwrap()
    }

    fn config(out: &Path, method: MethodKind) -> ExperimentConfig {
        ExperimentConfig {
            method,
            model: "scripted/model".into(),
            n: 3,
            repetitions: 1,
            concurrency: 2,
            out_dir: out.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn run_id_slug() {
        assert_eq!(
            run_id(MethodKind::Cot, "GPT-4o mini", 7, 2),
            "cot-gpt-4o-mini-s7-r2"
        );
    }

    #[test]
    fn direct_run_writes_one_record_per_pair() {
        let c = mini();
        let out = tempfile::tempdir().unwrap();
        let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&c)));
        let outcomes = run_experiment(&c, &g, &config(out.path(), MethodKind::Direct)).unwrap();
        assert_eq!(outcomes.len(), 1);
        let records = load_records(&outcomes[0].dir).unwrap();
        assert_eq!(records.len(), 6);
        assert!(records
            .iter()
            .all(|r| r.claim_bundles.is_none() && r.is_answered()));
        let m = load_manifest(&outcomes[0].dir).unwrap();
        assert_eq!(m.corpus_checksum, c.checksum());
        assert!(m.finished_at.is_some());
    }

    #[test]
    fn repetitions_share_checksum() {
        let c = mini();
        let out = tempfile::tempdir().unwrap();
        let g = Generator::new(Arc::new(ScriptedBackend::uniform_random(1)));
        let cfg = ExperimentConfig {
            repetitions: 3,
            ..config(out.path(), MethodKind::Cot)
        };
        let outcomes = run_experiment(&c, &g, &cfg).unwrap();
        assert_eq!(outcomes.len(), 3);
        let ids: HashSet<_> = outcomes.iter().map(|o| o.manifest.run_id.clone()).collect();
        assert_eq!(ids.len(), 3);
        assert!(outcomes
            .iter()
            .all(|o| o.manifest.corpus_checksum == c.checksum()));
    }

    #[test]
    fn resume_skips_recorded_pairs_and_cache_replays() {
        let c = mini();
        let out = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        let backend = Arc::new(ScriptedBackend::uniform_random(5));
        let g =
            Generator::new(backend.clone()).with_cache(ResponseCache::open(cache.path()).unwrap());
        let cfg = config(out.path(), MethodKind::Direct);
        let first = run_experiment(&c, &g, &cfg).unwrap();
        let before = load_records(&first[0].dir).unwrap();
        let calls = backend.invocations();

        let second = run_experiment(&c, &g, &cfg).unwrap();
        assert_eq!((second[0].written, second[0].resumed), (0, 6));
        assert_eq!(backend.invocations(), calls);

        std::fs::remove_file(first[0].dir.join(RECORDS_FILE)).unwrap();
        run_experiment(&c, &g, &cfg).unwrap();
        assert_eq!(backend.invocations(), calls);
        assert_eq!(load_records(&first[0].dir).unwrap(), before);
    }

    #[test]
    fn failure_ceiling_aborts() {
        let c = mini();
        let out = tempfile::tempdir().unwrap();
        let b = ScriptedBackend::new("flaky")
            .when_contains("- Sex: Female", "")
            .with_default_text("- Label: agree");
        let g = Generator::new(Arc::new(b)).with_retry(RetryPolicy::no_delay());
        let err = run_experiment(&c, &g, &config(out.path(), MethodKind::Direct)).unwrap_err();
        assert!(matches!(err, Error::FailureCeiling { .. }), "{err}");

        let lenient = ExperimentConfig {
            failure_ceiling: 1.0,
            ..config(out.path(), MethodKind::Direct)
        };
        let ok = run_experiment(&c, &g, &lenient).unwrap();
        assert!(!ok[0].failed.is_empty());
        assert!(ok[0].manifest.finished_at.is_none());
    }

    #[test]
    fn authentication_aborts_immediately() {
        let c = mini();
        let out = tempfile::tempdir().unwrap();
        let b = ScriptedBackend::new("auth")
            .with_default(|_| Err(BackendError::Authentication("bad key".into())));
        let g = Generator::new(Arc::new(b));
        let lenient = ExperimentConfig {
            failure_ceiling: 1.0,
            ..config(out.path(), MethodKind::Direct)
        };
        let err = run_experiment(&c, &g, &lenient).unwrap_err();
        assert!(matches!(
            err,
            Error::Backend(BackendError::Authentication(_))
        ));
    }

    #[test]
    fn checksum_mismatch_on_resume() {
        let c = mini();
        let out = tempfile::tempdir().unwrap();
        let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&c)));
        let cfg = config(out.path(), MethodKind::Direct);
        run_experiment(&c, &g, &cfg).unwrap();
        let mut other = c.clone();
        other.questions[0].question.push_str(" (edited)");
        assert!(matches!(
            run_experiment(&other, &g, &cfg),
            Err(Error::ChecksumMismatch(_))
        ));
    }

    #[test]
    fn truncated_tail_is_ignored() {
        let c = mini();
        let out = tempfile::tempdir().unwrap();
        let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&c)));
        let cfg = config(out.path(), MethodKind::Direct);
        let o = run_experiment(&c, &g, &cfg).unwrap();
        let path = o[0].dir.join(RECORDS_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"respondent_id\": \"m1\", \"quest").unwrap();
        assert_eq!(load_records(&o[0].dir).unwrap().len(), 6);
        run_experiment(&c, &g, &cfg).unwrap();
        assert_eq!(load_records(&o[0].dir).unwrap().len(), 6);
    }

    #[test]
    fn invalid_config_rejected() {
        let c = mini();
        let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&c)));
        let out = tempfile::tempdir().unwrap();
        for cfg in [
            ExperimentConfig {
                n: 0,
                ..config(out.path(), MethodKind::Direct)
            },
            ExperimentConfig {
                n: 4,
                ..config(out.path(), MethodKind::Direct)
            },
            ExperimentConfig {
                concurrency: 0,
                ..config(out.path(), MethodKind::Direct)
            },
            ExperimentConfig {
                temperature: 2.5,
                ..config(out.path(), MethodKind::Direct)
            },
        ] {
            assert!(run_experiment(&c, &g, &cfg).is_err());
        }
    }
}
