//! Survey corpus: questions, respondent demographic profiles and gold answers.
//!
//! The on-disk format is a single JSON document with `questions`,
//! `respondents` and `gold` arrays. Demographics are stored as an array of
//! `[category, value]` pairs so that iteration order survives a round-trip.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// PRNG and sampling procedure used by [`sample_respondents`], echoed into
/// run manifests and reports.
pub const SAMPLER_ID: &str = "chacha8(seed_from_u64)+fisher-yates-shuffle(ids)+prefix-take";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Gender,
    Politics,
    Religion,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Gender, Domain::Politics, Domain::Religion];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Gender => "gender",
            Domain::Politics => "politics",
            Domain::Religion => "religion",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gender" => Ok(Domain::Gender),
            "politics" => Ok(Domain::Politics),
            "religion" => Ok(Domain::Religion),
            other => Err(Error::InvalidArgument(format!("unknown domain `{other}`"))),
        }
    }
}

/// Two-way attitudinal collapse of an ordinal label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binary {
    Agree,
    Disagree,
}

impl fmt::Display for Binary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Binary::Agree => "agree",
            Binary::Disagree => "disagree",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicProfile {
    #[serde(rename = "id")]
    pub respondent_id: String,
    #[serde(rename = "demographics")]
    pub features: Vec<(String, String)>,
}

impl DemographicProfile {
    pub fn new(respondent_id: impl Into<String>, features: Vec<(String, String)>) -> Self {
        Self {
            respondent_id: respondent_id.into(),
            features,
        }
    }

    pub fn value_of(&self, category: &str) -> Option<&str> {
        self.features
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyQuestion {
    #[serde(rename = "id")]
    pub question_id: String,
    pub domain: Domain,
    pub instruction: String,
    pub question: String,
    /// Ordered from strongest-affirmative to strongest-negative.
    pub labels: Vec<String>,
    pub binary_map: BTreeMap<String, Binary>,
}

impl SurveyQuestion {
    pub fn scale_size(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.label_index(label).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub respondent_id: String,
    pub question_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub questions: Vec<SurveyQuestion>,
    pub respondents: Vec<DemographicProfile>,
    pub gold: Vec<GoldAnswer>,
}

/// Lowercase and collapse internal whitespace.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Parse and validate a corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Corpus = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Corpus::from_raw(raw)
}

impl Corpus {
    /// Normalize labels and check every corpus invariant.
    pub fn from_raw(mut raw: Corpus) -> Result<Corpus> {
        for q in &mut raw.questions {
            q.labels = q.labels.iter().map(|l| normalize_label(l)).collect();
            q.binary_map = std::mem::take(&mut q.binary_map)
                .into_iter()
                .map(|(k, v)| (normalize_label(&k), v))
                .collect();
        }
        for g in &mut raw.gold {
            g.label = normalize_label(&g.label);
        }
        raw.validate()?;
        Ok(raw)
    }

    pub fn validate(&self) -> Result<()> {
        let mut qids = HashSet::new();
        for q in &self.questions {
            if !qids.insert(q.question_id.as_str()) {
                return Err(Error::validation(&q.question_id, "duplicate question id"));
            }
            if q.labels.len() < 2 {
                return Err(Error::validation(
                    &q.question_id,
                    "question needs at least 2 labels",
                ));
            }
            let mut seen = HashSet::new();
            for label in &q.labels {
                if label.is_empty() {
                    return Err(Error::validation(&q.question_id, "empty label"));
                }
                if !seen.insert(label.as_str()) {
                    return Err(Error::validation(
                        &q.question_id,
                        format!("duplicate label `{label}`"),
                    ));
                }
                if !q.binary_map.contains_key(label) {
                    return Err(Error::validation(
                        &q.question_id,
                        format!("binary_map has no entry for label `{label}`"),
                    ));
                }
            }
            if let Some(extra) = q.binary_map.keys().find(|k| !seen.contains(k.as_str())) {
                return Err(Error::validation(
                    &q.question_id,
                    format!("binary_map entry `{extra}` is not one of the labels"),
                ));
            }
        }

        let mut rids = HashSet::new();
        for r in &self.respondents {
            if !rids.insert(r.respondent_id.as_str()) {
                return Err(Error::validation(
                    &r.respondent_id,
                    "duplicate respondent id",
                ));
            }
            let mut cats = HashSet::new();
            for (c, _) in &r.features {
                if !cats.insert(c.as_str()) {
                    return Err(Error::validation(
                        &r.respondent_id,
                        format!("duplicate demographic category `{c}`"),
                    ));
                }
            }
        }

        let questions: HashMap<&str, &SurveyQuestion> = self
            .questions
            .iter()
            .map(|q| (q.question_id.as_str(), q))
            .collect();
        let mut pairs = HashSet::new();
        for g in &self.gold {
            let record = format!("{}/{}", g.respondent_id, g.question_id);
            if !rids.contains(g.respondent_id.as_str()) {
                return Err(Error::validation(
                    record,
                    "gold answer references unknown respondent",
                ));
            }
            let Some(q) = questions.get(g.question_id.as_str()) else {
                return Err(Error::validation(
                    record,
                    "gold answer references unknown question",
                ));
            };
            if !q.has_label(&g.label) {
                return Err(Error::validation(
                    record,
                    format!(
                        "gold label `{}` is not one of the question's labels",
                        g.label
                    ),
                ));
            }
            if !pairs.insert((g.respondent_id.as_str(), g.question_id.as_str())) {
                return Err(Error::validation(record, "duplicate gold answer"));
            }
        }
        Ok(())
    }

    pub fn question(&self, question_id: &str) -> Option<&SurveyQuestion> {
        self.questions.iter().find(|q| q.question_id == question_id)
    }

    pub fn respondent(&self, respondent_id: &str) -> Option<&DemographicProfile> {
        self.respondents
            .iter()
            .find(|r| r.respondent_id == respondent_id)
    }

    pub fn questions_in(&self, domain: Domain) -> impl Iterator<Item = &SurveyQuestion> {
        self.questions.iter().filter(move |q| q.domain == domain)
    }

    /// Question counts per domain, in domain order.
    pub fn domain_counts(&self) -> BTreeMap<Domain, usize> {
        let mut counts = BTreeMap::new();
        for q in &self.questions {
            *counts.entry(q.domain).or_insert(0) += 1;
        }
        counts
    }

    /// Gold labels keyed by `(respondent_id, question_id)`.
    pub fn gold_index(&self) -> HashMap<(&str, &str), &str> {
        self.gold
            .iter()
            .map(|g| {
                (
                    (g.respondent_id.as_str(), g.question_id.as_str()),
                    g.label.as_str(),
                )
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes")
    }

    /// SHA-256 over the canonical (normalized, compact) JSON serialization.
    pub fn checksum(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("corpus serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Draw `n` distinct respondents with a seeded shuffle of respondent ids.
pub fn sample_respondents(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<DemographicProfile>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be positive".into(),
        ));
    }
    if n > corpus.respondents.len() {
        return Err(Error::InvalidArgument(format!(
            "sample size {n} exceeds population of {} respondents",
            corpus.respondents.len()
        )));
    }
    let mut ids: Vec<&str> = corpus
        .respondents
        .iter()
        .map(|r| r.respondent_id.as_str())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let by_id: HashMap<&str, &DemographicProfile> = corpus
        .respondents
        .iter()
        .map(|r| (r.respondent_id.as_str(), r))
        .collect();
    Ok(ids[..n].iter().map(|id| by_id[id].clone()).collect())
}

/// Collapse a label to agree/disagree through the question's binary map.
pub fn binary_of(question: &SurveyQuestion, label: &str) -> Result<Binary> {
    question
        .binary_map
        .get(label)
        .copied()
        .filter(|_| question.has_label(label))
        .ok_or_else(|| Error::UnknownLabel {
            question_id: question.question_id.clone(),
            label: label.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) fn four_point() -> SurveyQuestion {
        let labels = ["strongly agree", "agree", "disagree", "strongly disagree"];
        SurveyQuestion {
            question_id: "q1".into(),
            domain: Domain::Gender,
            instruction: "Do you agree?".into(),
            question: "When a mother works for pay, the children suffer.".into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            binary_map: labels
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let b = if i < 2 {
                        Binary::Agree
                    } else {
                        Binary::Disagree
                    };
                    (l.to_string(), b)
                })
                .collect(),
        }
    }

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn fixture(name: &str) -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(name)
    }

    #[test]
    fn loads_mini_fixture() {
        let c = load_corpus(fixture("mini.json")).unwrap();
        assert_eq!(
            (c.questions.len(), c.respondents.len(), c.gold.len()),
            (2, 3, 6)
        );
    }

    #[test]
    fn loads_full_profile_fixture() {
        let c = load_corpus(fixture("wvs_synthetic.json")).unwrap();
        assert_eq!(c.questions.len(), 16);
        assert_eq!(c.respondents.len(), 100);
        assert_eq!(c.domain_counts().len(), 3);
        assert!(c.respondents.iter().all(|r| r.features.len() == 22));
    }

    #[test]
    fn rejects_gold_label_outside_scale() {
        let mut c = load_corpus(fixture("mini.json")).unwrap();
        c.gold[0].label = "maybe".into();
        let f = write_tmp(&c.to_json());
        let err = load_corpus(f.path()).unwrap_err();
        match err {
            Error::Validation { record, message } => {
                assert_eq!(
                    record,
                    format!("{}/{}", c.gold[0].respondent_id, c.gold[0].question_id)
                );
                assert!(message.contains("maybe"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let f = write_tmp("{\n  \"questions\": [\n  oops\n}");
        match load_corpus(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_corpus("/nonexistent/corpus.json"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn rejects_duplicate_categories_and_partial_binary_map() {
        let mut c = load_corpus(fixture("mini.json")).unwrap();
        c.respondents[0]
            .features
            .push(("Sex".into(), "Female".into()));
        assert!(c.validate().is_err());

        let mut c = load_corpus(fixture("mini.json")).unwrap();
        c.questions[0].binary_map.remove("agree");
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("binary_map"), "{err}");
    }

    #[test]
    fn labels_are_normalized_on_load() {
        let c = load_corpus(fixture("example_profile.json")).unwrap();
        assert_eq!(
            c.questions[0].labels,
            vec!["strongly agree", "agree", "disagree", "strongly disagree"]
        );
        assert_eq!(
            normalize_label("  Strongly   Disagree "),
            "strongly disagree"
        );
    }

    #[test]
    fn round_trip_preserves_corpus() {
        let c = load_corpus(fixture("wvs_synthetic.json")).unwrap();
        let f = write_tmp(&c.to_json());
        let again = load_corpus(f.path()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.checksum(), again.checksum());
    }

    #[test]
    fn sampling_exhaustive_deterministic_and_bounded() {
        let c = load_corpus(fixture("wvs_synthetic.json")).unwrap();
        let all = sample_respondents(&c, 100, 3).unwrap();
        let ids: HashSet<_> = all.iter().map(|r| r.respondent_id.clone()).collect();
        assert_eq!(ids.len(), 100);

        let a = sample_respondents(&c, 10, 7).unwrap();
        let b = sample_respondents(&c, 10, 7).unwrap();
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
        assert_ne!(a, sample_respondents(&c, 10, 8).unwrap());

        assert!(sample_respondents(&c, 200, 7).is_err());
        assert!(sample_respondents(&c, 0, 7).is_err());
    }

    #[test]
    fn sampling_inclusion_is_uniform() {
        let c = load_corpus(fixture("wvs_synthetic.json")).unwrap();
        let mut counts: HashMap<String, usize> = HashMap::new();
        let seeds = 10_000u64;
        for seed in 0..seeds {
            for r in sample_respondents(&c, 50, seed).unwrap() {
                *counts.entry(r.respondent_id).or_default() += 1;
            }
        }
        let expected = seeds as f64 * 0.5;
        let variance = seeds as f64 * 0.25;
        let mut chi2 = 0.0;
        for r in &c.respondents {
            let n = counts.get(&r.respondent_id).copied().unwrap_or(0) as f64;
            let freq = n / seeds as f64;
            assert!(
                (freq - 0.5).abs() <= 0.03,
                "{} included {freq}",
                r.respondent_id
            );
            chi2 += (n - expected).powi(2) / variance;
        }
        // roughly chi-square with 99 dof; the 0.999 quantile is about 148.2
        assert!(chi2 < 148.2, "chi-square {chi2}");
    }

    #[test]
    fn binary_of_maps_and_rejects() {
        let q = four_point();
        assert_eq!(binary_of(&q, "strongly agree").unwrap(), Binary::Agree);
        assert_eq!(
            binary_of(&q, "strongly disagree").unwrap(),
            Binary::Disagree
        );
        assert!(matches!(
            binary_of(&q, "maybe"),
            Err(Error::UnknownLabel { .. })
        ));
    }
}
