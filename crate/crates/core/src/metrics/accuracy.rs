use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ttest::{mean, variance};
use crate::corpus::{binary_of, Corpus, Domain, SurveyQuestion};
use crate::error::{Error, Result};
use crate::pipeline::SimulationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Exact,
    Binary,
}

impl Grouping {
    pub const ALL: [Grouping; 2] = [Grouping::Exact, Grouping::Binary];

    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::Exact => "exact",
            Grouping::Binary => "binary",
        }
    }
}

impl std::fmt::Display for Grouping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    /// Mean of the per-repetition accuracies.
    pub mean: f64,
    /// Sample standard deviation across repetitions; 0 for a single one.
    pub stddev: f64,
    pub n_scored: usize,
    pub n_excluded: usize,
    pub grouping: Grouping,
    /// `None` when pooled over all domains.
    pub domain: Option<Domain>,
    pub per_repetition: Vec<f64>,
}

/// Mean and sample standard deviation (n-1 denominator; 0 when n = 1).
pub fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        _ => (mean(values), variance(values).sqrt()),
    }
}

/// A record resolved against the corpus: its question and gold label.
pub(crate) struct Scored<'a> {
    pub record: &'a SimulationRecord,
    pub question: &'a SurveyQuestion,
    pub gold: &'a str,
}

/// Checks every record against the corpus and keeps those in `domain`.
pub(crate) fn resolve<'a>(
    records: &'a [SimulationRecord],
    corpus: &'a Corpus,
    domain: Option<Domain>,
) -> Result<Vec<Scored<'a>>> {
    let questions: HashMap<&str, &SurveyQuestion> = corpus
        .questions
        .iter()
        .map(|q| (q.question_id.as_str(), q))
        .collect();
    let gold = corpus.gold_index();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let question = questions
            .get(r.question_id.as_str())
            .copied()
            .ok_or_else(|| {
                Error::validation(
                    format!("{}/{}", r.respondent_id, r.question_id),
                    "record references a question missing from the corpus",
                )
            })?;
        if domain.is_some_and(|d| d != question.domain) {
            continue;
        }
        let gold = gold
            .get(&(r.respondent_id.as_str(), r.question_id.as_str()))
            .copied()
            .ok_or_else(|| {
                Error::validation(
                    format!("{}/{}", r.respondent_id, r.question_id),
                    "no gold answer for this respondent and question",
                )
            })?;
        if let Some(label) = &r.parsed_label {
            if !question.has_label(label) {
                return Err(Error::UnknownLabel {
                    question_id: question.question_id.clone(),
                    label: label.clone(),
                });
            }
        }
        out.push(Scored {
            record: r,
            question,
            gold,
        });
    }
    Ok(out)
}

pub(crate) fn is_hit(s: &Scored, label: &str, grouping: Grouping) -> Result<bool> {
    Ok(match grouping {
        Grouping::Exact => label == s.gold,
        Grouping::Binary => binary_of(s.question, label)? == binary_of(s.question, s.gold)?,
    })
}

/// Accuracy over answered records, averaged per repetition (records are
/// grouped by `run_id`). Unanswered records count as excluded.
pub fn accuracy(
    records: &[SimulationRecord],
    corpus: &Corpus,
    grouping: Grouping,
    domain: Option<Domain>,
) -> Result<AccuracyResult> {
    let scored = resolve(records, corpus, domain)?;
    let mut by_run: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut n_excluded = 0;
    for s in &scored {
        match &s.record.parsed_label {
            Some(label) => {
                let hit = is_hit(s, label, grouping)?;
                let e = by_run.entry(s.record.run_id.as_str()).or_default();
                e.0 += hit as usize;
                e.1 += 1;
            }
            None => n_excluded += 1,
        }
    }
    let n_scored: usize = by_run.values().map(|(_, n)| n).sum();
    if n_scored == 0 {
        return Err(Error::NoScoredRecords(match domain {
            Some(d) => format!("no answered records in domain {d}"),
            None => "no answered records".into(),
        }));
    }
    let per_repetition: Vec<f64> = by_run
        .values()
        .map(|(h, n)| *h as f64 / *n as f64)
        .collect();
    let (mean, stddev) = mean_and_stddev(&per_repetition);
    Ok(AccuracyResult {
        mean,
        stddev,
        n_scored,
        n_excluded,
        grouping,
        domain,
        per_repetition,
    })
}

pub fn exact_accuracy(records: &[SimulationRecord], corpus: &Corpus) -> Result<AccuracyResult> {
    accuracy(records, corpus, Grouping::Exact, None)
}

pub fn binary_accuracy(records: &[SimulationRecord], corpus: &Corpus) -> Result<AccuracyResult> {
    accuracy(records, corpus, Grouping::Binary, None)
}

/// Unit of observation for accuracy samples fed to a t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestUnit {
    /// One accuracy per question in the domain.
    #[default]
    Question,
    /// One accuracy per respondent.
    Respondent,
}

impl std::str::FromStr for TTestUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "question" => Ok(TTestUnit::Question),
            "respondent" => Ok(TTestUnit::Respondent),
            other => Err(Error::InvalidArgument(format!(
                "unknown t-test unit `{other}`"
            ))),
        }
    }
}

/// Accuracy per question id or per respondent id (pooled over
/// repetitions); units with no answered record are omitted.
pub fn accuracy_by_unit(
    records: &[SimulationRecord],
    corpus: &Corpus,
    grouping: Grouping,
    domain: Option<Domain>,
    unit: TTestUnit,
) -> Result<BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in resolve(records, corpus, domain)? {
        if let Some(label) = &s.record.parsed_label {
            let key = match unit {
                TTestUnit::Question => &s.record.question_id,
                TTestUnit::Respondent => &s.record.respondent_id,
            };
            let e = counts.entry(key.clone()).or_default();
            e.0 += is_hit(&s, label, grouping)? as usize;
            e.1 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(k, (h, n))| (k, h as f64 / n as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;
    use crate::pipeline::MethodKind;

    fn mini() -> Corpus {
        load_corpus(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/mini.json"
        ))
        .unwrap()
    }

    fn rec(r: &str, q: &str, label: Option<&str>, run: &str) -> SimulationRecord {
        SimulationRecord {
            respondent_id: r.into(),
            question_id: q.into(),
            method: MethodKind::Direct,
            raw_text: String::new(),
            parsed_label: label.map(String::from),
            reasoning: None,
            claim_bundles: None,
            fingerprints: vec![],
            run_id: run.into(),
        }
    }

    #[test]
    fn two_of_three() {
        // gold: m1 disagree, m2 strongly disagree, m3 strongly agree
        let records = [
            rec("m1", "gender_01", Some("disagree"), "r0"),
            rec("m2", "gender_01", Some("strongly disagree"), "r0"),
            rec("m3", "gender_01", Some("agree"), "r0"),
        ];
        let a = exact_accuracy(&records, &mini()).unwrap();
        assert!((a.mean - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!((a.n_scored, a.n_excluded, a.stddev), (3, 0, 0.0));
        let b = binary_accuracy(&records, &mini()).unwrap();
        assert_eq!(b.mean, 1.0);
    }

    #[test]
    fn binary_collapses_intensity() {
        let c = mini();
        // gold m3 = strongly agree
        let r = [rec("m3", "gender_01", Some("agree"), "r0")];
        assert_eq!(exact_accuracy(&r, &c).unwrap().mean, 0.0);
        assert_eq!(binary_accuracy(&r, &c).unwrap().mean, 1.0);
        // gold m1 = disagree
        let r = [rec("m1", "gender_01", Some("strongly disagree"), "r0")];
        assert_eq!(binary_accuracy(&r, &c).unwrap().mean, 1.0);
    }

    #[test]
    fn unanswered_are_excluded() {
        let c = mini();
        let records = [
            rec("m1", "gender_01", Some("disagree"), "r0"),
            rec("m2", "gender_01", None, "r0"),
        ];
        let a = exact_accuracy(&records, &c).unwrap();
        assert_eq!((a.mean, a.n_scored, a.n_excluded), (1.0, 1, 1));
        let none = [rec("m2", "gender_01", None, "r0")];
        assert!(matches!(
            exact_accuracy(&none, &c),
            Err(Error::NoScoredRecords(_))
        ));
    }

    #[test]
    fn missing_gold_is_an_error() {
        let c = mini();
        assert!(exact_accuracy(&[rec("nobody", "gender_01", Some("agree"), "r0")], &c).is_err());
        assert!(exact_accuracy(&[rec("m1", "nope", Some("agree"), "r0")], &c).is_err());
        assert!(exact_accuracy(&[rec("m1", "gender_01", Some("maybe"), "r0")], &c).is_err());
    }

    #[test]
    fn dispersion_across_repetitions() {
        let c = mini();
        let records = [
            rec("m1", "gender_01", Some("disagree"), "r0"),
            rec("m1", "gender_01", Some("agree"), "r1"),
        ];
        let a = exact_accuracy(&records, &c).unwrap();
        assert_eq!(a.per_repetition, vec![1.0, 0.0]);
        assert_eq!(a.mean, 0.5);
        assert!((a.stddev - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn domain_filter() {
        let c = mini();
        let records = [
            rec("m1", "gender_01", Some("disagree"), "r0"),
            rec("m1", "religion_01", Some("very important"), "r0"),
        ];
        assert_eq!(
            accuracy(&records, &c, Grouping::Exact, Some(Domain::Gender))
                .unwrap()
                .mean,
            1.0
        );
        assert_eq!(
            accuracy(&records, &c, Grouping::Exact, Some(Domain::Religion))
                .unwrap()
                .mean,
            0.0
        );
        assert!(accuracy(&records, &c, Grouping::Exact, Some(Domain::Politics)).is_err());
    }

    #[test]
    fn per_unit_accuracy() {
        let c = mini();
        let records = [
            rec("m1", "gender_01", Some("disagree"), "r0"),
            rec("m2", "gender_01", Some("agree"), "r0"),
            rec("m1", "religion_01", Some("rather important"), "r0"),
        ];
        let q = accuracy_by_unit(&records, &c, Grouping::Exact, None, TTestUnit::Question).unwrap();
        assert_eq!(q["gender_01"], 0.5);
        assert_eq!(q["religion_01"], 1.0);
        let r =
            accuracy_by_unit(&records, &c, Grouping::Exact, None, TTestUnit::Respondent).unwrap();
        assert_eq!((r["m1"], r["m2"]), (1.0, 0.0));
    }
}
