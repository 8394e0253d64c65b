//! Evaluation statistics over simulation records.
//!
//! All functions are pure over their inputs. Unanswered records are left out
//! of accuracies and distributions and reported as exclusions.

mod accuracy;
mod disparity;
mod distribution;
mod diversity;
mod ttest;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use accuracy::{
    accuracy, accuracy_by_unit, binary_accuracy, exact_accuracy, mean_and_stddev, AccuracyResult,
    Grouping, TTestUnit,
};
pub use disparity::{disparity_matrix, DisparityCell, DEFAULT_DISPARITY_THRESHOLD};
pub use distribution::{
    distribution_of, wasserstein_ordinal, wasserstein_with, AnswerDistribution, Embedding,
};
pub use diversity::{claim_diversity, DiversityResult, StanceRule, StanceRules};
pub use ttest::{welch_ttest, TTestResult};

use crate::corpus::{Corpus, Domain, SurveyQuestion};
use crate::error::{Error, Result};
use crate::pipeline::SimulationRecord;

/// Predicted and gold distributions for one question, with the distance
/// between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionDistance {
    pub question_id: String,
    pub predicted: AnswerDistribution,
    pub gold: AnswerDistribution,
    pub distance: f64,
}

/// Predicted distribution from answered records (pooled over repetitions)
/// and gold distribution over the respondents attempted for the question.
pub fn question_distance(
    records: &[SimulationRecord],
    corpus: &Corpus,
    question: &SurveyQuestion,
    embedding: Embedding,
) -> Result<QuestionDistance> {
    let mine: Vec<&SimulationRecord> = records
        .iter()
        .filter(|r| r.question_id == question.question_id)
        .collect();
    let predicted = distribution_of(
        mine.iter().filter_map(|r| r.parsed_label.as_deref()),
        question,
    )?;
    let attempted: BTreeSet<&str> = mine.iter().map(|r| r.respondent_id.as_str()).collect();
    let gold_labels: Vec<&str> = corpus
        .gold
        .iter()
        .filter(|g| {
            g.question_id == question.question_id && attempted.contains(g.respondent_id.as_str())
        })
        .map(|g| g.label.as_str())
        .collect();
    let gold = distribution_of(gold_labels, question)?;
    let distance = wasserstein_with(&predicted, &gold, embedding)?;
    Ok(QuestionDistance {
        question_id: question.question_id.clone(),
        predicted,
        gold,
        distance,
    })
}

/// Per-question distances for the domain's questions that have answered
/// records, in corpus order.
pub fn domain_distances(
    records: &[SimulationRecord],
    corpus: &Corpus,
    domain: Domain,
    embedding: Embedding,
) -> Result<Vec<QuestionDistance>> {
    let answered: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.parsed_label.is_some())
        .map(|r| r.question_id.as_str())
        .collect();
    corpus
        .questions_in(domain)
        .filter(|q| answered.contains(q.question_id.as_str()))
        .map(|q| question_distance(records, corpus, q, embedding))
        .collect()
}

/// Mean predicted-vs-gold distance over the domain's covered questions.
pub fn method_distance(
    records: &[SimulationRecord],
    corpus: &Corpus,
    domain: Domain,
    embedding: Embedding,
) -> Result<f64> {
    let per_question = domain_distances(records, corpus, domain, embedding)?;
    if per_question.is_empty() {
        return Err(Error::NoScoredRecords(format!(
            "no answered records in domain {domain}"
        )));
    }
    Ok(per_question.iter().map(|d| d.distance).sum::<f64>() / per_question.len() as f64)
}

/// Welch t-tests of per-unit accuracies of two record sets, one per domain
/// and grouping. Units must overlap in coverage: the two runs must have
/// answered questions in common.
pub fn compare_runs(
    a: &[SimulationRecord],
    b: &[SimulationRecord],
    corpus: &Corpus,
    unit: TTestUnit,
) -> Result<Vec<(Domain, Grouping, TTestResult)>> {
    let questions = |rs: &[SimulationRecord]| -> BTreeSet<String> {
        rs.iter()
            .filter(|r| r.is_answered())
            .map(|r| r.question_id.clone())
            .collect()
    };
    let (qa, qb) = (questions(a), questions(b));
    if qa.is_disjoint(&qb) {
        return Err(Error::InvalidArgument(
            "the two runs share no answered questions".into(),
        ));
    }
    let mut out = Vec::new();
    for domain in Domain::ALL {
        for grouping in Grouping::ALL {
            let sa = accuracy_by_unit(a, corpus, grouping, Some(domain), unit)?;
            let sb = accuracy_by_unit(b, corpus, grouping, Some(domain), unit)?;
            if sa.is_empty() && sb.is_empty() {
                continue;
            }
            let va: Vec<f64> = sa.into_values().collect();
            let vb: Vec<f64> = sb.into_values().collect();
            out.push((domain, grouping, welch_ttest(&va, &vb)?));
        }
    }
    Ok(out)
}

/// Claim bundles of ClaimSim records grouped by question id.
pub fn bundles_by_question(
    records: &[SimulationRecord],
) -> BTreeMap<String, Vec<crate::pipeline::ClaimBundle>> {
    let mut out: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for r in records {
        if let Some(bundles) = &r.claim_bundles {
            out.entry(r.question_id.clone())
                .or_default()
                .extend(bundles.iter().cloned());
        }
    }
    out
}
