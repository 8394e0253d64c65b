use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::accuracy::resolve;
use super::distribution::{distribution_of, wasserstein_with, Embedding};
use crate::corpus::{Corpus, Domain};
use crate::error::{Error, Result};
use crate::pipeline::SimulationRecord;

pub const DEFAULT_DISPARITY_THRESHOLD: f64 = 0.05;

/// Slack for distances that equal the threshold up to rounding.
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityCell {
    pub model: String,
    pub domain: Domain,
    pub category: String,
    pub disparate_fraction: f64,
    /// Number of (group pair, question) comparisons.
    pub comparisons: usize,
    pub disparate: usize,
}

/// For each category and domain: group answered records by the respondent's
/// value in the category, compare every pair of groups on every question
/// of the domain, and report the share of comparisons with W >= threshold.
pub fn disparity_matrix(
    records: &[SimulationRecord],
    corpus: &Corpus,
    model: &str,
    categories: &[String],
    threshold: f64,
    embedding: Embedding,
) -> Result<Vec<DisparityCell>> {
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold must be >= 0 (got {threshold})"
        )));
    }
    let scored = resolve(records, corpus, None)?;
    let mut cells = Vec::new();
    for category in categories {
        let value_of: HashMap<&str, &str> = corpus
            .respondents
            .iter()
            .filter_map(|r| r.value_of(category).map(|v| (r.respondent_id.as_str(), v)))
            .collect();
        if value_of.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "category `{category}` is missing from every profile"
            )));
        }
        // question id -> group value -> answered labels
        let mut grouped: BTreeMap<&str, BTreeMap<&str, Vec<&str>>> = BTreeMap::new();
        for s in &scored {
            let (Some(label), Some(value)) = (
                s.record.parsed_label.as_deref(),
                value_of.get(s.record.respondent_id.as_str()),
            ) else {
                continue;
            };
            grouped
                .entry(s.question.question_id.as_str())
                .or_default()
                .entry(value)
                .or_default()
                .push(label);
        }
        for domain in Domain::ALL {
            let mut comparisons = 0;
            let mut disparate = 0;
            let mut seen = false;
            for question in corpus.questions_in(domain) {
                seen = true;
                let Some(groups) = grouped.get(question.question_id.as_str()) else {
                    continue;
                };
                let dists = groups
                    .values()
                    .map(|labels| distribution_of(labels.iter().copied(), question))
                    .collect::<Result<Vec<_>>>()?;
                for i in 0..dists.len() {
                    for j in i + 1..dists.len() {
                        comparisons += 1;
                        if wasserstein_with(&dists[i], &dists[j], embedding)?
                            >= threshold - TOLERANCE
                        {
                            disparate += 1;
                        }
                    }
                }
            }
            if !seen {
                continue;
            }
            cells.push(DisparityCell {
                model: model.to_string(),
                domain,
                category: category.clone(),
                disparate_fraction: if comparisons == 0 {
                    0.0
                } else {
                    disparate as f64 / comparisons as f64
                },
                comparisons,
                disparate,
            });
        }
    }
    Ok(cells)
}
