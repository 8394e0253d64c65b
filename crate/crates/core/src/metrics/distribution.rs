use serde::{Deserialize, Serialize};

use crate::corpus::SurveyQuestion;
use crate::error::{Error, Result};

/// How ordinal labels are placed on the real line for Wasserstein distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embedding {
    /// Positions 1..K with unit spacing.
    #[default]
    Unit,
    /// Unit positions divided by K-1, so distances lie in [0, 1].
    Normalized,
}

impl Embedding {
    pub fn describe(self) -> &'static str {
        match self {
            Embedding::Unit => "labels at integer positions 1..K, unit spacing",
            Embedding::Normalized => "labels at positions (i-1)/(K-1), spacing 1/(K-1)",
        }
    }

    fn spacing(self, k: usize) -> f64 {
        match self {
            Embedding::Unit => 1.0,
            Embedding::Normalized => 1.0 / (k as f64 - 1.0),
        }
    }
}

impl std::str::FromStr for Embedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(Embedding::Unit),
            "normalized" => Ok(Embedding::Normalized),
            other => Err(Error::InvalidArgument(format!(
                "unknown embedding `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerDistribution {
    pub support: Vec<String>,
    pub mass: Vec<f64>,
}

impl AnswerDistribution {
    /// Build from raw masses; they are checked to be non-negative and to sum to 1.
    pub fn new(support: Vec<String>, mass: Vec<f64>) -> Result<Self> {
        if support.len() < 2 || support.len() != mass.len() {
            return Err(Error::InvalidArgument(format!(
                "distribution needs K >= 2 labels with one mass each (got {} labels, {} masses)",
                support.len(),
                mass.len()
            )));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidArgument(
                "masses must be finite and non-negative".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "masses sum to {total}, not 1"
            )));
        }
        Ok(Self { support, mass })
    }

    /// Normalize per-label counts.
    pub fn from_counts(support: Vec<String>, counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::NoScoredRecords(
                "cannot build a distribution from zero answers".into(),
            ));
        }
        let mass = counts.iter().map(|c| *c as f64 / total as f64).collect();
        Self::new(support, mass)
    }

    pub fn k(&self) -> usize {
        self.mass.len()
    }

    fn cdf(&self) -> impl Iterator<Item = f64> + '_ {
        self.mass.iter().scan(0.0, |acc, m| {
            *acc += m;
            Some(*acc)
        })
    }
}

/// Histogram of `labels` over the question's ordered label set. Labels
/// outside the set are an error.
pub fn distribution_of<'a>(
    labels: impl IntoIterator<Item = &'a str>,
    question: &SurveyQuestion,
) -> Result<AnswerDistribution> {
    let mut counts = vec![0usize; question.scale_size()];
    for label in labels {
        let i = question
            .label_index(label)
            .ok_or_else(|| Error::UnknownLabel {
                question_id: question.question_id.clone(),
                label: label.to_string(),
            })?;
        counts[i] += 1;
    }
    if counts.iter().all(|c| *c == 0) {
        return Err(Error::NoScoredRecords(format!(
            "no answers for question `{}`",
            question.question_id
        )));
    }
    AnswerDistribution::from_counts(question.labels.clone(), &counts)
}

/// W1 between two distributions on the same ordinal scale, computed as the
/// sum of absolute CDF differences times the label spacing.
pub fn wasserstein_with(
    p: &AnswerDistribution,
    q: &AnswerDistribution,
    embedding: Embedding,
) -> Result<f64> {
    if p.k() != q.k() || p.support != q.support {
        return Err(Error::MismatchedSupport {
            left: p.k(),
            right: q.k(),
        });
    }
    let k = p.k();
    let sum: f64 = p
        .cdf()
        .zip(q.cdf())
        .take(k - 1)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum * embedding.spacing(k))
}

/// W1 with the default unit-spacing embedding.
pub fn wasserstein_ordinal(p: &AnswerDistribution, q: &AnswerDistribution) -> Result<f64> {
    wasserstein_with(p, q, Embedding::Unit)
}
