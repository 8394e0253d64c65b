//! Claim stance diversity, using a keyword rule file.
//!
//! Rule file shape:
//!
//! ```json
//! {
//!   "default": [{"stance": "agree", "keywords": ["benefit"]}],
//!   "questions": {
//!     "gender_01": [
//!       {"stance": "disagree", "keywords": ["not harm", "no negative"]},
//!       {"stance": "agree", "keywords": ["suffer", "neglect"]}
//!     ]
//!   }
//! }
//! ```
//!
//! Rules for a question are tried in order before the defaults; the first
//! rule with a keyword contained in the lowercased claim assigns the stance.
//! Claims matching no rule are unclassified and ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Binary;
use crate::error::{Error, Result};
use crate::pipeline::ClaimBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceRule {
    pub stance: Binary,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StanceRules {
    #[serde(default)]
    pub default: Vec<StanceRule>,
    #[serde(default)]
    pub questions: BTreeMap<String, Vec<StanceRule>>,
}

impl StanceRules {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn classify(&self, question_id: &str, claim: &str) -> Option<Binary> {
        let claim = claim.to_lowercase();
        self.questions
            .get(question_id)
            .into_iter()
            .flatten()
            .chain(&self.default)
            .find(|r| r.keywords.iter().any(|k| claim.contains(&k.to_lowercase())))
            .map(|r| r.stance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityResult {
    pub fraction: f64,
    pub diverse: BTreeMap<String, bool>,
}

fn majority(stances: &[Binary]) -> Option<Binary> {
    let agree = stances.iter().filter(|s| **s == Binary::Agree).count();
    let disagree = stances.len() - agree;
    match agree.cmp(&disagree) {
        std::cmp::Ordering::Greater => Some(Binary::Agree),
        std::cmp::Ordering::Less => Some(Binary::Disagree),
        std::cmp::Ordering::Equal => None,
    }
}

/// Share of questions whose claims hold at least two stances: some bundle
/// mixes stances, or two bundles disagree in majority stance.
pub fn claim_diversity(
    bundles: &BTreeMap<String, Vec<ClaimBundle>>,
    rules: &StanceRules,
) -> Result<DiversityResult> {
    if bundles.is_empty() {
        return Err(Error::InvalidArgument(
            "claim diversity of an empty bundle set is undefined".into(),
        ));
    }
    let mut diverse = BTreeMap::new();
    for (question_id, list) in bundles {
        let mut majorities = Vec::new();
        let mut mixed = false;
        for bundle in list {
            let stances: Vec<Binary> = bundle
                .claims
                .iter()
                .filter_map(|c| rules.classify(question_id, c))
                .collect();
            mixed |= stances.contains(&Binary::Agree) && stances.contains(&Binary::Disagree);
            majorities.extend(majority(&stances));
        }
        let split = majorities.contains(&Binary::Agree) && majorities.contains(&Binary::Disagree);
        diverse.insert(question_id.clone(), mixed || split);
    }
    let fraction = diverse.values().filter(|d| **d).count() as f64 / diverse.len() as f64;
    Ok(DiversityResult { fraction, diverse })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> StanceRules {
        serde_json::from_str(
            r#"{"questions": {"q": [
                {"stance": "disagree", "keywords": ["not suffer", "thrive"]},
                {"stance": "agree", "keywords": ["suffer", "neglect"]}
            ]}}"#,
        )
        .unwrap()
    }

    fn bundle(claims: &[&str]) -> ClaimBundle {
        ClaimBundle {
            feature: ("Sex".into(), "Male".into()),
            claims: claims.iter().map(|c| c.to_string()).collect(),
            counterpoints: vec![None; claims.len()],
            summary: "s".into(),
        }
    }

    #[test]
    fn first_rule_wins() {
        let r = rules();
        assert_eq!(
            r.classify("q", "Children do NOT suffer"),
            Some(Binary::Disagree)
        );
        assert_eq!(r.classify("q", "Children suffer"), Some(Binary::Agree));
        assert_eq!(r.classify("q", "Unrelated"), None);
        assert_eq!(r.classify("other", "Children suffer"), None);
    }

    #[test]
    fn single_stance_is_not_diverse() {
        let b = BTreeMap::from([(
            "q".to_string(),
            vec![bundle(&["kids suffer"; 5]), bundle(&["neglect"; 5])],
        )]);
        let d = claim_diversity(&b, &rules()).unwrap();
        assert_eq!(d.fraction, 0.0);
    }

    #[test]
    fn four_to_one_is_diverse() {
        let b = BTreeMap::from([(
            "q".to_string(),
            vec![bundle(&[
                "suffer",
                "suffer",
                "neglect",
                "suffer",
                "kids thrive",
            ])],
        )]);
        assert_eq!(claim_diversity(&b, &rules()).unwrap().fraction, 1.0);
    }

    #[test]
    fn majority_split_across_features() {
        let b = BTreeMap::from([
            (
                "q".to_string(),
                vec![bundle(&["suffer"]), bundle(&["thrive"])],
            ),
            ("r".to_string(), vec![bundle(&["x"])]),
        ]);
        let d = claim_diversity(&b, &rules()).unwrap();
        assert_eq!(d.fraction, 0.5);
        assert!(d.diverse["q"] && !d.diverse["r"]);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(claim_diversity(&BTreeMap::new(), &rules()).is_err());
    }
}
