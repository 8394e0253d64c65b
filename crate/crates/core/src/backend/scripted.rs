//! Deterministic scripted backend used as a test oracle and for dry runs.
//!
//! Responses are pure functions of the request: rules are tried in insertion
//! order and the first matching rule answers; otherwise the default rule does.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fingerprint, BackendError, Fingerprint, GenerationRequest, TextBackend};
use crate::corpus::Corpus;
use crate::prompts::{parse_python_list, render_direct};

pub type Responder = Arc<dyn Fn(&GenerationRequest) -> Result<String, BackendError> + Send + Sync>;

#[derive(Clone)]
pub enum Matcher {
    Contains(String),
    Fingerprint(Fingerprint),
    Predicate(Arc<dyn Fn(&GenerationRequest) -> bool + Send + Sync>),
}

impl Matcher {
    fn matches(&self, request: &GenerationRequest) -> bool {
        match self {
            Matcher::Contains(s) => request.prompt.contains(s.as_str()),
            Matcher::Fingerprint(fp) => fingerprint(request) == *fp,
            Matcher::Predicate(p) => p(request),
        }
    }
}

pub struct ScriptedBackend {
    id: String,
    rules: Vec<(Matcher, Responder)>,
    default_rule: Responder,
    invocations: AtomicU64,
}

impl ScriptedBackend {
    /// A backend with no rules whose default response is an error.
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            rules: Vec::new(),
            default_rule: Arc::new(|_| {
                Err(BackendError::Scripted("no rule matched the request".into()))
            }),
            invocations: AtomicU64::new(0),
        }
    }

    pub fn rule(mut self, matcher: Matcher, responder: Responder) -> Self {
        self.rules.push((matcher, responder));
        self
    }

    pub fn when_contains(self, needle: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        self.rule(
            Matcher::Contains(needle.into()),
            Arc::new(move |_| Ok(text.clone())),
        )
    }

    pub fn when_fingerprint(self, fp: Fingerprint, text: impl Into<String>) -> Self {
        let text = text.into();
        self.rule(
            Matcher::Fingerprint(fp),
            Arc::new(move |_| Ok(text.clone())),
        )
    }

    pub fn with_default(
        mut self,
        f: impl Fn(&GenerationRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        self.default_rule = Arc::new(f);
        self
    }

    pub fn with_default_text(self, text: impl Into<String>) -> Self {
        let text = text.into();
        self.with_default(move |_| Ok(text.clone()))
    }

    /// Number of `complete` calls served so far.
    pub fn invocations(&self) -> u64 {
        self.invocations.load(Ordering::Relaxed)
    }

    /// Answers every survey prompt with the respondent's gold label and
    /// produces canned claims and summaries for ClaimSim intermediate calls.
    pub fn gold_oracle(corpus: &Corpus) -> Self {
        let mut gold: HashMap<(String, String), String> = HashMap::new();
        let index = corpus.gold_index();
        for r in &corpus.respondents {
            for q in &corpus.questions {
                if let Some(label) = index.get(&(r.respondent_id.as_str(), q.question_id.as_str()))
                {
                    let block = profile_block(&render_direct(r, q).text);
                    gold.insert((block, q.question.clone()), label.to_string());
                }
            }
        }
        Self::new("scripted:gold-oracle").with_default(move |req| {
            Ok(survey_response(req, |prompt| {
                let key = (profile_block(prompt), question_text(prompt)?);
                gold.get(&key).cloned()
            }))
        })
    }

    /// Picks a label uniformly at random, seeded by `seed` and the request
    /// fingerprint, so repeated requests get the same answer.
    pub fn uniform_random(seed: u64) -> Self {
        Self::new(format!("scripted:uniform-random:{seed}")).with_default(move |req| {
            let fp = fingerprint(req);
            let mut word = [0u8; 8];
            word.copy_from_slice(&fp.0[..8]);
            let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(word) ^ seed);
            Ok(survey_response(req, |prompt| {
                let labels = label_choices(prompt)?;
                if labels.is_empty() {
                    return None;
                }
                Some(labels[rng.random_range(0..labels.len())].clone())
            }))
        })
    }

    /// Answers every survey prompt with `label` (when it is one of the
    /// offered choices), e.g. to build homogeneous runs.
    pub fn constant_label(label: impl Into<String>) -> Self {
        let label = label.into();
        Self::new(format!("scripted:constant:{label}")).with_default(move |req| {
            Ok(survey_response(req, |prompt| {
                label_choices(prompt)?
                    .contains(&label)
                    .then(|| label.clone())
            }))
        })
    }
}

impl TextBackend for ScriptedBackend {
    fn backend_id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        for (matcher, responder) in &self.rules {
            if matcher.matches(request) {
                return responder(request);
            }
        }
        (self.default_rule)(request)
    }
}

/// Canned response for any of the five prompt shapes; `answer` picks the
/// label for answer prompts.
fn survey_response(req: &GenerationRequest, answer: impl FnOnce(&str) -> Option<String>) -> String {
    let prompt = req.prompt.as_str();
    if prompt.starts_with("# Instruction\nSuppose you are a respondent") {
        let feature = prompt.lines().nth(2).unwrap_or("").trim_start_matches("- ");
        return format!(
            "- Topic: background\n- Claim: Scripted claim {} from the perspective of {feature}.\n- Counterpoint: Scripted counterpoint {}.",
            req.sample_index, req.sample_index
        );
    }
    if prompt.starts_with("# Task\nBelow are some claims") {
        let feature = prompt.lines().nth(2).unwrap_or("").trim_start_matches("- ");
        let n = prompt
            .lines()
            .filter(|l| l.starts_with("- Claim: "))
            .count();
        return format!("- Summary: Scripted summary of {n} claims for {feature}.");
    }
    match answer(prompt) {
        Some(label) => format!("- Label: {label}\n- Reasoning: Scripted answer."),
        None => "I am unable to choose.".to_string(),
    }
}

/// The demographic bullet lines following the two-line profile header.
pub(crate) fn profile_block(prompt: &str) -> String {
    prompt
        .lines()
        .skip(2)
        .take_while(|l| l.starts_with("- "))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn question_text(prompt: &str) -> Option<String> {
    let mut lines = prompt.lines();
    lines.find(|l| *l == "# Question")?;
    lines.next().map(str::to_string)
}

pub(crate) fn label_choices(prompt: &str) -> Option<Vec<String>> {
    let mut lines = prompt.lines();
    lines.find(|l| *l == "# Label Choices")?;
    lines.next()?;
    parse_python_list(lines.next()?)
}
