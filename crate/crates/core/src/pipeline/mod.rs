//! The three simulation methods and the experiment loop that drives them.

mod parse;
mod run;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use parse::{parse_claim, parse_label, parse_summary};
pub use run::{
    load_manifest, load_records, run_experiment, run_id, ExperimentConfig, RunManifest, RunOutcome,
    MANIFEST_FILE, RECORDS_FILE,
};

use crate::backend::{
    Fingerprint, GenerationRequest, Generator, ANSWER_MAX_OUTPUT, CLAIM_MAX_OUTPUT,
    DEFAULT_TEMPERATURE,
};
use crate::corpus::{DemographicProfile, SurveyQuestion};
use crate::error::{Error, Result};
use crate::prompts::{self, PromptKind, Templates};

/// Re-asks after an unparseable answer before the pair is recorded as
/// unanswered.
pub const DEFAULT_MAX_REASKS: u32 = 3;
pub const DEFAULT_CLAIMS_PER_FEATURE: usize = 5;

/// Categories used for ClaimSim claims unless configured otherwise.
pub const DEFAULT_CLAIM_FEATURES: [&str; 5] = [
    "Sex",
    "Year of birth",
    "Highest educational level: Respondent",
    "Religious denominations - major groups",
    "Country of birth: Respondent",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Direct,
    Cot,
    Claimsim,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::Direct, MethodKind::Cot, MethodKind::Claimsim];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Direct => "direct",
            MethodKind::Cot => "cot",
            MethodKind::Claimsim => "claimsim",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(MethodKind::Direct),
            "cot" => Ok(MethodKind::Cot),
            "claimsim" => Ok(MethodKind::Claimsim),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// What the ClaimSim answer prompt receives as its statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    /// One statement per feature: the summary, with no counterpoint.
    #[default]
    Summary,
    /// Every elicited claim with its counterpoint.
    Claims,
}

impl std::str::FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "summary" => Ok(ContextMode::Summary),
            "claims" => Ok(ContextMode::Claims),
            other => Err(Error::InvalidArgument(format!(
                "unknown context mode `{other}`"
            ))),
        }
    }
}

/// Which demographic features get claims in ClaimSim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelector {
    /// Named categories, in the given order; categories a profile lacks are skipped.
    Categories(Vec<String>),
    /// The first `n` features in profile order.
    FirstN(usize),
}

impl Default for FeatureSelector {
    fn default() -> Self {
        FeatureSelector::Categories(
            DEFAULT_CLAIM_FEATURES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
    }
}

impl FeatureSelector {
    pub fn select(&self, profile: &DemographicProfile) -> Result<Vec<(String, String)>> {
        let features: Vec<(String, String)> = match self {
            FeatureSelector::Categories(cats) => cats
                .iter()
                .filter_map(|c| profile.value_of(c).map(|v| (c.clone(), v.to_string())))
                .collect(),
            FeatureSelector::FirstN(n) => profile.features.iter().take(*n).cloned().collect(),
        };
        if features.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "feature selector picks no features for respondent `{}`",
                profile.respondent_id
            )));
        }
        Ok(features)
    }
}

impl std::str::FromStr for FeatureSelector {
    type Err = Error;

    /// A number selects the first N profile features; anything else is a
    /// comma-separated category list.
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(n) = s.trim().parse::<usize>() {
            return Ok(FeatureSelector::FirstN(n));
        }
        let cats: Vec<String> = s
            .split(',')
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        if cats.is_empty() {
            return Err(Error::InvalidArgument("empty feature list".into()));
        }
        Ok(FeatureSelector::Categories(cats))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimBundle {
    pub feature: (String, String),
    pub claims: Vec<String>,
    pub counterpoints: Vec<Option<String>>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub respondent_id: String,
    pub question_id: String,
    pub method: MethodKind,
    pub raw_text: String,
    pub parsed_label: Option<String>,
    pub reasoning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_bundles: Option<Vec<ClaimBundle>>,
    pub fingerprints: Vec<Fingerprint>,
    pub run_id: String,
}

impl SimulationRecord {
    pub fn is_answered(&self) -> bool {
        self.parsed_label.is_some()
    }
}

/// Per-call settings shared by the simulation methods.
#[derive(Clone)]
pub struct Simulator<'a> {
    pub generator: &'a Generator,
    pub templates: &'a Templates,
    pub model: String,
    pub temperature: f64,
    pub max_reasks: u32,
    pub claims_per_feature: usize,
    pub context_mode: ContextMode,
    /// Offsets every sample index so repetitions draw fresh samples.
    pub repetition: u32,
    pub run_id: String,
}

impl<'a> Simulator<'a> {
    pub fn new(generator: &'a Generator, model: impl Into<String>) -> Self {
        Self {
            generator,
            templates: prompts::builtin(),
            model: model.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_reasks: DEFAULT_MAX_REASKS,
            claims_per_feature: DEFAULT_CLAIMS_PER_FEATURE,
            context_mode: ContextMode::Summary,
            repetition: 0,
            run_id: String::new(),
        }
    }

    fn attempts(&self) -> u64 {
        self.max_reasks as u64 + 1
    }

    /// Sample indices are laid out as `repetition * per_repetition + local`.
    fn sample_index(&self, per_repetition: u64, local: u64) -> u64 {
        self.repetition as u64 * per_repetition + local
    }

    fn request(&self, prompt: &str, method: MethodKind, kind: PromptKind) -> GenerationRequest {
        let budget = match kind {
            PromptKind::ClaimGeneration | PromptKind::SummaryGeneration => CLAIM_MAX_OUTPUT,
            _ => ANSWER_MAX_OUTPUT,
        };
        GenerationRequest::new(&self.model, prompt)
            .with_temperature(self.temperature)
            .with_max_output(budget)
            .with_tag(format!("{method}/{kind}"))
    }

    /// Ask until a label parses or the re-ask budget is spent.
    fn answer(
        &self,
        prompt: &prompts::RenderedPrompt,
        method: MethodKind,
        question: &SurveyQuestion,
        fingerprints: &mut Vec<Fingerprint>,
    ) -> Result<(String, Option<(String, Option<String>)>)> {
        let base = self.request(&prompt.text, method, prompt.kind);
        let mut raw = String::new();
        for attempt in 0..self.attempts() {
            let req = base
                .clone()
                .with_sample_index(self.sample_index(self.attempts(), attempt));
            let resp = self.generator.generate(&req)?;
            fingerprints.push(resp.request_fingerprint);
            raw = resp.text;
            if let Some(parsed) = parse_label(&raw, &question.labels) {
                return Ok((raw, Some(parsed)));
            }
            log::debug!(
                "unparseable answer for {}/{} (attempt {})",
                method,
                question.question_id,
                attempt + 1
            );
        }
        Ok((raw, None))
    }

    fn record(
        &self,
        profile: &DemographicProfile,
        question: &SurveyQuestion,
        method: MethodKind,
        raw_text: String,
        parsed: Option<(String, Option<String>)>,
        claim_bundles: Option<Vec<ClaimBundle>>,
        fingerprints: Vec<Fingerprint>,
    ) -> SimulationRecord {
        let (parsed_label, reasoning) = match parsed {
            Some((l, r)) => (Some(l), r),
            None => (None, None),
        };
        SimulationRecord {
            respondent_id: profile.respondent_id.clone(),
            question_id: question.question_id.clone(),
            method,
            raw_text,
            parsed_label,
            reasoning,
            claim_bundles,
            fingerprints,
            run_id: self.run_id.clone(),
        }
    }

    pub fn simulate_direct(
        &self,
        profile: &DemographicProfile,
        question: &SurveyQuestion,
    ) -> Result<SimulationRecord> {
        let prompt = self.templates.render_direct(profile, question);
        let mut fps = Vec::new();
        let (raw, parsed) = self.answer(&prompt, MethodKind::Direct, question, &mut fps)?;
        Ok(self.record(
            profile,
            question,
            MethodKind::Direct,
            raw,
            parsed,
            None,
            fps,
        ))
    }

    pub fn simulate_cot(
        &self,
        profile: &DemographicProfile,
        question: &SurveyQuestion,
    ) -> Result<SimulationRecord> {
        let prompt = self.templates.render_cot(profile, question);
        let mut fps = Vec::new();
        let (raw, parsed) = self.answer(&prompt, MethodKind::Cot, question, &mut fps)?;
        Ok(self.record(profile, question, MethodKind::Cot, raw, parsed, None, fps))
    }

    /// `k` claim samples for one feature, issued concurrently. The summary is
    /// left empty. Returns the bundle and the request fingerprints in sample
    /// order.
    pub fn elicit_claims(
        &self,
        feature: (&str, &str),
        question: &SurveyQuestion,
        k: usize,
    ) -> Result<(ClaimBundle, Vec<Fingerprint>)> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "claims per feature must be at least 1".into(),
            ));
        }
        let prompt = self.templates.render_claim(feature, question);
        let base = self.request(&prompt.text, MethodKind::Claimsim, prompt.kind);
        let per_repetition = k as u64 * self.attempts();
        let samples: Vec<(String, Option<String>, Vec<Fingerprint>)> = (0..k as u64)
            .into_par_iter()
            .map(|i| {
                let mut fps = Vec::new();
                let mut last = String::new();
                for attempt in 0..self.attempts() {
                    let local = attempt * k as u64 + i;
                    let req = base
                        .clone()
                        .with_sample_index(self.sample_index(per_repetition, local));
                    let resp = self.generator.generate(&req)?;
                    fps.push(resp.request_fingerprint);
                    if let Some((claim, counter)) = parse_claim(&resp.text) {
                        return Ok((claim, counter, fps));
                    }
                    last = resp.text;
                }
                Ok((last.trim().to_string(), None, fps))
            })
            .collect::<Result<_>>()?;

        let mut claims = Vec::with_capacity(k);
        let mut counterpoints = Vec::with_capacity(k);
        let mut fingerprints = Vec::new();
        for (claim, counter, fps) in samples {
            claims.push(claim);
            counterpoints.push(counter);
            fingerprints.extend(fps);
        }
        let bundle = ClaimBundle {
            feature: (feature.0.to_string(), feature.1.to_string()),
            claims,
            counterpoints,
            summary: String::new(),
        };
        Ok((bundle, fingerprints))
    }

    /// One summary call; falls back to the whole response when it has no
    /// `Summary:` line.
    pub fn summarize_claims(&self, mut bundle: ClaimBundle) -> Result<(ClaimBundle, Fingerprint)> {
        let feature = (bundle.feature.0.as_str(), bundle.feature.1.as_str());
        let prompt = self.templates.render_summary(feature, &bundle.claims)?;
        let req = self
            .request(&prompt.text, MethodKind::Claimsim, prompt.kind)
            .with_sample_index(self.sample_index(1, 0));
        let resp = self.generator.generate(&req)?;
        bundle.summary = parse_summary(&resp.text).unwrap_or_else(|| resp.text.trim().to_string());
        Ok((bundle, resp.request_fingerprint))
    }

    pub fn simulate_claimsim(
        &self,
        profile: &DemographicProfile,
        question: &SurveyQuestion,
        selector: &FeatureSelector,
    ) -> Result<SimulationRecord> {
        let features = selector.select(profile)?;
        let bundles: Vec<(ClaimBundle, Vec<Fingerprint>)> = features
            .par_iter()
            .map(|(c, v)| {
                let (bundle, mut fps) = self
                    .elicit_claims((c, v), question, self.claims_per_feature)
                    .map_err(|e| annotate(e, c, &profile.respondent_id, &question.question_id))?;
                let (bundle, fp) = self
                    .summarize_claims(bundle)
                    .map_err(|e| annotate(e, c, &profile.respondent_id, &question.question_id))?;
                fps.push(fp);
                Ok((bundle, fps))
            })
            .collect::<Result<_>>()?;

        let statements: Vec<(String, Option<String>)> = match self.context_mode {
            ContextMode::Summary => bundles
                .iter()
                .map(|(b, _)| (b.summary.clone(), None))
                .collect(),
            ContextMode::Claims => bundles
                .iter()
                .flat_map(|(b, _)| {
                    b.claims
                        .iter()
                        .cloned()
                        .zip(b.counterpoints.iter().cloned())
                })
                .collect(),
        };
        let prompt = self
            .templates
            .render_claimsim_answer(profile, question, &statements)?;
        let mut fingerprints: Vec<Fingerprint> = bundles
            .iter()
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let (raw, parsed) =
            self.answer(&prompt, MethodKind::Claimsim, question, &mut fingerprints)?;
        let bundles = bundles.into_iter().map(|(b, _)| b).collect();
        Ok(self.record(
            profile,
            question,
            MethodKind::Claimsim,
            raw,
            parsed,
            Some(bundles),
            fingerprints,
        ))
    }

    pub fn simulate(
        &self,
        method: MethodKind,
        profile: &DemographicProfile,
        question: &SurveyQuestion,
        selector: &FeatureSelector,
    ) -> Result<SimulationRecord> {
        match method {
            MethodKind::Direct => self.simulate_direct(profile, question),
            MethodKind::Cot => self.simulate_cot(profile, question),
            MethodKind::Claimsim => self.simulate_claimsim(profile, question, selector),
        }
    }
}

fn annotate(e: Error, category: &str, respondent: &str, question: &str) -> Error {
    match e {
        Error::Backend(b) => {
            log::warn!("ClaimSim bundle for `{category}` failed on {respondent}/{question}: {b}");
            Error::Backend(b)
        }
        other => other,
    }
}
