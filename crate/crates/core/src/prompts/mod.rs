//! Prompt templates for the three simulation methods.
//!
//! Template text lives in resource files (`templates/*.tmpl`) listed with
//! their SHA-256 digests in `templates/MANIFEST.sha256`. The built-in set is
//! compiled in and verified against the manifest the first time it is used;
//! an alternative set can be loaded from a directory with the same layout.

mod engine;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use engine::{Bindings, Template};

use crate::corpus::{DemographicProfile, SurveyQuestion};
use crate::error::{Error, Result};

/// Counterpoint text used when a claim has none.
pub const NO_COUNTERPOINT: &str = "(none provided)";

pub const MANIFEST_FILE: &str = "MANIFEST.sha256";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Direct,
    Cot,
    ClaimGeneration,
    SummaryGeneration,
    ClaimsimAnswer,
}

impl PromptKind {
    pub const ALL: [PromptKind; 5] = [
        PromptKind::Direct,
        PromptKind::Cot,
        PromptKind::ClaimGeneration,
        PromptKind::SummaryGeneration,
        PromptKind::ClaimsimAnswer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Direct => "direct",
            PromptKind::Cot => "cot",
            PromptKind::ClaimGeneration => "claim_generation",
            PromptKind::SummaryGeneration => "summary_generation",
            PromptKind::ClaimsimAnswer => "claimsim_answer",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.tmpl", self.as_str())
    }

    /// Placeholders a template of this kind may reference.
    fn allowed(
        self,
    ) -> (
        &'static [&'static str],
        &'static [(&'static str, &'static str)],
    ) {
        const PROFILE: &[(&str, &str)] = &[("features", "category"), ("features", "value")];
        match self {
            PromptKind::Direct | PromptKind::Cot => {
                (&["domain", "instruction", "question", "labels"], PROFILE)
            }
            PromptKind::ClaimGeneration => {
                (&["feature_category", "feature_label", "question"], &[])
            }
            PromptKind::SummaryGeneration => (
                &["feature_category", "feature_label"],
                &[("claims", "claim")],
            ),
            PromptKind::ClaimsimAnswer => (
                &["domain", "instruction", "question", "labels"],
                &[
                    ("features", "category"),
                    ("features", "value"),
                    ("statements", "claim"),
                    ("statements", "counterpoint"),
                ],
            ),
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub kind: PromptKind,
    pub text: String,
    pub bindings: Bindings,
}

/// A verified set of the five templates.
#[derive(Debug, Clone)]
pub struct Templates {
    templates: BTreeMap<PromptKind, Template>,
    checksums: BTreeMap<PromptKind, String>,
}

const BUILTIN: [(PromptKind, &str); 5] = [
    (
        PromptKind::Direct,
        include_str!("../../templates/direct.tmpl"),
    ),
    (PromptKind::Cot, include_str!("../../templates/cot.tmpl")),
    (
        PromptKind::ClaimGeneration,
        include_str!("../../templates/claim_generation.tmpl"),
    ),
    (
        PromptKind::SummaryGeneration,
        include_str!("../../templates/summary_generation.tmpl"),
    ),
    (
        PromptKind::ClaimsimAnswer,
        include_str!("../../templates/claimsim_answer.tmpl"),
    ),
];
const BUILTIN_MANIFEST: &str = include_str!("../../templates/MANIFEST.sha256");

/// The compiled-in template set.
pub fn builtin() -> &'static Templates {
    static BUILTIN_SET: OnceLock<Templates> = OnceLock::new();
    BUILTIN_SET.get_or_init(|| {
        Templates::from_sources(
            BUILTIN.iter().map(|(k, s)| (*k, s.to_string())),
            BUILTIN_MANIFEST,
        )
        .expect("built-in templates match their manifest")
    })
}

fn parse_manifest(manifest: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in manifest.lines().filter(|l| !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        let (Some(digest), Some(name), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Template(format!("malformed manifest line `{line}`")));
        };
        out.insert(
            name.trim_start_matches('*').to_string(),
            digest.to_lowercase(),
        );
    }
    Ok(out)
}

impl Templates {
    /// Build a template set, checking each source against its manifest digest
    /// and its placeholders against the kind's allowed bindings.
    pub fn from_sources(
        sources: impl IntoIterator<Item = (PromptKind, String)>,
        manifest: &str,
    ) -> Result<Templates> {
        let digests = parse_manifest(manifest)?;
        let mut templates = BTreeMap::new();
        let mut checksums = BTreeMap::new();
        for (kind, source) in sources {
            let actual = hex::encode(Sha256::digest(source.as_bytes()));
            let expected = digests.get(&kind.file_name()).ok_or_else(|| {
                Error::Template(format!("{} missing from manifest", kind.file_name()))
            })?;
            if &actual != expected {
                return Err(Error::Template(format!(
                    "checksum mismatch for {}: manifest {expected}, file {actual}",
                    kind.file_name()
                )));
            }
            let template = Template::parse(&source)?;
            let (scalars, fields) = kind.allowed();
            let used = template.placeholders();
            if let Some(bad) = used.scalars.iter().find(|s| !scalars.contains(&s.as_str())) {
                return Err(Error::Template(format!(
                    "{kind}: unknown placeholder `{bad}`"
                )));
            }
            if let Some((l, f)) = used
                .list_fields
                .iter()
                .find(|(l, f)| !fields.contains(&(l.as_str(), f.as_str())))
            {
                return Err(Error::Template(format!(
                    "{kind}: unknown placeholder `{l}.{f}`"
                )));
            }
            templates.insert(kind, template);
            checksums.insert(kind, actual);
        }
        if let Some(missing) = PromptKind::ALL.iter().find(|k| !templates.contains_key(k)) {
            return Err(Error::Template(format!("no template for {missing}")));
        }
        Ok(Templates {
            templates,
            checksums,
        })
    }

    /// Load `<kind>.tmpl` files and `MANIFEST.sha256` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Templates> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        let manifest = read(MANIFEST_FILE)?;
        let mut sources = Vec::new();
        for kind in PromptKind::ALL {
            sources.push((kind, read(&kind.file_name())?));
        }
        Templates::from_sources(sources, &manifest)
    }

    pub fn checksum(&self, kind: PromptKind) -> &str {
        &self.checksums[&kind]
    }

    fn render(&self, kind: PromptKind, bindings: Bindings) -> RenderedPrompt {
        let text = self.templates[&kind]
            .render(&bindings)
            .expect("placeholders were checked when the template set was built");
        RenderedPrompt {
            kind,
            text,
            bindings,
        }
    }

    pub fn render_direct(
        &self,
        profile: &DemographicProfile,
        question: &SurveyQuestion,
    ) -> RenderedPrompt {
        self.render(PromptKind::Direct, question_bindings(profile, question))
    }

    pub fn render_cot(
        &self,
        profile: &DemographicProfile,
        question: &SurveyQuestion,
    ) -> RenderedPrompt {
        self.render(PromptKind::Cot, question_bindings(profile, question))
    }

    pub fn render_claim(&self, feature: (&str, &str), question: &SurveyQuestion) -> RenderedPrompt {
        let bindings = Bindings::default()
            .scalar("feature_category", feature.0)
            .scalar("feature_label", feature.1)
            .scalar("question", question.question.as_str());
        self.render(PromptKind::ClaimGeneration, bindings)
    }

    pub fn render_summary<S: AsRef<str>>(
        &self,
        feature: (&str, &str),
        claims: &[S],
    ) -> Result<RenderedPrompt> {
        if claims.is_empty() {
            return Err(Error::InvalidArgument(
                "summary prompt needs at least one claim".into(),
            ));
        }
        let bindings = Bindings::default()
            .scalar("feature_category", feature.0)
            .scalar("feature_label", feature.1)
            .list(
                "claims",
                claims.iter().map(|c| [("claim", single_line(c.as_ref()))]),
            );
        Ok(self.render(PromptKind::SummaryGeneration, bindings))
    }

    /// `statements` are `(claim, counterpoint)` pairs; a missing counterpoint
    /// is rendered as [`NO_COUNTERPOINT`].
    pub fn render_claimsim_answer(
        &self,
        profile: &DemographicProfile,
        question: &SurveyQuestion,
        statements: &[(String, Option<String>)],
    ) -> Result<RenderedPrompt> {
        if statements.is_empty() {
            return Err(Error::InvalidArgument(
                "ClaimSim answer prompt needs at least one statement".into(),
            ));
        }
        let bindings = question_bindings(profile, question).list(
            "statements",
            statements.iter().map(|(claim, counter)| {
                [
                    ("claim", single_line(claim)),
                    (
                        "counterpoint",
                        counter
                            .as_deref()
                            .map(single_line)
                            .unwrap_or_else(|| NO_COUNTERPOINT.to_string()),
                    ),
                ]
            }),
        );
        Ok(self.render(PromptKind::ClaimsimAnswer, bindings))
    }
}

fn question_bindings(profile: &DemographicProfile, question: &SurveyQuestion) -> Bindings {
    Bindings::default()
        .list(
            "features",
            profile
                .features
                .iter()
                .map(|(c, v)| [("category", c.clone()), ("value", v.clone())]),
        )
        .scalar("domain", question.domain.as_str())
        .scalar("instruction", question.instruction.as_str())
        .scalar("question", question.question.as_str())
        .scalar("labels", python_list(&question.labels))
}

// Bullet values must stay on one line.
fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Render labels the way Python's `repr(list_of_str)` does, e.g.
/// `['strongly agree', 'agree']`.
pub fn python_list<S: AsRef<str>>(items: &[S]) -> String {
    let parts: Vec<String> = items.iter().map(|s| python_str(s.as_ref())).collect();
    format!("[{}]", parts.join(", "))
}

fn python_str(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') {
        '"'
    } else {
        '\''
    };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// Inverse of [`python_list`] for the subset it produces.
pub fn parse_python_list(text: &str) -> Option<Vec<String>> {
    let inner = text.trim().strip_prefix('[')?.strip_suffix(']')?;
    let mut items = Vec::new();
    let mut chars = inner.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let Some(quote) = chars.next() else { break };
        if quote != '\'' && quote != '"' {
            return None;
        }
        let mut item = String::new();
        loop {
            match chars.next()? {
                '\\' => match chars.next()? {
                    'n' => item.push('\n'),
                    't' => item.push('\t'),
                    'r' => item.push('\r'),
                    c => item.push(c),
                },
                c if c == quote => break,
                c => item.push(c),
            }
        }
        items.push(item);
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.next() {
            Some(',') => continue,
            None => break,
            Some(_) => return None,
        }
    }
    Some(items)
}

pub fn render_direct(profile: &DemographicProfile, question: &SurveyQuestion) -> RenderedPrompt {
    builtin().render_direct(profile, question)
}

pub fn render_cot(profile: &DemographicProfile, question: &SurveyQuestion) -> RenderedPrompt {
    builtin().render_cot(profile, question)
}

pub fn render_claim(feature: (&str, &str), question: &SurveyQuestion) -> RenderedPrompt {
    builtin().render_claim(feature, question)
}

pub fn render_summary<S: AsRef<str>>(
    feature: (&str, &str),
    claims: &[S],
) -> Result<RenderedPrompt> {
    builtin().render_summary(feature, claims)
}

pub fn render_claimsim_answer(
    profile: &DemographicProfile,
    question: &SurveyQuestion,
    statements: &[(String, Option<String>)],
) -> Result<RenderedPrompt> {
    builtin().render_claimsim_answer(profile, question, statements)
}
