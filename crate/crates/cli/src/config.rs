//! Effective configuration: flags override the TOML file, which overrides
//! built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surveysim::backend::DEFAULT_API_KEY_ENV;
use surveysim::metrics::{Embedding, TTestUnit, DEFAULT_DISPARITY_THRESHOLD};
use surveysim::pipeline::{
    ContextMode, FeatureSelector, MethodKind, DEFAULT_CLAIMS_PER_FEATURE, DEFAULT_MAX_REASKS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Chat-completions endpoint; credential from the configured env var.
    Http,
    /// Answers every question with the gold label.
    Scripted,
    /// Uniformly random label per request.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Seed of the random backend.
    pub random_seed: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: BackendKind::Http,
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.7,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 180,
            random_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub method: MethodKind,
    pub n: usize,
    pub seed: u64,
    pub repetitions: u32,
    /// A number (first N profile features) or a comma-separated category list.
    pub features: String,
    pub claims_per_feature: usize,
    pub context_mode: ContextMode,
    pub concurrency: usize,
    pub failure_ceiling: f64,
    pub max_reasks: u32,
}

impl Default for RunSection {
    fn default() -> Self {
        let features = match FeatureSelector::default() {
            FeatureSelector::Categories(c) => c.join(","),
            FeatureSelector::FirstN(n) => n.to_string(),
        };
        Self {
            method: MethodKind::Direct,
            n: 100,
            seed: 0,
            repetitions: 3,
            features,
            claims_per_feature: DEFAULT_CLAIMS_PER_FEATURE,
            context_mode: ContextMode::Summary,
            concurrency: 8,
            failure_ceiling: 0.05,
            max_reasks: DEFAULT_MAX_REASKS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            corpus: None,
            cache_dir: PathBuf::from(".surveysim-cache"),
            out_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Any of "json", "csv".
    pub formats: Vec<String>,
    pub embedding: Embedding,
    pub disparity_threshold: f64,
    pub disparity_categories: Vec<String>,
    pub ttest_unit: TTestUnit,
}

impl Default for ReportSection {
    fn default() -> Self {
        let categories = match FeatureSelector::default() {
            FeatureSelector::Categories(c) => c,
            FeatureSelector::FirstN(_) => Vec::new(),
        };
        Self {
            formats: vec!["json".into(), "csv".into()],
            embedding: Embedding::Unit,
            disparity_threshold: DEFAULT_DISPARITY_THRESHOLD,
            disparity_categories: categories,
            ttest_unit: TTestUnit::Question,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub backend: BackendSection,
    pub run: RunSection,
    pub paths: PathsSection,
    pub report: ReportSection,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn corpus(&self) -> Result<&Path, String> {
        self.paths.corpus.as_deref().ok_or_else(|| {
            "no corpus given (use --corpus or paths.corpus in the config file)".to_string()
        })
    }
}

/// Durations such as `90`, `90s`, `15m`, `2h`, `1d`.
pub fn parse_duration(s: &str) -> Result<std::time::Duration, String> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num.parse().map_err(|_| format!("invalid duration `{s}`"))?;
    let secs = match unit.trim() {
        "" | "s" => 1,
        "m" => 60,
        "h" => 3600,
        "d" => 86_400,
        "w" => 7 * 86_400,
        _ => {
            return Err(format!(
                "invalid duration unit in `{s}` (use s, m, h, d or w)"
            ))
        }
    };
    Ok(std::time::Duration::from_secs(n * secs))
}
