//! Survey respondent simulation with LLMs.
//!
//! Three simulation methods are provided: direct prompting, chain-of-thought
//! prompting and ClaimSim (per-feature claim elicitation, summarization, then
//! claim-grounded answering). The [`metrics`] module scores simulated answers
//! against gold survey answers.

pub mod backend;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod report;

pub use backend::{
    fingerprint, BackendError, Fingerprint, GenerationRequest, GenerationResponse, Generator,
    HttpBackend, ResponseCache, RetryPolicy, ScriptedBackend, TextBackend,
};
pub use corpus::{
    binary_of, load_corpus, sample_respondents, Binary, Corpus, DemographicProfile, Domain,
    GoldAnswer, SurveyQuestion,
};
pub use error::{Error, Result};
pub use metrics::{
    AccuracyResult, AnswerDistribution, DisparityCell, Embedding, Grouping, TTestResult,
};
pub use pipeline::{
    run_experiment, ClaimBundle, ContextMode, ExperimentConfig, FeatureSelector, MethodKind,
    RunManifest, SimulationRecord, Simulator,
};
pub use prompts::{PromptKind, RenderedPrompt, Templates};
pub use report::{evaluate, EvaluationReport};
