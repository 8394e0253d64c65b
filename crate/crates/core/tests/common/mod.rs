//! Shared builders for integration tests and the acceptance suite.
#![allow(dead_code)]

use std::path::PathBuf;

use surveysim::corpus::{
    load_corpus, Binary, Corpus, DemographicProfile, Domain, GoldAnswer, SurveyQuestion,
};
use surveysim::pipeline::{MethodKind, SimulationRecord};

pub const FOUR_POINT: [&str; 4] = ["strongly agree", "agree", "disagree", "strongly disagree"];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn test_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn wvs() -> Corpus {
    load_corpus(fixture("wvs_synthetic.json")).unwrap()
}

pub fn mini() -> Corpus {
    load_corpus(fixture("mini.json")).unwrap()
}

pub fn four_point(id: &str, domain: Domain) -> SurveyQuestion {
    let binary_map = FOUR_POINT
        .iter()
        .enumerate()
        .map(|(i, l)| {
            (
                l.to_string(),
                if i < 2 {
                    Binary::Agree
                } else {
                    Binary::Disagree
                },
            )
        })
        .collect();
    SurveyQuestion {
        question_id: id.into(),
        domain,
        instruction: "Do you strongly agree, agree, disagree, or strongly disagree?".into(),
        question: format!("Statement {id}."),
        labels: FOUR_POINT.iter().map(|s| s.to_string()).collect(),
        binary_map,
    }
}

/// Respondents `r000..` with a single `Group` feature; `groups` gives
/// (value, size) in order.
pub fn grouped_respondents(groups: &[(&str, usize)]) -> Vec<DemographicProfile> {
    let mut out = Vec::new();
    for (value, size) in groups {
        for _ in 0..*size {
            let id = format!("r{:03}", out.len());
            out.push(DemographicProfile::new(
                id,
                vec![("Group".into(), value.to_string())],
            ));
        }
    }
    out
}

/// Corpus over `questions` where every respondent's gold answer is `gold`.
pub fn uniform_gold_corpus(
    questions: Vec<SurveyQuestion>,
    respondents: Vec<DemographicProfile>,
    gold: &str,
) -> Corpus {
    let gold = respondents
        .iter()
        .flat_map(|r| {
            questions.iter().map(|q| GoldAnswer {
                respondent_id: r.respondent_id.clone(),
                question_id: q.question_id.clone(),
                label: gold.into(),
            })
        })
        .collect();
    Corpus::from_raw(Corpus {
        questions,
        respondents,
        gold,
    })
    .unwrap()
}

pub fn record(
    respondent: &str,
    question: &str,
    label: Option<&str>,
    run_id: &str,
) -> SimulationRecord {
    SimulationRecord {
        respondent_id: respondent.into(),
        question_id: question.into(),
        method: MethodKind::Direct,
        raw_text: label.map(|l| format!("- Label: {l}")).unwrap_or_default(),
        parsed_label: label.map(str::to_string),
        reasoning: None,
        claim_bundles: None,
        fingerprints: Vec::new(),
        run_id: run_id.into(),
    }
}

/// Records for one question where consecutive respondents get labels by
/// `counts` (label index -> count), in label order.
pub fn records_by_counts(
    respondents: &[DemographicProfile],
    question: &str,
    counts: &[(usize, usize)],
    run_id: &str,
) -> Vec<SimulationRecord> {
    let mut ids = respondents.iter().map(|r| r.respondent_id.as_str());
    let mut out = Vec::new();
    for (label, n) in counts {
        for _ in 0..*n {
            out.push(record(
                ids.next().unwrap(),
                question,
                Some(FOUR_POINT[*label]),
                run_id,
            ));
        }
    }
    out
}

/// Two gender questions, three groups of 20/20/25 respondents.
///
/// Pairwise distances between the group answer distributions:
/// q1: A-B 0.05, A-C 0.04, B-C 0.01; q2: A-B 0.10, A-C 0.00, B-C 0.10.
/// At threshold 0.05 three of six comparisons are disparate.
pub fn disparity_fixture() -> (Corpus, Vec<SimulationRecord>) {
    let respondents = grouped_respondents(&[("A", 20), ("B", 20), ("C", 25)]);
    let (a, rest) = respondents.split_at(20);
    let (b, c) = rest.split_at(20);
    let mut records = Vec::new();
    // q1: A all agree; B one disagree; C one disagree.
    records.extend(records_by_counts(a, "q1", &[(1, 20)], "x"));
    records.extend(records_by_counts(b, "q1", &[(1, 19), (2, 1)], "x"));
    records.extend(records_by_counts(c, "q1", &[(1, 24), (2, 1)], "x"));
    // q2: A all agree; B two strongly agree; C all agree.
    records.extend(records_by_counts(a, "q2", &[(1, 20)], "x"));
    records.extend(records_by_counts(b, "q2", &[(0, 2), (1, 18)], "x"));
    records.extend(records_by_counts(c, "q2", &[(1, 25)], "x"));
    let corpus = uniform_gold_corpus(
        vec![
            four_point("q1", Domain::Gender),
            four_point("q2", Domain::Gender),
        ],
        respondents,
        "agree",
    );
    (corpus, records)
}

/// Optimal 1-D transport cost by matching mass left to right, with ground
/// cost |i - j| between label positions.
pub fn greedy_transport(p: &[f64], q: &[f64]) -> f64 {
    let (mut p, mut q) = (p.to_vec(), q.to_vec());
    let (mut i, mut j, mut cost) = (0, 0, 0.0);
    while i < p.len() && j < q.len() {
        let m = p[i].min(q[j]);
        cost += m * (i as f64 - j as f64).abs();
        p[i] -= m;
        q[j] -= m;
        if p[i] <= 1e-15 {
            i += 1;
        }
        if q[j] <= 1e-15 {
            j += 1;
        }
    }
    cost
}

#[derive(serde::Deserialize)]
pub struct WelchCase {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

#[derive(serde::Deserialize)]
pub struct WelchReference {
    pub spec_example: WelchCase,
    pub random: Vec<WelchCase>,
}

pub fn welch_reference() -> WelchReference {
    let text = std::fs::read_to_string(test_fixture("welch_reference.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn example_profile() -> Corpus {
    load_corpus(fixture("example_profile.json")).unwrap()
}

pub const SUMMARIES: [&str; 5] = [
    "Men of this background tend to see a working mother as a strain on young children.",
    "People born in the 1940s mostly hold that children need a parent at home.",
    "Claims split: university education brings both support for working mothers and concern for childcare.",
    "Immigrants from East Asia emphasise family duty, with some valuing dual incomes.",
    "Protestant views are mixed, balancing family roles against economic need.",
];

/// The five rendered prompts for the example profile, keyed by golden file.
pub fn golden_renders() -> Vec<(&'static str, surveysim::prompts::RenderedPrompt)> {
    use surveysim::prompts;
    let c = example_profile();
    let (r, q) = (&c.respondents[0], &c.questions[0]);
    let claims: Vec<String> = (1..=5)
        .map(|i| format!("Claim number {i} about working mothers."))
        .collect();
    let statements: Vec<(String, Option<String>)> = SUMMARIES
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                s.to_string(),
                (i % 2 == 0).then(|| format!("Counterpoint {i}.")),
            )
        })
        .collect();
    vec![
        ("direct.txt", prompts::render_direct(r, q)),
        ("cot.txt", prompts::render_cot(r, q)),
        (
            "claim_generation.txt",
            prompts::render_claim(("Sex", "Male"), q),
        ),
        (
            "summary_generation.txt",
            prompts::render_summary(("Sex", "Male"), &claims).unwrap(),
        ),
        (
            "claimsim_answer.txt",
            prompts::render_claimsim_answer(r, q, &statements).unwrap(),
        ),
    ]
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}
