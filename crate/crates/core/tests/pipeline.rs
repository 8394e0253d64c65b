mod common;

use std::sync::Arc;

use surveysim::backend::{Generator, ResponseCache, ScriptedBackend};
use surveysim::corpus::{binary_of, sample_respondents};
use surveysim::metrics::{binary_accuracy, exact_accuracy, method_distance, Embedding};
use surveysim::pipeline::{
    load_records, run_experiment, ExperimentConfig, FeatureSelector, MethodKind, Simulator,
};

use common::*;

fn config(method: MethodKind, n: usize, out: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        method,
        n,
        repetitions: 1,
        out_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn calls_per_pair_by_method() {
    let corpus = wvs();
    let profile = &corpus.respondents[0];
    let question = &corpus.questions[0];
    for (method, expected) in [
        (MethodKind::Direct, 1),
        (MethodKind::Cot, 1),
        (MethodKind::Claimsim, 31),
    ] {
        let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&corpus)));
        let sim = Simulator::new(&g, "m");
        let r = sim
            .simulate(method, profile, question, &FeatureSelector::FirstN(5))
            .unwrap();
        assert!(r.is_answered());
        assert_eq!(g.backend_calls(), expected, "{method}");
    }
}

#[test]
fn claimsim_calls_scale_with_features_and_claims() {
    let corpus = wvs();
    for (f, k) in [(1usize, 1usize), (2, 3), (3, 5)] {
        let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&corpus)));
        let mut sim = Simulator::new(&g, "m");
        sim.claims_per_feature = k;
        sim.simulate_claimsim(
            &corpus.respondents[0],
            &corpus.questions[0],
            &FeatureSelector::FirstN(f),
        )
        .unwrap();
        assert_eq!(g.backend_calls() as usize, f * (k + 1) + 1);
    }
}

#[test]
fn warm_cache_makes_no_calls() {
    let corpus = wvs();
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let run = |expect: u64| {
        let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&corpus)))
            .with_cache(cache.clone());
        let sim = Simulator::new(&g, "m");
        let r = sim
            .simulate_claimsim(
                &corpus.respondents[0],
                &corpus.questions[0],
                &FeatureSelector::FirstN(5),
            )
            .unwrap();
        assert_eq!(g.backend_calls(), expect);
        r
    };
    let cold = run(31);
    let warm = run(0);
    assert_eq!(cold, warm);
}

#[test]
fn oracle_run_over_full_corpus() {
    let corpus = wvs();
    let out = tempfile::tempdir().unwrap();
    let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&corpus)));
    let outcomes =
        run_experiment(&corpus, &g, &config(MethodKind::Direct, 100, out.path())).unwrap();
    assert_eq!(outcomes.len(), 1);
    let records = load_records(&outcomes[0].dir).unwrap();
    assert_eq!(records.len(), 1600);
    assert_eq!(g.backend_calls(), 1600);
    assert_eq!(exact_accuracy(&records, &corpus).unwrap().mean, 1.0);
    assert_eq!(binary_accuracy(&records, &corpus).unwrap().mean, 1.0);
    for domain in surveysim::corpus::Domain::ALL {
        assert_eq!(
            method_distance(&records, &corpus, domain, Embedding::Unit).unwrap(),
            0.0
        );
    }
    for r in &records {
        let q = corpus.question(&r.question_id).unwrap();
        binary_of(q, r.parsed_label.as_deref().unwrap()).unwrap();
    }
}

#[test]
fn cache_is_transparent() {
    let corpus = wvs();
    let (plain_out, cached_out, cache_dir) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    let plain = Generator::new(Arc::new(ScriptedBackend::uniform_random(3)));
    let cached = Generator::new(Arc::new(ScriptedBackend::uniform_random(3)))
        .with_cache(ResponseCache::open(cache_dir.path()).unwrap());
    let a = run_experiment(
        &corpus,
        &plain,
        &config(MethodKind::Cot, 10, plain_out.path()),
    )
    .unwrap();
    let b = run_experiment(
        &corpus,
        &cached,
        &config(MethodKind::Cot, 10, cached_out.path()),
    )
    .unwrap();
    assert_eq!(
        load_records(&a[0].dir).unwrap(),
        load_records(&b[0].dir).unwrap()
    );
}

#[test]
fn runs_are_deterministic_and_resumable() {
    let corpus = wvs();
    let (out_a, out_b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg_a = ExperimentConfig {
        repetitions: 2,
        ..config(MethodKind::Direct, 7, out_a.path())
    };
    let cfg_b = ExperimentConfig {
        out_dir: out_b.path().to_path_buf(),
        ..cfg_a.clone()
    };
    let gen = || Generator::new(Arc::new(ScriptedBackend::uniform_random(9)));
    let a = run_experiment(&corpus, &gen(), &cfg_a).unwrap();
    let b = run_experiment(&corpus, &gen(), &cfg_b).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(load_records(&x.dir).unwrap(), load_records(&y.dir).unwrap());
        assert_eq!(x.manifest.respondent_ids, y.manifest.respondent_ids);
    }
    // Repetitions draw different samples for the same pairs.
    assert_ne!(
        load_records(&a[0].dir).unwrap(),
        load_records(&a[1].dir).unwrap()
    );

    let g = gen();
    let again = run_experiment(&corpus, &g, &cfg_a).unwrap();
    assert_eq!(g.backend_calls(), 0);
    assert!(again.iter().all(|o| o.written == 0 && o.resumed == 7 * 16));
}

#[test]
fn methods_do_not_share_cache_entries() {
    let corpus = wvs();
    let cache_dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(cache_dir.path()).unwrap();
    let profile = &corpus.respondents[0];
    let question = &corpus.questions[0];
    let g =
        Generator::new(Arc::new(ScriptedBackend::gold_oracle(&corpus))).with_cache(cache.clone());
    let sim = Simulator::new(&g, "m");
    sim.simulate_direct(profile, question).unwrap();
    sim.simulate_cot(profile, question).unwrap();
    assert_eq!(g.backend_calls(), 2);
    assert_eq!(g.cache_hits(), 0);
}

#[test]
fn sample_matches_manifest() {
    let corpus = wvs();
    let out = tempfile::tempdir().unwrap();
    let g = Generator::new(Arc::new(ScriptedBackend::gold_oracle(&corpus)));
    let cfg = ExperimentConfig {
        seed: 42,
        ..config(MethodKind::Direct, 5, out.path())
    };
    let outcome = &run_experiment(&corpus, &g, &cfg).unwrap()[0];
    let expected: Vec<String> = sample_respondents(&corpus, 5, 42)
        .unwrap()
        .into_iter()
        .map(|p| p.respondent_id)
        .collect();
    assert_eq!(outcome.manifest.respondent_ids, expected);
    assert_eq!(outcome.manifest.corpus_checksum, corpus.checksum());
}
