use orient_core::corpus::{load_corpus, save_corpus, SchemaOptions};
use orient_core::model::{load_model, save_model, write_model};
use orient_core::synth::{generate_planted_corpus, GroundTruth, PlantedSpec};
use orient_core::{fit_orientation, score_corpus, Role, RunConfig};

#[test]
fn large_corpus_roundtrips() {
    let spec = PlantedSpec {
        n_conversations: 10_000,
        turns_per_conversation: 3,
        ..PlantedSpec::default_with_seed(2)
    };
    let corpus = generate_planted_corpus(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.jsonl");
    save_corpus(&corpus, &path).unwrap();
    let (back, report) = load_corpus(&path, &SchemaOptions::default()).unwrap();
    assert!(report.errors.is_empty());
    assert_eq!(back.conversations.len(), 10_000);
    assert_eq!(back, corpus);
}

#[test]
fn same_seed_same_bytes() {
    let corpus = generate_planted_corpus(&PlantedSpec::default_with_seed(8)).unwrap();
    let bytes = |full| {
        let model = fit_orientation(&corpus, &RunConfig::counseling()).unwrap();
        let mut out = Vec::new();
        write_model(&model, full, &mut out).unwrap();
        out
    };
    assert_eq!(bytes(false), bytes(false));
    let regenerated = generate_planted_corpus(&PlantedSpec::default_with_seed(8)).unwrap();
    let model = fit_orientation(&regenerated, &RunConfig::counseling()).unwrap();
    let mut again = Vec::new();
    write_model(&model, false, &mut again).unwrap();
    assert_eq!(again, bytes(false));
}

#[test]
fn saved_model_scores_like_the_fitted_one() {
    let spec = PlantedSpec::default_with_seed(9);
    let corpus = generate_planted_corpus(&spec).unwrap();
    let model = fit_orientation(&corpus, &RunConfig::counseling()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path, false).unwrap();
    let loaded = load_model(&path).unwrap();
    for p in GroundTruth::of(&spec).phrasings.keys() {
        assert!(loaded.stats_for(p).is_some(), "{p} missing from the model file");
    }
    let a = score_corpus(&corpus, &model, Role::Agent, false).unwrap();
    let b = score_corpus(&corpus, &loaded, Role::Agent, false).unwrap();
    assert_eq!(a, b);
}
