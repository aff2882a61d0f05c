use std::collections::HashMap;

use orient_core::synth::{generate_planted_corpus, GroundTruth, PlantedKind, PlantedSpec};
use orient_core::{fit_orientation, score_corpus, score_utterance, Role, RunConfig, Utterance};

fn config() -> RunConfig {
    RunConfig {
        min_support: 5,
        ..RunConfig::counseling()
    }
}

#[test]
fn message_can_point_both_ways() {
    let spec = PlantedSpec::default_with_seed(21);
    let model = fit_orientation(&generate_planted_corpus(&spec).unwrap(), &config()).unwrap();
    let truth = GroundTruth::of(&spec);
    let reflect = truth.of_kind(PlantedKind::Reflect).next().unwrap();
    let prompt = truth.of_kind(PlantedKind::Prompt).next().unwrap();
    let text = format!("so {reflect} that sounds hard. {prompt} what happened next?");
    let score = score_utterance(&Utterance::new("x", "x-0", Role::Agent, 0, text), &model).unwrap();
    let (lo, hi) = (score.omega_min.unwrap(), score.omega_max.unwrap());
    assert!(lo < 0.0 && hi > 0.0, "{lo} {hi}");
    let by_sentence: Vec<f64> = score.sentence_scores.iter().map(|s| s.omega.unwrap()).collect();
    assert_eq!(by_sentence.len(), 2);
    assert!(by_sentence[0] < 0.0 && by_sentence[1] > 0.0);
    assert_eq!(score.coverage.scored, 2);
}

#[test]
fn reversed_model_swaps_min_and_max() {
    let corpus = generate_planted_corpus(&PlantedSpec::default_with_seed(22)).unwrap();
    let fwd = fit_orientation(&corpus, &config()).unwrap();
    let reversed = corpus.reversed();
    let rev = fit_orientation(&reversed, &config()).unwrap();
    let fwd_scores = score_corpus(&corpus, &fwd, Role::Agent, false).unwrap();
    let rev_scores = score_corpus(&reversed, &rev, Role::Agent, false).unwrap();
    let key = |s: &orient_core::orientation::UtteranceScore| (s.conversation_id.clone(), s.utterance_id.clone());
    let rev_by: HashMap<_, _> = rev_scores.rows.iter().map(|s| (key(s), s)).collect();
    assert_eq!(fwd_scores.rows.len(), rev_by.len());
    let mut compared = 0;
    for f in &fwd_scores.rows {
        let r = rev_by[&key(f)];
        match (f.omega_min, r.omega_max) {
            (Some(a), Some(b)) => {
                assert!((a + b).abs() <= 1e-9, "{a} vs {b}");
                compared += 1;
            }
            (a, b) => assert_eq!(a.is_some(), b.is_some()),
        }
    }
    assert!(compared > 1000);
}

#[test]
fn client_scoring_needs_override() {
    let corpus = generate_planted_corpus(&PlantedSpec::default_with_seed(23)).unwrap();
    let model = fit_orientation(&corpus, &config()).unwrap();
    assert!(score_corpus(&corpus, &model, Role::Client, false).is_err());
    let client = score_corpus(&corpus, &model, Role::Client, true).unwrap();
    assert_eq!(client.rows.len(), 200 * 13);
}
