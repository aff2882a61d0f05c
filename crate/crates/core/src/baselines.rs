//! Alternative per-message measures: naive tf-idf distance to the
//! neighbors, minimum backwards-range, and question asking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Role, Utterance};
use crate::error::Result;
use crate::orientation::OrientationModel;
use crate::phrasing::{build_vocabulary, utterance_phrasings, utterance_sentences, ExtractorConfig, VocabConfig};
use crate::vectorize::{fit_tfidf, sparse_cosine_distance, TfIdfModel, TfIdfOptions};

/// A tf-idf space shared by both roles, fitted on every utterance.
#[derive(Debug, Clone)]
pub struct SharedSpace {
    pub tfidf: TfIdfModel,
    pub extractor: ExtractorConfig,
}

impl SharedSpace {
    pub fn fit(corpus: &Corpus, extractor: ExtractorConfig) -> Result<Self> {
        let utts: Vec<&Utterance> = corpus.conversations.iter().flat_map(|c| &c.utterances).collect();
        let docs: Vec<Vec<String>> = utts
            .par_iter()
            .map(|u| utterance_phrasings(u, &extractor))
            .collect::<Result<_>>()?;
        let vocab_cfg = VocabConfig {
            top_k: None,
            min_utterances: 1,
        };
        let vocab = build_vocabulary(&docs, Role::Agent, &vocab_cfg)?;
        let ids: Vec<Vec<usize>> = docs.iter().map(|d| vocab.ids(d)).collect();
        let tfidf = fit_tfidf(&ids, vocab, TfIdfOptions::default())?;
        Ok(SharedSpace { tfidf, extractor })
    }

    pub fn embed(&self, utt: &Utterance) -> Result<Vec<(usize, f64)>> {
        let phrasings = utterance_phrasings(utt, &self.extractor)?;
        Ok(self.tfidf.vector(&self.tfidf.vocabulary.ids(&phrasings)))
    }
}

/// `dist(utt, reply) − dist(utt, predecessor)` in the shared space; `None`
/// when a neighbor is missing or any vector is zero.
pub fn naive_distance(
    utt: &Utterance,
    predecessor: Option<&Utterance>,
    reply: Option<&Utterance>,
    space: &SharedSpace,
) -> Result<Option<f64>> {
    let (Some(pred), Some(reply)) = (predecessor, reply) else {
        return Ok(None);
    };
    let u = space.embed(utt)?;
    let p = space.embed(pred)?;
    let r = space.embed(reply)?;
    Ok(match (sparse_cosine_distance(&u, &r), sparse_cosine_distance(&u, &p)) {
        (Ok(dr), Ok(dp)) => Some(dr - dp),
        _ => None,
    })
}

/// Minimum over sentences of the tf·idf-weighted mean backwards-range.
pub fn backwards_range_score(utt: &Utterance, model: &OrientationModel) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for s in utterance_sentences(utt, &model.config.agent_extractor)? {
        if let Some((v, _)) = model.weighted_sentence_value(&s.phrasings, |st| st.bwd_range) {
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    }
    Ok(best)
}

pub fn has_question(text: &str) -> bool {
    text.contains('?')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineScores {
    pub conversation_id: String,
    pub utterance_id: String,
    pub index: usize,
    pub naive_distance: Option<f64>,
    pub bwd_range_min: Option<f64>,
    pub has_question: bool,
}

/// Baselines for every agent utterance of the merged corpus. The
/// backwards-range column needs a fitted model.
pub fn score_baselines(
    corpus: &Corpus,
    model: Option<&OrientationModel>,
    extractor: ExtractorConfig,
) -> Result<Vec<BaselineScores>> {
    let merged = corpus.merged();
    if merged.is_empty() {
        return Ok(Vec::new());
    }
    let space = SharedSpace::fit(&merged, extractor)?;
    let mut targets = Vec::new();
    for conv in &merged.conversations {
        for (i, u) in conv.utterances.iter().enumerate() {
            if u.role == Role::Agent {
                let pred = i.checked_sub(1).map(|j| &conv.utterances[j]);
                let reply = conv.utterances.get(i + 1);
                targets.push((u, pred, reply));
            }
        }
    }
    targets
        .par_iter()
        .map(|&(u, pred, reply)| {
            Ok(BaselineScores {
                conversation_id: u.conversation_id.clone(),
                utterance_id: u.utterance_id.clone(),
                index: u.index,
                naive_distance: naive_distance(u, pred, reply, &space)?,
                bwd_range_min: match model {
                    Some(m) => backwards_range_score(u, m)?,
                    None => None,
                },
                has_question: has_question(&u.text),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Conversation;

    fn utt(role: Role, i: usize, text: &str) -> Utterance {
        Utterance::new("c", format!("u{i}"), role, i, text)
    }

    fn space_for(texts: &[&str]) -> SharedSpace {
        let utts = texts
            .iter()
            .enumerate()
            .map(|(i, t)| utt(if i % 2 == 0 { Role::Client } else { Role::Agent }, i, t))
            .collect();
        let corpus = Corpus::new(vec![Conversation::new("c", utts)]);
        SharedSpace::fit(&corpus, ExtractorConfig::default()).unwrap()
    }

    #[test]
    fn questions() {
        assert!(has_question("How are you?"));
        assert!(!has_question("I see."));
        assert!(has_question("Right? Ok."));
    }

    #[test]
    fn naive_distance_identical_neighbors() {
        let space = space_for(&["alpha beta", "alpha beta", "alpha beta"]);
        let u = utt(Role::Agent, 1, "alpha beta");
        let d = naive_distance(&u, Some(&u), Some(&u), &space).unwrap().unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn naive_distance_disjoint_reply() {
        let space = space_for(&["alpha beta", "alpha beta", "gamma delta"]);
        let u = utt(Role::Agent, 1, "alpha beta");
        let reply = utt(Role::Client, 2, "gamma delta");
        let d = naive_distance(&u, Some(&u), Some(&reply), &space).unwrap().unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert_eq!(naive_distance(&u, None, Some(&reply), &space).unwrap(), None);
        let empty = utt(Role::Client, 2, "zeta");
        assert_eq!(naive_distance(&u, Some(&u), Some(&empty), &space).unwrap(), None);
    }
}
