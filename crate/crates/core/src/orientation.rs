//! Phrasing orientation: context sets, central points, forwards and
//! backwards ranges, and sentence/utterance scores.
//!
//! For an agent phrasing `w`, the forwards-range is the mean cosine
//! distance between the embeddings of client replies to agent utterances
//! containing `w` and their weighted central point; the backwards-range is
//! the same over client predecessors. The orientation is
//! `backwards-range − forwards-range`: positive when replies are more
//! predictable than predecessors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ClientRows, RunConfig};
use crate::corpus::{filter_training_pairs, Corpus, Direction, Role, Utterance, UtteranceRef};
use crate::embedding::{project_weighted_bag, strip_first_component, truncated_svd, CentralPointMode, LatentSpace};
use crate::error::{Error, Result};
use crate::phrasing::{build_vocabulary, utterance_phrasings, utterance_sentences};
use crate::vectorize::{cosine_distance, fit_tfidf, norm, TfIdfModel};

/// Members of one phrasing's reply and predecessor sets: `(client row,
/// weight)`, sorted by row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextSet {
    pub reply_members: Vec<(usize, f64)>,
    pub pred_members: Vec<(usize, f64)>,
}

/// Context sets indexed by agent vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSets {
    pub sets: Vec<ContextSet>,
}

/// A training pair resolved to matrix coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedPair {
    pub agent_doc: usize,
    pub client_row: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoReplies,
    NoPredecessors,
    InsufficientSupport,
    DegenerateCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedPhrasing {
    pub phrasing: String,
    pub reason: DropReason,
    pub n_replies: usize,
    pub n_preds: usize,
}

/// Groups the client rows around each agent phrasing. `agent_vectors[d]` is
/// the ℓ₂-normalized tf-idf vector of agent document `d`; its entries are
/// the member weights. Members on flagged rows are skipped.
pub fn collect_context_sets(
    pairs: &[IndexedPair],
    agent_vectors: &[Vec<(usize, f64)>],
    n_phrasings: usize,
    space: &LatentSpace,
) -> ContextSets {
    let mut sets = vec![ContextSet::default(); n_phrasings];
    for p in pairs {
        if space.is_flagged(p.client_row) {
            continue;
        }
        for &(id, w) in &agent_vectors[p.agent_doc] {
            if w <= 0.0 {
                continue;
            }
            let set = &mut sets[id];
            match p.direction {
                Direction::Reply => set.reply_members.push((p.client_row, w)),
                Direction::Predecessor => set.pred_members.push((p.client_row, w)),
            }
        }
    }
    let by_row = |a: &(usize, f64), b: &(usize, f64)| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1));
    for set in &mut sets {
        set.reply_members.sort_by(by_row);
        set.pred_members.sort_by(by_row);
    }
    ContextSets { sets }
}

/// Weighted central point of the members and the unweighted mean cosine
/// distance of the members to it.
pub fn compute_range(members: &[(usize, f64)], space: &LatentSpace, mode: CentralPointMode) -> Result<(f64, Vec<f64>)> {
    let center = project_weighted_bag(members, space, mode)?;
    if norm(&center) < 1e-12 {
        return Err(Error::Degenerate("central point has zero norm".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for &(row, _) in members {
        if space.is_flagged(row) {
            continue;
        }
        total += cosine_distance(space.row(row), &center)?;
        count += 1;
    }
    Ok((total / count as f64, center))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhrasingStats {
    pub id: usize,
    pub phrasing: String,
    pub fwd_range: f64,
    pub bwd_range: f64,
    pub orientation: f64,
    pub n_replies: usize,
    pub n_preds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwd_center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bwd_center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub n_conversations: usize,
    pub n_utterances: usize,
    pub n_pairs: usize,
    pub n_training_pairs: usize,
    pub n_agent_docs: usize,
    pub n_client_rows: usize,
    pub n_client_zero_rows: usize,
    pub agent_vocab_size: usize,
    pub client_vocab_size: usize,
    pub singular_values: Vec<f64>,
    pub svd_steps: usize,
    pub svd_residual: f64,
    pub n_scored_phrasings: usize,
    pub dropped_counts: BTreeMap<String, usize>,
    pub dropped: Vec<DroppedPhrasing>,
    /// Share of training agent sentences with at least one scored phrasing.
    pub sentence_coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationModel {
    pub config: RunConfig,
    /// Agent vocabulary and idf table.
    pub agent_tfidf: TfIdfModel,
    /// Scored phrasings in vocabulary-id order.
    pub stats: Vec<PhrasingStats>,
    pub diagnostics: FitDiagnostics,
    /// Present only for diagnostic fits.
    pub latent_space: Option<LatentSpace>,
    by_id: HashMap<usize, usize>,
}

impl OrientationModel {
    pub fn new(
        config: RunConfig,
        agent_tfidf: TfIdfModel,
        stats: Vec<PhrasingStats>,
        diagnostics: FitDiagnostics,
        latent_space: Option<LatentSpace>,
    ) -> Self {
        let by_id = stats.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        OrientationModel {
            config,
            agent_tfidf,
            stats,
            diagnostics,
            latent_space,
            by_id,
        }
    }

    pub fn stats_for_id(&self, id: usize) -> Option<&PhrasingStats> {
        self.by_id.get(&id).map(|&i| &self.stats[i])
    }

    pub fn stats_for(&self, phrasing: &str) -> Option<&PhrasingStats> {
        self.agent_tfidf
            .vocabulary
            .id(phrasing)
            .and_then(|id| self.stats_for_id(id))
    }

    /// Orientation by phrasing.
    pub fn orientations(&self) -> BTreeMap<&str, f64> {
        self.stats
            .iter()
            .map(|s| (s.phrasing.as_str(), s.orientation))
            .collect()
    }

    /// tf·idf-weighted mean of `value` over the in-model phrasings of a
    /// sentence, with the number of phrasings covered.
    pub fn weighted_sentence_value(
        &self,
        phrasings: &[String],
        value: impl Fn(&PhrasingStats) -> f64,
    ) -> Option<(f64, usize)> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for p in phrasings {
            if let Some(id) = self.agent_tfidf.vocabulary.id(p) {
                if self.by_id.contains_key(&id) {
                    *counts.entry(id).or_default() += 1;
                }
            }
        }
        if counts.is_empty() {
            return None;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        let mut covered = 0;
        for (id, count) in counts {
            let w = self.agent_tfidf.tf_weight(count) * self.agent_tfidf.idf[id];
            let stats = self.stats_for_id(id).expect("checked above");
            num += w * value(stats);
            den += w;
            covered += count;
        }
        (den > 0.0).then(|| (num / den, covered))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct CanonicalKey<'a> {
    conversation_id: &'a str,
    utterance_id: &'a str,
    index: usize,
}

fn canonical_key(corpus: &Corpus, r: UtteranceRef) -> CanonicalKey<'_> {
    let u = corpus.utterance(r);
    CanonicalKey {
        conversation_id: &u.conversation_id,
        utterance_id: &u.utterance_id,
        index: u.index,
    }
}

/// Intermediate products of a fit, exposed for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct FitArtifacts {
    pub model: OrientationModel,
    pub client_tfidf: TfIdfModel,
    pub client_matrix: crate::vectorize::SparseMatrix,
    pub space: LatentSpace,
    pub context_sets: ContextSets,
}

/// Fits phrasing orientations on a corpus. Conversations are merged first.
pub fn fit_orientation(corpus: &Corpus, config: &RunConfig) -> Result<OrientationModel> {
    fit_orientation_full(corpus, config, false).map(|a| a.model)
}

pub fn fit_orientation_full(corpus: &Corpus, config: &RunConfig, keep_latent: bool) -> Result<FitArtifacts> {
    config.validate()?;
    let merged = corpus.merged();
    let all_pairs = merged.pairs();
    let training = filter_training_pairs(&merged, &all_pairs, config.word_bounds())?;
    if training.is_empty() {
        return Err(Error::EmptyVocabulary(format!(
            "no context pairs survive the {}–{} word filter ({} pairs in {} conversations)",
            config.min_words,
            config.max_words.map_or("∞".to_string(), |m| m.to_string()),
            all_pairs.len(),
            merged.conversations.len()
        )));
    }

    // Rows and documents in an order that does not depend on conversation order.
    let mut agent_refs: Vec<UtteranceRef> = training.iter().map(|p| p.agent_utt).collect();
    agent_refs.sort_by_key(|&r| canonical_key(&merged, r));
    agent_refs.dedup();
    let mut client_refs: Vec<UtteranceRef> = match config.client_rows {
        ClientRows::Paired => training.iter().map(|p| p.client_utt).collect(),
        ClientRows::AllInConversations => {
            let mut convs: Vec<usize> = training.iter().map(|p| p.client_utt.conversation).collect();
            convs.sort_unstable();
            convs.dedup();
            convs
                .into_iter()
                .flat_map(|c| {
                    merged.conversations[c]
                        .utterances
                        .iter()
                        .enumerate()
                        .filter(|(_, u)| u.role == Role::Client)
                        .map(move |(i, _)| UtteranceRef {
                            conversation: c,
                            utterance: i,
                        })
                })
                .collect()
        }
    };
    client_refs.sort_by_key(|&r| canonical_key(&merged, r));
    client_refs.dedup();
    let agent_doc_of: HashMap<UtteranceRef, usize> = agent_refs.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let client_row_of: HashMap<UtteranceRef, usize> = client_refs.iter().enumerate().map(|(i, &r)| (r, i)).collect();

    let phrasings_of = |refs: &[UtteranceRef], cfg| -> Result<Vec<Vec<String>>> {
        refs.par_iter()
            .map(|&r| utterance_phrasings(merged.utterance(r), cfg))
            .collect()
    };
    let agent_docs = phrasings_of(&agent_refs, &config.agent_extractor)?;
    let client_docs = phrasings_of(&client_refs, &config.client_extractor)?;

    let agent_vocab = build_vocabulary(&agent_docs, Role::Agent, &config.agent_vocab())?;
    let client_vocab = build_vocabulary(&client_docs, Role::Client, &config.client_vocab())?;
    let client_ids: Vec<Vec<usize>> = client_docs.iter().map(|d| client_vocab.ids(d)).collect();
    let agent_ids: Vec<Vec<usize>> = agent_docs.iter().map(|d| agent_vocab.ids(d)).collect();

    let client_tfidf = fit_tfidf(&client_ids, client_vocab, config.client_tfidf())?;
    let (client_matrix, client_zero) = client_tfidf.transform(&client_ids);
    let k_total = config.svd_total_dims();
    if k_total > client_matrix.n_rows().min(client_matrix.n_cols()) {
        return Err(Error::Config(format!(
            "{k_total} SVD dimensions requested but the client matrix is only {}×{}",
            client_matrix.n_rows(),
            client_matrix.n_cols()
        )));
    }
    let svd = truncated_svd(&client_matrix, k_total, config.seed, &config.svd_options())?;
    let space = strip_first_component(&svd, config.svd_dims, config.drop_first)?;

    let agent_tfidf = fit_tfidf(&agent_ids, agent_vocab, config.agent_tfidf())?;
    let agent_vectors: Vec<Vec<(usize, f64)>> = agent_ids.par_iter().map(|d| agent_tfidf.vector(d)).collect();

    let indexed: Vec<IndexedPair> = training
        .iter()
        .map(|p| IndexedPair {
            agent_doc: agent_doc_of[&p.agent_utt],
            client_row: client_row_of[&p.client_utt],
            direction: p.direction,
        })
        .collect();
    let context_sets = collect_context_sets(&indexed, &agent_vectors, agent_tfidf.vocabulary.len(), &space);

    let mode = config.central_point_mode;
    let outcomes: Vec<std::result::Result<PhrasingStats, DroppedPhrasing>> = context_sets
        .sets
        .par_iter()
        .enumerate()
        .map(|(id, set)| {
            let phrasing = agent_tfidf.vocabulary.phrasing(id).to_string();
            let (n_replies, n_preds) = (set.reply_members.len(), set.pred_members.len());
            let drop = |reason| DroppedPhrasing {
                phrasing: phrasing.clone(),
                reason,
                n_replies,
                n_preds,
            };
            if n_replies == 0 {
                return Err(drop(DropReason::NoReplies));
            }
            if n_preds == 0 {
                return Err(drop(DropReason::NoPredecessors));
            }
            if n_replies < config.min_support || n_preds < config.min_support {
                return Err(drop(DropReason::InsufficientSupport));
            }
            let fwd = compute_range(&set.reply_members, &space, mode);
            let bwd = compute_range(&set.pred_members, &space, mode);
            match (fwd, bwd) {
                (Ok((fwd_range, fwd_center)), Ok((bwd_range, bwd_center))) => Ok(PhrasingStats {
                    id,
                    phrasing: phrasing.clone(),
                    fwd_range,
                    bwd_range,
                    orientation: bwd_range - fwd_range,
                    n_replies,
                    n_preds,
                    fwd_center: keep_latent.then_some(fwd_center),
                    bwd_center: keep_latent.then_some(bwd_center),
                }),
                _ => Err(drop(DropReason::DegenerateCenter)),
            }
        })
        .collect();

    let mut stats = Vec::new();
    let mut dropped = Vec::new();
    for o in outcomes {
        match o {
            Ok(s) => stats.push(s),
            Err(d) => dropped.push(d),
        }
    }
    if stats.is_empty() {
        return Err(Error::EmptyVocabulary(format!(
            "none of {} agent phrasings has {} replies and {} predecessors",
            agent_tfidf.vocabulary.len(),
            config.min_support,
            config.min_support
        )));
    }
    let mut dropped_counts = BTreeMap::new();
    for d in &dropped {
        let key = serde_json::to_value(d.reason)?.as_str().unwrap_or_default().to_string();
        *dropped_counts.entry(key).or_insert(0) += 1;
    }

    let diagnostics = FitDiagnostics {
        n_conversations: merged.conversations.len(),
        n_utterances: merged.n_utterances(),
        n_pairs: all_pairs.len(),
        n_training_pairs: training.len(),
        n_agent_docs: agent_refs.len(),
        n_client_rows: client_refs.len(),
        n_client_zero_rows: client_zero.len().max(space.zero_rows.len()),
        agent_vocab_size: agent_tfidf.vocabulary.len(),
        client_vocab_size: client_tfidf.vocabulary.len(),
        singular_values: svd.s.clone(),
        svd_steps: svd.steps,
        svd_residual: svd.max_residual,
        n_scored_phrasings: stats.len(),
        dropped_counts,
        dropped,
        sentence_coverage: 0.0,
    };
    let mut model = OrientationModel::new(
        config.clone(),
        agent_tfidf,
        stats,
        diagnostics,
        keep_latent.then(|| space.clone()),
    );
    model.diagnostics.sentence_coverage = training_coverage(&merged, &agent_refs, &model)?;

    Ok(FitArtifacts {
        model,
        client_tfidf,
        client_matrix,
        space,
        context_sets,
    })
}

fn training_coverage(corpus: &Corpus, agent_refs: &[UtteranceRef], model: &OrientationModel) -> Result<f64> {
    let mut total = 0usize;
    let mut scored = 0usize;
    for &r in agent_refs {
        for s in utterance_sentences(corpus.utterance(r), &model.config.agent_extractor)? {
            total += 1;
            if model
                .weighted_sentence_value(&s.phrasings, |st| st.orientation)
                .is_some()
            {
                scored += 1;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { scored as f64 / total as f64 })
}

/// Orientation of a sentence: the tf·idf-weighted mean orientation of its
/// in-model phrasings. `None` when no phrasing is in the model.
pub fn score_sentence(phrasings: &[String], model: &OrientationModel) -> Option<f64> {
    model.weighted_sentence_value(phrasings, |s| s.orientation).map(|v| v.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub position: usize,
    pub omega: Option<f64>,
    pub covered_phrasings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub sentences: usize,
    pub scored: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        if self.sentences == 0 {
            0.0
        } else {
            self.scored as f64 / self.sentences as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub conversation_id: String,
    pub utterance_id: String,
    pub index: usize,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub sentence_scores: Vec<SentenceScore>,
    pub coverage: Coverage,
}

/// Minimum and maximum sentence orientation of an utterance.
pub fn score_utterance(utt: &Utterance, model: &OrientationModel) -> Result<UtteranceScore> {
    let sentences = utterance_sentences(utt, &model.config.agent_extractor)?;
    let mut sentence_scores = Vec::with_capacity(sentences.len());
    let mut omega_min: Option<f64> = None;
    let mut omega_max: Option<f64> = None;
    for s in &sentences {
        let scored = model.weighted_sentence_value(&s.phrasings, |st| st.orientation);
        if let Some((omega, _)) = scored {
            omega_min = Some(omega_min.map_or(omega, |m| m.min(omega)));
            omega_max = Some(omega_max.map_or(omega, |m| m.max(omega)));
        }
        sentence_scores.push(SentenceScore {
            position: s.position,
            omega: scored.map(|v| v.0),
            covered_phrasings: scored.map_or(0, |v| v.1),
        });
    }
    let scored = sentence_scores.iter().filter(|s| s.omega.is_some()).count();
    Ok(UtteranceScore {
        conversation_id: utt.conversation_id.clone(),
        utterance_id: utt.utterance_id.clone(),
        index: utt.index,
        omega_min,
        omega_max,
        coverage: Coverage {
            sentences: sentence_scores.len(),
            scored,
        },
        sentence_scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub rows: Vec<UtteranceScore>,
    pub coverage: Coverage,
}

/// Scores every utterance of `role` in the merged corpus. Scoring the
/// client role needs `allow_role_override`.
pub fn score_corpus(
    corpus: &Corpus,
    model: &OrientationModel,
    role: Role,
    allow_role_override: bool,
) -> Result<CorpusScores> {
    if role != Role::Agent && !allow_role_override {
        return Err(Error::Config(
            "the model scores agent utterances; pass the role override to score client utterances".into(),
        ));
    }
    let merged = corpus.merged();
    let utts: Vec<&Utterance> = merged
        .conversations
        .iter()
        .flat_map(|c| c.utterances.iter())
        .filter(|u| u.role == role)
        .collect();
    let rows: Vec<UtteranceScore> = utts
        .par_iter()
        .map(|u| score_utterance(u, model))
        .collect::<Result<_>>()?;
    let coverage = Coverage {
        sentences: rows.iter().map(|r| r.coverage.sentences).sum(),
        scored: rows.iter().map(|r| r.coverage.scored).sum(),
    };
    Ok(CorpusScores { rows, coverage })
}

/// Orders phrasing stats from most backwards- to most forwards-oriented.
pub fn rank_by_orientation(stats: &[PhrasingStats]) -> Vec<&PhrasingStats> {
    let mut v: Vec<&PhrasingStats> = stats.iter().collect();
    v.sort_by(|a, b| {
        a.orientation
            .partial_cmp(&b.orientation)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.phrasing.cmp(&b.phrasing))
    });
    v
}
