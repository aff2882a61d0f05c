//! Aggregate analyses of scored conversations: segment profiles,
//! conversation summaries, length and outcome comparisons, and
//! counselor-level tendencies on interleaved conversation subsets.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::{segment_conversation, Conversation, Corpus, Role};
use crate::error::{Error, Result};
use crate::orientation::UtteranceScore;
use crate::stats::{bootstrap_ci, cohens_d, mann_whitney_u, mean, wilcoxon_signed_rank};

/// A merged conversation with the `(Ω^min, Ω^max)` of each utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredConversation {
    pub conversation: Conversation,
    /// Indexed by utterance position; `None` for client or unscored
    /// utterances.
    pub scores: Vec<Option<(f64, f64)>>,
}

impl ScoredConversation {
    pub fn agent_scores(&self) -> impl Iterator<Item = Option<(f64, f64)>> + '_ {
        self.conversation
            .utterances
            .iter()
            .zip(&self.scores)
            .filter(|(u, _)| u.role == Role::Agent)
            .map(|(_, s)| *s)
    }
}

/// Joins utterance scores to the merged corpus by conversation id and index.
pub fn attach_scores(corpus: &Corpus, scores: &[UtteranceScore]) -> Vec<ScoredConversation> {
    let mut by_key: HashMap<(&str, usize), (f64, f64)> = HashMap::new();
    for s in scores {
        if let (Some(lo), Some(hi)) = (s.omega_min, s.omega_max) {
            by_key.insert((s.conversation_id.as_str(), s.index), (lo, hi));
        }
    }
    corpus
        .merged()
        .conversations
        .into_iter()
        .map(|conversation| {
            let scores = conversation
                .utterances
                .iter()
                .map(|u| by_key.get(&(u.conversation_id.as_str(), u.index)).copied())
                .collect();
            ScoredConversation { conversation, scores }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    OmegaMin,
    OmegaMax,
}

impl Measure {
    pub const BOTH: [Measure; 2] = [Measure::OmegaMin, Measure::OmegaMax];

    pub fn label(self) -> &'static str {
        match self {
            Measure::OmegaMin => "omega_min",
            Measure::OmegaMax => "omega_max",
        }
    }

    fn pick(self, s: (f64, f64)) -> f64 {
        match self {
            Measure::OmegaMin => s.0,
            Measure::OmegaMax => s.1,
        }
    }
}

/// Bootstrap settings for interval columns; `resamples == 0` disables them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bootstrap {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Bootstrap {
    pub const NONE: Bootstrap = Bootstrap {
        resamples: 0,
        level: 0.95,
        seed: 0,
    };

    fn ci(&self, values: &[f64]) -> Result<(Option<f64>, Option<f64>)> {
        if self.resamples == 0 || values.is_empty() {
            return Ok((None, None));
        }
        let (lo, hi) = bootstrap_ci(values, self.resamples, self.level, self.seed)?;
        Ok((Some(lo), Some(hi)))
    }
}

/// One plot-ready row: mean of per-conversation values with an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub group: Option<String>,
    pub bin: usize,
    pub measure: Measure,
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n: usize,
}

fn mean_row(group: Option<String>, bin: usize, measure: Measure, values: &[f64], boot: &Bootstrap) -> Result<MeanRow> {
    let (ci_low, ci_high) = boot.ci(values)?;
    Ok(MeanRow {
        group,
        bin,
        measure,
        mean: (!values.is_empty()).then(|| mean(values)),
        ci_low,
        ci_high,
        n: values.len(),
    })
}

fn metadata_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn group_label(conv: &Conversation, key: Option<&str>) -> Option<String> {
    key.map(|k| conv.metadata.get(k).map_or_else(|| "null".to_string(), metadata_label))
}

fn check_group_key(convs: &[ScoredConversation], key: Option<&str>) -> Result<()> {
    let Some(key) = key else { return Ok(()) };
    if convs.iter().any(|c| c.conversation.metadata.contains_key(key)) {
        return Ok(());
    }
    let available: BTreeSet<&str> = convs
        .iter()
        .flat_map(|c| c.conversation.metadata.keys().map(String::as_str))
        .collect();
    Err(Error::Config(format!(
        "metadata key {key:?} not found; available keys: [{}]",
        available.into_iter().collect::<Vec<_>>().join(", ")
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProfile {
    pub rows: Vec<MeanRow>,
    pub n_included: usize,
    /// Conversations below the agent-message threshold.
    pub n_excluded: usize,
}

/// Per-conversation segment means of a measure; `None` where the segment
/// has no scored message.
fn segment_means(
    conv: &ScoredConversation,
    n_segments: usize,
    min_agent_msgs: usize,
) -> Result<Option<Vec<[Option<f64>; 2]>>> {
    let Some(segments) = segment_conversation(&conv.conversation, n_segments, min_agent_msgs)? else {
        return Ok(None);
    };
    let out = segments
        .iter()
        .map(|seg| {
            let scored: Vec<(f64, f64)> = seg.agent_positions.iter().filter_map(|&p| conv.scores[p]).collect();
            Measure::BOTH.map(|m| {
                let v: Vec<f64> = scored.iter().map(|&s| m.pick(s)).collect();
                (!v.is_empty()).then(|| mean(&v))
            })
        })
        .collect();
    Ok(Some(out))
}

/// Macroaveraged Ω^min and Ω^max per segment, optionally per value of a
/// metadata key.
pub fn segment_profile(
    convs: &[ScoredConversation],
    n_segments: usize,
    min_agent_msgs: usize,
    group_by: Option<&str>,
    boot: &Bootstrap,
) -> Result<SegmentProfile> {
    check_group_key(convs, group_by)?;
    let mut values: BTreeMap<(Option<String>, usize, Measure), Vec<f64>> = BTreeMap::new();
    let mut groups = BTreeSet::new();
    let (mut n_included, mut n_excluded) = (0, 0);
    for conv in convs {
        let Some(means) = segment_means(conv, n_segments, min_agent_msgs)? else {
            n_excluded += 1;
            continue;
        };
        n_included += 1;
        let group = group_label(&conv.conversation, group_by);
        groups.insert(group.clone());
        for (seg, pair) in means.iter().enumerate() {
            for (m, v) in Measure::BOTH.iter().zip(pair) {
                if let Some(v) = v {
                    values.entry((group.clone(), seg, *m)).or_default().push(*v);
                }
            }
        }
    }
    let mut rows = Vec::new();
    for group in groups {
        for seg in 0..n_segments {
            for m in Measure::BOTH {
                let v = values.get(&(group.clone(), seg, m)).map_or(&[][..], Vec::as_slice);
                rows.push(mean_row(group.clone(), seg, m, v, boot)?);
            }
        }
    }
    Ok(SegmentProfile {
        rows,
        n_included,
        n_excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTest {
    pub bin: usize,
    pub measure: Measure,
    /// Counselors observed in both groups.
    pub n_agents: usize,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

/// Wilcoxon test per segment comparing the `true` and `false` values of a
/// boolean metadata key within counselor: each counselor contributes the
/// difference of their two group means.
pub fn within_counselor_segment_tests(
    convs: &[ScoredConversation],
    n_segments: usize,
    min_agent_msgs: usize,
    key: &str,
) -> Result<Vec<GroupTest>> {
    check_group_key(convs, Some(key))?;
    // agent → (segment, measure, flag) → values
    let mut acc: BTreeMap<String, BTreeMap<(usize, Measure, bool), Vec<f64>>> = BTreeMap::new();
    for conv in convs {
        let (Some(agent), Some(flag)) = (conv.conversation.agent_id(), conv.conversation.flag(key)) else {
            continue;
        };
        let Some(means) = segment_means(conv, n_segments, min_agent_msgs)? else {
            continue;
        };
        let slot = acc.entry(agent.to_string()).or_default();
        for (seg, pair) in means.iter().enumerate() {
            for (m, v) in Measure::BOTH.iter().zip(pair) {
                if let Some(v) = v {
                    slot.entry((seg, *m, flag)).or_default().push(*v);
                }
            }
        }
    }
    let mut out = Vec::new();
    for seg in 0..n_segments {
        for m in Measure::BOTH {
            let diffs: Vec<f64> = acc
                .values()
                .filter_map(|a| match (a.get(&(seg, m, true)), a.get(&(seg, m, false))) {
                    (Some(t), Some(f)) => Some(mean(t) - mean(f)),
                    _ => None,
                })
                .collect();
            let test = (!diffs.is_empty()).then(|| wilcoxon_signed_rank(&diffs)).transpose()?;
            out.push(GroupTest {
                bin: seg,
                measure: m,
                n_agents: diffs.len(),
                statistic: test.map(|t| t.statistic),
                p_value: test.map(|t| t.p_value),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationSummary {
    pub conversation_id: String,
    pub agent_id: Option<String>,
    pub mean_omega_min: Option<f64>,
    pub mean_omega_max: Option<f64>,
    /// Messages after merging, both roles.
    pub length: usize,
    pub n_agent_messages: usize,
    pub n_scored: usize,
    pub n_unscored: usize,
    /// Set when no agent message is scored.
    pub unscored: bool,
    pub metadata: Map<String, Value>,
}

pub fn conversation_summary(conv: &ScoredConversation) -> ConversationSummary {
    let agent: Vec<Option<(f64, f64)>> = conv.agent_scores().collect();
    let scored: Vec<(f64, f64)> = agent.iter().flatten().copied().collect();
    let m = |measure: Measure| {
        let v: Vec<f64> = scored.iter().map(|&s| measure.pick(s)).collect();
        (!v.is_empty()).then(|| mean(&v))
    };
    ConversationSummary {
        conversation_id: conv.conversation.conversation_id.clone(),
        agent_id: conv.conversation.agent_id().map(str::to_string),
        mean_omega_min: m(Measure::OmegaMin),
        mean_omega_max: m(Measure::OmegaMax),
        length: conv.conversation.utterances.len(),
        n_agent_messages: agent.len(),
        n_scored: scored.len(),
        n_unscored: agent.len() - scored.len(),
        unscored: scored.is_empty(),
        metadata: conv.conversation.metadata.clone(),
    }
}

impl ConversationSummary {
    pub fn value(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::OmegaMin => self.mean_omega_min,
            Measure::OmegaMax => self.mean_omega_max,
        }
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        self.metadata.get(key).and_then(Value::as_bool)
    }
}

/// Decile edges of the conversation lengths, deduplicated.
pub fn decile_edges(lengths: &[usize]) -> Vec<f64> {
    if lengths.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (0..=10)
        .map(|i| crate::stats::quantile_sorted(&sorted, i as f64 / 10.0))
        .collect();
    edges.dedup();
    edges
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    pub low: f64,
    pub high: f64,
    pub rows: Vec<MeanRow>,
}

/// Mean Ω^min/Ω^max of conversations bucketed by length. Bucket `i` holds
/// lengths in `[edges[i], edges[i+1])`, the last one closed; defaults to
/// deciles.
pub fn length_buckets(
    summaries: &[ConversationSummary],
    edges: Option<&[f64]>,
    boot: &Bootstrap,
) -> Result<Vec<LengthBucket>> {
    let edges = match edges {
        Some(e) => e.to_vec(),
        None => decile_edges(&summaries.iter().map(|s| s.length).collect::<Vec<_>>()),
    };
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("length bucket edges must be strictly increasing".into()));
    }
    let n_buckets = edges.len().saturating_sub(1).max(usize::from(edges.len() == 1));
    let mut out = Vec::new();
    for b in 0..n_buckets {
        let low = edges[b];
        let high = *edges.get(b + 1).unwrap_or(&low);
        let last = b + 1 == n_buckets;
        let members: Vec<&ConversationSummary> = summaries
            .iter()
            .filter(|s| {
                let l = s.length as f64;
                l >= low && (l < high || (last && l <= high))
            })
            .collect();
        let mut rows = Vec::new();
        for m in Measure::BOTH {
            let v: Vec<f64> = members.iter().filter_map(|s| s.value(m)).collect();
            rows.push(mean_row(None, b, m, &v, boot)?);
        }
        out.push(LengthBucket { low, high, rows });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeComparison {
    pub measure: Measure,
    pub positive: MeanRow,
    pub negative: MeanRow,
    pub u: Option<f64>,
    pub p_value: Option<f64>,
    pub cohens_d: Option<f64>,
}

/// Compares conversations whose boolean `key` is true with those where it
/// is false.
pub fn outcome_comparison(
    summaries: &[ConversationSummary],
    key: &str,
    boot: &Bootstrap,
) -> Result<Vec<OutcomeComparison>> {
    if !summaries.iter().any(|s| s.metadata.contains_key(key)) {
        let keys: BTreeSet<&str> = summaries
            .iter()
            .flat_map(|s| s.metadata.keys().map(String::as_str))
            .collect();
        return Err(Error::Config(format!(
            "metadata key {key:?} not found; available keys: [{}]",
            keys.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let mut out = Vec::new();
    for m in Measure::BOTH {
        let pick = |flag: bool| -> Vec<f64> {
            summaries
                .iter()
                .filter(|s| s.flag(key) == Some(flag))
                .filter_map(|s| s.value(m))
                .collect()
        };
        let (pos, neg) = (pick(true), pick(false));
        let test = (!pos.is_empty() && !neg.is_empty())
            .then(|| mann_whitney_u(&pos, &neg))
            .transpose()?;
        out.push(OutcomeComparison {
            measure: m,
            positive: mean_row(Some("true".into()), 0, m, &pos, boot)?,
            negative: mean_row(Some("false".into()), 0, m, &neg, boot)?,
            u: test.map(|t| t.statistic),
            p_value: test.map(|t| t.p_value),
            cohens_d: cohens_d(&pos, &neg).ok(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounselorTendency {
    pub agent_id: String,
    pub n_conversations: usize,
    /// 1-based positions in the agent's conversation sequence.
    pub tendency_positions: Vec<usize>,
    pub outcome_positions: Vec<usize>,
    pub tendency_omega_min: Option<f64>,
    pub tendency_omega_max: Option<f64>,
    /// Fraction of outcome conversations with the outcome flag set, over
    /// those that carry it.
    pub outcome_rate: Option<f64>,
    pub outcome_mean_length: Option<f64>,
}

impl CounselorTendency {
    pub fn tendency(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::OmegaMin => self.tendency_omega_min,
            Measure::OmegaMax => self.tendency_omega_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounselorReport {
    pub tendencies: Vec<CounselorTendency>,
    pub excluded: Vec<(String, usize)>,
    pub note: Option<String>,
}

/// Splits each agent's conversations inside the 1-based inclusive `window`
/// into interleaved halves: the 1st, 3rd, … conversations of the window
/// give the tendency, the 2nd, 4th, … the outcome. Agents with fewer than
/// `min_conversations` conversations are excluded. Summaries must be in
/// chronological order.
pub fn counselor_split(
    summaries: &[ConversationSummary],
    window: (usize, usize),
    min_conversations: usize,
    outcome_key: Option<&str>,
) -> Result<CounselorReport> {
    let (first, last) = window;
    if first == 0 || first > last {
        return Err(Error::Config(format!("invalid counselor window ({first}, {last})")));
    }
    let mut by_agent: BTreeMap<&str, Vec<&ConversationSummary>> = BTreeMap::new();
    for s in summaries {
        if let Some(a) = &s.agent_id {
            by_agent.entry(a).or_default().push(s);
        }
    }
    let mut tendencies = Vec::new();
    let mut excluded = Vec::new();
    for (agent, convs) in by_agent {
        if convs.len() < min_conversations {
            excluded.push((agent.to_string(), convs.len()));
            continue;
        }
        let (mut tendency_positions, mut outcome_positions) = (Vec::new(), Vec::new());
        for pos in first..=last.min(convs.len()) {
            if (pos - first) % 2 == 0 {
                tendency_positions.push(pos);
            } else {
                outcome_positions.push(pos);
            }
        }
        let tendency = |m: Measure| {
            let v: Vec<f64> = tendency_positions
                .iter()
                .filter_map(|&p| convs[p - 1].value(m))
                .collect();
            (!v.is_empty()).then(|| mean(&v))
        };
        let outcome_rate = outcome_key.and_then(|k| {
            let v: Vec<f64> = outcome_positions
                .iter()
                .filter_map(|&p| convs[p - 1].flag(k))
                .map(|b| f64::from(u8::from(b)))
                .collect();
            (!v.is_empty()).then(|| mean(&v))
        });
        let lengths: Vec<f64> = outcome_positions.iter().map(|&p| convs[p - 1].length as f64).collect();
        tendencies.push(CounselorTendency {
            agent_id: agent.to_string(),
            n_conversations: convs.len(),
            tendency_omega_min: tendency(Measure::OmegaMin),
            tendency_omega_max: tendency(Measure::OmegaMax),
            outcome_rate,
            outcome_mean_length: (!lengths.is_empty()).then(|| mean(&lengths)),
            tendency_positions,
            outcome_positions,
        });
    }
    let note = tendencies.is_empty().then(|| {
        format!(
            "no agent has at least {min_conversations} conversations ({} agents excluded)",
            excluded.len()
        )
    });
    Ok(CounselorReport {
        tendencies,
        excluded,
        note,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounselorOutcome {
    Rate,
    Length,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TercileContrast {
    pub measure: Measure,
    pub outcome: CounselorOutcome,
    pub n_bottom: usize,
    pub n_rest: usize,
    pub bottom_mean: Option<f64>,
    pub rest_mean: Option<f64>,
    /// Effect of being in the bottom third: `d(bottom, rest)`.
    pub cohens_d: Option<f64>,
    pub p_value: Option<f64>,
}

/// Contrasts the outcome of counselors in the bottom third of a tendency
/// with the remaining counselors.
pub fn bottom_third_contrast(
    tendencies: &[CounselorTendency],
    measure: Measure,
    outcome: CounselorOutcome,
) -> Result<TercileContrast> {
    let mut rows: Vec<(f64, f64, &str)> = tendencies
        .iter()
        .filter_map(|t| {
            let o = match outcome {
                CounselorOutcome::Rate => t.outcome_rate,
                CounselorOutcome::Length => t.outcome_mean_length,
            };
            Some((t.tendency(measure)?, o?, t.agent_id.as_str()))
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(b.2)));
    let cut = rows.len() / 3;
    let bottom: Vec<f64> = rows[..cut].iter().map(|r| r.1).collect();
    let rest: Vec<f64> = rows[cut..].iter().map(|r| r.1).collect();
    let test = (!bottom.is_empty() && !rest.is_empty())
        .then(|| mann_whitney_u(&bottom, &rest))
        .transpose()?;
    Ok(TercileContrast {
        measure,
        outcome,
        n_bottom: bottom.len(),
        n_rest: rest.len(),
        bottom_mean: (!bottom.is_empty()).then(|| mean(&bottom)),
        rest_mean: (!rest.is_empty()).then(|| mean(&rest)),
        cohens_d: cohens_d(&bottom, &rest).ok(),
        p_value: test.map(|t| t.p_value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Utterance;
    use serde_json::json;

    /// Alternating conversation with `n_agent` agent messages carrying the
    /// given scores.
    fn scored(id: &str, agent_scores: &[Option<(f64, f64)>], meta: Map<String, Value>) -> ScoredConversation {
        let mut utts = Vec::new();
        let mut scores = Vec::new();
        for (i, s) in agent_scores.iter().enumerate() {
            let mut c = Utterance::new(id, format!("c{i}"), Role::Client, 2 * i, "hi");
            c.meta = meta.clone();
            utts.push(c);
            scores.push(None);
            utts.push(Utterance::new(id, format!("a{i}"), Role::Agent, 2 * i + 1, "ok"));
            scores.push(*s);
        }
        ScoredConversation {
            conversation: Conversation::new(id, utts),
            scores,
        }
    }

    fn meta(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn constant_conversation_profile() {
        let c = scored("c", &[Some((-0.1, 0.2)); 10], Map::new());
        let p = segment_profile(&[c], 5, 10, None, &Bootstrap::NONE).unwrap();
        assert_eq!(p.rows.len(), 10);
        for r in &p.rows {
            let want = if r.measure == Measure::OmegaMax { 0.2 } else { -0.1 };
            assert!((r.mean.unwrap() - want).abs() < 1e-15);
            assert_eq!(r.n, 1);
        }
    }

    #[test]
    fn profile_is_a_macroaverage() {
        let a = scored("a", &[Some((0.1, 0.1)); 10], Map::new());
        let b = scored("b", &[Some((0.3, 0.3)); 20], Map::new());
        let short = scored("s", &[Some((9.0, 9.0)); 9], Map::new());
        let p = segment_profile(&[a, b, short], 5, 10, None, &Bootstrap::NONE).unwrap();
        assert_eq!((p.n_included, p.n_excluded), (2, 1));
        assert!((p.rows[0].mean.unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn grouping_and_missing_key() {
        let a = scored("a", &[Some((0.0, 1.0)); 10], meta(json!({"risk_assessed": true})));
        let b = scored("b", &[Some((0.0, 3.0)); 10], meta(json!({"risk_assessed": false})));
        let p = segment_profile(&[a.clone(), b.clone()], 5, 10, Some("risk_assessed"), &Bootstrap::NONE).unwrap();
        let groups: BTreeSet<_> = p.rows.iter().map(|r| r.group.clone().unwrap()).collect();
        assert_eq!(groups, ["false".to_string(), "true".to_string()].into());
        let err = segment_profile(&[a, b], 5, 10, Some("colour"), &Bootstrap::NONE).unwrap_err();
        assert!(err.to_string().contains("risk_assessed"));
    }

    #[test]
    fn summaries() {
        let c = scored("c", &[Some((-0.1, 0.5)), None, Some((-0.3, 0.1))], Map::new());
        let s = conversation_summary(&c);
        assert!((s.mean_omega_min.unwrap() + 0.2).abs() < 1e-15);
        assert!((s.mean_omega_max.unwrap() - 0.3).abs() < 1e-15);
        assert_eq!((s.length, s.n_scored, s.n_unscored), (6, 2, 1));
        let one = conversation_summary(&scored("d", &[Some((0.4, 0.7))], Map::new()));
        assert_eq!((one.mean_omega_min, one.mean_omega_max), (Some(0.4), Some(0.7)));
        assert!(conversation_summary(&scored("e", &[None], Map::new())).unscored);
    }

    fn summary(agent: &str, i: usize, omega: f64, helpful: bool) -> ConversationSummary {
        ConversationSummary {
            conversation_id: format!("{agent}-{i}"),
            agent_id: Some(agent.into()),
            mean_omega_min: Some(omega),
            mean_omega_max: Some(omega),
            length: 10 + i,
            n_agent_messages: 5,
            n_scored: 5,
            n_unscored: 0,
            unscored: false,
            metadata: meta(json!({"helpful": helpful})),
        }
    }

    #[test]
    fn interleaved_split() {
        let convs: Vec<_> = (1..=6).map(|i| summary("x", i, i as f64, i % 4 == 0)).collect();
        let r = counselor_split(&convs, (1, 6), 1, Some("helpful")).unwrap();
        let t = &r.tendencies[0];
        assert_eq!(t.tendency_positions, [1, 3, 5]);
        assert_eq!(t.outcome_positions, [2, 4, 6]);
        assert_eq!(t.tendency_omega_max, Some(3.0));
        assert!((t.outcome_rate.unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let many: Vec<_> = (1..=100).map(|i| summary("y", i, 0.0, true)).collect();
        let r = counselor_split(&many, (20, 120), 120, None).unwrap();
        assert!(r.tendencies.is_empty());
        assert_eq!(r.excluded, [("y".to_string(), 100)]);
        assert!(r.note.is_some());
    }

    #[test]
    fn bottom_third() {
        let tendencies: Vec<CounselorTendency> = (0..9)
            .map(|i| CounselorTendency {
                agent_id: format!("a{i}"),
                n_conversations: 10,
                tendency_positions: vec![],
                outcome_positions: vec![],
                tendency_omega_min: Some(i as f64),
                tendency_omega_max: Some(i as f64),
                outcome_rate: Some(if i < 3 {
                    0.9 + 0.01 * i as f64
                } else {
                    0.5 + 0.01 * i as f64
                }),
                outcome_mean_length: None,
            })
            .collect();
        let c = bottom_third_contrast(&tendencies, Measure::OmegaMin, CounselorOutcome::Rate).unwrap();
        assert_eq!((c.n_bottom, c.n_rest), (3, 6));
        assert!(c.cohens_d.unwrap() > 1.0);
    }

    #[test]
    fn buckets_cover_all_lengths() {
        let convs: Vec<_> = (1..=40).map(|i| summary("x", i, i as f64, true)).collect();
        let b = length_buckets(&convs, None, &Bootstrap::NONE).unwrap();
        let total: usize = b.iter().map(|x| x.rows[0].n).sum();
        assert_eq!(total, 40);
        assert_eq!(b.len(), 10);
    }
}
