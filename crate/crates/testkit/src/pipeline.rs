//! Dense brute-force reimplementation of the orientation fit for unigram
//! phrasings.

use std::collections::{BTreeMap, BTreeSet};

use orient_core::{Corpus, Role};

use crate::dense::{cosine_distance, svd, Matrix};

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub min_words: usize,
    pub max_words: usize,
    pub k_keep: usize,
    pub drop_first: bool,
    pub min_support: usize,
    /// Skip the division by the singular values.
    pub plain_mean: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStats {
    pub fwd: f64,
    pub bwd: f64,
    pub omega: f64,
    pub n_replies: usize,
    pub n_preds: usize,
}

#[derive(Debug, Clone)]
pub struct OracleFit {
    pub stats: BTreeMap<String, OracleStats>,
    /// All singular values of the client matrix, descending.
    pub singular_values: Vec<f64>,
    pub agent_idf: BTreeMap<String, f64>,
}

/// Sentences end at `.`, `!` or `?` followed by whitespace or the end of
/// the text, and at newlines.
pub fn sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '\n' {
            out.push(std::mem::take(&mut cur));
            continue;
        }
        cur.push(c);
        if matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace()) {
            out.push(std::mem::take(&mut cur));
        }
    }
    out.push(cur);
    out.into_iter().filter(|s| !s.trim().is_empty()).collect()
}

impl OracleFit {
    /// tf·idf-weighted mean Ω of the scored unigrams of a sentence.
    pub fn sentence_omega(&self, sentence: &str) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        let toks = tokens(sentence);
        let distinct: BTreeSet<&String> = toks.iter().collect();
        for w in distinct {
            if let Some(st) = self.stats.get(w) {
                let weight = toks.iter().filter(|t| *t == w).count() as f64 * self.agent_idf[w];
                num += weight * st.omega;
                den += weight;
            }
        }
        (den > 0.0).then(|| num / den)
    }

    /// `(Ω^min, Ω^max)` over the sentences of an utterance.
    pub fn utterance_omega(&self, text: &str) -> Option<(f64, f64)> {
        let scores: Vec<f64> = sentences(text).iter().filter_map(|s| self.sentence_omega(s)).collect();
        if scores.is_empty() {
            return None;
        }
        Some((
            scores.iter().copied().fold(f64::INFINITY, f64::min),
            scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ))
    }
}

pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let mut word = String::new();
        for c in raw.to_lowercase().chars() {
            if c.is_alphanumeric() || c == '_' {
                word.push(c);
            } else if c == '?' {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push("?".to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

struct Utt {
    role: Role,
    text: String,
}

/// `(conversation id, merged index, text)` of every merged agent utterance.
pub fn merged_agent_texts(corpus: &Corpus) -> Vec<(String, usize, String)> {
    merged(corpus)
        .into_iter()
        .zip(&corpus.conversations)
        .flat_map(|(utts, c)| {
            utts.into_iter()
                .enumerate()
                .filter(|(_, u)| u.role == Role::Agent)
                .map(|(i, u)| (c.conversation_id.clone(), i, u.text))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn merged(corpus: &Corpus) -> Vec<Vec<Utt>> {
    corpus
        .conversations
        .iter()
        .map(|c| {
            let mut out: Vec<Utt> = Vec::new();
            for u in &c.utterances {
                if let Some(last) = out.last_mut() {
                    if last.role == u.role {
                        last.text = format!("{}\n{}", last.text, u.text);
                        continue;
                    }
                }
                out.push(Utt {
                    role: u.role,
                    text: u.text.clone(),
                });
            }
            out
        })
        .collect()
}

/// Rows are ℓ₂-normalized tf-idf vectors over the sorted vocabulary of the
/// documents, `idf = 1 + ln(N / df)`.
pub fn tfidf_rows(docs: &[Vec<String>]) -> (Vec<String>, Matrix) {
    let (vocab, _, rows) = tfidf_table(docs);
    (vocab, rows)
}

fn tfidf_table(docs: &[Vec<String>]) -> (Vec<String>, Vec<f64>, Matrix) {
    let vocab: Vec<String> = docs
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = docs.len() as f64;
    let mut rows = Vec::new();
    let idf: Vec<f64> = vocab
        .iter()
        .map(|w| {
            let df = docs.iter().filter(|d| d.contains(w)).count() as f64;
            1.0 + (n / df).ln()
        })
        .collect();
    for d in docs {
        let mut row: Vec<f64> = vocab
            .iter()
            .zip(&idf)
            .map(|(w, idf)| d.iter().filter(|t| *t == w).count() as f64 * idf)
            .collect();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut row {
                *x /= norm;
            }
        }
        rows.push(row);
    }
    (vocab, idf, rows)
}

pub fn fit(corpus: &Corpus, cfg: &OracleConfig) -> OracleFit {
    let convs = merged(corpus);
    let in_bounds = |t: &str| {
        let n = t.split_whitespace().count();
        n >= cfg.min_words && n <= cfg.max_words
    };
    // (conversation, agent position, client position, is_reply)
    let mut pairs = Vec::new();
    for (c, conv) in convs.iter().enumerate() {
        for i in 0..conv.len().saturating_sub(1) {
            let (a, b) = (&conv[i], &conv[i + 1]);
            if !(in_bounds(&a.text) && in_bounds(&b.text)) {
                continue;
            }
            match (a.role, b.role) {
                (Role::Agent, Role::Client) => pairs.push((c, i, i + 1, true)),
                (Role::Client, Role::Agent) => pairs.push((c, i + 1, i, false)),
                _ => {}
            }
        }
    }
    let client_keys: Vec<(usize, usize)> = pairs
        .iter()
        .map(|p| (p.0, p.2))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let agent_keys: Vec<(usize, usize)> = pairs
        .iter()
        .map(|p| (p.0, p.1))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let client_docs: Vec<Vec<String>> = client_keys.iter().map(|&(c, i)| tokens(&convs[c][i].text)).collect();
    let agent_docs: Vec<Vec<String>> = agent_keys.iter().map(|&(c, i)| tokens(&convs[c][i].text)).collect();
    let (_, x) = tfidf_rows(&client_docs);
    let (agent_vocab, agent_idf, agent_rows) = tfidf_table(&agent_docs);

    let d = svd(&x);
    let first = usize::from(cfg.drop_first);
    let k_total = cfg.k_keep + first;
    let s: Vec<f64> = d.s[first..k_total].to_vec();
    let mut rows: Matrix = Vec::new();
    let mut flagged = Vec::new();
    for u in &d.u {
        let mut r: Vec<f64> = u[first..k_total].to_vec();
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        flagged.push(norm < 1e-12);
        if norm >= 1e-12 {
            for x in &mut r {
                *x /= norm;
            }
        }
        rows.push(r);
    }

    let range = |members: &[(usize, f64)]| -> Option<f64> {
        let mut center = vec![0.0; cfg.k_keep];
        for &(row, w) in members {
            for j in 0..cfg.k_keep {
                center[j] += w * rows[row][j];
            }
        }
        if !cfg.plain_mean {
            for j in 0..cfg.k_keep {
                center[j] /= s[j];
            }
        }
        if center.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-12 {
            return None;
        }
        let total: f64 = members
            .iter()
            .map(|&(row, _)| cosine_distance(&rows[row], &center))
            .sum();
        Some(total / members.len() as f64)
    };

    let mut stats = BTreeMap::new();
    for (w_id, w) in agent_vocab.iter().enumerate() {
        let mut replies = Vec::new();
        let mut preds = Vec::new();
        for &(c, a, cl, is_reply) in &pairs {
            let doc = agent_keys.iter().position(|k| *k == (c, a)).unwrap();
            let weight = agent_rows[doc][w_id];
            if weight <= 0.0 {
                continue;
            }
            let row = client_keys.iter().position(|k| *k == (c, cl)).unwrap();
            if flagged[row] {
                continue;
            }
            if is_reply {
                replies.push((row, weight));
            } else {
                preds.push((row, weight));
            }
        }
        if replies.len() < cfg.min_support.max(1) || preds.len() < cfg.min_support.max(1) {
            continue;
        }
        if let (Some(fwd), Some(bwd)) = (range(&replies), range(&preds)) {
            stats.insert(
                w.clone(),
                OracleStats {
                    fwd,
                    bwd,
                    omega: bwd - fwd,
                    n_replies: replies.len(),
                    n_preds: preds.len(),
                },
            );
        }
    }
    OracleFit {
        stats,
        singular_values: d.s,
        agent_idf: agent_vocab.iter().cloned().zip(agent_idf).collect(),
    }
}
