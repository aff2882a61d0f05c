//! Sentence splitting, tokenization, phrasing extraction and vocabularies.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Role, Utterance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub text: String,
    pub phrasings: Vec<String>,
    /// 0-based position within the utterance.
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorMode {
    Unigram,
    Bigram,
    UniPlusBi,
    /// Phrasings come from the record's `phrasings` field.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub mode: ExtractorMode,
    pub lowercase: bool,
    pub strip_punct: bool,
}

impl ExtractorConfig {
    pub fn new(mode: ExtractorMode) -> Self {
        ExtractorConfig {
            mode,
            lowercase: true,
            strip_punct: true,
        }
    }
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig::new(ExtractorMode::Unigram)
    }
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text, and on
/// newlines. Delimiters stay with their sentence; never returns an empty
/// list for non-blank text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\n' {
            push_trimmed(&mut out, &mut current);
            continue;
        }
        current.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            push_trimmed(&mut out, &mut current);
        }
    }
    push_trimmed(&mut out, &mut current);
    if out.is_empty() {
        out.push(text.trim().to_string());
    }
    out
}

fn push_trimmed(out: &mut Vec<String>, current: &mut String) {
    let t = current.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
    current.clear();
}

/// Whitespace tokenization. With `strip_punct`, characters other than
/// alphanumerics and `_` are removed, except `?` which becomes its own
/// token.
pub fn tokenize(text: &str, cfg: &ExtractorConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    for raw in text.split_whitespace() {
        let raw = if cfg.lowercase {
            raw.to_lowercase()
        } else {
            raw.to_string()
        };
        if !cfg.strip_punct {
            tokens.push(raw);
            continue;
        }
        let mut word = String::new();
        for c in raw.chars() {
            if c.is_alphanumeric() || c == '_' {
                word.push(c);
            } else if c == '?' {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push("?".to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Phrasings of one sentence. Duplicates are kept.
pub fn extract_phrasings(text: &str, cfg: &ExtractorConfig, provided: Option<&[String]>) -> Result<Vec<String>> {
    if cfg.mode == ExtractorMode::External {
        return provided.map(<[String]>::to_vec).ok_or_else(|| Error::Record {
            location: "sentence".into(),
            message: "external phrasing mode requires provided phrasings".into(),
        });
    }
    let tokens = tokenize(text, cfg);
    let bigrams = || tokens.windows(2).map(|w| format!("{}_{}", w[0], w[1]));
    Ok(match cfg.mode {
        ExtractorMode::Unigram => tokens.clone(),
        ExtractorMode::Bigram => bigrams().collect(),
        ExtractorMode::UniPlusBi => tokens.iter().cloned().chain(bigrams()).collect(),
        ExtractorMode::External => unreachable!(),
    })
}

/// Sentences of an utterance with their phrasings. In external mode the
/// provided per-sentence lists define the segmentation and the tokenizer is
/// never consulted.
pub fn utterance_sentences(utt: &Utterance, cfg: &ExtractorConfig) -> Result<Vec<Sentence>> {
    if cfg.mode == ExtractorMode::External {
        let provided = utt.provided_phrasings.as_ref().ok_or_else(|| Error::Record {
            location: format!("{}/{}", utt.conversation_id, utt.utterance_id),
            message: "external phrasing mode requires a \"phrasings\" field".into(),
        })?;
        return Ok(provided
            .iter()
            .enumerate()
            .map(|(position, p)| Sentence {
                text: p.join(" "),
                phrasings: p.clone(),
                position,
            })
            .collect());
    }
    split_sentences(&utt.text)
        .into_iter()
        .enumerate()
        .map(|(position, text)| {
            let phrasings = extract_phrasings(&text, cfg, None)?;
            Ok(Sentence {
                text,
                phrasings,
                position,
            })
        })
        .collect()
}

/// All phrasings of an utterance, sentence by sentence, flattened.
pub fn utterance_phrasings(utt: &Utterance, cfg: &ExtractorConfig) -> Result<Vec<String>> {
    Ok(utterance_sentences(utt, cfg)?
        .into_iter()
        .flat_map(|s| s.phrasings)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabConfig {
    /// `None` keeps every phrasing that passes `min_utterances`.
    pub top_k: Option<usize>,
    pub min_utterances: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            top_k: Some(5000),
            min_utterances: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: usize,
    pub phrasing: String,
    pub df: usize,
    pub uf: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    role: Role,
    total_docs: usize,
    entries: Vec<VocabEntry>,
}

/// Phrasing ↔ dense id table, ids `0..len` in rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "VocabularyFile", try_from = "VocabularyFile")]
pub struct Vocabulary {
    pub role: Role,
    entries: Vec<String>,
    index: HashMap<String, usize>,
    pub doc_frequency: Vec<usize>,
    pub utterance_frequency: Vec<usize>,
    pub total_docs: usize,
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            role: v.role,
            total_docs: v.total_docs,
            entries: v.export(),
        }
    }
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = String;

    fn try_from(f: VocabularyFile) -> Result<Self, String> {
        let mut v = Vocabulary {
            role: f.role,
            entries: Vec::with_capacity(f.entries.len()),
            index: HashMap::with_capacity(f.entries.len()),
            doc_frequency: Vec::with_capacity(f.entries.len()),
            utterance_frequency: Vec::with_capacity(f.entries.len()),
            total_docs: f.total_docs,
        };
        for (pos, e) in f.entries.into_iter().enumerate() {
            if e.id != pos {
                return Err(format!("vocabulary ids are not dense at position {pos}"));
            }
            if v.index.insert(e.phrasing.clone(), pos).is_some() {
                return Err(format!("duplicate vocabulary entry {:?}", e.phrasing));
            }
            v.entries.push(e.phrasing);
            v.doc_frequency.push(e.df);
            v.utterance_frequency.push(e.uf);
        }
        Ok(v)
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, phrasing: &str) -> Option<usize> {
        self.index.get(phrasing).copied()
    }

    pub fn phrasing(&self, id: usize) -> &str {
        &self.entries[id]
    }

    pub fn phrasings(&self) -> &[String] {
        &self.entries
    }

    pub fn export(&self) -> Vec<VocabEntry> {
        self.entries
            .iter()
            .enumerate()
            .map(|(id, p)| VocabEntry {
                id,
                phrasing: p.clone(),
                df: self.doc_frequency[id],
                uf: self.utterance_frequency[id],
            })
            .collect()
    }

    /// Maps a phrasing list to in-vocabulary ids, dropping unknown phrasings.
    pub fn ids<'a>(&self, phrasings: impl IntoIterator<Item = &'a String>) -> Vec<usize> {
        phrasings.into_iter().filter_map(|p| self.id(p)).collect()
    }
}

/// Ranks phrasings by the number of documents (utterances) containing them,
/// keeps those with at least `min_utterances`, then truncates to `top_k`.
/// Ties break lexicographically.
pub fn build_vocabulary(docs: &[Vec<String>], role: Role, cfg: &VocabConfig) -> Result<Vocabulary> {
    let counts = docs
        .par_iter()
        .fold(HashMap::<&str, usize>::new, |mut acc, doc| {
            let distinct: HashSet<&str> = doc.iter().map(String::as_str).collect();
            for p in distinct {
                *acc.entry(p).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });

    let max_uf = counts.values().copied().max().unwrap_or(0);
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, uf)| uf >= cfg.min_utterances.max(1))
        .collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(k) = cfg.top_k {
        ranked.truncate(k);
    }
    if ranked.is_empty() {
        return Err(Error::EmptyVocabulary(format!(
            "no {role} phrasing occurs in at least {} of {} utterances (most frequent: {max_uf})",
            cfg.min_utterances,
            docs.len()
        )));
    }
    let entries: Vec<String> = ranked.iter().map(|(p, _)| p.to_string()).collect();
    let uf: Vec<usize> = ranked.iter().map(|&(_, c)| c).collect();
    let index = entries.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
    Ok(Vocabulary {
        role,
        entries,
        index,
        doc_frequency: uf.clone(),
        utterance_frequency: uf,
        total_docs: docs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_examples() {
        assert_eq!(split_sentences("How are you? I'm here."), ["How are you?", "I'm here."]);
        assert_eq!(split_sentences("no delimiters here"), ["no delimiters here"]);
        assert_eq!(split_sentences("Hi...  "), ["Hi..."]);
        assert_eq!(split_sentences("one\ntwo! three"), ["one", "two!", "three"]);
        assert_eq!(split_sentences("3.5 apples"), ["3.5 apples"]);
    }

    #[test]
    fn tokenize_keeps_question_marks() {
        let cfg = ExtractorConfig::default();
        assert_eq!(tokenize("How are You?", &cfg), ["how", "are", "you", "?"]);
        assert_eq!(tokenize("I'm fine, thanks.", &cfg), ["im", "fine", "thanks"]);
        let raw = ExtractorConfig {
            mode: ExtractorMode::Unigram,
            lowercase: false,
            strip_punct: false,
        };
        assert_eq!(tokenize("I'm Fine.", &raw), ["I'm", "Fine."]);
    }

    #[test]
    fn extract_examples() {
        let uni = ExtractorConfig::new(ExtractorMode::Unigram);
        let bi = ExtractorConfig::new(ExtractorMode::Bigram);
        let both = ExtractorConfig::new(ExtractorMode::UniPlusBi);
        let ext = ExtractorConfig::new(ExtractorMode::External);
        assert_eq!(
            extract_phrasings("sounds frustrating", &uni, None).unwrap(),
            ["sounds", "frustrating"]
        );
        assert_eq!(
            extract_phrasings("sounds frustrating", &bi, None).unwrap(),
            ["sounds_frustrating"]
        );
        assert_eq!(
            extract_phrasings("sounds frustrating", &both, None).unwrap(),
            ["sounds", "frustrating", "sounds_frustrating"]
        );
        let provided = vec!["confided_to".to_string(), "to_anyone".to_string()];
        assert_eq!(extract_phrasings("ignored", &ext, Some(&provided)).unwrap(), provided);
        assert!(extract_phrasings("x", &ext, None).is_err());
        assert_eq!(extract_phrasings("no no no", &uni, None).unwrap().len(), 3);
    }

    #[test]
    fn external_sentences_follow_provided_lists() {
        let mut utt = Utterance::new("c", "u", Role::Agent, 0, "Text. With two. Or three.");
        let ext = ExtractorConfig::new(ExtractorMode::External);
        assert!(utterance_sentences(&utt, &ext).is_err());
        utt.provided_phrasings = Some(vec![vec!["confided_to".into(), "to_anyone".into()]]);
        let s = utterance_sentences(&utt, &ext).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].phrasings, ["confided_to", "to_anyone"]);
    }

    fn docs(counts: &[(&str, usize)]) -> Vec<Vec<String>> {
        let n = counts.iter().map(|c| c.1).max().unwrap();
        (0..n)
            .map(|i| counts.iter().filter(|c| i < c.1).map(|c| c.0.to_string()).collect())
            .collect()
    }

    #[test]
    fn vocabulary_examples() {
        let d = docs(&[("x", 5), ("y", 3), ("z", 1)]);
        let cfg = VocabConfig {
            top_k: Some(2),
            min_utterances: 1,
        };
        let v = build_vocabulary(&d, Role::Agent, &cfg).unwrap();
        assert_eq!(v.phrasings(), ["x", "y"]);

        let d = docs(&[("x", 250), ("y", 150)]);
        let cfg = VocabConfig {
            top_k: Some(5000),
            min_utterances: 200,
        };
        assert_eq!(build_vocabulary(&d, Role::Agent, &cfg).unwrap().phrasings(), ["x"]);

        let d = docs(&[("b", 2), ("a", 2), ("c", 4)]);
        let cfg = VocabConfig {
            top_k: None,
            min_utterances: 1,
        };
        let v = build_vocabulary(&d, Role::Client, &cfg).unwrap();
        assert_eq!(v.phrasings(), ["c", "a", "b"]);
        assert_eq!(v.id("a"), Some(1));
        assert_eq!(v.utterance_frequency, [4, 2, 2]);
    }

    #[test]
    fn utterance_frequency_ignores_repeats() {
        let d = vec![
            vec!["a".to_string(), "a".into(), "a".into()],
            vec!["b".into()],
            vec!["b".into()],
        ];
        let v = build_vocabulary(&d, Role::Agent, &VocabConfig::default()).unwrap();
        assert_eq!(v.phrasings(), ["b", "a"]);
    }

    #[test]
    fn empty_vocabulary_is_fatal() {
        let d = docs(&[("x", 3)]);
        let cfg = VocabConfig {
            top_k: None,
            min_utterances: 10,
        };
        assert!(matches!(
            build_vocabulary(&d, Role::Agent, &cfg),
            Err(Error::EmptyVocabulary(_))
        ));
    }

    #[test]
    fn vocabulary_json_roundtrip() {
        let d = docs(&[("x", 5), ("y", 3)]);
        let v = build_vocabulary(&d, Role::Agent, &VocabConfig::default()).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"uf\":5"));
        let back: Vocabulary = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
