//! Conversation records: loading, merging, context pairs and segmentation.
//!
//! A corpus is read from JSON Lines with one utterance per line. Utterances
//! are grouped by `conversation_id` and ordered by `index`; the index is
//! authoritative, file order is not.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Which side of the conversation an utterance comes from. `Agent` is the
/// party whose phrasings are scored (counselor, justice); `Client` is the
/// other party (texter, lawyer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Agent,
    Client,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Agent => "agent",
            Role::Client => "client",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub conversation_id: String,
    pub utterance_id: String,
    pub role: Role,
    pub index: usize,
    pub text: String,
    /// Externally extracted phrasings, one list per sentence.
    pub provided_phrasings: Option<Vec<Vec<String>>>,
    pub word_count: usize,
    /// The record's `meta` object.
    pub meta: Map<String, Value>,
    /// Unknown top-level fields, kept for round-tripping.
    pub extra: Map<String, Value>,
}

impl Utterance {
    pub fn new(
        conversation_id: impl Into<String>,
        utterance_id: impl Into<String>,
        role: Role,
        index: usize,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        Utterance {
            conversation_id: conversation_id.into(),
            utterance_id: utterance_id.into(),
            role,
            index,
            word_count: word_count(&text),
            text,
            provided_phrasings: None,
            meta: Map::new(),
            extra: Map::new(),
        }
    }
}

/// Whitespace-token count, before any punctuation handling.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub conversation_id: String,
    pub utterances: Vec<Utterance>,
    /// Union of the utterances' `meta` objects; the first occurrence of a key
    /// wins.
    pub metadata: Map<String, Value>,
}

impl Conversation {
    pub fn new(conversation_id: impl Into<String>, utterances: Vec<Utterance>) -> Self {
        let mut conv = Conversation {
            conversation_id: conversation_id.into(),
            utterances,
            metadata: Map::new(),
        };
        conv.refresh_metadata();
        conv
    }

    fn refresh_metadata(&mut self) {
        let mut metadata = Map::new();
        for utt in &self.utterances {
            for (k, v) in &utt.meta {
                if !metadata.contains_key(k) {
                    metadata.insert(k.clone(), v.clone());
                }
            }
        }
        self.metadata = metadata;
    }

    pub fn agent_id(&self) -> Option<&str> {
        self.metadata.get("agent_id").and_then(Value::as_str)
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        self.metadata.get(key).and_then(Value::as_bool)
    }

    pub fn agent_positions(&self) -> Vec<usize> {
        self.utterances
            .iter()
            .enumerate()
            .filter(|(_, u)| u.role == Role::Agent)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_alternating(&self) -> bool {
        self.utterances.windows(2).all(|w| w[0].role != w[1].role)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub conversations: Vec<Conversation>,
}

impl Corpus {
    pub fn new(conversations: Vec<Conversation>) -> Self {
        Corpus { conversations }
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn n_utterances(&self) -> usize {
        self.conversations.iter().map(|c| c.utterances.len()).sum()
    }

    pub fn utterance(&self, r: UtteranceRef) -> &Utterance {
        &self.conversations[r.conversation].utterances[r.utterance]
    }

    pub fn merged(&self) -> Corpus {
        Corpus::new(self.conversations.iter().map(merge_consecutive).collect())
    }

    /// Reverses the utterance order of every conversation, reassigning
    /// indices. Utterance ids are kept.
    pub fn reversed(&self) -> Corpus {
        let conversations = self
            .conversations
            .iter()
            .map(|c| {
                let mut utterances: Vec<Utterance> = c.utterances.iter().rev().cloned().collect();
                for (i, u) in utterances.iter_mut().enumerate() {
                    u.index = i;
                }
                Conversation::new(c.conversation_id.clone(), utterances)
            })
            .collect();
        Corpus::new(conversations)
    }

    /// All context pairs of the corpus, in conversation order.
    pub fn pairs(&self) -> Vec<ContextPair> {
        self.conversations
            .iter()
            .enumerate()
            .flat_map(|(i, c)| extract_pairs(i, c))
            .collect()
    }
}

/// Position of an utterance inside a [`Corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UtteranceRef {
    pub conversation: usize,
    pub utterance: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The client utterance answers the agent utterance.
    Reply,
    /// The client utterance is what the agent utterance responds to.
    Predecessor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContextPair {
    pub agent_utt: UtteranceRef,
    pub client_utt: UtteranceRef,
    pub direction: Direction,
}

#[derive(Debug, Clone)]
pub struct SchemaOptions {
    /// Role labels accepted for the agent side.
    pub agent_labels: Vec<String>,
    pub client_labels: Vec<String>,
}

impl Default for SchemaOptions {
    fn default() -> Self {
        SchemaOptions {
            agent_labels: vec!["agent".into()],
            client_labels: vec!["client".into()],
        }
    }
}

impl SchemaOptions {
    fn role(&self, label: &str) -> Option<Role> {
        if self.agent_labels.iter().any(|l| l == label) {
            Some(Role::Agent)
        } else if self.client_labels.iter().any(|l| l == label) {
            Some(Role::Client)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadReport {
    pub lines: usize,
    pub errors: Vec<RecordError>,
    pub dropped_empty: usize,
}

#[derive(Deserialize)]
struct RawRecord {
    conversation_id: String,
    utterance_id: String,
    role: String,
    index: i64,
    text: String,
    #[serde(default)]
    phrasings: Option<Vec<Vec<String>>>,
    #[serde(default)]
    meta: Option<Map<String, Value>>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

pub fn load_corpus(path: impl AsRef<Path>, options: &SchemaOptions) -> Result<(Corpus, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), options).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_corpus<R: Read>(reader: R, options: &SchemaOptions) -> Result<(Corpus, LoadReport)> {
    let mut report = LoadReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Utterance>> = HashMap::new();

    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let raw: RawRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(RecordError {
                    line: lineno,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let Some(role) = options.role(&raw.role) else {
            report.errors.push(RecordError {
                line: lineno,
                message: format!("unknown role {:?}", raw.role),
            });
            continue;
        };
        let Ok(index) = usize::try_from(raw.index) else {
            report.errors.push(RecordError {
                line: lineno,
                message: format!("negative index {}", raw.index),
            });
            continue;
        };
        if raw.text.trim().is_empty() {
            report.dropped_empty += 1;
            continue;
        }
        let mut utt = Utterance::new(raw.conversation_id, raw.utterance_id, role, index, raw.text);
        utt.provided_phrasings = raw.phrasings;
        utt.meta = raw.meta.unwrap_or_default();
        utt.extra = raw.extra;
        if !groups.contains_key(&utt.conversation_id) {
            order.push(utt.conversation_id.clone());
        }
        groups.entry(utt.conversation_id.clone()).or_default().push(utt);
    }
    if report.dropped_empty > 0 {
        log::warn!("dropped {} utterances with empty text", report.dropped_empty);
    }

    let mut conversations = Vec::with_capacity(order.len());
    for id in order {
        let mut utts = groups.remove(&id).unwrap_or_default();
        utts.sort_by_key(|u| u.index);
        if let Some(w) = utts.windows(2).find(|w| w[0].index == w[1].index) {
            return Err(Error::DuplicateIndex {
                conversation_id: id,
                index: w[0].index as i64,
            });
        }
        conversations.push(Conversation::new(id, utts));
    }
    Ok((Corpus::new(conversations), report))
}

fn record_value(utt: &Utterance) -> Value {
    let mut obj = Map::new();
    for (k, v) in &utt.extra {
        obj.insert(k.clone(), v.clone());
    }
    obj.insert("conversation_id".into(), utt.conversation_id.clone().into());
    obj.insert("utterance_id".into(), utt.utterance_id.clone().into());
    obj.insert("role".into(), utt.role.label().into());
    obj.insert("index".into(), utt.index.into());
    obj.insert("text".into(), utt.text.clone().into());
    if let Some(p) = &utt.provided_phrasings {
        obj.insert(
            "phrasings".into(),
            serde_json::to_value(p).expect("string lists serialize"),
        );
    }
    if !utt.meta.is_empty() {
        obj.insert("meta".into(), Value::Object(utt.meta.clone()));
    }
    Value::Object(obj)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    for conv in &corpus.conversations {
        for utt in &conv.utterances {
            serde_json::to_writer(&mut writer, &record_value(utt))?;
            writer.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        }
    }
    writer.flush().map_err(|e| Error::io("<output>", e))
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, BufWriter::new(file))
}

/// Concatenates maximal runs of same-role utterances with a newline
/// separator and reassigns indices `0..n`.
pub fn merge_consecutive(conv: &Conversation) -> Conversation {
    let mut merged: Vec<Utterance> = Vec::with_capacity(conv.utterances.len());
    for utt in &conv.utterances {
        match merged.last_mut() {
            Some(prev) if prev.role == utt.role => {
                prev.text.push('\n');
                prev.text.push_str(&utt.text);
                prev.word_count = word_count(&prev.text);
                prev.provided_phrasings = match (prev.provided_phrasings.take(), &utt.provided_phrasings) {
                    (Some(mut a), Some(b)) => {
                        a.extend(b.iter().cloned());
                        Some(a)
                    }
                    _ => None,
                };
                for (k, v) in &utt.meta {
                    if !prev.meta.contains_key(k) {
                        prev.meta.insert(k.clone(), v.clone());
                    }
                }
            }
            _ => merged.push(utt.clone()),
        }
    }
    for (i, u) in merged.iter_mut().enumerate() {
        u.index = i;
    }
    Conversation::new(conv.conversation_id.clone(), merged)
}

/// Adjacent (agent, client) utterances give a `Reply` pair and adjacent
/// (client, agent) utterances a `Predecessor` pair. Expects a merged
/// conversation.
pub fn extract_pairs(conversation: usize, conv: &Conversation) -> Vec<ContextPair> {
    let at = |utterance| UtteranceRef {
        conversation,
        utterance,
    };
    let mut pairs = Vec::new();
    for (i, w) in conv.utterances.windows(2).enumerate() {
        match (w[0].role, w[1].role) {
            (Role::Agent, Role::Client) => pairs.push(ContextPair {
                agent_utt: at(i),
                client_utt: at(i + 1),
                direction: Direction::Reply,
            }),
            (Role::Client, Role::Agent) => pairs.push(ContextPair {
                agent_utt: at(i + 1),
                client_utt: at(i),
                direction: Direction::Predecessor,
            }),
            _ => {}
        }
    }
    pairs
}

/// Inclusive word-count bounds; `max: None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordBounds {
    pub min: usize,
    pub max: Option<usize>,
}

impl WordBounds {
    pub fn new(min: usize, max: Option<usize>) -> Result<Self> {
        let b = WordBounds { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn unbounded() -> Self {
        WordBounds { min: 0, max: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self.max {
            Some(max) if self.min > max => Err(Error::Config(format!(
                "min_words {} exceeds max_words {}",
                self.min, max
            ))),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, words: usize) -> bool {
        words >= self.min && self.max.is_none_or(|m| words <= m)
    }
}

/// Keeps the pairs whose two utterances both have a word count inside
/// `bounds`.
pub fn filter_training_pairs(corpus: &Corpus, pairs: &[ContextPair], bounds: WordBounds) -> Result<Vec<ContextPair>> {
    bounds.validate()?;
    Ok(pairs
        .iter()
        .filter(|p| {
            bounds.contains(corpus.utterance(p.agent_utt).word_count)
                && bounds.contains(corpus.utterance(p.client_utt).word_count)
        })
        .copied()
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub index: usize,
    /// Positions in the conversation of the segment's agent utterances.
    pub agent_positions: Vec<usize>,
}

/// Splits the agent utterances of a merged conversation into `n_segments`
/// contiguous groups whose sizes differ by at most one; the larger groups
/// come last. Returns `None` below `min_agent_msgs` agent utterances.
pub fn segment_conversation(
    conv: &Conversation,
    n_segments: usize,
    min_agent_msgs: usize,
) -> Result<Option<Vec<Segment>>> {
    if n_segments < 1 {
        return Err(Error::Config("n_segments must be at least 1".into()));
    }
    let positions = conv.agent_positions();
    if positions.len() < min_agent_msgs.max(n_segments) {
        return Ok(None);
    }
    let base = positions.len() / n_segments;
    let larger_from = n_segments - positions.len() % n_segments;
    let mut segments = Vec::with_capacity(n_segments);
    let mut start = 0;
    for index in 0..n_segments {
        let size = if index >= larger_from { base + 1 } else { base };
        segments.push(Segment {
            index,
            agent_positions: positions[start..start + size].to_vec(),
        });
        start += size;
    }
    Ok(Some(segments))
}
