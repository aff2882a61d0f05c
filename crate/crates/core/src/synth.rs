//! Synthetic conversations with planted forwards and backwards phrasings.
//!
//! Agent messages carry planted phrasings. A prompt phrasing
//! draws the words of the following client utterance from its topic
//! cluster; a reflect phrasing draws the words of the preceding client
//! utterance from its cluster. Neutral phrasings leave both neighbors to
//! the background vocabulary.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::{Conversation, Corpus, Role, Utterance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPhrasing {
    pub phrasing: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n_conversations: usize,
    /// Agent turns per conversation; conversations open and close with a
    /// client utterance.
    pub turns_per_conversation: usize,
    pub topic_clusters: Vec<Vec<String>>,
    pub prompt_phrasings: Vec<PlantedPhrasing>,
    pub reflect_phrasings: Vec<PlantedPhrasing>,
    pub neutral_phrasings: Vec<String>,
    /// Client words not tied to any planted cluster.
    pub background_words: Vec<String>,
    /// Client utterances without a planted cluster draw from one of this
    /// many equal slices of the background vocabulary, chosen uniformly.
    pub background_topics: usize,
    /// Zipf exponent of background draws; `0` is uniform.
    pub background_exponent: f64,
    /// Words shared by most client utterances.
    pub common_words: Vec<String>,
    pub common_rate: f64,
    pub agent_filler_words: Vec<String>,
    /// Share of client words replaced by background draws.
    pub noise_rate: f64,
    /// How strongly prompts displace reflections later in a conversation,
    /// in `[0, 1]`.
    pub stage_drift: f64,
    pub client_words: (usize, usize),
    pub agent_sentences: usize,
    /// Agent sentences per message that carry a planted phrasing; the
    /// others are filler only.
    pub planted_per_message: usize,
    pub agent_sentence_words: (usize, usize),
    pub n_agents: usize,
    pub helpful_rate: f64,
    pub risk_rate: f64,
    pub seed: u64,
}

/// Deterministic pronounceable word for `n`, unique per `n`.
pub fn pseudo_word(n: usize) -> String {
    const ONSETS: [&str; 16] = [
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "ch",
    ];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let mut n = n;
    let mut word = String::new();
    for _ in 0..2 {
        word.push_str(ONSETS[n % 16]);
        word.push_str(VOWELS[(n / 16) % 5]);
        n /= 80;
    }
    while n > 0 {
        word.push_str(ONSETS[n % 16]);
        word.push_str(VOWELS[(n / 16) % 5]);
        n /= 80;
    }
    word
}

struct WordSource(usize);

impl WordSource {
    fn take(&mut self, n: usize) -> Vec<String> {
        let words = (self.0..self.0 + n).map(pseudo_word).collect();
        self.0 += n;
        words
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpecShape {
    pub n_conversations: usize,
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub per_cluster: usize,
    pub n_neutral: usize,
    pub n_background: usize,
    pub n_background_topics: usize,
    pub n_fillers: usize,
}

impl PlantedSpec {
    /// Builds a spec with generated word lists: `per_cluster` prompt and
    /// reflect phrasings for each cluster.
    pub fn with_shape(shape: SpecShape, seed: u64) -> Self {
        let mut words = WordSource(0);
        let topic_clusters = (0..shape.n_clusters).map(|_| words.take(shape.cluster_size)).collect();
        let planted = |kind: &str| -> Vec<PlantedPhrasing> {
            (0..shape.n_clusters * shape.per_cluster)
                .map(|i| PlantedPhrasing {
                    phrasing: format!("{kind}{}", pseudo_word(words.0 + i)),
                    cluster: i % shape.n_clusters,
                })
                .collect()
        };
        let prompt_phrasings = planted("ask");
        let reflect_phrasings = planted("hear");
        words.0 += shape.n_clusters * shape.per_cluster;
        let neutral_phrasings = words
            .take(shape.n_neutral)
            .into_iter()
            .map(|w| format!("say{w}"))
            .collect();
        PlantedSpec {
            n_conversations: shape.n_conversations,
            turns_per_conversation: 12,
            topic_clusters,
            prompt_phrasings,
            reflect_phrasings,
            neutral_phrasings,
            background_words: words.take(shape.n_background),
            background_topics: shape.n_background_topics,
            background_exponent: 0.5,
            common_words: words.take(8),
            common_rate: 0.25,
            agent_filler_words: words.take(shape.n_fillers),
            noise_rate: 0.2,
            stage_drift: 0.0,
            client_words: (16, 30),
            agent_sentences: 2,
            planted_per_message: 1,
            agent_sentence_words: (8, 14),
            n_agents: 10,
            helpful_rate: 0.6,
            risk_rate: 0.3,
            seed,
        }
    }

    /// 200 conversations, three topic clusters, noise 0.2.
    pub fn default_with_seed(seed: u64) -> Self {
        PlantedSpec::with_shape(
            SpecShape {
                n_conversations: 200,
                n_clusters: 3,
                cluster_size: 20,
                per_cluster: 1,
                n_neutral: 3,
                n_background: 660,
                n_background_topics: 22,
                n_fillers: 40,
            },
            seed,
        )
    }

    /// The default spec with prompts increasingly displacing reflections
    /// over the course of each conversation.
    pub fn drift_with_seed(seed: u64) -> Self {
        PlantedSpec {
            stage_drift: 0.9,
            ..PlantedSpec::default_with_seed(seed)
        }
    }

    /// Large enough for full-size vocabularies: about 100k training pairs.
    pub fn perf_with_seed(seed: u64) -> Self {
        PlantedSpec {
            n_agents: 200,
            ..PlantedSpec::with_shape(
                SpecShape {
                    n_conversations: 4200,
                    n_clusters: 12,
                    cluster_size: 40,
                    per_cluster: 8,
                    n_neutral: 40,
                    n_background: 9000,
                    n_background_topics: 12,
                    n_fillers: 120,
                },
                seed,
            )
        }
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "default" => Ok(PlantedSpec::default_with_seed(seed)),
            "drift" => Ok(PlantedSpec::drift_with_seed(seed)),
            "perf" => Ok(PlantedSpec::perf_with_seed(seed)),
            other => Err(Error::Config(format!(
                "unknown synth preset {other:?} (available: default, drift, perf)"
            ))),
        }
    }

    /// The same corpus structure with prompt and reflect roles exchanged.
    pub fn mirrored(&self) -> Self {
        PlantedSpec {
            prompt_phrasings: self.reflect_phrasings.clone(),
            reflect_phrasings: self.prompt_phrasings.clone(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_conversations == 0 || self.turns_per_conversation == 0 {
            return bad("a planted corpus needs at least one conversation and one agent turn".into());
        }
        if self.topic_clusters.iter().any(Vec::is_empty) || self.background_words.is_empty() {
            return bad("topic clusters and the background vocabulary must be non-empty".into());
        }
        if self.background_topics == 0 || self.background_topics > self.background_words.len() {
            return bad(format!(
                "background_topics must be between 1 and the background size {}",
                self.background_words.len()
            ));
        }
        if self.agent_filler_words.is_empty() {
            return bad("agent filler vocabulary is empty".into());
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return bad(format!("noise_rate {} is outside [0, 1)", self.noise_rate));
        }
        for (name, v) in [
            ("common_rate", self.common_rate),
            ("stage_drift", self.stage_drift),
            ("helpful_rate", self.helpful_rate),
            ("risk_rate", self.risk_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} is outside [0, 1]"));
            }
        }
        if self.common_rate > 0.0 && self.common_words.is_empty() {
            return bad("common_rate is positive but there are no common words".into());
        }
        if self.background_exponent.is_nan() || self.background_exponent < 0.0 {
            return bad("background_exponent must be non-negative".into());
        }
        for (name, (lo, hi)) in [
            ("client_words", self.client_words),
            ("agent_sentence_words", self.agent_sentence_words),
        ] {
            if lo == 0 || lo > hi {
                return bad(format!("invalid {name} range ({lo}, {hi})"));
            }
        }
        if self.agent_sentences == 0 || self.n_agents == 0 {
            return bad("agent_sentences and n_agents must be positive".into());
        }
        if self.planted_per_message == 0 || self.planted_per_message > self.agent_sentences {
            return bad(format!(
                "planted_per_message must be between 1 and agent_sentences ({})",
                self.agent_sentences
            ));
        }
        if self.prompt_phrasings.is_empty() && self.reflect_phrasings.is_empty() && self.neutral_phrasings.is_empty() {
            return bad("no planted phrasings".into());
        }
        let mut client_seen = HashSet::new();
        let client_lists = self
            .topic_clusters
            .iter()
            .chain([&self.background_words, &self.common_words]);
        for w in client_lists.flatten() {
            if !client_seen.insert(w.as_str()) {
                return bad(format!("client word {w:?} appears in more than one word set"));
            }
        }
        let mut agent_seen = HashSet::new();
        let planted = self
            .prompt_phrasings
            .iter()
            .chain(&self.reflect_phrasings)
            .map(|p| &p.phrasing)
            .chain(&self.neutral_phrasings)
            .chain(&self.agent_filler_words);
        for w in planted {
            if w.split_whitespace().count() != 1 {
                return bad(format!("planted phrasing {w:?} must be a single token"));
            }
            if !agent_seen.insert(w.as_str()) {
                return bad(format!("agent phrasing {w:?} appears in more than one list"));
            }
        }
        for p in self.prompt_phrasings.iter().chain(&self.reflect_phrasings) {
            if p.cluster >= self.topic_clusters.len() {
                return bad(format!("{:?} refers to missing cluster {}", p.phrasing, p.cluster));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedKind {
    Prompt,
    Reflect,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: PlantedSpec,
    /// Planted phrasing → kind.
    pub phrasings: BTreeMap<String, PlantedKind>,
}

impl GroundTruth {
    pub fn of(spec: &PlantedSpec) -> Self {
        let mut phrasings = BTreeMap::new();
        for p in &spec.prompt_phrasings {
            phrasings.insert(p.phrasing.clone(), PlantedKind::Prompt);
        }
        for p in &spec.reflect_phrasings {
            phrasings.insert(p.phrasing.clone(), PlantedKind::Reflect);
        }
        for p in &spec.neutral_phrasings {
            phrasings.insert(p.clone(), PlantedKind::Neutral);
        }
        GroundTruth {
            spec: spec.clone(),
            phrasings,
        }
    }

    pub fn of_kind(&self, kind: PlantedKind) -> impl Iterator<Item = &str> {
        self.phrasings
            .iter()
            .filter(move |(_, k)| **k == kind)
            .map(|(p, _)| p.as_str())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One agent sentence's planted phrasing.
#[derive(Clone, Copy)]
enum Slot<'a> {
    Prompt(&'a PlantedPhrasing),
    Reflect(&'a PlantedPhrasing),
    Neutral(&'a str),
    Filler,
}

struct Sampler<'a> {
    spec: &'a PlantedSpec,
    zipf: Zipf<f64>,
}

impl<'a> Sampler<'a> {
    fn background(&self, rng: &mut ChaCha8Rng) -> &'a str {
        let i = self.zipf.sample(rng) as usize - 1;
        &self.spec.background_words[i.min(self.spec.background_words.len() - 1)]
    }

    fn slot(&self, rng: &mut ChaCha8Rng, stage: f64) -> Slot<'a> {
        let s = self.spec;
        let tilt = s.stage_drift * (2.0 * stage - 1.0);
        let weights = [
            if s.prompt_phrasings.is_empty() { 0.0 } else { 1.0 + tilt },
            if s.reflect_phrasings.is_empty() {
                0.0
            } else {
                1.0 - tilt
            },
            if s.neutral_phrasings.is_empty() { 0.0 } else { 1.0 },
        ];
        let total: f64 = weights.iter().sum();
        let mut x = rng.random::<f64>() * total;
        if x < weights[0] {
            return Slot::Prompt(s.prompt_phrasings.choose(rng).expect("non-empty"));
        }
        x -= weights[0];
        if x < weights[1] || s.neutral_phrasings.is_empty() {
            return Slot::Reflect(s.reflect_phrasings.choose(rng).expect("non-empty"));
        }
        Slot::Neutral(s.neutral_phrasings.choose(rng).expect("non-empty"))
    }

    fn agent_message(&self, rng: &mut ChaCha8Rng, slots: &[Slot<'a>]) -> String {
        let s = self.spec;
        let mut sentences = Vec::with_capacity(slots.len());
        for slot in slots {
            let n = rng.random_range(s.agent_sentence_words.0..=s.agent_sentence_words.1);
            let mut words: Vec<&str> = (1..n)
                .map(|_| s.agent_filler_words.choose(rng).expect("non-empty").as_str())
                .collect();
            let planted = match slot {
                Slot::Prompt(p) | Slot::Reflect(p) => p.phrasing.as_str(),
                Slot::Neutral(p) => p,
                Slot::Filler => s.agent_filler_words.choose(rng).expect("non-empty").as_str(),
            };
            words.insert(rng.random_range(0..=words.len()), planted);
            let end = if matches!(slot, Slot::Prompt(_)) { "?" } else { "." };
            sentences.push(format!("{}{end}", words.join(" ")));
        }
        sentences.join(" ")
    }

    /// Client words drawn from the clusters selected by the neighboring
    /// agent sentences.
    fn client_message(&self, rng: &mut ChaCha8Rng, clusters: &[usize]) -> String {
        let s = self.spec;
        let n = rng.random_range(s.client_words.0..=s.client_words.1);
        let topic = clusters.is_empty().then(|| {
            let t = rng.random_range(0..s.background_topics);
            let len = s.background_words.len();
            &s.background_words[t * len / s.background_topics..(t + 1) * len / s.background_topics]
        });
        let words: Vec<&str> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < s.common_rate {
                    return s.common_words.choose(rng).expect("non-empty").as_str();
                }
                if rng.random::<f64>() < s.noise_rate {
                    return self.background(rng);
                }
                match topic {
                    Some(words) => words.choose(rng).expect("non-empty").as_str(),
                    None => {
                        let c = clusters[rng.random_range(0..clusters.len())];
                        s.topic_clusters[c].choose(rng).expect("non-empty").as_str()
                    }
                }
            })
            .collect();
        words.join(" ")
    }

    fn conversation(&self, index: usize) -> Conversation {
        let s = self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(index as u64);
        let id = format!("conv{index:05}");
        let turns = s.turns_per_conversation;
        let slots: Vec<Vec<Slot>> = (0..turns)
            .map(|t| {
                let stage = if turns == 1 { 0.5 } else { t as f64 / (turns - 1) as f64 };
                let mut slots = vec![Slot::Filler; s.agent_sentences];
                for i in rand::seq::index::sample(&mut rng, s.agent_sentences, s.planted_per_message) {
                    slots[i] = self.slot(&mut rng, stage);
                }
                slots
            })
            .collect();
        let mut meta = Map::new();
        meta.insert(
            "agent_id".into(),
            Value::from(format!("agent{:03}", index % s.n_agents)),
        );
        meta.insert("helpful".into(), Value::from(rng.random::<f64>() < s.helpful_rate));
        meta.insert("risk_assessed".into(), Value::from(rng.random::<f64>() < s.risk_rate));

        let mut utterances = Vec::with_capacity(2 * turns + 1);
        for t in 0..=turns {
            let mut clusters = Vec::new();
            if t > 0 {
                clusters.extend(slots[t - 1].iter().filter_map(|sl| match sl {
                    Slot::Prompt(p) => Some(p.cluster),
                    _ => None,
                }));
            }
            if t < turns {
                clusters.extend(slots[t].iter().filter_map(|sl| match sl {
                    Slot::Reflect(p) => Some(p.cluster),
                    _ => None,
                }));
            }
            let text = self.client_message(&mut rng, &clusters);
            let i = utterances.len();
            let mut u = Utterance::new(id.clone(), format!("{id}-{i:02}"), Role::Client, i, text);
            if i == 0 {
                u.meta = meta.clone();
            }
            utterances.push(u);
            if t < turns {
                let text = self.agent_message(&mut rng, &slots[t]);
                let i = utterances.len();
                utterances.push(Utterance::new(id.clone(), format!("{id}-{i:02}"), Role::Agent, i, text));
            }
        }
        Conversation::new(id, utterances)
    }
}

/// Generates the planted corpus; identical specs give identical corpora.
pub fn generate_planted_corpus(spec: &PlantedSpec) -> Result<Corpus> {
    spec.validate()?;
    let zipf = Zipf::new(spec.background_words.len() as f64, spec.background_exponent)
        .map_err(|e| Error::Config(format!("background distribution: {e}")))?;
    let sampler = Sampler { spec, zipf };
    let conversations = (0..spec.n_conversations)
        .into_par_iter()
        .map(|i| sampler.conversation(i))
        .collect();
    Ok(Corpus::new(conversations))
}
