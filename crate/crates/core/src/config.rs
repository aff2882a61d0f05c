//! Run configuration and the named profiles.
//!
//! Precedence when building a configuration: explicit overrides, then a
//! JSON config file, then the profile preset, then the defaults.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::WordBounds;
use crate::embedding::{CentralPointMode, SvdOptions};
use crate::error::{Error, Result};
use crate::phrasing::{ExtractorConfig, ExtractorMode, VocabConfig};
use crate::vectorize::TfIdfOptions;

/// Which client utterances become rows of the term-document matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClientRows {
    /// Client utterances belonging to at least one training pair.
    #[default]
    Paired,
    /// Every client utterance of a conversation with a training pair.
    AllInConversations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: String,
    pub seed: u64,
    pub min_words: usize,
    pub max_words: Option<usize>,
    pub agent_extractor: ExtractorConfig,
    pub client_extractor: ExtractorConfig,
    pub agent_top_k: Option<usize>,
    pub client_top_k: Option<usize>,
    pub agent_min_utterances: usize,
    pub client_min_utterances: usize,
    /// Latent dimensions kept after the optional first-dimension removal.
    pub svd_dims: usize,
    pub drop_first: bool,
    pub row_normalize: bool,
    pub log_tf: bool,
    pub min_support: usize,
    pub central_point_mode: CentralPointMode,
    pub client_rows: ClientRows,
    pub svd_tolerance: f64,
    pub svd_max_steps: Option<usize>,
    pub n_segments: usize,
    pub min_agent_msgs: usize,
    pub bootstrap_resamples: usize,
    pub ci_level: f64,
    /// 1-based inclusive range of each agent's conversations used by the
    /// counselor-level analysis.
    pub counselor_window: (usize, usize),
    pub counselor_min_conversations: usize,
}

pub const PROFILES: &[&str] = &["counseling", "court"];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::counseling()
    }
}

impl RunConfig {
    pub fn counseling() -> Self {
        RunConfig {
            profile: "counseling".into(),
            seed: 0,
            min_words: 15,
            max_words: Some(45),
            agent_extractor: ExtractorConfig::new(ExtractorMode::UniPlusBi),
            client_extractor: ExtractorConfig::new(ExtractorMode::Unigram),
            agent_top_k: Some(5000),
            client_top_k: Some(5000),
            agent_min_utterances: 1,
            client_min_utterances: 1,
            svd_dims: 25,
            drop_first: true,
            row_normalize: true,
            log_tf: false,
            min_support: 10,
            central_point_mode: CentralPointMode::InverseScaled,
            client_rows: ClientRows::Paired,
            svd_tolerance: 1e-10,
            svd_max_steps: None,
            n_segments: 5,
            min_agent_msgs: 10,
            bootstrap_resamples: 1000,
            ci_level: 0.95,
            counselor_window: (20, 120),
            counselor_min_conversations: 120,
        }
    }

    /// Oral-argument transcripts: externally parsed phrasings for both
    /// roles, 10–100 word utterances, and agent phrasings restricted to
    /// those seen in at least 200 utterances.
    pub fn court() -> Self {
        RunConfig {
            profile: "court".into(),
            min_words: 10,
            max_words: Some(100),
            agent_extractor: ExtractorConfig::new(ExtractorMode::External),
            client_extractor: ExtractorConfig::new(ExtractorMode::External),
            agent_min_utterances: 200,
            ..RunConfig::counseling()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "counseling" => Ok(RunConfig::counseling()),
            "court" => Ok(RunConfig::court()),
            other => Err(Error::Config(format!(
                "unknown profile {other:?} (available: {})",
                PROFILES.join(", ")
            ))),
        }
    }

    /// Overlays a (possibly partial) JSON object onto this configuration.
    pub fn overlay(&self, patch: &Value) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        merge_json(&mut base, patch);
        let cfg: RunConfig = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.word_bounds().validate()?;
        if self.svd_dims == 0 {
            return Err(Error::Config("svd_dims must be positive".into()));
        }
        if self.n_segments == 0 {
            return Err(Error::Config("n_segments must be positive".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config(format!("ci_level {} is outside (0, 1)", self.ci_level)));
        }
        if self.svd_tolerance.is_nan() || self.svd_tolerance <= 0.0 {
            return Err(Error::Config("svd_tolerance must be positive".into()));
        }
        let (first, last) = self.counselor_window;
        if first == 0 || first > last {
            return Err(Error::Config(format!("invalid counselor window ({first}, {last})")));
        }
        Ok(())
    }

    pub fn word_bounds(&self) -> WordBounds {
        WordBounds {
            min: self.min_words,
            max: self.max_words,
        }
    }

    pub fn agent_vocab(&self) -> VocabConfig {
        VocabConfig {
            top_k: self.agent_top_k,
            min_utterances: self.agent_min_utterances,
        }
    }

    pub fn client_vocab(&self) -> VocabConfig {
        VocabConfig {
            top_k: self.client_top_k,
            min_utterances: self.client_min_utterances,
        }
    }

    pub fn client_tfidf(&self) -> TfIdfOptions {
        TfIdfOptions {
            row_normalize: self.row_normalize,
            log_tf: self.log_tf,
        }
    }

    /// Agent vectors are always ℓ₂-normalized: their entries are the
    /// context weights.
    pub fn agent_tfidf(&self) -> TfIdfOptions {
        TfIdfOptions {
            row_normalize: true,
            log_tf: self.log_tf,
        }
    }

    /// Number of SVD dimensions computed before the first is dropped.
    pub fn svd_total_dims(&self) -> usize {
        self.svd_dims + usize::from(self.drop_first)
    }

    pub fn svd_options(&self) -> SvdOptions {
        SvdOptions {
            tolerance: self.svd_tolerance,
            max_steps: self.svd_max_steps,
        }
    }
}

fn merge_json(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn counseling_defaults() {
        let c = RunConfig::counseling();
        assert_eq!((c.min_words, c.max_words), (15, Some(45)));
        assert_eq!((c.agent_top_k, c.client_top_k), (Some(5000), Some(5000)));
        assert_eq!((c.svd_dims, c.svd_total_dims()), (25, 26));
        assert!(c.drop_first && c.row_normalize);
        assert_eq!(c.client_extractor.mode, ExtractorMode::Unigram);
    }

    #[test]
    fn court_profile() {
        let c = RunConfig::profile("court").unwrap();
        assert_eq!(c.agent_min_utterances, 200);
        assert_eq!(c.agent_extractor.mode, ExtractorMode::External);
        assert_eq!(c.client_extractor.mode, ExtractorMode::External);
        assert!(RunConfig::profile("debate").is_err());
    }

    #[test]
    fn overlay_nested_and_validated() {
        let c = RunConfig::counseling()
            .overlay(&json!({"min_support": 3, "agent_extractor": {"mode": "bigram"}}))
            .unwrap();
        assert_eq!(c.min_support, 3);
        assert_eq!(c.agent_extractor.mode, ExtractorMode::Bigram);
        assert!(c.agent_extractor.lowercase);
        assert!(RunConfig::counseling().overlay(&json!({"min_words": 50})).is_err());
        assert!(RunConfig::counseling().overlay(&json!({"no_such_field": 1})).is_err());
    }
}
