//! Configuration resolution: flags over config file over profile preset
//! over defaults.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use orient_core::RunConfig;
use serde_json::{json, Map, Value};

pub const SEED_ENV: &str = "ORIENT_SEED";

/// Flags mirroring the configuration fields.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Named preset: counseling or court.
    #[arg(long, default_value = "counseling")]
    pub profile: String,
    /// JSON file with (possibly partial) configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed; falls back to the config file, then ORIENT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_words: Option<usize>,
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Remove the upper word bound.
    #[arg(long, conflicts_with = "max_words")]
    pub no_max_words: bool,
    /// unigram, bigram, uni_plus_bi or external.
    #[arg(long)]
    pub agent_extractor: Option<String>,
    #[arg(long)]
    pub client_extractor: Option<String>,
    #[arg(long)]
    pub agent_top_k: Option<usize>,
    #[arg(long)]
    pub client_top_k: Option<usize>,
    #[arg(long)]
    pub agent_min_utterances: Option<usize>,
    #[arg(long)]
    pub client_min_utterances: Option<usize>,
    #[arg(long)]
    pub svd_dims: Option<usize>,
    #[arg(long)]
    pub drop_first: Option<bool>,
    #[arg(long)]
    pub row_normalize: Option<bool>,
    #[arg(long)]
    pub log_tf: Option<bool>,
    #[arg(long)]
    pub min_support: Option<usize>,
    /// inverse_scaled (the default) or plain_mean.
    #[arg(long)]
    pub central_point_mode: Option<String>,
    /// paired or all_in_conversations.
    #[arg(long)]
    pub client_rows: Option<String>,
    #[arg(long)]
    pub svd_tolerance: Option<f64>,
    #[arg(long)]
    pub svd_max_steps: Option<usize>,
    #[arg(long)]
    pub n_segments: Option<usize>,
    #[arg(long)]
    pub min_agent_msgs: Option<usize>,
    #[arg(long)]
    pub bootstrap_resamples: Option<usize>,
    #[arg(long)]
    pub ci_level: Option<f64>,
    /// First and last conversation, e.g. 20,120.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub counselor_window: Option<Vec<usize>>,
    #[arg(long)]
    pub counselor_min_conversations: Option<usize>,
}

impl ConfigArgs {
    fn flag_patch(&self) -> Value {
        let mut p = Map::new();
        let mut put = |k: &str, v: Value| {
            p.insert(k.to_string(), v);
        };
        if let Some(v) = self.seed {
            put("seed", json!(v));
        }
        if let Some(v) = self.min_words {
            put("min_words", json!(v));
        }
        if let Some(v) = self.max_words {
            put("max_words", json!(v));
        }
        if self.no_max_words {
            put("max_words", Value::Null);
        }
        if let Some(v) = &self.agent_extractor {
            put("agent_extractor", json!({ "mode": v }));
        }
        if let Some(v) = &self.client_extractor {
            put("client_extractor", json!({ "mode": v }));
        }
        if let Some(v) = self.agent_top_k {
            put("agent_top_k", json!(v));
        }
        if let Some(v) = self.client_top_k {
            put("client_top_k", json!(v));
        }
        if let Some(v) = self.agent_min_utterances {
            put("agent_min_utterances", json!(v));
        }
        if let Some(v) = self.client_min_utterances {
            put("client_min_utterances", json!(v));
        }
        if let Some(v) = self.svd_dims {
            put("svd_dims", json!(v));
        }
        if let Some(v) = self.drop_first {
            put("drop_first", json!(v));
        }
        if let Some(v) = self.row_normalize {
            put("row_normalize", json!(v));
        }
        if let Some(v) = self.log_tf {
            put("log_tf", json!(v));
        }
        if let Some(v) = self.min_support {
            put("min_support", json!(v));
        }
        if let Some(v) = &self.central_point_mode {
            put("central_point_mode", json!(v));
        }
        if let Some(v) = &self.client_rows {
            put("client_rows", json!(v));
        }
        if let Some(v) = self.svd_tolerance {
            put("svd_tolerance", json!(v));
        }
        if let Some(v) = self.svd_max_steps {
            put("svd_max_steps", json!(v));
        }
        if let Some(v) = self.n_segments {
            put("n_segments", json!(v));
        }
        if let Some(v) = self.min_agent_msgs {
            put("min_agent_msgs", json!(v));
        }
        if let Some(v) = self.bootstrap_resamples {
            put("bootstrap_resamples", json!(v));
        }
        if let Some(v) = self.ci_level {
            put("ci_level", json!(v));
        }
        if let Some(v) = &self.counselor_window {
            put("counselor_window", json!(v));
        }
        if let Some(v) = self.counselor_min_conversations {
            put("counselor_min_conversations", json!(v));
        }
        Value::Object(p)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::profile(&self.profile)?;
        let mut seed_from_file = false;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let patch: Value =
                serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
            seed_from_file = patch.get("seed").is_some();
            cfg = cfg
                .overlay(&patch)
                .with_context(|| format!("in config file {}", path.display()))?;
        }
        if self.seed.is_none() && !seed_from_file {
            if let Ok(raw) = std::env::var(SEED_ENV) {
                cfg.seed = raw
                    .trim()
                    .parse()
                    .with_context(|| format!("{SEED_ENV}={raw:?} is not an unsigned integer"))?;
            }
        }
        Ok(cfg.overlay(&self.flag_patch())?)
    }
}

/// Seed for commands without a full configuration: flag, then
/// ORIENT_SEED, then 0.
pub fn default_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={raw:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_profile() {
        let args = ConfigArgs {
            profile: "court".into(),
            min_support: Some(3),
            agent_extractor: Some("bigram".into()),
            counselor_window: Some(vec![5, 50]),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.profile, "court");
        assert_eq!(cfg.min_support, 3);
        assert_eq!(cfg.counselor_window, (5, 50));
        assert_eq!(cfg.min_words, 10);
    }

    #[test]
    fn file_between_profile_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"min_support": 4, "svd_dims": 10, "seed": 9}"#).unwrap();
        let args = ConfigArgs {
            profile: "counseling".into(),
            config: Some(path),
            svd_dims: Some(12),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.min_support, cfg.svd_dims, cfg.seed), (4, 12, 9));
    }

    #[test]
    fn central_point_mode_names() {
        use orient_core::embedding::CentralPointMode;
        for (name, mode) in [
            ("inverse_scaled", CentralPointMode::InverseScaled),
            ("paper", CentralPointMode::InverseScaled),
            ("plain_mean", CentralPointMode::PlainMean),
        ] {
            let args = ConfigArgs {
                profile: "counseling".into(),
                central_point_mode: Some(name.into()),
                ..Default::default()
            };
            assert_eq!(args.resolve().unwrap().central_point_mode, mode);
        }
    }

    #[test]
    fn bad_values_rejected() {
        let args = ConfigArgs {
            profile: "counseling".into(),
            central_point_mode: Some("median".into()),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
        let args = ConfigArgs {
            profile: "debate".into(),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
    }
}
