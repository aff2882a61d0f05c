//! Small random corpora for oracle comparisons.

use orient_core::config::RunConfig;
use orient_core::phrasing::{ExtractorConfig, ExtractorMode};
use orient_core::{Conversation, Corpus, Role, Utterance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pipeline::{self, OracleConfig};

#[derive(Debug, Clone, Copy)]
pub struct FixtureShape {
    pub n_conversations: usize,
    pub turns: usize,
    pub agent_words: usize,
    pub client_clusters: usize,
    pub cluster_size: usize,
    /// Probability that a turn keeps the previous speaker.
    pub repeat_rate: f64,
}

impl Default for FixtureShape {
    fn default() -> Self {
        FixtureShape {
            n_conversations: 10,
            turns: 14,
            agent_words: 12,
            client_clusters: 4,
            cluster_size: 8,
            repeat_rate: 0.1,
        }
    }
}

/// Agent words lean towards one client cluster before them and another
/// after them, so ranges differ by phrasing.
pub fn random_corpus(shape: &FixtureShape, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agent: Vec<String> = (0..shape.agent_words).map(|i| format!("a{i}")).collect();
    let client = |c: usize, j: usize| format!("c{c}x{j}");
    let mut convs = Vec::new();
    for c in 0..shape.n_conversations {
        let id = format!("f{c:03}");
        let mut utts = Vec::new();
        let mut role = if rng.random_bool(0.5) {
            Role::Agent
        } else {
            Role::Client
        };
        let mut last_agent = rng.random_range(0..shape.agent_words);
        for i in 0..shape.turns {
            let n_words = rng.random_range(4..9);
            let text: Vec<String> = match role {
                Role::Agent => {
                    last_agent = rng.random_range(0..shape.agent_words);
                    (0..n_words)
                        .map(|_| {
                            if rng.random_bool(0.5) {
                                agent[last_agent].clone()
                            } else {
                                agent[rng.random_range(0..shape.agent_words)].clone()
                            }
                        })
                        .collect()
                }
                Role::Client => {
                    let cluster = if rng.random_bool(0.6) {
                        last_agent % shape.client_clusters
                    } else {
                        rng.random_range(0..shape.client_clusters)
                    };
                    (0..n_words)
                        .map(|_| {
                            let k = if rng.random_bool(0.8) {
                                cluster
                            } else {
                                rng.random_range(0..shape.client_clusters)
                            };
                            client(k, rng.random_range(0..shape.cluster_size))
                        })
                        .collect()
                }
            };
            utts.push(Utterance::new(&id, format!("{id}-{i:02}"), role, i, text.join(" ")));
            if !rng.random_bool(shape.repeat_rate) {
                role = match role {
                    Role::Agent => Role::Client,
                    Role::Client => Role::Agent,
                };
            }
        }
        convs.push(Conversation::new(id, utts));
    }
    Corpus::new(convs)
}

/// Unigram phrasings on both sides, full vocabularies and small latent
/// dimension.
pub fn small_config(svd_dims: usize) -> RunConfig {
    RunConfig {
        profile: "fixture".into(),
        min_words: 3,
        max_words: Some(24),
        agent_extractor: ExtractorConfig::new(ExtractorMode::Unigram),
        client_extractor: ExtractorConfig::new(ExtractorMode::Unigram),
        agent_top_k: None,
        client_top_k: None,
        svd_dims,
        min_support: 2,
        svd_tolerance: 1e-13,
        ..RunConfig::counseling()
    }
}

pub fn oracle_config(cfg: &RunConfig) -> OracleConfig {
    OracleConfig {
        min_words: cfg.min_words,
        max_words: cfg.max_words.unwrap_or(usize::MAX),
        k_keep: cfg.svd_dims,
        drop_first: cfg.drop_first,
        min_support: cfg.min_support,
        plain_mean: cfg.central_point_mode == orient_core::embedding::CentralPointMode::PlainMean,
    }
}

/// Smallest gap between consecutive singular values at the boundaries of
/// the retained block.
pub fn boundary_gap(singular_values: &[f64], cfg: &RunConfig) -> f64 {
    let k_total = cfg.svd_total_dims();
    let mut gap = singular_values[k_total - 1] - singular_values.get(k_total).copied().unwrap_or(0.0);
    if cfg.drop_first {
        gap = gap.min(singular_values[0] - singular_values[1]);
    }
    gap
}

/// The first `count` seeds from `start` whose fixtures have a boundary gap
/// of at least `min_gap`, with their oracle fits.
pub fn gapped_fixtures(
    shape: &FixtureShape,
    cfg: &RunConfig,
    count: usize,
    start: u64,
    min_gap: f64,
) -> Vec<(u64, Corpus, pipeline::OracleFit)> {
    let oc = oracle_config(cfg);
    let mut out = Vec::new();
    let mut seed = start;
    while out.len() < count {
        let corpus = random_corpus(shape, seed);
        let fit = pipeline::fit(&corpus, &oc);
        if fit.singular_values.len() > cfg.svd_total_dims() && boundary_gap(&fit.singular_values, cfg) >= min_gap {
            out.push((seed, corpus, fit));
        }
        seed += 1;
        assert!(seed < start + 1000, "no gapped fixtures found");
    }
    out
}
