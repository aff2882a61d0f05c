//! End-to-end runs on planted corpora.

use orient_core::analysis::{attach_scores, segment_profile, Bootstrap, Measure};
use orient_core::synth::{generate_planted_corpus, GroundTruth, PlantedKind, PlantedSpec};
use orient_core::{fit_orientation, score_corpus, Role, RunConfig};

#[derive(Debug, Clone)]
pub struct Recovery {
    pub seed: u64,
    /// Every prompt has Ω > 0 and every reflect Ω < 0.
    pub signs_correct: bool,
    /// Mean prompt Ω minus mean reflect Ω.
    pub separation: f64,
    /// Smallest prompt Ω minus largest reflect Ω.
    pub margin: f64,
    pub missing: usize,
}

pub fn planted_recovery(spec: &PlantedSpec, cfg: &RunConfig) -> Recovery {
    let corpus = generate_planted_corpus(spec).unwrap();
    let model = fit_orientation(&corpus, cfg).unwrap();
    let truth = GroundTruth::of(spec);
    let mut missing = 0;
    let mut omegas = |kind| -> Vec<f64> {
        truth
            .of_kind(kind)
            .filter_map(|p| {
                let o = model.stats_for(p).map(|s| s.orientation);
                missing += usize::from(o.is_none());
                o
            })
            .collect()
    };
    let prompts = omegas(PlantedKind::Prompt);
    let reflects = omegas(PlantedKind::Reflect);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let min_prompt = prompts.iter().copied().fold(f64::INFINITY, f64::min);
    let max_reflect = reflects.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Recovery {
        seed: spec.seed,
        signs_correct: missing == 0 && min_prompt > 0.0 && max_reflect < 0.0,
        separation: mean(&prompts) - mean(&reflects),
        margin: min_prompt - max_reflect,
        missing,
    }
}

/// Macroaveraged mean of `measure` per segment.
pub fn segment_means(spec: &PlantedSpec, cfg: &RunConfig, measure: Measure) -> Vec<f64> {
    let corpus = generate_planted_corpus(spec).unwrap();
    let model = fit_orientation(&corpus, cfg).unwrap();
    let scores = score_corpus(&corpus, &model, Role::Agent, false).unwrap();
    let convs = attach_scores(&corpus, &scores.rows);
    let profile = segment_profile(&convs, cfg.n_segments, cfg.min_agent_msgs, None, &Bootstrap::NONE).unwrap();
    profile
        .rows
        .iter()
        .filter(|r| r.measure == measure)
        .map(|r| r.mean.unwrap_or(f64::NAN))
        .collect()
}

pub fn strictly_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

/// Fraction of `reps` standard-normal samples of size `n` whose bootstrap
/// interval for the mean contains the true mean 0.
pub fn bootstrap_coverage(reps: usize, n: usize, resamples: usize, level: f64, seed: u64) -> f64 {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for rep in 0..reps {
        let sample: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (lo, hi) = orient_core::stats::bootstrap_ci(&sample, resamples, level, seed ^ rep as u64).unwrap();
        if lo <= 0.0 && 0.0 <= hi {
            hits += 1;
        }
    }
    hits as f64 / reps as f64
}
