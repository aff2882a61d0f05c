use std::collections::BTreeMap;

use orient_core::analysis::{
    bottom_third_contrast, conversation_summary, counselor_split, segment_profile, Bootstrap, CounselorOutcome,
    Measure, ScoredConversation,
};
use orient_core::{Conversation, Role, Utterance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn random_conversation(rng: &mut ChaCha8Rng, id: usize, agent: usize, n_agent: usize) -> ScoredConversation {
    let cid = format!("c{id:04}");
    let mut utts = Vec::new();
    let mut scores = Vec::new();
    for i in 0..2 * n_agent {
        let role = if i % 2 == 0 { Role::Client } else { Role::Agent };
        let mut u = Utterance::new(&cid, format!("{cid}-{i}"), role, i, "words");
        if i == 0 {
            u.meta.insert("agent_id".into(), json!(format!("agent{agent:02}")));
            u.meta.insert("helpful".into(), json!(rng.random_bool(0.5)));
        }
        utts.push(u);
        scores.push((role == Role::Agent && rng.random_bool(0.85)).then(|| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            (a.min(b), a.max(b))
        }));
    }
    ScoredConversation {
        conversation: Conversation::new(cid, utts),
        scores,
    }
}

#[test]
fn segment_profile_matches_flat_recompute() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let convs: Vec<ScoredConversation> = (0..80)
        .map(|i| {
            let n = rng.random_range(6..25);
            random_conversation(&mut rng, i, i % 7, n)
        })
        .collect();
    let profile = segment_profile(&convs, 5, 10, None, &Bootstrap::NONE).unwrap();

    // One flat row per scored agent message: (conversation, segment, min, max).
    let mut flat = Vec::new();
    let mut included = 0;
    for (c, conv) in convs.iter().enumerate() {
        let agent: Vec<Option<(f64, f64)>> = conv.agent_scores().collect();
        let n = agent.len();
        if n < 10 {
            continue;
        }
        included += 1;
        let small = n / 5;
        let n_small = 5 - n % 5;
        for (k, s) in agent.iter().enumerate() {
            let seg = if k < small * n_small {
                k / small
            } else {
                n_small + (k - small * n_small) / (small + 1)
            };
            if let Some((lo, hi)) = s {
                flat.push((c, seg, *lo, *hi));
            }
        }
    }
    assert_eq!(profile.n_included, included);
    for seg in 0..5 {
        for m in Measure::BOTH {
            let mut per_conv: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for &(c, s, lo, hi) in &flat {
                if s == seg {
                    per_conv
                        .entry(c)
                        .or_default()
                        .push(if m == Measure::OmegaMin { lo } else { hi });
                }
            }
            let means: Vec<f64> = per_conv
                .values()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            let expected = means.iter().sum::<f64>() / means.len() as f64;
            let row = profile.rows.iter().find(|r| r.bin == seg && r.measure == m).unwrap();
            assert_eq!(row.n, means.len());
            assert!((row.mean.unwrap() - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn short_histories_give_an_empty_report() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let summaries: Vec<_> = (0..3 * 119)
        .map(|i| conversation_summary(&random_conversation(&mut rng, i, i % 3, 4)))
        .collect();
    let report = counselor_split(&summaries, (20, 120), 120, Some("helpful")).unwrap();
    assert!(report.tendencies.is_empty());
    assert_eq!(report.excluded.len(), 3);
    assert!(report.note.is_some());
}

#[test]
fn independent_tendency_and_outcome_are_uncorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n_agents = 60;
    let summaries: Vec<_> = (0..n_agents * 130)
        .map(|i| conversation_summary(&random_conversation(&mut rng, i, i % n_agents, 4)))
        .collect();
    let report = counselor_split(&summaries, (20, 120), 120, Some("helpful")).unwrap();
    assert_eq!(report.tendencies.len(), n_agents);
    for t in &report.tendencies {
        assert_eq!((t.tendency_positions.len(), t.outcome_positions.len()), (51, 50));
    }
    let pairs: Vec<(f64, f64)> = report
        .tendencies
        .iter()
        .map(|t| (t.tendency_omega_max.unwrap(), t.outcome_rate.unwrap()))
        .collect();
    let n = pairs.len() as f64;
    let (mx, my) = (
        pairs.iter().map(|p| p.0).sum::<f64>() / n,
        pairs.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let cov: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let vx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let vy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r = cov / (vx * vy).sqrt();
    assert!(r.abs() < 0.35, "correlation {r}");
    let contrast = bottom_third_contrast(&report.tendencies, Measure::OmegaMax, CounselorOutcome::Rate).unwrap();
    assert_eq!((contrast.n_bottom, contrast.n_rest), (20, 40));
    assert!(contrast.p_value.unwrap() > 0.001);
}
