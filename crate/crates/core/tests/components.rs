use std::collections::{BTreeMap, HashMap};

use orient_core::baselines::{naive_distance, SharedSpace};
use orient_core::embedding::{
    project_weighted_bag, strip_first_component, truncated_svd, CentralPointMode, SvdOptions,
};
use orient_core::orientation::compute_range;
use orient_core::phrasing::{build_vocabulary, ExtractorConfig, VocabConfig};
use orient_core::vectorize::{fit_tfidf, SparseMatrix, TfIdfOptions};
use orient_core::{Conversation, Corpus, Role, Utterance};
use orient_testkit::dense;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_vocab() -> VocabConfig {
    VocabConfig {
        top_k: None,
        min_utterances: 1,
    }
}

#[test]
fn idf_matches_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let docs: Vec<Vec<String>> = (0..1000)
        .map(|_| {
            let n = rng.random_range(1..15);
            (0..n)
                .map(|_| format!("w{}", rng.random_range(0..300usize).pow(2) / 300))
                .collect()
        })
        .collect();
    let vocab = build_vocabulary(&docs, Role::Client, &all_vocab()).unwrap();
    let ids: Vec<Vec<usize>> = docs.iter().map(|d| vocab.ids(d)).collect();
    let model = fit_tfidf(&ids, vocab, TfIdfOptions::default()).unwrap();

    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in &docs {
        let mut seen: Vec<&str> = d.iter().map(String::as_str).collect();
        seen.sort();
        seen.dedup();
        for w in seen {
            *df.entry(w).or_default() += 1;
        }
    }
    assert_eq!(model.vocabulary.len(), df.len());
    for (w, &count) in &df {
        let id = model.vocabulary.id(w).unwrap();
        let expected = 1.0 + (1000.0 / count as f64).ln();
        assert!((model.idf[id] - expected).abs() < 1e-12, "{w}");
    }

    let (vocab_order, rows) = orient_testkit::pipeline::tfidf_rows(&docs);
    let (matrix, zero) = model.transform(&ids);
    assert!(zero.is_empty());
    let got = matrix.to_dense();
    for (i, row) in rows.iter().enumerate() {
        for (j, w) in vocab_order.iter().enumerate() {
            let id = model.vocabulary.id(w).unwrap();
            assert!((got[i][id] - row[j]).abs() < 1e-12);
        }
    }
}

fn random_sparse(n: usize, m: usize, density: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if rng.random_bool(density) {
                        rng.random_range(0.1..2.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn truncated_svd_matches_dense_oracle() {
    for seed in 0..5 {
        let a = random_sparse(40, 20, 0.3, seed);
        let x = SparseMatrix::from_dense(&a);
        let svd = truncated_svd(&x, 5, 7, &SvdOptions::default()).unwrap();
        let oracle = dense::svd(&a);
        for j in 0..5 {
            let rel = (svd.s[j] - oracle.s[j]).abs() / oracle.s[j];
            assert!(rel < 1e-8, "seed {seed} σ{j}: {} vs {}", svd.s[j], oracle.s[j]);
        }
        let u: Vec<Vec<f64>> = (0..40).map(|i| svd.u_row(i).to_vec()).collect();
        let v: Vec<Vec<f64>> = (0..20).map(|i| svd.v_row(i).to_vec()).collect();
        let err = dense::truncation_error(&a, &u, &svd.s, &v, 5);
        let best = oracle.s[5..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!((err - best).abs() < 1e-8 * best.max(1.0));
    }
}

#[test]
fn projection_matches_dense_oracle() {
    let a = random_sparse(30, 12, 0.4, 3);
    let svd = truncated_svd(&SparseMatrix::from_dense(&a), 6, 1, &SvdOptions::default()).unwrap();
    let space = strip_first_component(&svd, 5, true).unwrap();
    let members = [(0, 0.3), (4, 0.9), (7, 0.2), (19, 0.5), (28, 0.7)];
    let center = project_weighted_bag(&members, &space, CentralPointMode::InverseScaled).unwrap();
    for j in 0..5 {
        let mut expected = 0.0;
        for &(row, w) in &members {
            let r = &svd.u_row(row)[1..6];
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            expected += w * r[j] / norm;
        }
        expected /= svd.s[j + 1];
        assert!((center[j] - expected).abs() < 1e-12);
    }
}

#[test]
fn range_matches_brute_force() {
    let a = random_sparse(60, 25, 0.3, 9);
    let svd = truncated_svd(&SparseMatrix::from_dense(&a), 8, 2, &SvdOptions::default()).unwrap();
    let space = strip_first_component(&svd, 7, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows: Vec<usize> = (0..60).collect();
    for i in 0..20 {
        let j = rng.random_range(i..60);
        rows.swap(i, j);
    }
    let members: Vec<(usize, f64)> = rows[..20].iter().map(|&r| (r, rng.random_range(0.05..1.0))).collect();
    for mode in [CentralPointMode::InverseScaled, CentralPointMode::PlainMean] {
        let (range, _) = compute_range(&members, &space, mode).unwrap();
        let emb: BTreeMap<usize, Vec<f64>> = members
            .iter()
            .map(|&(r, _)| {
                let raw = &svd.u_row(r)[1..8];
                let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
                (r, raw.iter().map(|x| x / n).collect())
            })
            .collect();
        let mut center = vec![0.0; 7];
        for &(r, w) in &members {
            for j in 0..7 {
                let scale = if mode == CentralPointMode::InverseScaled {
                    svd.s[j + 1]
                } else {
                    1.0
                };
                center[j] += w * emb[&r][j] / scale;
            }
        }
        let expected: f64 = members
            .iter()
            .map(|(r, _)| dense::cosine_distance(&emb[r], &center))
            .sum::<f64>()
            / 20.0;
        assert!((range - expected).abs() < 1e-9, "{mode:?}: {range} vs {expected}");
    }
}

#[test]
fn naive_distance_matches_hand_values() {
    let texts = ["red green", "red blue", "green blue blue"];
    let utts: Vec<Utterance> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Utterance::new(
                "c",
                format!("u{i}"),
                if i == 1 { Role::Agent } else { Role::Client },
                i,
                *t,
            )
        })
        .collect();
    let corpus = Corpus::new(vec![Conversation::new("c", utts.clone())]);
    let space = SharedSpace::fit(&corpus, ExtractorConfig::default()).unwrap();
    let d = naive_distance(&utts[1], Some(&utts[0]), Some(&utts[2]), &space)
        .unwrap()
        .unwrap();

    // Each word occurs in two of the three documents.
    let idf = 1.0 + (1.5f64).ln();
    let unit = |v: [f64; 3]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    };
    let (red_green, red_blue, green_blue) = (
        unit([idf, idf, 0.0]),
        unit([idf, 0.0, idf]),
        unit([0.0, idf, 2.0 * idf]),
    );
    let dist = |a: [f64; 3], b: [f64; 3]| 1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let expected = dist(red_blue, green_blue) - dist(red_blue, red_green);
    assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");
    assert!((dist(red_blue, red_green) - 0.5).abs() < 1e-12);
}
