use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use orient_core::analysis::{
    attach_scores, bottom_third_contrast, conversation_summary, counselor_split, length_buckets, outcome_comparison,
    segment_profile, within_counselor_segment_tests, Bootstrap, ConversationSummary, CounselorOutcome, MeanRow,
    Measure,
};
use orient_core::baselines::score_baselines;
use orient_core::corpus::{load_corpus, SchemaOptions};
use orient_core::model::{load_model, save_model};
use orient_core::orientation::{fit_orientation_full, rank_by_orientation, UtteranceScore};
use orient_core::phrasing::ExtractorConfig;
use orient_core::synth::{generate_planted_corpus, GroundTruth, PlantedSpec};
use orient_core::{score_corpus, Corpus, Role, RunConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{sidecar_path, write_csv, write_json, write_jsonl, write_provenance};
use crate::settings::default_seed;
use crate::{Analysis, Command, CorpusArgs, InspectWhat, RoleArg};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit {
            corpus,
            config,
            out,
            full,
            report,
            dump_matrix,
            dump_latent,
        } => fit(
            &corpus,
            &config.resolve()?,
            &out,
            full,
            report,
            dump_matrix.as_deref(),
            dump_latent.as_deref(),
        ),
        Command::Score {
            corpus,
            model,
            out,
            role,
            allow_role_override,
        } => score(&corpus, &model, out.as_deref(), role, allow_role_override),
        Command::Analyze {
            which,
            corpus,
            scores,
            model,
            config,
            group_by,
            key,
            edges,
            no_ci,
            out,
        } => {
            let cfg = config.resolve()?;
            let boot = if no_ci {
                Bootstrap::NONE
            } else {
                Bootstrap {
                    resamples: cfg.bootstrap_resamples,
                    level: cfg.ci_level,
                    seed: cfg.seed,
                }
            };
            let req = AnalyzeRequest {
                which,
                corpus: &corpus,
                scores: scores.as_deref(),
                model: model.as_deref(),
                cfg: &cfg,
                group_by: group_by.as_deref(),
                key: &key,
                edges: edges.as_deref(),
                boot,
                out: out.as_deref(),
            };
            analyze(&req)
        }
        Command::Baseline {
            corpus,
            model,
            extractor,
            out,
        } => baseline(&corpus, model.as_deref(), &extractor, out.as_deref()),
        Command::Synth {
            preset,
            seed,
            conversations,
            noise,
            drift,
            out,
            truth,
        } => {
            let mut spec = PlantedSpec::preset(&preset, default_seed(seed)?)?;
            if let Some(n) = conversations {
                spec.n_conversations = n;
            }
            if let Some(n) = noise {
                spec.noise_rate = n;
            }
            if let Some(d) = drift {
                spec.stage_drift = d;
            }
            synth(&spec, &out, truth)
        }
        Command::Inspect {
            what,
            model,
            corpus,
            config,
            top,
            out,
        } => inspect(what, model.as_deref(), corpus.as_deref(), &config, top, out.as_deref()),
    }
}

fn schema(args: &CorpusArgs) -> SchemaOptions {
    SchemaOptions {
        agent_labels: args.agent_labels.clone(),
        client_labels: args.client_labels.clone(),
    }
}

fn read_corpus(args: &CorpusArgs) -> Result<Corpus> {
    let (corpus, report) = load_corpus(&args.corpus, &schema(args))?;
    for e in &report.errors {
        warn!("{}:{}: {}", args.corpus.display(), e.line, e.message);
    }
    if !report.errors.is_empty() {
        warn!(
            "{} of {} records in {} were skipped",
            report.errors.len(),
            report.lines,
            args.corpus.display()
        );
    }
    info!(
        "read {} conversations, {} utterances",
        corpus.conversations.len(),
        corpus.n_utterances()
    );
    Ok(corpus)
}

fn fit(
    corpus_args: &CorpusArgs,
    cfg: &RunConfig,
    out: &Path,
    full: bool,
    report: Option<PathBuf>,
    dump_matrix: Option<&Path>,
    dump_latent: Option<&Path>,
) -> Result<()> {
    let corpus = read_corpus(corpus_args)?;
    let fitted = fit_orientation_full(&corpus, cfg, full)?;
    let model = &fitted.model;
    save_model(model, out, full)?;

    let d = &model.diagnostics;
    let report_path = report.unwrap_or_else(|| sidecar_path(out, ".report.json"));
    let report = json!({
        "model": out.display().to_string(),
        "corpus": corpus_args.corpus.display().to_string(),
        "seed": cfg.seed,
        "config": cfg,
        "diagnostics": d,
    });
    write_json(&report, Some(&report_path))?;
    eprintln!(
        "fitted {} phrasings ({} dropped) from {} training pairs; vocab {}/{}; coverage {:.3}",
        d.n_scored_phrasings,
        d.dropped.len(),
        d.n_training_pairs,
        d.agent_vocab_size,
        d.client_vocab_size,
        d.sentence_coverage
    );

    if let Some(path) = dump_matrix {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
        fitted.client_matrix.write_triplets(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = dump_latent {
        let dump = json!({
            "singular_values": d.singular_values,
            "retained_singular_values": fitted.space.singular_values,
            "dropped_first": fitted.space.dropped_first,
            "raw_row_norms": fitted.space.raw_row_norms,
            "zero_rows": fitted.space.zero_rows,
        });
        write_json(&dump, Some(path))?;
    }
    Ok(())
}

fn score(corpus_args: &CorpusArgs, model_path: &Path, out: Option<&Path>, role: RoleArg, allow: bool) -> Result<()> {
    let model = load_model(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let corpus = read_corpus(corpus_args)?;
    let role = match role {
        RoleArg::Agent => Role::Agent,
        RoleArg::Client => Role::Client,
    };
    let scores = score_corpus(&corpus, &model, role, allow)?;
    write_jsonl(&scores.rows, out)?;
    let coverage = json!({
        "utterances": scores.rows.len(),
        "sentences": scores.coverage.sentences,
        "scored_sentences": scores.coverage.scored,
        "coverage": scores.coverage.fraction(),
    });
    eprintln!("{coverage}");
    write_provenance(
        out,
        "score",
        Some(&model.config),
        model.config.seed,
        &[("corpus", &corpus_args.corpus), ("model", model_path)],
        json!({ "role": role.label(), "coverage": coverage }),
    )
}

fn read_scores(path: &Path) -> Result<Vec<UtteranceScore>> {
    let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line).with_context(|| format!("{}:{}: not a score record", path.display(), i + 1))?,
        );
    }
    Ok(rows)
}

struct AnalyzeRequest<'a> {
    which: Analysis,
    corpus: &'a CorpusArgs,
    scores: Option<&'a Path>,
    model: Option<&'a Path>,
    cfg: &'a RunConfig,
    group_by: Option<&'a str>,
    key: &'a str,
    edges: Option<&'a [f64]>,
    boot: Bootstrap,
    out: Option<&'a Path>,
}

#[derive(Serialize)]
struct SummaryRow {
    conversation_id: String,
    agent_id: Option<String>,
    mean_omega_min: Option<f64>,
    mean_omega_max: Option<f64>,
    length: usize,
    n_agent_messages: usize,
    n_scored: usize,
    n_unscored: usize,
    unscored: bool,
    metadata: String,
}

impl From<&ConversationSummary> for SummaryRow {
    fn from(s: &ConversationSummary) -> Self {
        SummaryRow {
            conversation_id: s.conversation_id.clone(),
            agent_id: s.agent_id.clone(),
            mean_omega_min: s.mean_omega_min,
            mean_omega_max: s.mean_omega_max,
            length: s.length,
            n_agent_messages: s.n_agent_messages,
            n_scored: s.n_scored,
            n_unscored: s.n_unscored,
            unscored: s.unscored,
            metadata: Value::Object(s.metadata.clone()).to_string(),
        }
    }
}

#[derive(Serialize)]
struct BucketRow {
    low: f64,
    high: f64,
    measure: Measure,
    mean: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    n: usize,
}

#[derive(Serialize)]
struct OutcomeRow {
    measure: Measure,
    group: String,
    mean: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    n: usize,
    u: Option<f64>,
    p_value: Option<f64>,
    cohens_d: Option<f64>,
}

#[derive(Serialize)]
struct TendencyRow {
    agent_id: String,
    n_conversations: usize,
    n_tendency: usize,
    n_outcome: usize,
    tendency_omega_min: Option<f64>,
    tendency_omega_max: Option<f64>,
    outcome_rate: Option<f64>,
    outcome_mean_length: Option<f64>,
}

fn analyze(req: &AnalyzeRequest) -> Result<()> {
    let corpus = read_corpus(req.corpus)?;
    let cfg = req.cfg;
    let mut inputs: Vec<(&str, &Path)> = vec![("corpus", &req.corpus.corpus)];
    if req.which == Analysis::Baselines {
        let Some(model_path) = req.model else {
            bail!("the baselines analysis needs --model for the backwards-range column");
        };
        let model = load_model(model_path)?;
        let rows = score_baselines(&corpus, Some(&model), model.config.agent_extractor)?;
        write_jsonl(&rows, req.out)?;
        inputs.push(("model", model_path));
        return write_provenance(
            req.out,
            "analyze baselines",
            Some(&model.config),
            model.config.seed,
            &inputs,
            json!({}),
        );
    }
    let Some(scores_path) = req.scores else {
        bail!("this analysis needs --scores from `orient score`");
    };
    inputs.push(("scores", scores_path));
    let scored = attach_scores(&corpus, &read_scores(scores_path)?);
    let summaries = || scored.iter().map(conversation_summary).collect::<Vec<_>>();
    let mut details = json!({});
    match req.which {
        Analysis::Segments => {
            let profile = segment_profile(&scored, cfg.n_segments, cfg.min_agent_msgs, req.group_by, &req.boot)?;
            info!(
                "{} conversations included, {} below {} agent messages",
                profile.n_included, profile.n_excluded, cfg.min_agent_msgs
            );
            details =
                json!({ "n_included": profile.n_included, "n_excluded": profile.n_excluded, "group_by": req.group_by });
            write_csv(&profile.rows, req.out)?;
        }
        Analysis::SegmentTests => {
            let tests = within_counselor_segment_tests(&scored, cfg.n_segments, cfg.min_agent_msgs, req.key)?;
            details = json!({ "key": req.key });
            write_csv(&tests, req.out)?;
        }
        Analysis::Summaries => {
            let rows: Vec<SummaryRow> = summaries().iter().map(SummaryRow::from).collect();
            write_csv(&rows, req.out)?;
        }
        Analysis::Lengths => {
            let buckets = length_buckets(&summaries(), req.edges, &req.boot)?;
            let rows: Vec<BucketRow> = buckets
                .iter()
                .flat_map(|b| {
                    b.rows.iter().map(move |r: &MeanRow| BucketRow {
                        low: b.low,
                        high: b.high,
                        measure: r.measure,
                        mean: r.mean,
                        ci_low: r.ci_low,
                        ci_high: r.ci_high,
                        n: r.n,
                    })
                })
                .collect();
            write_csv(&rows, req.out)?;
        }
        Analysis::Outcomes => {
            let comparisons = outcome_comparison(&summaries(), req.key, &req.boot)?;
            let mut rows = Vec::new();
            for c in &comparisons {
                for (group, r) in [("true", &c.positive), ("false", &c.negative)] {
                    rows.push(OutcomeRow {
                        measure: c.measure,
                        group: group.into(),
                        mean: r.mean,
                        ci_low: r.ci_low,
                        ci_high: r.ci_high,
                        n: r.n,
                        u: c.u,
                        p_value: c.p_value,
                        cohens_d: c.cohens_d,
                    });
                }
            }
            details = json!({ "key": req.key });
            write_csv(&rows, req.out)?;
        }
        Analysis::Counselors | Analysis::Terciles => {
            let report = counselor_split(
                &summaries(),
                cfg.counselor_window,
                cfg.counselor_min_conversations,
                Some(req.key),
            )?;
            if let Some(note) = &report.note {
                eprintln!("note: {note}");
            }
            details = json!({ "key": req.key, "excluded": report.excluded, "note": report.note });
            if req.which == Analysis::Counselors {
                let rows: Vec<TendencyRow> = report
                    .tendencies
                    .iter()
                    .map(|t| TendencyRow {
                        agent_id: t.agent_id.clone(),
                        n_conversations: t.n_conversations,
                        n_tendency: t.tendency_positions.len(),
                        n_outcome: t.outcome_positions.len(),
                        tendency_omega_min: t.tendency_omega_min,
                        tendency_omega_max: t.tendency_omega_max,
                        outcome_rate: t.outcome_rate,
                        outcome_mean_length: t.outcome_mean_length,
                    })
                    .collect();
                write_counselor_rows(&rows, req.out)?;
            } else {
                let mut rows = Vec::new();
                if !report.tendencies.is_empty() {
                    for m in Measure::BOTH {
                        for o in [CounselorOutcome::Rate, CounselorOutcome::Length] {
                            rows.push(bottom_third_contrast(&report.tendencies, m, o)?);
                        }
                    }
                }
                write_csv(&rows, req.out)?;
            }
        }
        Analysis::Baselines => unreachable!(),
    }
    let label = format!("analyze {}", analysis_name(req.which));
    write_provenance(req.out, &label, Some(cfg), cfg.seed, &inputs, details)
}

/// Like `write_csv`, but keeps the header when there are no counselors.
fn write_counselor_rows(rows: &[TendencyRow], out: Option<&Path>) -> Result<()> {
    if !rows.is_empty() {
        return write_csv(rows, out);
    }
    let mut w = crate::output::open(out)?;
    writeln!(
        w,
        "agent_id,n_conversations,n_tendency,n_outcome,tendency_omega_min,tendency_omega_max,outcome_rate,outcome_mean_length"
    )?;
    w.flush()?;
    Ok(())
}

fn analysis_name(a: Analysis) -> &'static str {
    match a {
        Analysis::Segments => "segments",
        Analysis::SegmentTests => "segment-tests",
        Analysis::Summaries => "summaries",
        Analysis::Lengths => "lengths",
        Analysis::Outcomes => "outcomes",
        Analysis::Counselors => "counselors",
        Analysis::Terciles => "terciles",
        Analysis::Baselines => "baselines",
    }
}

fn baseline(corpus_args: &CorpusArgs, model_path: Option<&Path>, extractor: &str, out: Option<&Path>) -> Result<()> {
    let extractor: ExtractorConfig = serde_json::from_value(json!({ "mode": extractor }))
        .with_context(|| format!("unknown extractor {extractor:?}"))?;
    let model = model_path.map(load_model).transpose()?;
    let corpus = read_corpus(corpus_args)?;
    let rows = score_baselines(&corpus, model.as_ref(), extractor)?;
    write_jsonl(&rows, out)?;
    let mut inputs: Vec<(&str, &Path)> = vec![("corpus", &corpus_args.corpus)];
    if let Some(p) = model_path {
        inputs.push(("model", p));
    }
    let cfg = model.as_ref().map(|m| &m.config);
    write_provenance(
        out,
        "baseline",
        cfg,
        cfg.map_or(0, |c| c.seed),
        &inputs,
        json!({ "extractor": extractor }),
    )
}

fn synth(spec: &PlantedSpec, out: &Path, truth: Option<PathBuf>) -> Result<()> {
    let corpus = generate_planted_corpus(spec)?;
    orient_core::corpus::save_corpus(&corpus, out)?;
    let truth_path = truth.unwrap_or_else(|| sidecar_path(out, ".truth.json"));
    GroundTruth::of(spec).save(&truth_path)?;
    eprintln!(
        "wrote {} conversations ({} utterances) to {}",
        corpus.conversations.len(),
        corpus.n_utterances(),
        out.display()
    );
    Ok(())
}

fn inspect(
    what: InspectWhat,
    model_path: Option<&Path>,
    corpus_path: Option<&Path>,
    config: &crate::settings::ConfigArgs,
    top: usize,
    out: Option<&Path>,
) -> Result<()> {
    let need_model = || -> Result<orient_core::OrientationModel> {
        let Some(p) = model_path else {
            bail!("--model is required")
        };
        Ok(load_model(p)?)
    };
    match what {
        InspectWhat::Config => write_json(&config.resolve()?, out),
        InspectWhat::Vocab => write_json(&need_model()?.agent_tfidf.vocabulary.export(), out),
        InspectWhat::Model => {
            let model = need_model()?;
            let ranked = rank_by_orientation(&model.stats);
            let brief = |s: &&orient_core::orientation::PhrasingStats| {
                json!({
                    "phrasing": s.phrasing,
                    "omega": s.orientation,
                    "fwd_range": s.fwd_range,
                    "bwd_range": s.bwd_range,
                    "n_replies": s.n_replies,
                    "n_preds": s.n_preds,
                })
            };
            let n_backwards = model.stats.iter().filter(|s| s.orientation < 0.0).count();
            let summary = json!({
                "profile": model.config.profile,
                "seed": model.config.seed,
                "n_phrasings": model.stats.len(),
                "n_backwards": n_backwards,
                "config": model.config,
                "diagnostics": {
                    "n_training_pairs": model.diagnostics.n_training_pairs,
                    "agent_vocab_size": model.diagnostics.agent_vocab_size,
                    "client_vocab_size": model.diagnostics.client_vocab_size,
                    "singular_values": model.diagnostics.singular_values,
                    "dropped_counts": model.diagnostics.dropped_counts,
                    "sentence_coverage": model.diagnostics.sentence_coverage,
                },
                "most_backwards": ranked.iter().take(top).map(brief).collect::<Vec<_>>(),
                "most_forwards": ranked.iter().rev().take(top).map(brief).collect::<Vec<_>>(),
            });
            write_json(&summary, out)
        }
        InspectWhat::Corpus => {
            let Some(p) = corpus_path else {
                bail!("--corpus is required")
            };
            let (corpus, report) = load_corpus(p, &SchemaOptions::default())?;
            let merged = corpus.merged();
            let count = |c: &Corpus, role| {
                c.conversations
                    .iter()
                    .flat_map(|c| &c.utterances)
                    .filter(|u| u.role == role)
                    .count()
            };
            let summary = json!({
                "conversations": corpus.conversations.len(),
                "utterances": corpus.n_utterances(),
                "agent_utterances": count(&corpus, Role::Agent),
                "client_utterances": count(&corpus, Role::Client),
                "merged_utterances": merged.n_utterances(),
                "context_pairs": merged.pairs().len(),
                "load_report": report,
            });
            write_json(&summary, out)
        }
    }
}
