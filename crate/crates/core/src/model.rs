//! Versioned JSON persistence for orientation models.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::embedding::LatentSpace;
use crate::error::{Error, Result};
use crate::orientation::{FitDiagnostics, OrientationModel, PhrasingStats};
use crate::phrasing::Vocabulary;
use crate::vectorize::{TfIdfModel, TfIdfOptions};

pub const FORMAT: &str = "orient-model";
pub const VERSION_MAJOR: u32 = 1;
pub const VERSION: &str = "1.0";

const OMEGA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: String,
    profile: String,
    seed: u64,
    config: RunConfig,
    agent_vocabulary: Vocabulary,
    agent_idf: Vec<f64>,
    agent_excluded: Vec<usize>,
    agent_tfidf_options: TfIdfOptions,
    phrasings: Vec<PhrasingStats>,
    diagnostics: FitDiagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latent_space: Option<LatentSpace>,
}

/// Serializes a model. Centers and the latent space are written only when
/// `full` is set.
pub fn write_model<W: Write>(model: &OrientationModel, full: bool, mut writer: W) -> Result<()> {
    let phrasings = model
        .stats
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if !full {
                s.fwd_center = None;
                s.bwd_center = None;
            }
            s
        })
        .collect();
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION.into(),
        profile: model.config.profile.clone(),
        seed: model.config.seed,
        config: model.config.clone(),
        agent_vocabulary: model.agent_tfidf.vocabulary.clone(),
        agent_idf: model.agent_tfidf.idf.clone(),
        agent_excluded: model.agent_tfidf.excluded.clone(),
        agent_tfidf_options: model.agent_tfidf.options,
        phrasings,
        diagnostics: model.diagnostics.clone(),
        latent_space: if full { model.latent_space.clone() } else { None },
    };
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n").map_err(|e| Error::io("<model>", e))?;
    Ok(())
}

pub fn save_model(model: &OrientationModel, path: impl AsRef<Path>, full: bool) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_model(model, full, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_model<R: Read>(reader: R) -> Result<OrientationModel> {
    let value: serde_json::Value = serde_json::from_reader(reader)?;
    let format = value.get("format").and_then(|v| v.as_str()).unwrap_or_default();
    if format != FORMAT {
        return Err(Error::ModelInvariant(format!(
            "not an orientation model (format {format:?})"
        )));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major != Some(VERSION_MAJOR) {
        return Err(Error::ModelVersion {
            found: version,
            expected: VERSION_MAJOR,
        });
    }
    let file: ModelFile = serde_json::from_value(value)?;
    validate(&file)?;
    let agent_tfidf = TfIdfModel {
        vocabulary: file.agent_vocabulary,
        idf: file.agent_idf,
        excluded: file.agent_excluded,
        options: file.agent_tfidf_options,
    };
    let latent_space = file.latent_space.map(|mut s| {
        s.reindex();
        s
    });
    Ok(OrientationModel::new(
        file.config,
        agent_tfidf,
        file.phrasings,
        file.diagnostics,
        latent_space,
    ))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OrientationModel> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(f))
}

fn validate(file: &ModelFile) -> Result<()> {
    if file.profile != file.config.profile || file.seed != file.config.seed {
        return Err(Error::ModelInvariant(
            "header disagrees with the config snapshot".into(),
        ));
    }
    file.config.validate()?;
    let v = file.agent_vocabulary.len();
    if file.agent_idf.len() != v {
        return Err(Error::ModelInvariant(format!(
            "idf table has {} entries for {v} phrasings",
            file.agent_idf.len()
        )));
    }
    if file.agent_idf.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::ModelInvariant(
            "idf table has a negative or non-finite entry".into(),
        ));
    }
    let mut last: Option<usize> = None;
    for s in &file.phrasings {
        if s.id >= v || file.agent_vocabulary.phrasing(s.id) != s.phrasing {
            return Err(Error::ModelInvariant(format!(
                "phrasing {:?} does not match vocabulary id {}",
                s.phrasing, s.id
            )));
        }
        if last.is_some_and(|l| l >= s.id) {
            return Err(Error::ModelInvariant("phrasing records are not in id order".into()));
        }
        last = Some(s.id);
        let expected = s.bwd_range - s.fwd_range;
        if !(s.orientation - expected).abs().le(&OMEGA_TOLERANCE) {
            return Err(Error::ModelInvariant(format!(
                "orientation of {:?} is {} but its ranges give {expected}",
                s.phrasing, s.orientation
            )));
        }
        for r in [s.fwd_range, s.bwd_range] {
            if !(0.0..=2.0).contains(&r) {
                return Err(Error::ModelInvariant(format!(
                    "range {r} of {:?} is outside [0, 2]",
                    s.phrasing
                )));
            }
        }
        let support = file.config.min_support;
        if s.n_replies < support || s.n_preds < support {
            return Err(Error::ModelInvariant(format!(
                "{:?} has {} replies and {} predecessors, below the support floor {support}",
                s.phrasing, s.n_replies, s.n_preds
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Role;
    use crate::phrasing::{build_vocabulary, VocabConfig};
    use crate::vectorize::fit_tfidf;

    fn toy_model() -> OrientationModel {
        let docs = vec![vec!["a".to_string(), "b".to_string()], vec!["a".to_string()]];
        let vocab = build_vocabulary(&docs, Role::Agent, &VocabConfig::default()).unwrap();
        let ids: Vec<Vec<usize>> = docs.iter().map(|d| vocab.ids(d)).collect();
        let tfidf = fit_tfidf(&ids, vocab, TfIdfOptions::default()).unwrap();
        let config = RunConfig {
            min_support: 1,
            ..RunConfig::court()
        };
        let stats = vec![PhrasingStats {
            id: 0,
            phrasing: "a".into(),
            fwd_range: 0.1,
            bwd_range: 0.35,
            orientation: 0.35 - 0.1,
            n_replies: 2,
            n_preds: 2,
            fwd_center: Some(vec![1.0, 0.0]),
            bwd_center: Some(vec![0.0, 1.0]),
        }];
        OrientationModel::new(config, tfidf, stats, FitDiagnostics::default(), None)
    }

    fn to_bytes(m: &OrientationModel, full: bool) -> Vec<u8> {
        let mut out = Vec::new();
        write_model(m, full, &mut out).unwrap();
        out
    }

    #[test]
    fn roundtrip() {
        let m = toy_model();
        let back = read_model(&to_bytes(&m, true)[..]).unwrap();
        assert_eq!(back, m);
        let slim = read_model(&to_bytes(&m, false)[..]).unwrap();
        assert_eq!(slim.stats[0].fwd_center, None);
        assert_eq!(to_bytes(&back, true), to_bytes(&m, true));
    }

    #[test]
    fn profile_in_header() {
        let v: serde_json::Value = serde_json::from_slice(&to_bytes(&toy_model(), false)).unwrap();
        assert_eq!(v["profile"], "court");
        assert_eq!(v["version"], VERSION);
    }

    #[test]
    fn rejects_corrupted_orientation() {
        let mut v: serde_json::Value = serde_json::from_slice(&to_bytes(&toy_model(), false)).unwrap();
        v["phrasings"][0]["orientation"] = serde_json::json!(0.3);
        let err = read_model(serde_json::to_vec(&v).unwrap().as_slice()).unwrap_err();
        assert!(matches!(err, Error::ModelInvariant(_)), "{err}");
    }

    #[test]
    fn rejects_unknown_major_version() {
        let mut v: serde_json::Value = serde_json::from_slice(&to_bytes(&toy_model(), false)).unwrap();
        v["version"] = serde_json::json!("2.0");
        let err = read_model(serde_json::to_vec(&v).unwrap().as_slice()).unwrap_err();
        assert!(matches!(err, Error::ModelVersion { .. }));
        assert!(err.to_string().contains("2.0"));
    }
}
