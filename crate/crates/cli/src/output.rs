//! Writers for JSONL, CSV and JSON outputs and their provenance sidecars.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use orient_core::RunConfig;
use serde::Serialize;
use serde_json::{json, Value};

pub fn open(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_jsonl<T: Serialize>(rows: &[T], out: Option<&Path>) -> Result<()> {
    let mut w = open(out)?;
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(rows: &[T], out: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(open(out)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut w = open(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes `<out>.provenance.json` with the command, the full configuration
/// and seed, and the inputs. Does nothing for stdout output.
pub fn write_provenance(
    out: Option<&Path>,
    command: &str,
    config: Option<&RunConfig>,
    seed: u64,
    inputs: &[(&str, &Path)],
    extra: Value,
) -> Result<()> {
    let Some(out) = out else { return Ok(()) };
    let inputs: serde_json::Map<String, Value> = inputs
        .iter()
        .map(|(k, p)| (k.to_string(), json!(p.display().to_string())))
        .collect();
    let record = json!({
        "tool": "orient",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": inputs,
        "output": out.display().to_string(),
        "details": extra,
    });
    write_json(&record, Some(&sidecar_path(out, ".provenance.json")))
}
