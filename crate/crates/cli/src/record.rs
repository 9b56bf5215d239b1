//! Run records: what ran, with which inputs, and hashes of what it wrote.

use crate::config::Scenario;
use crate::error::Result;
use crate::scenarios::{execute, Outcome};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const RECORD_SCHEMA: &str = "phonon-lab/run-record/v1";
pub const RECORD_FILE: &str = "run_record.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub toolkit_version: String,
    pub kind: String,
    pub seed: u64,
    pub scenario: Value,
    pub started_at: String,
    pub finished_at: String,
    pub artifacts: Vec<ArtifactEntry>,
    /// SHA-256 over everything above except the timestamps.
    pub content_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunRecord {
    fn build(scenario: &Scenario, outcome: &Outcome, started_at: String) -> Result<Self> {
        let artifacts: Vec<ArtifactEntry> = outcome
            .artifacts
            .iter()
            .map(|a| ArtifactEntry {
                name: a.name.clone(),
                sha256: sha256_hex(&a.bytes),
                bytes: a.bytes.len(),
            })
            .collect();
        let mut rec = RunRecord {
            schema: RECORD_SCHEMA.into(),
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            kind: scenario.kind.name().into(),
            seed: scenario.seed,
            scenario: scenario.snapshot(),
            started_at,
            finished_at: now(),
            artifacts,
            content_hash: String::new(),
        };
        rec.content_hash = rec.compute_hash()?;
        Ok(rec)
    }

    /// Hash of the timestamp-free part of the record.
    pub fn compute_hash(&self) -> Result<String> {
        let body = json!({
            "schema": self.schema,
            "toolkit_version": self.toolkit_version,
            "kind": self.kind,
            "seed": self.seed,
            "scenario": self.scenario,
            "artifacts": self.artifacts,
        });
        Ok(sha256_hex(&serde_json::to_vec(&body)?))
    }
}

/// Writes every artifact of `outcome` under `dir`.
pub fn write_artifacts(outcome: &Outcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in &outcome.artifacts {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
    }
    Ok(())
}

/// Executes `scenario`, writes its artifacts and a run record into `dir`.
pub fn run_to_dir(scenario: &Scenario, dir: &Path) -> Result<(Outcome, RunRecord)> {
    let started = now();
    let outcome = execute(scenario)?;
    write_artifacts(&outcome, dir)?;
    let record = RunRecord::build(scenario, &outcome, started)?;
    let mut bytes = serde_json::to_vec_pretty(&record)?;
    bytes.push(b'\n');
    std::fs::write(dir.join(RECORD_FILE), bytes)?;
    Ok((outcome, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ScenarioKind, ThermometryParams};

    #[test]
    fn hash_ignores_timestamps() {
        let s = Scenario::new(ScenarioKind::Thermometry(ThermometryParams::default()));
        let out = execute(&s).unwrap();
        let a = RunRecord::build(&s, &out, "2000-01-01T00:00:00.000Z".into()).unwrap();
        let mut b = a.clone();
        b.started_at = "2030-01-01T00:00:00.000Z".into();
        b.finished_at = b.started_at.clone();
        assert_eq!(a.content_hash, b.compute_hash().unwrap());
        b.seed += 1;
        assert_ne!(a.content_hash, b.compute_hash().unwrap());
    }
}
