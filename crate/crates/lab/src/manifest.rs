//! Run manifest: records which artifacts exist, which subcommand produced
//! them and under which config hash. Readers refuse artifacts whose hash
//! does not match the current configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ArtifactMeta {
    pub subcommand: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunManifest {
    pub seed: u64,
    pub tool_version: String,
    /// Relative artifact path -> provenance.
    pub artifacts: BTreeMap<String, ArtifactMeta>,
}

impl RunManifest {
    pub fn load(out_dir: &Path) -> Result<RunManifest> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(RunManifest::default());
        }
        let text = std::fs::read_to_string(&path).map_err(LabError::io(&path))?;
        serde_json::from_str(&text).map_err(|source| LabError::Json { path, source })
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(LabError::io(out_dir))?;
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)
            .map_err(|source| LabError::Json { path: path.clone(), source })?;
        std::fs::write(&path, text).map_err(LabError::io(&path))
    }

    /// Record one produced artifact (path relative to the out dir).
    pub fn record(&mut self, rel_path: &str, subcommand: &str, config_hash: &str) {
        self.artifacts.insert(
            rel_path.to_string(),
            ArtifactMeta {
                subcommand: subcommand.to_string(),
                config_hash: config_hash.to_string(),
            },
        );
    }

    /// Check that an artifact exists and carries the current config hash.
    pub fn verify(
        &self,
        out_dir: &Path,
        rel_path: &str,
        expected_hash: &str,
        produced_by: &str,
    ) -> Result<PathBuf> {
        let path = out_dir.join(rel_path);
        let meta = self.artifacts.get(rel_path);
        match meta {
            None => Err(LabError::MissingArtifact { path, produced_by: produced_by.to_string() }),
            Some(meta) if !path.exists() => {
                Err(LabError::MissingArtifact { path, produced_by: meta.subcommand.clone() })
            }
            Some(meta) if meta.config_hash != expected_hash => Err(LabError::ManifestMismatch {
                path,
                found: meta.config_hash.clone(),
                expected: expected_hash.to_string(),
            }),
            Some(_) => Ok(path),
        }
    }

    /// Like `verify` but only answers whether a resumable per-variant file
    /// may be reused.
    pub fn can_reuse(&self, out_dir: &Path, rel_path: &str, expected_hash: &str) -> bool {
        matches!(self.artifacts.get(rel_path),
            Some(meta) if meta.config_hash == expected_hash && out_dir.join(rel_path).exists())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_paths_and_hashes() {
        let dir = std::env::temp_dir().join(format!("reclab_manifest_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = RunManifest { seed: 1, tool_version: "t".into(), ..Default::default() };
        m.record("a.csv", "ingest", "h1");
        std::fs::write(dir.join("a.csv"), "x").unwrap();
        m.save(&dir).unwrap();

        let loaded = RunManifest::load(&dir).unwrap();
        assert!(loaded.verify(&dir, "a.csv", "h1", "ingest").is_ok());
        let err = loaded.verify(&dir, "a.csv", "h2", "ingest").unwrap_err();
        assert_eq!(err.kind(), "manifest_mismatch");
        let err = loaded.verify(&dir, "b.csv", "h1", "train").unwrap_err();
        assert_eq!(err.kind(), "missing_artifact");
        assert!(loaded.can_reuse(&dir, "a.csv", "h1"));
        assert!(!loaded.can_reuse(&dir, "a.csv", "h2"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
