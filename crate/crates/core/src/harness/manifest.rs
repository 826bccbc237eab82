//! Run manifests written next to every CLI artifact set.

use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Versions {
    pub skewersim: String,
    pub schema: u32,
    pub target: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            skewersim: crate::VERSION.to_string(),
            schema: SCHEMA_VERSION,
            target: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the resolved config, serialized as compact JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub versions: Versions,
    pub artifacts: Vec<Artifact>,
    /// Seconds since the Unix epoch when the run started.
    pub started_at: u64,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(config: &serde_json::Value) -> String {
    sha256_hex(config.to_string().as_bytes())
}

pub fn unix_seconds(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).unwrap_or(Duration::ZERO).as_secs()
}

impl Manifest {
    /// Hashes every listed artifact in `dir`.
    pub fn build(
        command: &str,
        seed: u64,
        config: serde_json::Value,
        dir: &Path,
        files: &[String],
        started: SystemTime,
        wall: Duration,
    ) -> Result<Self> {
        let mut artifacts = Vec::with_capacity(files.len());
        for f in files {
            let p = dir.join(f);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            artifacts.push(Artifact {
                file: f.clone(),
                sha256: sha256_hex(&bytes),
            });
        }
        Ok(Manifest {
            command: command.to_string(),
            seed,
            config_hash: config_hash(&config),
            config,
            versions: Versions::current(),
            artifacts,
            started_at: unix_seconds(started),
            wall_time_s: wall.as_secs_f64(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let p = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("manifest", e))?;
        std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        m.validate()?;
        Ok(m)
    }

    /// Schema checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        let hex64 = |s: &str| s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit());
        if self.command.is_empty() {
            return Err(Error::Config("manifest command is empty".into()));
        }
        if !hex64(&self.config_hash) || self.config_hash != config_hash(&self.config) {
            return Err(Error::Config("manifest config hash does not match its config".into()));
        }
        if self.versions.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported manifest schema {}",
                self.versions.schema
            )));
        }
        if !(self.wall_time_s.is_finite() && self.wall_time_s >= 0.0) {
            return Err(Error::Config("manifest wall time is invalid".into()));
        }
        if let Some(a) = self.artifacts.iter().find(|a| a.file.is_empty() || !hex64(&a.sha256)) {
            return Err(Error::Config(format!("bad artifact entry {a:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn round_trip_validates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        let cfg = serde_json::json!({"k": 1});
        let m = Manifest::build(
            "eval",
            3,
            cfg,
            dir.path(),
            &["a.csv".into()],
            SystemTime::now(),
            Duration::from_millis(5),
        )
        .unwrap();
        m.write(dir.path()).unwrap();
        let back = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.artifacts[0].sha256, sha256_hex(b"x\n1\n"));
    }

    #[test]
    fn tampered_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::build(
            "eval",
            3,
            serde_json::json!({"k": 1}),
            dir.path(),
            &[],
            SystemTime::now(),
            Duration::ZERO,
        )
        .unwrap();
        m.config = serde_json::json!({"k": 2});
        assert!(m.validate().is_err());
    }
}
