//! Per-run record written next to every set of outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.txt";

/// What ran, with which inputs and seed, so the outputs can be reproduced.
///
/// Rendered as `key = value` lines, readable with [`crate::config::KeyValues`].
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    /// `(role, path, sha256)` of every file read.
    pub inputs: Vec<(String, PathBuf, String)>,
    pub seed: Option<u64>,
    pub version: String,
    pub duration: Duration,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration: Duration::ZERO,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    /// Records an input file together with its SHA-256 digest.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| {
            std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
        })?;
        self.inputs
            .push((role.to_string(), path.to_path_buf(), sha256_hex(&bytes)));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "version = {}", self.version);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        for (k, v) in &self.parameters {
            let _ = writeln!(s, "param.{k} = {v}");
        }
        for (role, path, digest) in &self.inputs {
            let _ = writeln!(s, "input.{role} = {}", path.display());
            let _ = writeln!(s, "input.{role}.sha256 = {digest}");
        }
        let _ = writeln!(s, "duration_seconds = {:.3}", self.duration.as_secs_f64());
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_FILE), self.render())?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::KeyValues;

    #[test]
    fn digest_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn rendering_parses_back() {
        let mut m = RunManifest::new("simulate");
        m.seed = Some(7);
        m.param("beta", 0.1);
        let kv = KeyValues::parse(&m.render()).unwrap();
        assert_eq!(kv.get("command"), Some("simulate"));
        assert_eq!(kv.parsed::<u64>("seed").unwrap(), Some(7));
        assert_eq!(kv.get("param.beta"), Some("0.1"));
    }
}
