//! Provenance sidecars. The deterministic part goes to
//! `<stem>.provenance.json`; the wall-clock time to `<stem>.timestamp.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub settings: serde_json::Value,
    /// Input file name to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub details: serde_json::Value,
}

pub fn file_digest(path: &Path) -> anyhow::Result<String> {
    let mut f = File::open(path).with_context(|| format!("{}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn name_of(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Provenance {
            tool: "wayfind",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            seed,
            settings: serde_json::Value::Null,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn settings(mut self, v: impl Serialize) -> Self {
        self.settings = serde_json::to_value(v).expect("settings serialize");
        self
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.insert(name_of(path), file_digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(name_of(path));
    }

    /// Writes both sidecars next to `primary` (a file) or inside it (a directory).
    pub fn write(&self, primary: &Path) -> anyhow::Result<()> {
        let (p, t) = sidecars(primary);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&p, text).with_context(|| format!("{}", p.display()))?;
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        std::fs::write(&t, format!("{{\"unix_time\": {now}}}\n")).with_context(|| format!("{}", t.display()))?;
        Ok(())
    }
}

pub fn sidecars(primary: &Path) -> (PathBuf, PathBuf) {
    if primary.is_dir() {
        return (primary.join("provenance.json"), primary.join("provenance.timestamp.json"));
    }
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    (
        primary.with_file_name(format!("{stem}.provenance.json")),
        primary.with_file_name(format!("{stem}.timestamp.json")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        let (p, t) = sidecars(Path::new("out/model.json"));
        assert_eq!(p, Path::new("out/model.provenance.json"));
        assert_eq!(t, Path::new("out/model.timestamp.json"));
    }

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x");
        std::fs::write(&f, b"abc").unwrap();
        assert_eq!(
            file_digest(&f).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
