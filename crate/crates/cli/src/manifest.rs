//! Reproducibility manifest written next to every subcommand's outputs.
//!
//! The manifest records the effective invocation, the seeds in play, and a
//! digest of every file read and written. It deliberately carries no
//! timestamp so a rerun with identical inputs produces a byte-identical
//! manifest.

use std::collections::BTreeMap;
use std::io::Read as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    /// Arguments after config-file expansion, binary name excluded.
    pub argv: Vec<String>,
    pub seeds: BTreeMap<&'static str, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, argv: &[String]) -> Self {
        RunManifest {
            tool: "herovec",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            argv: argv.to_vec(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &'static str, value: u64) -> &mut Self {
        self.seeds.insert(name, value);
        self
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<&mut Self> {
        let digest = digest_file(path)?;
        self.inputs.push(digest);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> std::io::Result<&mut Self> {
        let digest = digest_file(path)?;
        self.outputs.push(digest);
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)
    }
}

fn digest_file(path: &Path) -> std::io::Result<FileDigest> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect::<String>();
    Ok(FileDigest { path: path.display().to_string(), sha256 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "abc").unwrap();

        let build = || {
            let mut m = RunManifest::new("demo", &["--x".into(), "1".into()]);
            m.seed("seed", 7);
            m.input(&input).unwrap();
            m
        };
        let a_path = dir.path().join("a.json");
        let b_path = dir.path().join("b.json");
        build().write(&a_path).unwrap();
        build().write(&b_path).unwrap();
        let a = std::fs::read(&a_path).unwrap();
        assert_eq!(a, std::fs::read(&b_path).unwrap());
        let text = String::from_utf8(a).unwrap();
        // Known digest of "abc".
        assert!(text.contains("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
        assert!(text.contains("\"seed\": 7"));
        assert!(m_is_missing_file_error(&input.with_extension("absent")));
    }

    fn m_is_missing_file_error(path: &Path) -> bool {
        RunManifest::new("demo", &[]).input(path).is_err()
    }
}
