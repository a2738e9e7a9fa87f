//! CSV tables and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

/// Output directory that remembers the digest of every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub records: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.root.join(name);
        let csv_err = |e: csv::Error| CliError::io(&path, std::io::Error::other(e));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        let mut count = 0;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
            count += 1;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::io(&path, e.into_error()))?;
        self.write_bytes(name, &bytes, count)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write_bytes(name, text.as_bytes(), text.lines().count())
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8], rows: usize) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.records.push(OutputRecord {
            file: name.to_string(),
            rows,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigRecord {
    pub path: String,
    pub sha256: String,
    pub schema_version: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub kawasaki: String,
    pub kawasaki_core: String,
}

/// Everything needed to rerun a command and check its outputs. Carries no
/// timestamps or host data, so reruns produce the same bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub execution: String,
    pub warnings: Vec<String>,
    pub versions: Versions,
    pub config: ConfigRecord,
    /// Existence horizons and related scale parameters used by the run.
    pub horizons: toml::Table,
    /// Command-specific scalar results.
    pub results: toml::Table,
    pub outputs: Vec<OutputRecord>,
    /// Verbatim configuration text.
    pub config_text: String,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest fields are plain TOML values")
    }
}

/// Insertion helper for the free-form manifest tables.
pub trait TableExt {
    fn put(&mut self, key: &str, value: impl Into<toml::Value>) -> &mut Self;
}

impl TableExt for toml::Table {
    fn put(&mut self, key: &str, value: impl Into<toml::Value>) -> &mut Self {
        self.insert(key.to_string(), value.into());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        let x = 0.123_456_789_012_345_68_f64;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn digest_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_files_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_csv("t.csv", &["a", "b"], vec![vec![num(1.0), num(2.0)]])
            .unwrap();
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
        assert_eq!(out.records[0].rows, 1);
        assert_eq!(out.records[0].sha256, sha256_hex(text.as_bytes()));
    }
}
