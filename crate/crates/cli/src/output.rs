//! In-memory artifact sets, CSV/JSON encoding and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Shortest round-trip scientific notation, `.` as decimal separator.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// A CSV table with a fixed header and `\n` line endings.
#[derive(Debug, Clone)]
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self {
            buf,
            columns: header.len(),
        }
    }

    /// Appends a row; `None` leaves the cell empty.
    pub fn row(&mut self, cells: &[Option<f64>]) {
        assert_eq!(cells.len(), self.columns, "row width does not match the header");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            if let Some(v) = c {
                let _ = write!(self.buf, "{}", fmt_f64(*v));
            }
        }
        self.buf.push('\n');
    }

    /// Appends a row of preformatted cells.
    pub fn text_row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width does not match the header");
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

/// Files produced by one experiment, keyed by file name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    config_sha256: String,
    library_version: &'a str,
    seed: u64,
    files: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn add_csv(&mut self, name: &str, csv: Csv) {
        self.files.insert(name.to_string(), csv.into_bytes());
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Encode { what: "json artifact", source })?;
        bytes.push(b'\n');
        self.files.insert(name.to_string(), bytes);
        Ok(())
    }

    /// Adds `manifest.json` with the config hash, library version and
    /// per-file checksums.
    pub fn seal(&mut self, experiment: &str, config_source: &str, seed: u64) -> Result<(), CliError> {
        let manifest = Manifest {
            experiment,
            config_sha256: sha256_hex(config_source.as_bytes()),
            library_version: gsf_core::VERSION,
            seed,
            files: self.files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect(),
        };
        self.add_json("manifest.json", &manifest)
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut out = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|source| CliError::Io { path: path.clone(), source })?;
            out.push(path);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_use_dot_and_newline() {
        let mut c = Csv::new(&["t", "x"]);
        c.row(&[Some(0.5), None]);
        c.row(&[Some(1e-7), Some(-2.0)]);
        let s = String::from_utf8(c.into_bytes()).unwrap();
        assert_eq!(s, "t,x\n5e-1,\n1e-7,-2e0\n");
    }

    #[test]
    fn formatted_values_round_trip() {
        for v in [0.1, -6.02827, 1.0 / 3.0, 2f64.powi(-15), 1e300] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn manifest_lists_every_file() {
        let mut a = Artifacts::default();
        a.add_csv("a.csv", Csv::new(&["x"]));
        a.seal("test", "experiment = \"pu\"", 0).unwrap();
        let m: serde_json::Value = serde_json::from_slice(&a.files["manifest.json"]).unwrap();
        assert_eq!(m["files"]["a.csv"], sha256_hex(b"x\n"));
        assert_eq!(m["library_version"], gsf_core::VERSION);
    }
}
