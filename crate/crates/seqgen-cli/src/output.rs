//! CSV and manifest plumbing shared by every subcommand.
//!
//! Each output file is RFC-4180-style CSV with `#`-prefixed header
//! comments, stamped with a schema version, and accompanied by a JSON
//! manifest recording the full parameter set, the seed, the tool version
//! and a digest of the bytes written — enough to re-run the command and
//! check the result bit for bit.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Schema version stamped as the first line of every CSV.
pub const CSV_VERSION: &str = "seqgen-csv v1";

#[derive(Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

/// Reproducibility sidecar written next to each output file.
#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<OutputRecord>,
    pub duration_ms: u64,
}

/// Collects a run's identity up front, then writes CSV + manifest.
pub struct Emitter {
    subcommand: &'static str,
    parameters: serde_json::Value,
    seed: u64,
    started: Instant,
}

impl Emitter {
    pub fn new(subcommand: &'static str, parameters: serde_json::Value, seed: u64) -> Self {
        Self { subcommand, parameters, seed, started: Instant::now() }
    }

    /// Write the CSV (version comment, column line, data rows) and its
    /// `<stem>.manifest.json` sidecar. Returns the manifest path.
    pub fn write_csv(&self, out: &Path, columns: &str, rows: &[String]) -> io::Result<PathBuf> {
        let mut text = String::new();
        text.push_str("# ");
        text.push_str(CSV_VERSION);
        text.push('\n');
        text.push_str(columns);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(out, &text)?;

        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            parameters: self.parameters.clone(),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: vec![OutputRecord {
                path: out.display().to_string(),
                sha256: format!("{:x}", Sha256::digest(text.as_bytes())),
                rows: rows.len(),
            }],
            duration_ms: self.started.elapsed().as_millis() as u64,
        };
        let path = out.with_extension("manifest.json");
        let doc = serde_json::to_string_pretty(&manifest)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        fs::write(&path, doc + "\n")?;
        Ok(path)
    }
}
