//! Artifact writing: atomic file output, run manifests, CSV helpers.
//!
//! Every data artifact is written atomically (temp file + rename) and is
//! byte-identical across runs with the same model file, flags, and seed.
//! Each run also writes a `<first-output>.manifest.json` sidecar carrying
//! the command line, hashes, seeds, and a wall-clock timestamp; reports
//! reference the run through the deterministic `run_id`.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Identity of one invocation; everything except the timestamp is a pure
/// function of the inputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub command_line: Vec<String>,
    pub model_sha256: Option<String>,
    pub seeds: Vec<u64>,
    pub run_id: String,
    pub timestamp_unix_ms: u128,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(model_bytes: Option<&[u8]>, seeds: Vec<u64>) -> Self {
        let command_line: Vec<String> = std::env::args().collect();
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let model_sha256 = model_bytes.map(sha256_hex);
        // The run id identifies the computation, so execution metadata
        // (thread count never affects numerical results) is excluded.
        let mut id_args: Vec<&str> = Vec::new();
        let mut skip_value = false;
        for arg in &command_line {
            if skip_value {
                skip_value = false;
                continue;
            }
            if arg == "--threads" {
                skip_value = true;
                continue;
            }
            if arg.starts_with("--threads=") {
                continue;
            }
            id_args.push(arg);
        }
        let mut id_input = tool_version.clone();
        id_input.push('\u{1f}');
        id_input.push_str(&id_args.join("\u{1f}"));
        id_input.push('\u{1f}');
        if let Some(h) = &model_sha256 {
            id_input.push_str(h);
        }
        for s in &seeds {
            id_input.push('\u{1f}');
            id_input.push_str(&s.to_string());
        }
        let run_id = sha256_hex(id_input.as_bytes());
        RunManifest {
            schema: "mfjp/1".into(),
            tool_version,
            command_line,
            model_sha256,
            seeds,
            run_id,
            timestamp_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            outputs: Vec::new(),
        }
    }
}

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Wrap a serialisable report with the schema tag and run id.
#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    schema: &'static str,
    run_id: &'a str,
    report: &'a T,
}

pub struct ArtifactWriter {
    manifest: RunManifest,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(model_bytes: Option<&[u8]>, seeds: Vec<u64>) -> Self {
        ArtifactWriter {
            manifest: RunManifest::new(model_bytes, seeds),
            written: Vec::new(),
        }
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, report: &T) -> std::io::Result<()> {
        let wrapped = Wrapped {
            schema: "mfjp/1",
            run_id: &self.manifest.run_id,
            report,
        };
        let mut text = serde_json::to_string_pretty(&wrapped).expect("serialisable report");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_csv(&mut self, path: &Path, header: &str, rows: &[String]) -> std::io::Result<()> {
        let mut text = String::with_capacity(rows.len() * 32 + header.len() + 2);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        write_atomic(path, text.as_bytes())?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    /// Write the manifest next to the first artifact (or the given path).
    pub fn finish(mut self) -> std::io::Result<()> {
        let Some(first) = self.written.first().cloned() else {
            return Ok(());
        };
        self.manifest.outputs = self
            .written
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        let path = first.with_file_name(format!(
            "{}.manifest.json",
            first.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        ));
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
        text.push('\n');
        write_atomic(&path, text.as_bytes())
    }
}

/// 17-significant-digit float formatting for CSV artifacts, lossless on
/// round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
