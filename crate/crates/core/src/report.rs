//! Output artifacts: CSV/JSON encoding, checksums and the run manifest.
//!
//! Everything a command emits is built in memory first; [`ReportBundle::write`]
//! then stages all files and renames them into place, so a failed run leaves
//! no partial outputs behind.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Name of the manifest written next to every bundle.
pub const MANIFEST_NAME: &str = "manifest.json";

/// Formats a float so that it parses back to the same value. Uses plain
/// notation for moderate magnitudes and exponent notation otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || (1e-4..1e15).contains(&x.abs()) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Header plus rows; every row must match the header width.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Comma-separated, header first, LF line endings.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Pretty JSON with lexicographically sorted keys and a trailing newline.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    // routing through Value sorts object keys
    let v = serde_json::to_value(value)?;
    let mut out = serde_json::to_vec_pretty(&v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Run metadata recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub seed: u64,
    pub config_sha256: String,
    pub config_source: String,
    pub created_utc: String,
    pub files: Vec<FileEntry>,
}

/// RFC 3339 UTC timestamp; honors `SOURCE_DATE_EPOCH` for reproducible builds.
pub fn timestamp_utc() -> String {
    use time::format_description::well_known::Rfc3339;
    use time::OffsetDateTime;
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| OffsetDateTime::from_unix_timestamp(s).ok())
        .unwrap_or_else(OffsetDateTime::now_utc)
        .replace_nanosecond(0)
        .expect("zero is a valid nanosecond");
    now.format(&Rfc3339).expect("RFC 3339 formatting of a UTC time")
}

/// Named output files awaiting a write.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    files: Vec<(String, Vec<u8>)>,
}

impl ReportBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        let name = name.into();
        assert!(name != MANIFEST_NAME && !self.files.iter().any(|f| f.0 == name), "duplicate output {name}");
        self.files.push((name, bytes));
    }

    pub fn add_csv(&mut self, name: impl Into<String>, table: &CsvTable) {
        self.add(name, table.to_bytes());
    }

    pub fn add_json<T: Serialize + ?Sized>(&mut self, name: impl Into<String>, value: &T) -> serde_json::Result<()> {
        let bytes = to_json_bytes(value)?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn files(&self) -> &[(String, Vec<u8>)] {
        &self.files
    }

    pub fn entries(&self) -> Vec<FileEntry> {
        self.files
            .iter()
            .map(|(name, b)| FileEntry {
                name: name.clone(),
                bytes: b.len(),
                sha256: sha256_hex(b),
            })
            .collect()
    }

    /// Writes every file plus the manifest into `dir`. Files are staged
    /// under temporary names first and renamed only once all are written.
    pub fn write(&self, dir: &Path, mut manifest: Manifest) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        manifest.files = self.entries();
        let manifest_bytes = to_json_bytes(&manifest).map_err(io::Error::other)?;
        let all: Vec<(&str, &[u8])> = self
            .files
            .iter()
            .map(|(n, b)| (n.as_str(), b.as_slice()))
            .chain(std::iter::once((MANIFEST_NAME, manifest_bytes.as_slice())))
            .collect();
        let mut staged = Vec::with_capacity(all.len());
        for (name, bytes) in &all {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(e);
            }
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, dst) in staged {
            fs::rename(&tmp, &dst)?;
            written.push(dst);
        }
        Ok(written)
    }
}
