//! Result records in CSV and JSON-lines form.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::error::{io_at, CliError, Result};

/// Column order of the CSV output.
pub const CSV_COLUMNS: [&str; 13] = [
    "experiment_id",
    "kind",
    "t1",
    "t2",
    "t3",
    "t4",
    "estimate",
    "stderr",
    "n_paths",
    "n_discarded",
    "seed",
    "config_hash",
    "wall_time",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment_id: String,
    pub kind: String,
    pub t: Vec<f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub n_discarded: u64,
    pub discard_rate: f64,
    pub max_weight_share: f64,
    pub seed: u64,
    pub config_hash: String,
    pub wall_time: Option<f64>,
    pub warnings: Vec<String>,
}

/// Lower-case hex SHA-256 of `text`.
pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("writing to a string");
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

pub fn csv_row(r: &ResultRecord) -> String {
    let mut cols = vec![csv_field(&r.experiment_id), csv_field(&r.kind)];
    for k in 0..4 {
        cols.push(r.t.get(k).map(|t| t.to_string()).unwrap_or_default());
    }
    cols.push(r.estimate.to_string());
    cols.push(r.stderr.to_string());
    cols.push(r.n_paths.to_string());
    cols.push(r.n_discarded.to_string());
    cols.push(r.seed.to_string());
    cols.push(r.config_hash.clone());
    cols.push(r.wall_time.map(|w| w.to_string()).unwrap_or_default());
    cols.join(",")
}

pub fn render(records: &[ResultRecord], format: Format, with_header: bool) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            if with_header {
                out.push_str(&csv_header());
                out.push('\n');
            }
            for r in records {
                out.push_str(&csv_row(r));
                out.push('\n');
            }
        }
        Format::Json => {
            for r in records {
                out.push_str(&serde_json::to_string(r).expect("record serializes"));
                out.push('\n');
            }
        }
    }
    out
}

/// Appends records to `path`, writing the CSV header only to a new or
/// empty file.
pub fn append(path: &Path, records: &[ResultRecord], format: Format) -> Result<()> {
    let existing = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(io_at(path)(e)),
    };
    let fresh = existing.is_empty();
    if format == Format::Csv && !fresh && existing.lines().next() != Some(csv_header().as_str()) {
        return Err(CliError::HeaderMismatch { path: path.into() });
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_at(path))?;
    f.write_all(render(records, format, fresh).as_bytes()).map_err(io_at(path))
}

/// Stores the canonical config under `<out>.configs/<hash>.json`.
pub fn archive_config(out: &Path, canonical: &str, hash: &str) -> Result<()> {
    let mut dir = out.as_os_str().to_owned();
    dir.push(".configs");
    let dir = Path::new(&dir);
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let file = dir.join(format!("{hash}.json"));
    fs::write(&file, canonical).map_err(io_at(&file))
}
