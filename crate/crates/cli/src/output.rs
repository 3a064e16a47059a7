//! Output directories, atomic writes and the provenance manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Relative output paths are resolved against this directory when set.
pub const OUT_ENV: &str = "GASLAB_OUT";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `out` if absolute; otherwise under `$GASLAB_OUT` (or the working
/// directory). Missing `out` means `<root>/<default_name>`.
pub fn resolve_out(out: Option<&Path>, default_name: &str) -> PathBuf {
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from);
    match (out, root) {
        (Some(p), _) if p.is_absolute() => p.to_path_buf(),
        (Some(p), Some(r)) => r.join(p),
        (Some(p), None) => p.to_path_buf(),
        (None, Some(r)) => r.join(default_name),
        (None, None) => Path::new("gaslab-out").join(default_name),
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl FileDigest {
    pub fn of(path: impl Into<String>, bytes: &[u8]) -> Self {
        Self { path: path.into(), sha256: sha256_hex(bytes), bytes: bytes.len() }
    }
}

/// Provenance for one command run. Contains no timestamps, so identical
/// inputs give an identical manifest.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// A directory of named tables plus its manifest.
pub struct Bundle {
    dir: PathBuf,
    manifest: Manifest,
}

impl Bundle {
    pub fn create(dir: PathBuf, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            manifest: Manifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                parameters: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("parameters serialize");
        self.manifest.parameters.insert(key.into(), v);
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.manifest.inputs.push(FileDigest::of(path.display().to_string(), bytes));
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.manifest.outputs.retain(|f| f.path != name);
        self.manifest.outputs.push(FileDigest::of(name, bytes));
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self) -> Result<Manifest, CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.dir.join("manifest.json"), text.as_bytes())?;
        Ok(self.manifest)
    }
}

/// Serializes rows with a header into CSV bytes.
pub fn csv_table<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.as_ref()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads a CSV table with a header into string records keyed by column.
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let bytes = crate::error::read_input(path)?;
    Table::parse(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Source line of each row.
    pub lines: Vec<u64>,
}

impl Table {
    pub fn parse(bytes: &[u8]) -> Result<Self, String> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(bytes);
        let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
        let (mut rows, mut lines) = (Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            lines.push(rec.position().map_or(0, |p| p.line()));
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows, lines })
    }

    pub fn column(&self, name: &str) -> Result<usize, String> {
        self.header.iter().position(|h| h == name).ok_or_else(|| format!("missing column {name}"))
    }

    /// Parses column `name` as f64; empty cells become `None`.
    pub fn floats(&self, name: &str) -> Result<Vec<Option<f64>>, String> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r[c].as_str();
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse().map(Some).map_err(|e| format!("line {}: {name} {cell:?}: {e}", self.lines[i]))
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<&str>, String> {
        let c = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[c].as_str()).collect())
    }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
