//! File formats: JSON system files, CSV tables, digests and atomic writes.
//!
//! A system file holds `{"n", "m", "A", "B", "b", "c"}` with `A` (n × n) and
//! `B` (n × m) as flat row-major arrays. CSV numbers use `{:.16e}`, which
//! prints 17 significant digits and round-trips every `f64`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controllability::ControlSystem;
use crate::linalg::Matrix;
use crate::quadratic::QuadraticProblem;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error at {pointer}: {message}")]
    Parse {
        path: PathBuf,
        pointer: String,
        message: String,
    },

    /// The file parsed but its content violates a model invariant.
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: crate::Error,
    },
}

impl IoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub input: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

impl SystemFile {
    pub fn from_system(sys: &ControlSystem) -> Self {
        Self {
            n: sys.state_dim(),
            m: sys.control_dim(),
            a: sys.a().as_slice().to_vec(),
            input: sys.input().as_slice().to_vec(),
            b: sys.problem().b().to_vec(),
            c: sys.problem().c(),
        }
    }

    /// Validates shapes and the quadratic invariants (symmetry, PSD).
    pub fn into_system(self) -> crate::Result<ControlSystem> {
        let a = Matrix::from_row_major(self.n, self.n, self.a)?;
        let input = Matrix::from_row_major(self.n, self.m, self.input)?;
        let problem = QuadraticProblem::new(a, self.b, self.c)?;
        ControlSystem::new(problem, input)
    }
}

/// Parses JSON, reporting failures with the JSON pointer of the offending value.
pub fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        IoError::Parse {
            path: path.to_path_buf(),
            pointer,
            message: e.into_inner().to_string(),
        }
    })
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub fn load_system(path: &Path) -> Result<ControlSystem, IoError> {
    let text = read_text(path)?;
    let file: SystemFile = parse_json(path, &text)?;
    file.into_system().map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

/// Formats a number with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// In-memory CSV table with a mandatory header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "CSV row width");
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

/// Writes to stdout when `target` is `-`, otherwise atomically to the file.
pub fn write_output(target: &str, bytes: &[u8]) -> Result<(), IoError> {
    if target == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(bytes)
            .and_then(|_| stdout.flush())
            .map_err(|e| IoError::io("<stdout>", e))
    } else {
        write_atomic(Path::new(target), bytes)
    }
}
