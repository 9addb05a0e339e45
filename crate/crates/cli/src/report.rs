//! Check bookkeeping, failure classes and artifact writers.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nhbrack::Error;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Why a run stopped early.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or unwritable output (exit 2).
    Config(String),
    /// Numerical trouble (exit 3).
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Dimension { .. }
            | Error::InvalidPoint(_)
            | Error::InvalidParameter { .. }
            | Error::GridMismatch(_)
            | Error::Unsupported(_) => Failure::Config(e.to_string()),
            Error::Degenerate { .. }
            | Error::Domain(_)
            | Error::Integration { .. }
            | Error::Stability { .. }
            | Error::InsufficientSamples(_) => Failure::Numerical(e.to_string()),
        }
    }
}

pub type RunResult<T> = Result<T, Failure>;

/// Output directory wrapper; every write failure is a configuration error.
pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: &Path) -> RunResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_with(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> RunResult<()> {
        let path = self.path(name);
        let err = |e: std::io::Error| Failure::Config(format!("{}: {e}", path.display()));
        let file = File::create(&path).map_err(err)?;
        let mut out = BufWriter::new(file);
        f(&mut out).map_err(err)?;
        out.flush().map_err(err)
    }

    pub fn json<S: Serialize>(&self, name: &str, value: &S) -> RunResult<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    /// CSV with a header row and numeric rows.
    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> RunResult<()> {
        self.write_with(name, |w| {
            writeln!(w, "{}", header.join(","))?;
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            Ok(())
        })
    }
}
