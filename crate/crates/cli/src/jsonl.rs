//! JSON-lines input and output with a provenance header.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use hoid_core::dataset::sft::is_meta_line;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const TOOL: &str = "hoid";

pub fn meta(command: &str, config: Value) -> Value {
    json!({"_meta": {"tool": TOOL, "version": env!("CARGO_PKG_VERSION"), "command": command, "config": config}})
}

/// Writes to a file or to standard output.
pub struct Output {
    inner: Box<dyn Write>,
    path: Option<PathBuf>,
}

impl Output {
    pub fn create(path: Option<&Path>) -> Result<Self, CliError> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self {
            inner,
            path: path.map(Path::to_path_buf),
        })
    }

    fn err(&self, e: io::Error) -> CliError {
        match &self.path {
            Some(p) => io_err(p, e),
            None => CliError::Io(format!("stdout: {e}")),
        }
    }

    pub fn line<T: Serialize + ?Sized>(&mut self, v: &T) -> Result<(), CliError> {
        let s = serde_json::to_string(v).map_err(|e| CliError::Invalid(e.to_string()))?;
        writeln!(self.inner, "{s}").map_err(|e| self.err(e))
    }

    pub fn text(&mut self, s: &str) -> Result<(), CliError> {
        self.inner.write_all(s.as_bytes()).map_err(|e| self.err(e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| self.err(e))
    }
}

pub fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Streams `(line_number, value)` for every non-blank, non-header line.
pub fn read_values(
    path: &Path,
) -> Result<impl Iterator<Item = Result<(usize, Value), CliError>>, CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let p = path.to_path_buf();
    Ok(BufReader::new(f)
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(e) => Some(Err(io_err(&p, e))),
            Ok(l) if l.trim().is_empty() || is_meta_line(&l) => None,
            Ok(l) => Some(
                serde_json::from_str(&l)
                    .map(|v| (i + 1, v))
                    .map_err(|e| CliError::Invalid(format!("{}:{}: {e}", p.display(), i + 1))),
            ),
        }))
}
