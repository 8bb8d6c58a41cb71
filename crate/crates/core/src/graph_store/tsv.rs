//! Minimal tab-separated reader with header validation and line-numbered
//! errors.

use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct TsvReader {
    file: String,
    lines: Lines<BufReader<File>>,
    line_no: usize,
}

pub(crate) struct TsvRow {
    file: String,
    line: usize,
    fields: Vec<String>,
}

impl TsvReader {
    /// Opens `path` and checks that the header starts with `expected`.
    pub fn open(path: &Path, expected: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = Self {
            file: path.display().to_string(),
            lines: BufReader::new(file).lines(),
            line_no: 0,
        };
        let header = reader
            .next_line()?
            .ok_or_else(|| reader.error(0, "missing header"))?;
        let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
        for (i, want) in expected.iter().enumerate() {
            // The last expected column may be absent when always empty.
            let optional_tail = i + 1 == expected.len() && cols.len() == i;
            if !optional_tail && cols.get(i).copied() != Some(*want) {
                return Err(reader.error(
                    1,
                    &format!(
                        "expected header `{}`, found `{header}`",
                        expected.join("\\t")
                    ),
                ));
            }
        }
        Ok(reader)
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        loop {
            let Some(line) = self.lines.next() else {
                return Ok(None);
            };
            self.line_no += 1;
            let line = line.map_err(|e| Error::io(&self.file, e))?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            return Ok(Some(line.to_string()));
        }
    }

    pub fn next_row(&mut self) -> Result<Option<TsvRow>> {
        Ok(self.next_line()?.map(|l| TsvRow {
            file: self.file.clone(),
            line: self.line_no,
            fields: l.split('\t').map(str::to_string).collect(),
        }))
    }

    fn error(&self, line: usize, message: &str) -> Error {
        Error::Parse {
            file: self.file.clone(),
            line,
            message: message.to_string(),
        }
    }
}

impl TsvRow {
    pub fn field(&self, i: usize) -> Result<&str> {
        self.fields
            .get(i)
            .map(String::as_str)
            .ok_or_else(|| self.error(&format!("missing column {}", i + 1)))
    }

    pub fn optional(&self, i: usize) -> &str {
        self.fields.get(i).map_or("", String::as_str)
    }

    pub fn error(&self, message: &str) -> Error {
        Error::Parse {
            file: self.file.clone(),
            line: self.line,
            message: message.to_string(),
        }
    }
}

/// Reads `src<TAB>dst` symbol pairs.
pub fn load_pairs(path: &Path, header: &[&str]) -> Result<Vec<(String, String)>> {
    let mut reader = TsvReader::open(path, header)?;
    let mut out = Vec::new();
    while let Some(row) = reader.next_row()? {
        out.push((
            row.field(0)?.trim().to_string(),
            row.field(1)?.trim().to_string(),
        ));
    }
    Ok(out)
}
