//! JSON-lines helpers shared by the graph artifact formats.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn to_string<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("artifact serializes"));
        out.push('\n');
    }
    out
}

pub fn write<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Write {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::json(path.display().to_string(), e))?;
        w.write_all(b"\n").map_err(|e| Error::Write {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| Error::Write {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn from_str<T: DeserializeOwned>(text: &str, context: &str) -> Result<Vec<T>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("{context} line {}", i + 1), e)))
        .collect()
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{} line {}", path.display(), i + 1), e))?,
        );
    }
    Ok(out)
}
