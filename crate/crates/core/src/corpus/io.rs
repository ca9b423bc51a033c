//! Line-delimited JSON corpora, optionally gzip-compressed.
//!
//! Each line is one object with the keys `text`, `url`, `id`, `source` and
//! `metadata` (an object of strings). Only `text` is required on input. A
//! missing id becomes `"<file name>:<line number>"`; any other unknown key is
//! kept in `metadata`, stringified if it is not already a string.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use serde_json::{Map, Value};
use thiserror::Error;

use super::Document;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Gzip,
}

impl Compression {
    /// `.gz` suffix means gzip.
    pub fn from_path(path: &Path) -> Compression {
        match path.extension().and_then(|e| e.to_str()) {
            Some("gz") => Compression::Gzip,
            _ => Compression::None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source} (partial file removed: {partial_removed})")]
    Write {
        path: PathBuf,
        source: io::Error,
        partial_removed: bool,
    },
    #[error("num_shards must be at least 1")]
    ZeroShards,
}

/// A malformed input line. Reading continues past it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

pub struct JsonlReader {
    lines: io::Lines<BufReader<Box<dyn Read + Send>>>,
    file_label: String,
    path: PathBuf,
    line_no: usize,
    failed: bool,
}

impl Iterator for JsonlReader {
    type Item = Result<Result<Document, RecordError>, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                    // non-UTF-8 line; recoverable
                    self.line_no += 1;
                    return Some(Ok(Err(self.record_error("line is not valid UTF-8"))));
                }
                Err(e) => {
                    self.failed = true;
                    return Some(Err(CorpusError::Read {
                        path: self.path.clone(),
                        source: e,
                    }));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(Ok(self.parse_line(&line)));
        }
    }
}

impl JsonlReader {
    fn record_error(&self, message: impl Into<String>) -> RecordError {
        RecordError {
            file: self.file_label.clone(),
            line: self.line_no,
            message: message.into(),
        }
    }

    fn parse_line(&self, line: &str) -> Result<Document, RecordError> {
        let value: Value =
            serde_json::from_str(line).map_err(|e| self.record_error(format!("bad JSON: {e}")))?;
        let Value::Object(obj) = value else {
            return Err(self.record_error("line is not a JSON object"));
        };
        document_from_object(obj, || format!("{}:{}", self.file_label, self.line_no))
            .map_err(|m| self.record_error(m))
    }
}

fn stringify(v: Value) -> String {
    match v {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn document_from_object(
    mut obj: Map<String, Value>,
    synth_id: impl FnOnce() -> String,
) -> Result<Document, String> {
    let text = match obj.remove("text") {
        Some(Value::String(s)) => s,
        Some(_) => return Err("\"text\" is not a string".into()),
        None => return Err("missing \"text\" field".into()),
    };
    if text.contains('\0') {
        return Err("text contains a NUL byte".into());
    }
    let mut take_str = |key: &str| -> Result<String, String> {
        match obj.remove(key) {
            None | Some(Value::Null) => Ok(String::new()),
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(format!("\"{key}\" is not a string")),
        }
    };
    let url = take_str("url")?;
    let id = take_str("id")?;
    let source = take_str("source")?;
    let mut metadata = std::collections::BTreeMap::new();
    match obj.remove("metadata") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => {
            for (k, v) in m {
                metadata.insert(k, stringify(v));
            }
        }
        Some(_) => return Err("\"metadata\" is not an object".into()),
    }
    for (k, v) in obj {
        metadata.entry(k).or_insert_with(|| stringify(v));
    }
    let id = if id.is_empty() { synth_id() } else { id };
    Ok(Document {
        text,
        url,
        id,
        source,
        metadata,
    })
}

/// Opens a JSONL corpus. Fails only if the file cannot be opened; bad lines
/// surface as `Ok(Err(RecordError))` items.
pub fn read_jsonl(path: &Path, compression: Compression) -> Result<JsonlReader, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::Read {
        path: path.to_path_buf(),
        source: e,
    })?;
    let inner: Box<dyn Read + Send> = match compression {
        Compression::None => Box::new(file),
        Compression::Gzip => Box::new(MultiGzDecoder::new(file)),
    };
    let file_label = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(JsonlReader {
        lines: BufReader::new(inner).lines(),
        file_label,
        path: path.to_path_buf(),
        line_no: 0,
        failed: false,
    })
}

/// Reads a whole file, compression inferred from the extension.
pub fn read_corpus(path: &Path) -> Result<(Vec<Document>, Vec<RecordError>), CorpusError> {
    let mut docs = Vec::new();
    let mut errors = Vec::new();
    for item in read_jsonl(path, Compression::from_path(path))? {
        match item? {
            Ok(d) => docs.push(d),
            Err(e) => errors.push(e),
        }
    }
    Ok((docs, errors))
}

/// Writes documents one JSON object per line. On failure the partial file is
/// deleted and the error says whether that succeeded.
pub fn write_jsonl<'a, I>(docs: I, path: &Path, compression: Compression) -> Result<usize, CorpusError>
where
    I: IntoIterator<Item = &'a Document>,
{
    let result = write_inner(docs, path, compression);
    result.map_err(|source| {
        let partial_removed = std::fs::remove_file(path).is_ok();
        CorpusError::Write {
            path: path.to_path_buf(),
            source,
            partial_removed,
        }
    })
}

fn write_inner<'a, I>(docs: I, path: &Path, compression: Compression) -> io::Result<usize>
where
    I: IntoIterator<Item = &'a Document>,
{
    let file = File::create(path)?;
    let mut out: Box<dyn Write> = match compression {
        Compression::None => Box::new(BufWriter::new(file)),
        Compression::Gzip => Box::new(GzEncoder::new(
            BufWriter::new(file),
            flate2::Compression::default(),
        )),
    };
    let mut n = 0;
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    drop(out);
    Ok(n)
}
