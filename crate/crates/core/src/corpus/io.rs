use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{RawDocument, SourceKind};
use crate::{Error, Result};

/// A line that could not be turned into a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

/// Documents read from a JSONL file plus every line that failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub documents: Vec<RawDocument>,
    pub errors: Vec<LineError>,
}

#[derive(Deserialize)]
struct DocRecord {
    id: Option<String>,
    source: Option<String>,
    text: String,
    date: Option<String>,
    patient_ref: Option<String>,
    meta: Option<serde_json::Map<String, serde_json::Value>>,
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .or_else(|| {
            NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
                .ok()
                .map(|dt| dt.date())
        })
        .or_else(|| {
            raw.get(..10)
                .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
        })
}

fn record_to_document(
    record: DocRecord,
    default_source: &SourceKind,
    line: usize,
) -> Result<RawDocument, String> {
    let source = match record.source {
        Some(s) if !s.trim().is_empty() => s.parse().unwrap_or_else(|never| match never {}),
        _ => default_source.clone(),
    };
    let id = match record.id {
        Some(id) if id.is_empty() => return Err("empty `id`".to_string()),
        Some(id) => id,
        None => format!("{source}:{line}"),
    };
    let doc_date = match record.date {
        Some(raw) => Some(parse_date(&raw).ok_or_else(|| format!("unparseable date `{raw}`"))?),
        None => None,
    };
    let metadata = record
        .meta
        .unwrap_or_default()
        .into_iter()
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => (k, s),
            other => (k, other.to_string()),
        })
        .collect::<BTreeMap<_, _>>();
    Ok(RawDocument {
        id,
        source,
        text: record.text,
        doc_date,
        patient_ref: record.patient_ref,
        metadata,
    })
}

/// Reads JSONL documents from any buffered reader.
///
/// Lines without an `id` get `<source>:<line>`; a line without a `source`
/// uses `default_source`. Blank lines are skipped; every other line either
/// yields a document or a [`LineError`].
pub fn read_documents<R: BufRead>(
    reader: R,
    default_source: &SourceKind,
) -> std::io::Result<LoadReport> {
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<DocRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| record_to_document(r, default_source, line_no));
        match parsed {
            Ok(doc) if !seen.insert(doc.id.clone()) => report.errors.push(LineError {
                line: line_no,
                message: format!("duplicate id `{}`", doc.id),
            }),
            Ok(doc) => report.documents.push(doc),
            Err(message) => report.errors.push(LineError {
                line: line_no,
                message,
            }),
        }
    }
    Ok(report)
}

/// Loads a JSONL file; see [`read_documents`].
pub fn load_documents(path: impl AsRef<Path>, default_source: &SourceKind) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_documents(BufReader::new(file), default_source).map_err(|e| Error::io(path, e))
}

/// Writes documents as JSONL in the same schema [`load_documents`] reads.
pub fn write_documents<'a, I>(path: impl AsRef<Path>, docs: I) -> Result<()>
where
    I: IntoIterator<Item = &'a RawDocument>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
