//! Document ingestion, per-source cleaning and corpus statistics.

mod clean;
mod io;
mod sentence;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use clean::{
    clean_corpus, clean_document, default_german_stopwords, CleanOutcome, CleanPolicy,
    CleanPolicySet, RejectReason, RejectRecord,
};
pub use io::{load_documents, read_documents, write_documents, LineError, LoadReport};
pub use sentence::{RuleSentenceSplitter, SentenceSplitter};
pub use stats::{
    compute_corpus_stats, compute_corpus_stats_with, CorpusStats, MbUnit, SourceStats,
};

/// Where a document came from. Open-ended: unknown names map to [`SourceKind::Other`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceKind {
    RadiologyReport,
    Thesis,
    Ehr,
    Textbook,
    Wiki,
    Webcrawl,
    Abstract,
    Other(String),
}

impl SourceKind {
    pub fn as_str(&self) -> &str {
        match self {
            SourceKind::RadiologyReport => "radiology-report",
            SourceKind::Thesis => "thesis",
            SourceKind::Ehr => "ehr",
            SourceKind::Textbook => "textbook",
            SourceKind::Wiki => "wiki",
            SourceKind::Webcrawl => "webcrawl",
            SourceKind::Abstract => "abstract",
            SourceKind::Other(name) => name,
        }
    }
}

impl FromStr for SourceKind {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "radiology-report" | "radiology" => SourceKind::RadiologyReport,
            "thesis" => SourceKind::Thesis,
            "ehr" => SourceKind::Ehr,
            "textbook" => SourceKind::Textbook,
            "wiki" => SourceKind::Wiki,
            "webcrawl" => SourceKind::Webcrawl,
            "abstract" => SourceKind::Abstract,
            _ => SourceKind::Other(s.trim().to_string()),
        })
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for SourceKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SourceKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().unwrap_or_else(|never| match never {}))
    }
}

/// One text unit as ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub source: SourceKind,
    pub text: String,
    #[serde(rename = "date", default, skip_serializing_if = "Option::is_none")]
    pub doc_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_ref: Option<String>,
    #[serde(rename = "meta", default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, source: SourceKind, text: impl Into<String>) -> Self {
        RawDocument {
            id: id.into(),
            source,
            text: text.into(),
            doc_date: None,
            patient_ref: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_date(mut self, date: NaiveDate) -> Self {
        self.doc_date = Some(date);
        self
    }

    pub fn with_patient(mut self, patient_ref: impl Into<String>) -> Self {
        self.patient_ref = Some(patient_ref.into());
        self
    }
}

impl AsRef<RawDocument> for RawDocument {
    fn as_ref(&self) -> &RawDocument {
        self
    }
}

impl AsMut<RawDocument> for RawDocument {
    fn as_mut(&mut self) -> &mut RawDocument {
        self
    }
}

impl AsRef<str> for RawDocument {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

/// A document that passed [`clean_document`].
///
/// Derefs to the underlying [`RawDocument`]; the text is the filtered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CleanDocument(RawDocument);

impl CleanDocument {
    /// Wraps a document that is already known to be clean, e.g. one read
    /// back from the output of an earlier cleaning run.
    pub fn assume_clean(doc: RawDocument) -> Self {
        CleanDocument(doc)
    }

    pub fn into_inner(self) -> RawDocument {
        self.0
    }
}

impl Deref for CleanDocument {
    type Target = RawDocument;

    fn deref(&self) -> &RawDocument {
        &self.0
    }
}

impl AsRef<RawDocument> for CleanDocument {
    fn as_ref(&self) -> &RawDocument {
        &self.0
    }
}

impl AsMut<RawDocument> for CleanDocument {
    fn as_mut(&mut self) -> &mut RawDocument {
        &mut self.0
    }
}

impl AsRef<str> for CleanDocument {
    fn as_ref(&self) -> &str {
        &self.0.text
    }
}

/// Whitespace-delimited word count: maximal non-whitespace runs.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}
