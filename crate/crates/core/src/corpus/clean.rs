use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::sentence::{RuleSentenceSplitter, SentenceSplitter};
use super::{CleanDocument, RawDocument, SourceKind};
use crate::{Error, Result};

const GERMAN_STOPWORDS: &str = include_str!("../../data/german_stopwords.txt");

/// The bundled German stopword list (lowercase).
pub fn default_german_stopwords() -> BTreeSet<String> {
    GERMAN_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Thresholds and filters applied to one source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanPolicy {
    /// Reject documents with fewer characters (Unicode scalar values).
    pub min_chars: usize,
    /// Reject documents shorter than this many page equivalents.
    pub min_pages: usize,
    pub chars_per_page: usize,
    /// Delete every sentence that contains none of `stopwords`.
    pub stopword_sentence_filter: bool,
    pub stopwords: BTreeSet<String>,
}

impl Default for CleanPolicy {
    fn default() -> Self {
        CleanPolicy {
            min_chars: 0,
            min_pages: 0,
            chars_per_page: 1800,
            stopword_sentence_filter: false,
            stopwords: BTreeSet::new(),
        }
    }
}

impl CleanPolicy {
    /// Keeps every non-empty document unchanged.
    pub fn passthrough() -> Self {
        Self::default()
    }

    /// Radiology reports: drop texts under 100 characters.
    pub fn radiology() -> Self {
        CleanPolicy {
            min_chars: 100,
            ..Self::default()
        }
    }

    /// Theses: drop sentences without a German stopword, then drop documents
    /// under 15 pages (1800 characters per page).
    pub fn thesis() -> Self {
        CleanPolicy {
            min_pages: 15,
            stopword_sentence_filter: true,
            stopwords: default_german_stopwords(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_pages > 0 && self.chars_per_page == 0 {
            return Err(Error::Config(
                "chars_per_page must be positive when min_pages is set".into(),
            ));
        }
        if self.stopword_sentence_filter && self.stopwords.is_empty() {
            return Err(Error::Config(
                "stopword filter enabled with an empty stopword list".into(),
            ));
        }
        Ok(())
    }

    fn min_page_chars(&self) -> usize {
        self.min_pages.saturating_mul(self.chars_per_page)
    }
}

/// Per-source policies with a fallback, as used by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanPolicySet {
    pub by_source: BTreeMap<String, CleanPolicy>,
    pub fallback: CleanPolicy,
}

impl Default for CleanPolicySet {
    fn default() -> Self {
        let mut by_source = BTreeMap::new();
        by_source.insert(
            SourceKind::RadiologyReport.to_string(),
            CleanPolicy::radiology(),
        );
        by_source.insert(SourceKind::Thesis.to_string(), CleanPolicy::thesis());
        CleanPolicySet {
            by_source,
            fallback: CleanPolicy::passthrough(),
        }
    }
}

impl CleanPolicySet {
    pub fn policy_for(&self, source: &SourceKind) -> &CleanPolicy {
        self.by_source
            .get(source.as_str())
            .unwrap_or(&self.fallback)
    }

    pub fn validate(&self) -> Result<()> {
        self.fallback.validate()?;
        self.by_source.values().try_for_each(CleanPolicy::validate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    TooShort,
    TooFewPages,
    EmptyAfterFilter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanOutcome {
    Kept(CleanDocument),
    Rejected {
        doc: RawDocument,
        reason: RejectReason,
    },
}

/// Entry of the reject log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub id: String,
    pub source: SourceKind,
    pub reason: RejectReason,
    pub n_chars: usize,
}

fn has_stopword(sentence: &str, stopwords: &BTreeSet<String>) -> bool {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .any(|w| stopwords.contains(&w.to_lowercase()))
}

/// Applies `policy` to one document.
///
/// The stopword filter runs first; length thresholds are checked on the
/// filtered text, which makes cleaning idempotent.
pub fn clean_document(doc: RawDocument, policy: &CleanPolicy) -> CleanOutcome {
    let mut doc = doc;
    if policy.stopword_sentence_filter {
        let kept: Vec<&str> = RuleSentenceSplitter
            .split(&doc.text)
            .into_iter()
            .filter(|s| has_stopword(s, &policy.stopwords))
            .collect();
        doc.text = kept.join(" ");
    }

    let n_chars = doc.text.chars().count();
    let reason = if doc.text.trim().is_empty() {
        Some(RejectReason::EmptyAfterFilter)
    } else if n_chars < policy.min_chars {
        Some(RejectReason::TooShort)
    } else if n_chars < policy.min_page_chars() {
        Some(RejectReason::TooFewPages)
    } else {
        None
    };
    match reason {
        Some(reason) => CleanOutcome::Rejected { doc, reason },
        None => CleanOutcome::Kept(CleanDocument(doc)),
    }
}

/// Cleans a corpus with per-source policies, returning kept documents in
/// input order and the reject log.
pub fn clean_corpus(
    docs: Vec<RawDocument>,
    policies: &CleanPolicySet,
) -> (Vec<CleanDocument>, Vec<RejectRecord>) {
    let mut kept = Vec::with_capacity(docs.len());
    let mut rejects = Vec::new();
    for doc in docs {
        let policy = policies.policy_for(&doc.source);
        match clean_document(doc, policy) {
            CleanOutcome::Kept(d) => kept.push(d),
            CleanOutcome::Rejected { doc, reason } => rejects.push(RejectRecord {
                n_chars: doc.text.chars().count(),
                id: doc.id,
                source: doc.source,
                reason,
            }),
        }
    }
    (kept, rejects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn radiology(text: &str) -> RawDocument {
        RawDocument::new("r1", SourceKind::RadiologyReport, text)
    }

    #[test]
    fn radiology_boundary_at_100_chars() {
        let policy = CleanPolicy::radiology();
        let short = "ä".repeat(99);
        match clean_document(radiology(&short), &policy) {
            CleanOutcome::Rejected { reason, .. } => assert_eq!(reason, RejectReason::TooShort),
            other => panic!("expected rejection, got {other:?}"),
        }
        let ok = "ä".repeat(100);
        assert!(matches!(
            clean_document(radiology(&ok), &policy),
            CleanOutcome::Kept(_)
        ));
    }

    #[test]
    fn passing_text_is_unchanged() {
        let text = "Kein Nachweis einer Fraktur.  Weichteile unauffällig.";
        match clean_document(radiology(text), &CleanPolicy::passthrough()) {
            CleanOutcome::Kept(d) => assert_eq!(d.text, text),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stopword_filter_drops_sentence_without_stopword() {
        let policy = CleanPolicy {
            stopword_sentence_filter: true,
            stopwords: ["und", "der", "die"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            ..CleanPolicy::default()
        };
        let doc = RawDocument::new(
            "t",
            SourceKind::Thesis,
            "Die Lunge ist frei. Abbildung 3 Tabelle 4.",
        );
        match clean_document(doc, &policy) {
            CleanOutcome::Kept(d) => assert_eq!(d.text, "Die Lunge ist frei."),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thesis_page_threshold_and_empty_after_filter() {
        let policy = CleanPolicy::thesis();
        let doc = RawDocument::new("t", SourceKind::Thesis, "Abbildung 1. Tabelle 2.");
        assert!(matches!(
            clean_document(doc, &policy),
            CleanOutcome::Rejected {
                reason: RejectReason::EmptyAfterFilter,
                ..
            }
        ));
        let sentence = "Die Untersuchung der Patienten erfolgte und wurde dokumentiert. ";
        let text = sentence.repeat(15 * 1800 / sentence.chars().count());
        let doc = RawDocument::new("t", SourceKind::Thesis, text);
        assert!(matches!(
            clean_document(doc, &policy),
            CleanOutcome::Rejected {
                reason: RejectReason::TooFewPages,
                ..
            }
        ));
    }

    #[test]
    fn policy_validation() {
        let bad = CleanPolicy {
            stopword_sentence_filter: true,
            ..CleanPolicy::default()
        };
        assert!(bad.validate().is_err());
        assert!(CleanPolicy::thesis().validate().is_ok());
        assert!(default_german_stopwords().len() > 200);
    }

    fn sentence_text() -> impl Strategy<Value = String> {
        let word = prop_oneof![
            Just("die".to_string()),
            Just("und".to_string()),
            Just("Lunge".to_string()),
            Just("Erguss".to_string()),
            Just("o.B.".to_string()),
            "[a-zäöü]{1,6}",
        ];
        let sentence = (
            prop::collection::vec(word, 1..6),
            prop_oneof![Just("."), Just("!"), Just(";"), Just("")],
        )
            .prop_map(|(ws, t)| {
                let mut s = ws.join(" ");
                if let Some(first) = s.get(..1) {
                    s = first.to_uppercase() + &s[1..];
                }
                s + t
            });
        prop::collection::vec(sentence, 0..8).prop_map(|ss| ss.join("  "))
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(text in sentence_text(), min_chars in 0usize..60, filter in any::<bool>()) {
            let policy = CleanPolicy {
                min_chars,
                stopword_sentence_filter: filter,
                stopwords: ["die", "und"].iter().map(|s| s.to_string()).collect(),
                ..CleanPolicy::default()
            };
            let doc = RawDocument::new("x", SourceKind::Thesis, text);
            match clean_document(doc, &policy) {
                CleanOutcome::Kept(once) => {
                    let again = clean_document(once.clone().into_inner(), &policy);
                    prop_assert_eq!(again, CleanOutcome::Kept(once));
                }
                CleanOutcome::Rejected { doc, reason } => {
                    let n = doc.text.chars().count();
                    match reason {
                        RejectReason::TooShort => prop_assert!(n < policy.min_chars),
                        RejectReason::TooFewPages => prop_assert!(n < policy.min_page_chars()),
                        RejectReason::EmptyAfterFilter => prop_assert!(doc.text.trim().is_empty()),
                    }
                }
            }
        }
    }
}
