use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::sentence::{RuleSentenceSplitter, SentenceSplitter};
use super::{count_words, RawDocument};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    pub n_documents: u64,
    pub n_sentences: u64,
    pub n_words: u64,
    pub size_bytes: u64,
}

impl AddAssign for SourceStats {
    fn add_assign(&mut self, rhs: Self) {
        self.n_documents += rhs.n_documents;
        self.n_sentences += rhs.n_sentences;
        self.n_words += rhs.n_words;
        self.size_bytes += rhs.size_bytes;
    }
}

/// Bytes per megabyte in the rendered table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MbUnit {
    /// 1,000,000 bytes.
    #[default]
    Decimal,
    /// 1,048,576 bytes.
    Binary,
}

impl MbUnit {
    fn bytes(self) -> f64 {
        match self {
            MbUnit::Decimal => 1e6,
            MbUnit::Binary => 1_048_576.0,
        }
    }
}

/// Per-source counts with a total row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_source: BTreeMap<String, SourceStats>,
    pub total: SourceStats,
}

impl CorpusStats {
    pub fn merge(&mut self, other: &CorpusStats) {
        for (source, stats) in &other.per_source {
            *self.per_source.entry(source.clone()).or_default() += *stats;
        }
        self.total += other.total;
    }

    /// Tab-separated table: one row per source and a `Summary` row.
    pub fn to_tsv(&self, unit: MbUnit) -> String {
        let mut out = String::from("Source\tNo. Documents\tNo. Sentences\tNo. Words\tSize (MB)\n");
        let rows = self
            .per_source
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain(std::iter::once(("Summary", &self.total)));
        for (name, s) in rows {
            let mb = (s.size_bytes as f64 / unit.bytes()).round() as u64;
            let _ = writeln!(
                out,
                "{name}\t{}\t{}\t{}\t{mb}",
                s.n_documents, s.n_sentences, s.n_words
            );
        }
        out
    }
}

pub fn compute_corpus_stats<D: AsRef<RawDocument>>(docs: &[D]) -> CorpusStats {
    compute_corpus_stats_with(docs, &RuleSentenceSplitter)
}

pub fn compute_corpus_stats_with<D: AsRef<RawDocument>>(
    docs: &[D],
    splitter: &dyn SentenceSplitter,
) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for doc in docs {
        let doc = doc.as_ref();
        let row = SourceStats {
            n_documents: 1,
            n_sentences: splitter.split(&doc.text).len() as u64,
            n_words: count_words(&doc.text) as u64,
            size_bytes: doc.text.len() as u64,
        };
        *stats.per_source.entry(doc.source.to_string()).or_default() += row;
        stats.total += row;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceKind;
    use proptest::prelude::*;

    #[test]
    fn empty_corpus_is_all_zero() {
        let stats = compute_corpus_stats::<RawDocument>(&[]);
        assert_eq!(stats, CorpusStats::default());
        assert_eq!(stats.to_tsv(MbUnit::Decimal).lines().count(), 2);
    }

    #[test]
    fn single_document_hand_count() {
        let docs = [RawDocument::new("a", SourceKind::Wiki, "Ab c. De f.")];
        let stats = compute_corpus_stats(&docs);
        assert_eq!(
            stats.total,
            SourceStats {
                n_documents: 1,
                n_sentences: 2,
                n_words: 4,
                size_bytes: 11
            }
        );
    }

    #[test]
    fn per_source_rows_sum_to_total() {
        let docs = [
            RawDocument::new("a", SourceKind::Wiki, "Eins zwei. Drei."),
            RawDocument::new("b", SourceKind::Thesis, "Größe"),
        ];
        let stats = compute_corpus_stats(&docs);
        let mut sum = SourceStats::default();
        for s in stats.per_source.values() {
            sum += *s;
        }
        assert_eq!(sum, stats.total);
        assert_eq!(stats.per_source["thesis"].size_bytes, "Größe".len() as u64);
    }

    #[test]
    fn tsv_rounds_megabytes() {
        let mut stats = CorpusStats::default();
        stats.total.size_bytes = 4_195_000_000;
        stats
            .per_source
            .insert("radiology-report".into(), stats.total);
        let tsv = stats.to_tsv(MbUnit::Decimal);
        assert!(tsv.ends_with("Summary\t0\t0\t0\t4195\n"), "{tsv}");
        let tsv = stats.to_tsv(MbUnit::Binary);
        assert!(tsv.ends_with("\t4001\n"), "{tsv}");
    }

    proptest! {
        #[test]
        fn stats_are_additive(a in prop::collection::vec("[A-Za-z .!?]{0,40}", 0..6), b in prop::collection::vec("[A-Za-z .]{0,40}", 0..6)) {
            let docs_a: Vec<_> = a.iter().enumerate().map(|(i, t)| RawDocument::new(format!("a{i}"), SourceKind::Ehr, t.clone())).collect();
            let docs_b: Vec<_> = b.iter().enumerate().map(|(i, t)| RawDocument::new(format!("b{i}"), SourceKind::Wiki, t.clone())).collect();
            let mut merged = compute_corpus_stats(&docs_a);
            merged.merge(&compute_corpus_stats(&docs_b));
            let all: Vec<_> = docs_a.iter().chain(&docs_b).cloned().collect();
            prop_assert_eq!(compute_corpus_stats(&all), merged);
        }

        #[test]
        fn words_at_least_sentences(text in "[A-Z][a-z]{1,5}( [a-z]{1,5}){0,4}\\.( [A-Z][a-z]{1,5}( [a-z]{1,5}){0,4}\\.){0,5}") {
            let s = compute_corpus_stats(&[RawDocument::new("x", SourceKind::Ehr, text)]);
            prop_assert!(s.total.n_words >= s.total.n_sentences);
        }
    }
}
