//! Name and date de-identification.
//!
//! Names come from a [`NameRecognizer`]; the bundled one is a
//! longest-match [`Gazetteer`]. Dates are matched by a fixed set of German
//! date patterns. [`redact`] replaces merged spans with wildcards and
//! [`verify`] re-runs detection on the output.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::RawDocument;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanKind {
    Name,
    Date,
}

/// A byte range of the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionSpan {
    pub start: usize,
    pub end: usize,
    pub kind: SpanKind,
    pub surface: String,
    pub replacement: String,
}

impl RedactionSpan {
    fn detected(text: &str, start: usize, end: usize, kind: SpanKind) -> Self {
        RedactionSpan {
            start,
            end,
            kind,
            surface: text[start..end].to_string(),
            replacement: String::new(),
        }
    }
}

/// Anything that finds person names in text.
pub trait NameRecognizer: Sync {
    /// Name spans sorted by start, non-overlapping.
    fn detect(&self, text: &str) -> Vec<RedactionSpan>;
}

/// Recognizer that never finds a name, for date-only runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoNames;

impl NameRecognizer for NoNames {
    fn detect(&self, _text: &str) -> Vec<RedactionSpan> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchPolicy {
    #[default]
    CaseSensitive,
    CaseInsensitive,
}

/// Dictionary name recognizer with leftmost-longest matching on word
/// boundaries.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: BTreeSet<String>,
    policy: MatchPolicy,
    /// Entry chars (lowercased under case-insensitive matching), grouped by
    /// first char and sorted longest first.
    by_first: HashMap<char, Vec<Vec<char>>>,
}

impl Gazetteer {
    pub fn new<I, S>(entries: I, policy: MatchPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries: BTreeSet<String> = entries
            .into_iter()
            .map(|s| s.as_ref().trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if entries.is_empty() {
            return Err(Error::Config("gazetteer has no entries".into()));
        }
        let mut by_first: HashMap<char, Vec<Vec<char>>> = HashMap::new();
        for e in &entries {
            let chars: Vec<char> = match policy {
                MatchPolicy::CaseSensitive => e.chars().collect(),
                MatchPolicy::CaseInsensitive => e.chars().flat_map(char::to_lowercase).collect(),
            };
            by_first.entry(chars[0]).or_default().push(chars);
        }
        for list in by_first.values_mut() {
            list.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            list.dedup();
        }
        Ok(Gazetteer {
            entries,
            policy,
            by_first,
        })
    }

    /// One name per line, UTF-8; blank lines and `#` comments skipped.
    pub fn parse(contents: &str, policy: MatchPolicy) -> Result<Self> {
        Self::new(
            contents
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
            policy,
        )
    }

    pub fn load(path: impl AsRef<std::path::Path>, policy: MatchPolicy) -> Result<Self> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&contents, policy)
    }

    pub fn entries(&self) -> &BTreeSet<String> {
        &self.entries
    }

    /// Byte length of the match of `entry` at the start of `rest`, if any.
    fn match_at(&self, rest: &str, entry: &[char]) -> Option<usize> {
        let mut want = entry.iter();
        let mut pending: Option<char> = want.next().copied();
        for (pos, c) in rest.char_indices() {
            let Some(_) = pending else {
                return Some(pos);
            };
            match self.policy {
                MatchPolicy::CaseSensitive => {
                    if Some(c) != pending {
                        return None;
                    }
                    pending = want.next().copied();
                }
                MatchPolicy::CaseInsensitive => {
                    for lc in c.to_lowercase() {
                        if Some(lc) != pending {
                            return None;
                        }
                        pending = want.next().copied();
                    }
                }
            }
        }
        pending.is_none().then_some(rest.len())
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

impl NameRecognizer for Gazetteer {
    fn detect(&self, text: &str) -> Vec<RedactionSpan> {
        let mut spans = Vec::new();
        let mut prev: Option<char> = None;
        let mut skip_until = 0usize;
        for (pos, c) in text.char_indices() {
            let at_word_start = pos >= skip_until && prev.is_none_or(|p| !is_word_char(p));
            prev = Some(c);
            if !at_word_start {
                continue;
            }
            let key = match self.policy {
                MatchPolicy::CaseSensitive => c,
                MatchPolicy::CaseInsensitive => c.to_lowercase().next().unwrap_or(c),
            };
            let Some(candidates) = self.by_first.get(&key) else {
                continue;
            };
            let rest = &text[pos..];
            let hit = candidates.iter().find_map(|entry| {
                let len = self.match_at(rest, entry)?;
                let ends_on_boundary = rest[len..].chars().next().is_none_or(|n| !is_word_char(n));
                ends_on_boundary.then_some(len)
            });
            if let Some(len) = hit {
                spans.push(RedactionSpan::detected(
                    text,
                    pos,
                    pos + len,
                    SpanKind::Name,
                ));
                skip_until = pos + len;
            }
        }
        spans
    }
}

const MONTHS: &str = "januar|jänner|jaenner|februar|märz|maerz|april|mai|juni|juli|august|september|oktober|november|dezember";

fn date_patterns() -> &'static [(Regex, DateShape)] {
    static PATTERNS: OnceLock<Vec<(Regex, DateShape)>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        let re = |p: &str| Regex::new(p).expect("static date pattern");
        vec![
            (
                re(r"\b(\d{1,2})\.(\d{1,2})\.(\d{4})\b"),
                DateShape::DayMonthYear,
            ),
            (
                re(r"\b(\d{2})\.(\d{2})\.(\d{2})\b"),
                DateShape::DayMonthYear,
            ),
            (
                re(&format!(r"(?i)\b(\d{{1,2}})\.\s*({MONTHS})\s+(\d{{4}})\b")),
                DateShape::DayMonthNameYear,
            ),
            (
                re(&format!(r"(?i)\b({MONTHS})\s+(\d{{4}})\b")),
                DateShape::MonthNameYear,
            ),
            (re(r"\b(\d{4})-(\d{2})-(\d{2})\b"), DateShape::Iso),
        ]
    })
}

#[derive(Debug, Clone, Copy)]
enum DateShape {
    DayMonthYear,
    DayMonthNameYear,
    MonthNameYear,
    Iso,
}

fn valid_day_month(day: &str, month: &str) -> bool {
    let (Ok(d), Ok(m)) = (day.parse::<u32>(), month.parse::<u32>()) else {
        return false;
    };
    (1..=31).contains(&d) && (1..=12).contains(&m)
}

/// Finds dates in the formats `DD.MM.YYYY`, `D.M.YYYY`, `DD.MM.YY`,
/// `DD. Monat YYYY`, `Monat YYYY` and `YYYY-MM-DD`.
///
/// Overlapping matches are merged into one span.
pub fn detect_dates(text: &str) -> Vec<RedactionSpan> {
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    for (re, shape) in date_patterns() {
        for caps in re.captures_iter(text) {
            let ok = match shape {
                DateShape::DayMonthYear => valid_day_month(&caps[1], &caps[2]),
                DateShape::DayMonthNameYear => valid_day_month(&caps[1], "1"),
                DateShape::MonthNameYear => true,
                DateShape::Iso => valid_day_month(&caps[3], &caps[2]),
            };
            if ok {
                let m = caps.get(0).expect("group 0");
                ranges.push((m.start(), m.end()));
            }
        }
    }
    merge_ranges(ranges)
        .into_iter()
        .map(|(s, e)| RedactionSpan::detected(text, s, e, SpanKind::Date))
        .collect()
}

fn merge_ranges(mut ranges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    ranges.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(ranges.len());
    for (s, e) in ranges {
        match out.last_mut() {
            Some(last) if s < last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

pub fn detect_names(text: &str, recognizer: &dyn NameRecognizer) -> Vec<RedactionSpan> {
    let mut spans = recognizer.detect(text);
    spans.sort_by_key(|s| (s.start, s.end));
    spans
}

/// Replacement strings. An empty name wildcard deletes names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Wildcards {
    pub name: String,
    pub date: String,
}

impl Default for Wildcards {
    fn default() -> Self {
        Wildcards {
            name: "<NAME>".into(),
            date: "<DATE>".into(),
        }
    }
}

impl Wildcards {
    pub fn delete_names() -> Self {
        Wildcards {
            name: String::new(),
            ..Self::default()
        }
    }

    fn for_kind(&self, kind: SpanKind) -> &str {
        match kind {
            SpanKind::Name => &self.name,
            SpanKind::Date => &self.date,
        }
    }
}

/// Replaces every span with its wildcard.
///
/// Overlapping spans are merged first (union, keeping the kind of the
/// earliest-starting one). Text outside the merged spans is copied
/// byte-for-byte. Returns the redacted text and the merged spans, with
/// offsets into the original text.
pub fn redact(
    text: &str,
    spans: &[RedactionSpan],
    wildcards: &Wildcards,
) -> Result<(String, Vec<RedactionSpan>)> {
    for s in spans {
        let valid = s.start < s.end
            && s.end <= text.len()
            && text.is_char_boundary(s.start)
            && text.is_char_boundary(s.end);
        if !valid {
            return Err(Error::InvalidSpan {
                start: s.start,
                end: s.end,
                len: text.len(),
            });
        }
    }
    let mut order: Vec<&RedactionSpan> = spans.iter().collect();
    order.sort_by_key(|s| s.start);
    let mut merged: Vec<(usize, usize, SpanKind)> = Vec::new();
    for s in order {
        match merged.last_mut() {
            Some(last) if s.start < last.1 => last.1 = last.1.max(s.end),
            _ => merged.push((s.start, s.end, s.kind)),
        }
    }

    let mut out = String::with_capacity(text.len());
    let mut applied = Vec::with_capacity(merged.len());
    let mut cursor = 0;
    for (start, end, kind) in merged {
        out.push_str(&text[cursor..start]);
        let replacement = wildcards.for_kind(kind);
        out.push_str(replacement);
        applied.push(RedactionSpan {
            start,
            end,
            kind,
            surface: text[start..end].to_string(),
            replacement: replacement.to_string(),
        });
        cursor = end;
    }
    out.push_str(&text[cursor..]);
    Ok((out, applied))
}

/// Detects and redacts names and dates in one step.
pub fn anonymize_text(
    text: &str,
    recognizer: &dyn NameRecognizer,
    wildcards: &Wildcards,
) -> Result<(String, Vec<RedactionSpan>)> {
    let mut spans = detect_names(text, recognizer);
    spans.extend(detect_dates(text));
    redact(text, &spans, wildcards)
}

/// Identifiers still detectable in already redacted text. Empty means the
/// text passes.
pub fn verify(redacted: &str, recognizer: &dyn NameRecognizer) -> Vec<RedactionSpan> {
    let mut residual = detect_names(redacted, recognizer);
    residual.extend(detect_dates(redacted));
    residual.sort_by_key(|s| (s.start, s.end));
    residual
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRedactions {
    pub id: String,
    pub n_name_spans: usize,
    pub n_date_spans: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residual {
    pub id: String,
    pub span: RedactionSpan,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationReport {
    pub documents: Vec<DocumentRedactions>,
    pub total_name_spans: usize,
    pub total_date_spans: usize,
    pub residuals: Vec<Residual>,
}

impl AnonymizationReport {
    pub fn passed(&self) -> bool {
        self.residuals.is_empty()
    }

    /// Documents with at least one redaction.
    pub fn n_redacted_documents(&self) -> usize {
        self.documents
            .iter()
            .filter(|d| d.n_name_spans + d.n_date_spans > 0)
            .count()
    }
}

/// Anonymizes documents in parallel; output order follows input order.
pub fn anonymize_corpus<D>(
    docs: Vec<D>,
    recognizer: &dyn NameRecognizer,
    wildcards: &Wildcards,
) -> Result<(Vec<D>, AnonymizationReport)>
where
    D: AsMut<RawDocument> + AsRef<RawDocument> + Send,
{
    let results: Vec<(D, DocumentRedactions, Vec<Residual>)> = docs
        .into_par_iter()
        .map(|mut doc| {
            let (redacted, applied) = anonymize_text(&doc.as_ref().text, recognizer, wildcards)?;
            let id = doc.as_ref().id.clone();
            let residuals = verify(&redacted, recognizer)
                .into_iter()
                .map(|span| Residual {
                    id: id.clone(),
                    span,
                })
                .collect();
            let counts = DocumentRedactions {
                n_name_spans: applied.iter().filter(|s| s.kind == SpanKind::Name).count(),
                n_date_spans: applied.iter().filter(|s| s.kind == SpanKind::Date).count(),
                id,
            };
            doc.as_mut().text = redacted;
            Ok((doc, counts, residuals))
        })
        .collect::<Result<_>>()?;

    let mut report = AnonymizationReport::default();
    let mut out = Vec::with_capacity(results.len());
    for (doc, counts, residuals) in results {
        report.total_name_spans += counts.n_name_spans;
        report.total_date_spans += counts.n_date_spans;
        report.documents.push(counts);
        report.residuals.extend(residuals);
        out.push(doc);
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaz(names: &[&str]) -> Gazetteer {
        Gazetteer::new(names, MatchPolicy::CaseSensitive).unwrap()
    }

    fn surfaces(spans: &[RedactionSpan]) -> Vec<&str> {
        spans.iter().map(|s| s.surface.as_str()).collect()
    }

    #[test]
    fn gazetteer_hit_on_word_boundary() {
        let g = gaz(&["Müller"]);
        let spans = detect_names("Herr Müller kam.", &g);
        assert_eq!(surfaces(&spans), vec!["Müller"]);
        assert_eq!(spans[0].start, 5);
        assert!(detect_names("Müllerstraße und Gmüller", &g).is_empty());
        assert!(detect_names("keine Namen hier", &g).is_empty());
    }

    #[test]
    fn longest_entry_wins() {
        let g = gaz(&["Anna", "Anna Schmidt"]);
        let spans = detect_names("Anna Schmidt", &g);
        assert_eq!(surfaces(&spans), vec!["Anna Schmidt"]);
    }

    #[test]
    fn case_insensitive_policy() {
        let g = Gazetteer::new(["Schmidt"], MatchPolicy::CaseInsensitive).unwrap();
        assert_eq!(
            surfaces(&detect_names("Pat. SCHMIDT, geb.", &g)),
            vec!["SCHMIDT"]
        );
        assert!(detect_names("Pat. SCHMIDT", &gaz(&["Schmidt"])).is_empty());
        assert!(Gazetteer::new(Vec::<String>::new(), MatchPolicy::CaseSensitive).is_err());
    }

    #[test]
    fn date_formats() {
        assert_eq!(
            surfaces(&detect_dates("am 01.02.2021 erfolgte")),
            vec!["01.02.2021"]
        );
        assert_eq!(
            surfaces(&detect_dates("seit 1. Januar 2022 stabil")),
            vec!["1. Januar 2022"]
        );
        assert_eq!(
            surfaces(&detect_dates("Vorbefund 3.4.2019")),
            vec!["3.4.2019"]
        );
        assert_eq!(surfaces(&detect_dates("vom 24.12.19")), vec!["24.12.19"]);
        assert_eq!(surfaces(&detect_dates("im MÄRZ 2020")), vec!["MÄRZ 2020"]);
        assert_eq!(
            surfaces(&detect_dates("Datum 2021-03-01.")),
            vec!["2021-03-01"]
        );
        assert!(detect_dates("Seriennummer 12.34").is_empty());
        assert!(detect_dates("Wert 12.34.2021 und 2021-13-01").is_empty());
        assert!(detect_dates("Läsion 1.5 cm, 3.5.12 mm").is_empty());
    }

    #[test]
    fn overlapping_date_matches_merge() {
        let spans = detect_dates("Mai 2020-01-01");
        assert_eq!(surfaces(&spans), vec!["Mai 2020-01-01"]);
    }

    #[test]
    fn redact_identity_and_single() {
        let w = Wildcards::default();
        assert_eq!(redact("Text", &[], &w).unwrap().0, "Text");
        let text = "am 01.02.2021 erfolgte";
        let (out, applied) = redact(text, &detect_dates(text), &w).unwrap();
        assert_eq!(out, "am <DATE> erfolgte");
        assert_eq!(applied.len(), 1);
    }

    #[test]
    fn overlapping_name_spans_become_one_wildcard() {
        let text = "Dr. Anna Schmidt";
        let spans = vec![
            RedactionSpan::detected(text, 4, 8, SpanKind::Name),
            RedactionSpan::detected(text, 4, 16, SpanKind::Name),
            RedactionSpan::detected(text, 9, 16, SpanKind::Name),
        ];
        let (out, applied) = redact(text, &spans, &Wildcards::default()).unwrap();
        assert_eq!(out, "Dr. <NAME>");
        assert_eq!(applied.len(), 1);
        assert_eq!(applied[0].surface, "Anna Schmidt");
    }

    #[test]
    fn invalid_spans_rejected() {
        let w = Wildcards::default();
        let bad = |s, e| RedactionSpan {
            start: s,
            end: e,
            kind: SpanKind::Name,
            surface: String::new(),
            replacement: String::new(),
        };
        assert!(matches!(
            redact("abc", &[bad(1, 9)], &w),
            Err(Error::InvalidSpan { .. })
        ));
        assert!(matches!(
            redact("abc", &[bad(2, 2)], &w),
            Err(Error::InvalidSpan { .. })
        ));
        // 'ü' occupies bytes 1..3
        assert!(matches!(
            redact("Müller", &[bad(2, 4)], &w),
            Err(Error::InvalidSpan { .. })
        ));
    }

    #[test]
    fn delete_mode_removes_names() {
        let g = gaz(&["Müller"]);
        let (out, _) =
            anonymize_text("Herr Müller am 01.02.2021.", &g, &Wildcards::delete_names()).unwrap();
        assert_eq!(out, "Herr  am <DATE>.");
    }

    #[test]
    fn verify_finds_planted_date() {
        let g = gaz(&["Müller"]);
        assert!(verify("", &g).is_empty());
        let (out, _) =
            anonymize_text("Herr Müller, 01.02.2021", &g, &Wildcards::default()).unwrap();
        assert!(verify(&out, &g).is_empty());
        let planted = format!("{out} Kontrolle 05.06.2022");
        assert_eq!(surfaces(&verify(&planted, &g)), vec!["05.06.2022"]);
    }

    #[test]
    fn corpus_report_counts() {
        use crate::corpus::SourceKind;
        let docs = vec![
            RawDocument::new(
                "a",
                SourceKind::RadiologyReport,
                "Pat. Müller, Aufnahme 01.02.2021.",
            ),
            RawDocument::new("b", SourceKind::RadiologyReport, "Keine Auffälligkeiten."),
        ];
        let (out, report) =
            anonymize_corpus(docs, &gaz(&["Müller"]), &Wildcards::default()).unwrap();
        assert_eq!(out[0].text, "Pat. <NAME>, Aufnahme <DATE>.");
        assert_eq!(out[1].text, "Keine Auffälligkeiten.");
        assert_eq!((report.total_name_spans, report.total_date_spans), (1, 1));
        assert_eq!(report.n_redacted_documents(), 1);
        assert!(report.passed());
    }

    fn piece() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-zA-ZäöüÄÖÜß]{1,8}",
            "[0-9]{1,4}",
            Just(".".to_string()),
            Just(" ".to_string()),
            Just("-".to_string()),
            Just("Anna".to_string()),
            Just("Anna Schmidt".to_string()),
            Just("Müller".to_string()),
            Just("Januar".to_string()),
            Just("03.04.2021".to_string()),
            Just("7.8.99".to_string()),
            Just("2020-02-29".to_string()),
            Just("12. Mai 2019".to_string()),
        ]
    }

    proptest! {
        #[test]
        fn closure_and_accounting(pieces in prop::collection::vec(piece(), 0..25)) {
            let text: String = pieces.concat();
            let g = Gazetteer::new(["Anna", "Anna Schmidt", "Müller"], MatchPolicy::CaseSensitive).unwrap();
            let w = Wildcards::default();
            let (out, applied) = anonymize_text(&text, &g, &w).unwrap();
            prop_assert!(verify(&out, &g).is_empty(), "residual in {:?} -> {:?}", text, out);
            let removed: usize = applied.iter().map(|s| s.end - s.start).sum();
            let added: usize = applied.iter().map(|s| s.replacement.len()).sum();
            prop_assert_eq!(out.len(), text.len() - removed + added);
            // complement bytes are untouched
            let mut cursor = 0;
            let mut out_cursor = 0;
            for s in &applied {
                let gap = &text[cursor..s.start];
                prop_assert_eq!(&out[out_cursor..out_cursor + gap.len()], gap);
                out_cursor += gap.len() + s.replacement.len();
                cursor = s.end;
            }
            prop_assert_eq!(&out[out_cursor..], &text[cursor..]);
            prop_assert_eq!(anonymize_text(&text, &g, &w).unwrap().0, out);
        }
    }
}
