//! Synthetic data generators used by the examples and tests: report-style
//! text with planted near-duplicates, documents with planted names and
//! dates, coded clinical documents, tokenizer corpora and learning curves.
//!
//! All generators are deterministic in their seed.

use std::ops::Range;

use chrono::{Duration, NaiveDate};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anonymize::SpanKind;
use crate::benchmark::{CodeRecord, CodeSystem};
use crate::corpus::{RawDocument, SourceKind};

const COMMON: &[&str] = &[
    "der",
    "die",
    "das",
    "kein",
    "Nachweis",
    "links",
    "rechts",
    "Lunge",
    "Erguss",
    "regelrecht",
    "bei",
    "mit",
    "unauffällig",
    "Befund",
    "Thorax",
    "Zustand",
    "nach",
    "Voraufnahme",
    "im",
    "Vergleich",
    "basal",
    "dorsal",
    "Infiltrat",
    "Pneumothorax",
    "Herz",
    "normal",
    "groß",
    "konfiguriert",
    "Zwerchfell",
    "glatt",
    "begrenzt",
    "Sinus",
    "frei",
    "Katheter",
    "einliegend",
    "Spitze",
    "Projektion",
    "auf",
    "Vena",
    "cava",
    "superior",
];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "fl", "gr",
    "kl", "pr", "st", "tr", "sch", "sp",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ä", "ö", "ü", "ei", "au"];
const CODAS: &[&str] = &["", "", "n", "r", "l", "s", "t", "m", "ch", "ng"];

fn syllable(rng: &mut impl Rng) -> String {
    format!(
        "{}{}{}",
        ONSETS.choose(rng).unwrap(),
        VOWELS.choose(rng).unwrap(),
        CODAS.choose(rng).unwrap()
    )
}

/// Zipf-distributed report text over a large vocabulary whose most
/// frequent words are common radiology terms.
pub struct ReportGenerator {
    vocab: Vec<String>,
    zipf: WeightedIndex<f64>,
    words: Range<usize>,
}

impl ReportGenerator {
    pub fn new(vocab_size: usize, exponent: f64, words: Range<usize>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vocab: Vec<String> = COMMON.iter().map(|w| w.to_string()).collect();
        let mut seen: std::collections::HashSet<String> = vocab.iter().cloned().collect();
        while vocab.len() < vocab_size.max(COMMON.len()) {
            let n = rng.gen_range(2..=4);
            let w: String = (0..n).map(|_| syllable(&mut rng)).collect();
            if seen.insert(w.clone()) {
                vocab.push(w);
            }
        }
        let weights: Vec<f64> = (1..=vocab.len())
            .map(|r| (r as f64).powf(-exponent))
            .collect();
        ReportGenerator {
            zipf: WeightedIndex::new(weights).expect("positive weights"),
            vocab,
            words,
        }
    }

    pub fn word(&self, rng: &mut impl Rng) -> &str {
        &self.vocab[self.zipf.sample(rng)]
    }

    pub fn words(&self, rng: &mut impl Rng) -> Vec<String> {
        let n = rng.gen_range(self.words.clone());
        (0..n).map(|_| self.word(rng).to_string()).collect()
    }
}

/// Joins words into sentences of 6 to 12 words ending in a full stop.
pub fn render_sentences(words: &[String], rng: &mut impl Rng) -> String {
    let mut out = String::new();
    let mut left = 0;
    for (i, w) in words.iter().enumerate() {
        if left == 0 {
            left = rng.gen_range(6..=12);
            if i > 0 {
                out.push_str(". ");
            }
            let mut cs = w.chars();
            if let Some(c) = cs.next() {
                out.extend(c.to_uppercase());
                out.push_str(cs.as_str());
            }
        } else {
            out.push(' ');
            out.push_str(w);
        }
        left -= 1;
    }
    if !words.is_empty() {
        out.push('.');
    }
    out
}

const DUP_VOCAB: usize = 50_000;
const DUP_EXPONENT: f64 = 0.8;

pub struct NearDuplicateCorpus {
    pub docs: Vec<RawDocument>,
    /// Index (into `docs`) of the original each planted copy was made from.
    pub original_of: Vec<Option<usize>>,
    pub n_planted: usize,
}

/// `n` radiology-style reports of 30 to 80 words of which a share of
/// `dup_rate` are copies of another report with at most two words replaced.
pub fn near_duplicate_corpus(n: usize, dup_rate: f64, seed: u64) -> NearDuplicateCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generator = ReportGenerator::new(DUP_VOCAB, DUP_EXPONENT, 30..81, seed ^ 0x5eed);
    let n_planted = ((n as f64) * dup_rate).round() as usize;
    let n_orig = n - n_planted;
    let mut bodies: Vec<Vec<String>> = (0..n_orig).map(|_| generator.words(&mut rng)).collect();
    let mut original_of: Vec<Option<usize>> = vec![None; n_orig];
    for _ in 0..n_planted {
        let src = rng.gen_range(0..n_orig);
        let mut copy = bodies[src].clone();
        for _ in 0..rng.gen_range(0..=2) {
            let at = rng.gen_range(0..copy.len());
            copy[at] = generator.word(&mut rng).to_string();
        }
        bodies.push(copy);
        original_of.push(Some(src));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut position = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        position[i] = pos;
    }
    let docs = order
        .iter()
        .map(|&i| {
            RawDocument::new(
                format!("r{:06}", position[i]),
                SourceKind::RadiologyReport,
                render_sentences(&bodies[i], &mut rng),
            )
        })
        .collect();
    let original_of = order
        .iter()
        .map(|&i| original_of[i].map(|o| position[o]))
        .collect();
    NearDuplicateCorpus {
        docs,
        original_of,
        n_planted,
    }
}

pub const FIRST_NAMES: &[&str] = &[
    "Anna", "Lukas", "Marie", "Jonas", "Sophie", "Felix", "Lea", "Paul", "Hannah", "Elias", "Emma",
    "Noah", "Mia", "Leon", "Clara", "Jürgen", "Ursula", "Özlem",
];
pub const LAST_NAMES: &[&str] = &[
    "Müller",
    "Schmidt",
    "Schneider",
    "Fischer",
    "Weber",
    "Meyer",
    "Wagner",
    "Becker",
    "Schulz",
    "Hoffmann",
    "Koch",
    "Richter",
    "Klein",
    "Wolf",
    "Schröder",
    "Neumann",
    "Yılmaz",
    "Nowak",
];
const MONTHS: &[&str] = &[
    "Januar",
    "Februar",
    "März",
    "April",
    "Mai",
    "Juni",
    "Juli",
    "August",
    "September",
    "Oktober",
    "November",
    "Dezember",
];
const FILLER: &[&str] = &[
    "Befund",
    "Aufnahme",
    "Kontrolle",
    "wegen",
    "Dyspnoe",
    "unauffällig",
    "stationär",
    "Patient",
    "Patientin",
    "vorgestellt",
    "Sonographie",
    "Abdomen",
    "ohne",
    "pathologischen",
    "Befund",
    "Therapie",
    "fortgeführt",
    "Labor",
    "CRP",
    "erhöht",
    "Entlassung",
    "geplant",
    "Verlauf",
    "stabil",
    "Station",
    "Visite",
    "durch",
    "Oberarzt",
    "am",
    "seit",
];

pub struct NameDateCorpus {
    pub docs: Vec<RawDocument>,
    /// Every first and last name and every full name used.
    pub gazetteer: Vec<String>,
    /// Byte ranges of planted names and dates per document.
    pub planted: Vec<Vec<(Range<usize>, SpanKind)>>,
}

fn planted_date(rng: &mut impl Rng) -> String {
    let d = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap() + Duration::days(rng.gen_range(0..12_000));
    let (y, m, day) = (d.format("%Y"), d.format("%m"), d.format("%d"));
    let month = MONTHS[d.format("%m").to_string().parse::<usize>().unwrap() - 1];
    let dn: u32 = day.to_string().parse().unwrap();
    let mn: u32 = m.to_string().parse().unwrap();
    match rng.gen_range(0..6) {
        0 => format!("{day}.{m}.{y}"),
        1 => format!("{dn}.{mn}.{y}"),
        2 => format!("{day}.{m}.{}", d.format("%y")),
        3 => format!("{dn}. {month} {y}"),
        4 => format!("{month} {y}"),
        _ => d.format("%Y-%m-%d").to_string(),
    }
}

fn planted_name(rng: &mut impl Rng) -> String {
    let first = FIRST_NAMES.choose(rng).unwrap();
    let last = LAST_NAMES.choose(rng).unwrap();
    match rng.gen_range(0..4) {
        0 => format!("{first} {last}"),
        1 => format!("Dr. {last}"),
        2 => format!("Frau {last}"),
        _ => last.to_string(),
    }
}

/// Documents with filler text and planted names (from a gazetteer) and
/// dates in every supported format.
pub fn name_date_corpus(n: usize, seed: u64) -> NameDateCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gazetteer: Vec<String> = FIRST_NAMES
        .iter()
        .chain(LAST_NAMES)
        .map(|s| s.to_string())
        .collect();
    for f in FIRST_NAMES {
        for l in LAST_NAMES {
            gazetteer.push(format!("{f} {l}"));
        }
    }
    let mut docs = Vec::with_capacity(n);
    let mut planted = Vec::with_capacity(n);
    for i in 0..n {
        let mut text = String::new();
        let mut spans = Vec::new();
        for k in 0..rng.gen_range(8..40) {
            if k > 0 {
                text.push(' ');
            }
            match rng.gen_range(0..10) {
                0 => {
                    let d = planted_date(&mut rng);
                    spans.push((text.len()..text.len() + d.len(), SpanKind::Date));
                    text.push_str(&d);
                }
                1 => {
                    let name = planted_name(&mut rng);
                    let last_word = name.rsplit(' ').next().unwrap();
                    let name_start = if name.starts_with("Dr. ") || name.starts_with("Frau ") {
                        text.len() + name.len() - last_word.len()
                    } else {
                        text.len()
                    };
                    spans.push((name_start..text.len() + name.len(), SpanKind::Name));
                    text.push_str(&name);
                }
                2 => text.push_str(FILLER.choose(&mut rng).unwrap()),
                _ => text.push_str(FILLER.choose(&mut rng).unwrap()),
            }
            if rng.gen_bool(0.15) {
                text.push_str([".", ",", ";", ":"].choose(&mut rng).unwrap());
            }
        }
        docs.push(RawDocument::new(format!("n{i:05}"), SourceKind::Ehr, text));
        planted.push(spans);
    }
    NameDateCorpus {
        docs,
        gazetteer,
        planted,
    }
}

pub struct CodedCorpus {
    pub docs: Vec<RawDocument>,
    pub codes: Vec<CodeRecord>,
}

/// Surgery reports with patient ids, dates and code records. Every document
/// gets one frequent surgery code on its date plus optional rarer surgery
/// codes, non-surgical OPS codes, ICD codes, and codes from other dates.
pub fn coded_corpus(n_docs: usize, seed: u64) -> CodedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generator = ReportGenerator::new(3_000, 1.0, 20..60, seed ^ 0xc0de);
    let frequent = [
        "5-984", "5-469", "5-470", "5-511", "5-530", "5-812", "5-820", "5-893",
    ];
    let rare: Vec<String> = (0..40).map(|i| format!("5-{}", 100 + 17 * i)).collect();
    let rare_weights: Vec<f64> = (1..=rare.len()).map(|r| 1.0 / r as f64).collect();
    let rare_pick = WeightedIndex::new(rare_weights).unwrap();
    let other_ops = ["8-930", "1-632", "3-225", "8-800"];
    let icd = ["Z11", "I10.00", "E11.9", "C34.1", "J18.0"];

    let n_patients = (n_docs * 2 / 3).max(1);
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let mut docs = Vec::with_capacity(n_docs);
    let mut codes = Vec::new();
    let code = |p: &str, c: &str, sys: CodeSystem, d: NaiveDate| {
        CodeRecord::new(p, c, sys, d).expect("valid code")
    };
    for i in 0..n_docs {
        let patient = format!("P{:05}", rng.gen_range(0..n_patients));
        let date = start + Duration::days(rng.gen_range(0..2_900));
        let text = render_sentences(&generator.words(&mut rng), &mut rng);
        docs.push(
            RawDocument::new(
                format!("op{i:05}"),
                SourceKind::Other("surgery-report".into()),
                text,
            )
            .with_patient(patient.clone())
            .with_date(date),
        );
        codes.push(code(
            &patient,
            frequent.choose(&mut rng).unwrap(),
            CodeSystem::Ops,
            date,
        ));
        if rng.gen_bool(0.5) {
            codes.push(code(
                &patient,
                &rare[rare_pick.sample(&mut rng)],
                CodeSystem::Ops,
                date,
            ));
        }
        if rng.gen_bool(0.4) {
            codes.push(code(
                &patient,
                other_ops.choose(&mut rng).unwrap(),
                CodeSystem::Ops,
                date,
            ));
        }
        if rng.gen_bool(0.4) {
            codes.push(code(
                &patient,
                icd.choose(&mut rng).unwrap(),
                CodeSystem::Icd10,
                date,
            ));
        }
        if rng.gen_bool(0.3) {
            let other_day = date + Duration::days(rng.gen_range(1..400));
            codes.push(code(
                &patient,
                frequent.choose(&mut rng).unwrap(),
                CodeSystem::Ops,
                other_day,
            ));
        }
    }
    CodedCorpus { docs, codes }
}

const CLINICAL_MORPHEMES: &[&str] = &[
    "pneumo",
    "thorax",
    "kardio",
    "myo",
    "pathie",
    "itis",
    "ektomie",
    "skopie",
    "gastro",
    "entero",
    "hepato",
    "nephro",
    "angio",
    "graphie",
    "tomie",
    "plastik",
    "zyste",
    "lithiasis",
    "tumor",
    "karzinom",
    "metastase",
    "pleura",
    "erguss",
    "infiltrat",
    "arterie",
    "stenose",
    "insuffizienz",
    "sklerose",
    "neuro",
    "onko",
];
const GENERAL_MORPHEMES: &[&str] = &[
    "haus", "garten", "wetter", "schule", "bahn", "hof", "straße", "fahrt", "markt", "platz",
    "wald", "berg", "stadt", "fest", "spiel", "zeit", "buch", "laden", "brot", "wasser", "feld",
    "weg", "licht", "kraft", "tisch", "stuhl", "werk", "zeug", "land", "see",
];

fn compound_sentences(morphemes: &[&str], n_sentences: usize, rng: &mut impl Rng) -> Vec<String> {
    let weights: Vec<f64> = (1..=morphemes.len())
        .map(|r| (r as f64).powf(-0.7))
        .collect();
    let pick = WeightedIndex::new(weights).unwrap();
    (0..n_sentences)
        .map(|_| {
            let words: Vec<String> = (0..rng.gen_range(5..15))
                .map(|_| {
                    let parts = rng.gen_range(1..=3);
                    let w: String = (0..parts).map(|_| morphemes[pick.sample(rng)]).collect();
                    let mut cs = w.chars();
                    let first = cs.next().unwrap();
                    first.to_uppercase().chain(cs).collect()
                })
                .collect();
            words.join(" ") + "."
        })
        .collect()
}

/// Sentences of compounds built from clinical morphemes.
pub fn clinical_corpus(n_sentences: usize, seed: u64) -> Vec<String> {
    compound_sentences(
        CLINICAL_MORPHEMES,
        n_sentences,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

/// Sentences of compounds built from everyday morphemes.
pub fn general_corpus(n_sentences: usize, seed: u64) -> Vec<String> {
    compound_sentences(
        GENERAL_MORPHEMES,
        n_sentences,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

/// A saturating curve `plateau * (1 - exp(-rate * step))` at steps 1..=n.
pub fn learning_curve(plateau: f64, rate: f64, n_steps: u64) -> Vec<(u64, f64)> {
    (1..=n_steps)
        .map(|s| (s, plateau * (1.0 - (-rate * s as f64).exp())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = near_duplicate_corpus(200, 0.2, 1);
        let b = near_duplicate_corpus(200, 0.2, 1);
        assert_eq!(a.docs, b.docs);
        assert_eq!(a.n_planted, 40);
        assert_eq!(a.original_of.iter().filter(|o| o.is_some()).count(), 40);
        assert_eq!(name_date_corpus(20, 4).docs, name_date_corpus(20, 4).docs);
        assert_eq!(coded_corpus(30, 2).codes, coded_corpus(30, 2).codes);
    }

    #[test]
    fn planted_spans_point_at_names_and_dates() {
        let c = name_date_corpus(50, 9);
        for (doc, spans) in c.docs.iter().zip(&c.planted) {
            for (r, kind) in spans {
                let s = &doc.text[r.clone()];
                match kind {
                    SpanKind::Name => assert!(c.gazetteer.iter().any(|g| g == s), "{s}"),
                    SpanKind::Date => assert!(s.chars().any(|ch| ch.is_ascii_digit()), "{s}"),
                }
            }
        }
    }

    #[test]
    fn curve_saturates() {
        let c = learning_curve(0.8, 0.5, 20);
        assert_eq!(c.len(), 20);
        assert!(c.windows(2).all(|w| w[1].1 > w[0].1));
        assert!((c[19].1 - 0.8).abs() < 1e-3);
    }
}
