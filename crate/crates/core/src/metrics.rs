//! Evaluation metrics: AUROC, precision, recall and F1 per class, with
//! macro and micro aggregates, at document level (multi-label) and token
//! level (BIO-tagged NER).
//!
//! Fraction-valued primitives ([`auroc`], [`prf`]) return values in [0, 1];
//! reports are percent-scaled and rendered with two decimals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{bio_class, LabeledExample, TokenLabeledExample};
use crate::{Error, Result};

/// Area under the ROC curve via the Mann-Whitney statistic, with tied
/// scores counting one half.
///
/// Fails with [`Error::UndefinedMetric`] unless both classes are present.
pub fn auroc(scores: &[f64], truths: &[bool]) -> Result<f64> {
    if scores.len() != truths.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores vs {} truth values",
            scores.len(),
            truths.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = truths.iter().filter(|&&t| t).count() as u128;
    let n_neg = truths.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs positive and negative examples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the Mann-Whitney U, kept integral until the final division.
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if truths[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, truth: bool) {
        match (predicted, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    /// Whether the class occurs at all, in gold or in predictions.
    pub fn is_active(&self) -> bool {
        self.tp + self.fp + self.fn_ > 0
    }

    pub fn prf(&self) -> Prf {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

impl std::ops::AddAssign for Confusion {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// Precision, recall and F1 as fractions. Zero denominators give 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn prf(predictions: &[bool], truths: &[bool]) -> Result<Prf> {
    Ok(confusion(predictions, truths)?.prf())
}

pub fn confusion(predictions: &[bool], truths: &[bool]) -> Result<Confusion> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions vs {} truth values",
            predictions.len(),
            truths.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        c.add(p, t);
    }
    Ok(c)
}

/// Per-class scores and truth values, one parallel pair of sequences per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPredictions {
    classes: Vec<String>,
    scores: Vec<Vec<f64>>,
    truths: Vec<Vec<bool>>,
}

impl ScoredPredictions {
    pub fn new(
        classes: Vec<String>,
        scores: Vec<Vec<f64>>,
        truths: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidInput("at least one class is required".into()));
        }
        if scores.len() != classes.len() || truths.len() != classes.len() {
            return Err(Error::LengthMismatch(
                "one score and truth sequence per class".into(),
            ));
        }
        for (c, (s, t)) in classes.iter().zip(scores.iter().zip(&truths)) {
            if s.len() != t.len() {
                return Err(Error::LengthMismatch(format!(
                    "class {c}: {} scores vs {} truth values",
                    s.len(),
                    t.len()
                )));
            }
        }
        Ok(ScoredPredictions {
            classes,
            scores,
            truths,
        })
    }

    /// Joins gold examples with predictions by id. Every gold example needs
    /// a prediction carrying a score for every class.
    pub fn from_examples(
        classes: &[String],
        gold: &[LabeledExample],
        predictions: &[ClassificationPrediction],
    ) -> Result<Self> {
        let by_id: BTreeMap<&str, &ClassificationPrediction> =
            predictions.iter().map(|p| (p.id.as_str(), p)).collect();
        let mut scores = vec![Vec::with_capacity(gold.len()); classes.len()];
        let mut truths = vec![Vec::with_capacity(gold.len()); classes.len()];
        for ex in gold {
            let pred = by_id
                .get(ex.doc_id.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("no prediction for `{}`", ex.doc_id)))?;
            for (k, class) in classes.iter().enumerate() {
                let s = pred.scores.get(class).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "prediction `{}` has no score for `{class}`",
                        ex.doc_id
                    ))
                })?;
                scores[k].push(*s);
                truths[k].push(ex.labels.contains(class));
            }
        }
        Self::new(classes.to_vec(), scores, truths)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }
}

/// Per-class metrics on the percent scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// `None` when undefined (single-class truth or no scores).
    pub auroc: Option<f64>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Number of positive truth instances.
    pub support: u64,
    #[serde(flatten)]
    pub confusion: Confusion,
}

impl ClassMetrics {
    fn from_confusion(c: Confusion, auroc: Option<f64>) -> Self {
        let prf = c.prf();
        ClassMetrics {
            auroc: auroc.map(|a| 100.0 * a),
            f1: 100.0 * prf.f1,
            precision: 100.0 * prf.precision,
            recall: 100.0 * prf.recall,
            support: c.tp + c.fn_,
            confusion: c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    #[serde(flatten)]
    pub metrics: ClassMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub auroc: Option<f64>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Document,
    Token,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub level: Level,
    pub per_class: Vec<ClassRow>,
    /// Unweighted mean over classes with defined values.
    #[serde(rename = "macro")]
    pub macro_avg: Aggregate,
    /// Global token-level aggregate (NER only).
    #[serde(rename = "micro", skip_serializing_if = "Option::is_none")]
    pub micro_avg: Option<Aggregate>,
    /// Whether AUROC was computed at all (needs scores).
    pub has_auroc: bool,
    pub excluded_from_macro_auroc: Vec<String>,
    pub excluded_from_macro_prf: Vec<String>,
}

impl MetricReport {
    fn assemble(
        level: Level,
        per_class: Vec<ClassRow>,
        has_auroc: bool,
        micro: Option<Confusion>,
    ) -> Self {
        let mut excluded_auroc = Vec::new();
        let mut excluded_prf = Vec::new();
        let mut aurocs = Vec::new();
        let (mut f1, mut p, mut r, mut n) = (0.0, 0.0, 0.0, 0usize);
        for row in &per_class {
            match row.metrics.auroc {
                Some(a) => aurocs.push(a),
                None if has_auroc => excluded_auroc.push(row.class.clone()),
                None => {}
            }
            if row.metrics.confusion.is_active() {
                f1 += row.metrics.f1;
                p += row.metrics.precision;
                r += row.metrics.recall;
                n += 1;
            } else {
                excluded_prf.push(row.class.clone());
            }
        }
        let mean = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
        let macro_avg = Aggregate {
            auroc: (!aurocs.is_empty()).then(|| aurocs.iter().sum::<f64>() / aurocs.len() as f64),
            f1: mean(f1),
            precision: mean(p),
            recall: mean(r),
        };
        let micro_avg = micro.map(|c| {
            let prf = c.prf();
            Aggregate {
                auroc: None,
                f1: 100.0 * prf.f1,
                precision: 100.0 * prf.precision,
                recall: 100.0 * prf.recall,
            }
        });
        MetricReport {
            level,
            per_class,
            macro_avg,
            micro_avg,
            has_auroc,
            excluded_from_macro_auroc: excluded_auroc,
            excluded_from_macro_prf: excluded_prf,
        }
    }

    pub fn get(&self, class: &str) -> Option<&ClassMetrics> {
        self.per_class
            .iter()
            .find(|r| r.class == class)
            .map(|r| &r.metrics)
    }

    /// Table with columns Class, AUROC, F1, Precision, Recall (AUROC only
    /// when scores were available), followed by Macro and Micro rows.
    /// Undefined values print as 0.0.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(if self.has_auroc {
            "Class\tAUROC\tF1\tPrecision\tRecall\n"
        } else {
            "Class\tF1\tPrecision\tRecall\n"
        });
        let mut row = |name: &str, auroc: Option<f64>, f1: f64, p: f64, r: f64| {
            out.push_str(name);
            if self.has_auroc {
                let _ = write!(out, "\t{}", format_percent(auroc.unwrap_or(0.0)));
            }
            let _ = writeln!(
                out,
                "\t{}\t{}\t{}",
                format_percent(f1),
                format_percent(p),
                format_percent(r)
            );
        };
        for c in &self.per_class {
            let m = &c.metrics;
            row(&c.class, m.auroc, m.f1, m.precision, m.recall);
        }
        let m = &self.macro_avg;
        row("Macro", m.auroc, m.f1, m.precision, m.recall);
        if let Some(m) = &self.micro_avg {
            row("Micro", m.auroc, m.f1, m.precision, m.recall);
        }
        out
    }
}

/// Two decimals with trailing zeros trimmed down to one: 97.1, 100.0, 66.67.
pub fn format_percent(v: f64) -> String {
    let s = format!("{v:.2}");
    match s.strip_suffix('0') {
        Some(t) if !t.ends_with('.') => t.to_string(),
        _ => s,
    }
}

/// Per-class AUROC from scores, P/R/F1 from scores thresholded at
/// `threshold` (inclusive).
pub fn multilabel_report(scored: &ScoredPredictions, threshold: f64) -> Result<MetricReport> {
    let rows: Vec<Result<ClassRow>> = scored
        .classes
        .par_iter()
        .zip(scored.scores.par_iter().zip(&scored.truths))
        .map(|(class, (scores, truths))| {
            let auroc = match auroc(scores, truths) {
                Ok(a) => Some(a),
                Err(Error::UndefinedMetric(_)) => None,
                Err(e) => return Err(e),
            };
            let mut c = Confusion::default();
            for (&s, &t) in scores.iter().zip(truths) {
                c.add(s >= threshold, t);
            }
            Ok(ClassRow {
                class: class.clone(),
                metrics: ClassMetrics::from_confusion(c, auroc),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::assemble(Level::Document, rows, true, None))
}

/// Token-level scores per class from BIO tags (B-X and I-X both count as X,
/// O is never a positive class).
///
/// `classes` fixes the reported rows; `None` uses every class seen in gold
/// or predictions. `token_scores`, if given, holds one class→score map per
/// token and enables per-class token AUROC.
pub fn ner_token_report(
    gold: &[TokenLabeledExample],
    predicted: &[TokenLabeledExample],
    classes: Option<&[String]>,
    token_scores: Option<&[Vec<BTreeMap<String, f64>>]>,
) -> Result<MetricReport> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch(format!(
            "{} gold documents vs {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    if let Some(s) = token_scores {
        if s.len() != gold.len() {
            return Err(Error::LengthMismatch(
                "one score sequence per document".into(),
            ));
        }
    }
    let mut pairs: Vec<(Option<&str>, Option<&str>)> = Vec::new();
    for (g, p) in gold.iter().zip(predicted) {
        if g.doc_id != p.doc_id || g.tags.len() != p.tags.len() {
            return Err(Error::LengthMismatch(format!(
                "document `{}` ({} tags) vs `{}` ({} tags)",
                g.doc_id,
                g.tags.len(),
                p.doc_id,
                p.tags.len()
            )));
        }
        for (gt, pt) in g.tags.iter().zip(&p.tags) {
            pairs.push((bio_class(gt)?, bio_class(pt)?));
        }
    }
    let classes: Vec<String> = match classes {
        Some(c) => c.to_vec(),
        None => pairs
            .iter()
            .flat_map(|&(g, p)| [g, p])
            .flatten()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(String::from)
            .collect(),
    };
    let flat_scores: Option<Vec<&BTreeMap<String, f64>>> = match token_scores {
        Some(docs) => {
            let flat: Vec<_> = docs.iter().flatten().collect();
            if flat.len() != pairs.len() {
                return Err(Error::LengthMismatch("one score map per token".into()));
            }
            Some(flat)
        }
        None => None,
    };

    let rows: Vec<Result<ClassRow>> = classes
        .par_iter()
        .map(|class| {
            let mut c = Confusion::default();
            for &(g, p) in &pairs {
                c.add(p == Some(class.as_str()), g == Some(class.as_str()));
            }
            let auroc = match &flat_scores {
                Some(maps) => {
                    let scores: Vec<f64> = maps
                        .iter()
                        .map(|m| m.get(class).copied().unwrap_or(0.0))
                        .collect();
                    let truths: Vec<bool> = pairs
                        .iter()
                        .map(|&(g, _)| g == Some(class.as_str()))
                        .collect();
                    match auroc(&scores, &truths) {
                        Ok(a) => Some(a),
                        Err(Error::UndefinedMetric(_)) => None,
                        Err(e) => return Err(e),
                    }
                }
                None => None,
            };
            Ok(ClassRow {
                class: class.clone(),
                metrics: ClassMetrics::from_confusion(c, auroc),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut micro = Confusion::default();
    for r in &rows {
        micro += r.metrics.confusion;
    }
    Ok(MetricReport::assemble(
        Level::Token,
        rows,
        flat_scores.is_some(),
        Some(micro),
    ))
}

/// One line of a classification predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationPrediction {
    pub id: String,
    pub scores: BTreeMap<String, f64>,
}

/// One line of an NER predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerPrediction {
    pub id: String,
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<BTreeMap<String, f64>>>,
}

/// Reads a JSONL file of `T`, skipping blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::InvalidInput(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}
