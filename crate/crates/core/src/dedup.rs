//! Bag-of-words cosine near-duplicate removal.
//!
//! [`dedup_exact`] compares every eligible document against every kept one
//! and serves as the reference. [`dedup_indexed`] produces the same report
//! using an inverted index with prefix filtering: each vector indexes only
//! the suffix of its terms (ordered from most to least frequent corpus-wide)
//! left after removing the longest prefix whose norm stays below
//! `threshold * norm`. A pair reaching the threshold must share an indexed
//! term, so candidate generation misses nothing and every candidate is
//! verified with the true cosine.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::RawDocument;
use crate::{Error, Result};

/// How document text becomes terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig { lowercase: true }
    }
}

impl AnalyzerConfig {
    /// Splits on non-alphanumeric characters.
    pub fn terms<'a>(&self, text: &'a str) -> impl Iterator<Item = String> + 'a {
        let lowercase = self.lowercase;
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(move |t| {
                if lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
    }
}

/// Sparse term-count vector with cached norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowVector {
    doc_id: String,
    /// Sorted by term, counts > 0.
    counts: Vec<(String, u32)>,
    sum_sq: u64,
    norm: f64,
}

impl BowVector {
    /// Builds a vector from raw term occurrences.
    pub fn from_terms<I, S>(doc_id: impl Into<String>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map: HashMap<String, u32> = HashMap::new();
        for t in terms {
            *map.entry(t.into()).or_default() += 1;
        }
        Self::from_counts(doc_id, map)
    }

    /// Builds a vector from term counts; zero counts are dropped.
    pub fn from_counts<I, S>(doc_id: impl Into<String>, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let doc_id = doc_id.into();
        let mut merged: HashMap<String, u32> = HashMap::new();
        for (t, c) in counts {
            if c > 0 {
                *merged.entry(t.into()).or_default() += c;
            }
        }
        if merged.is_empty() {
            return Err(Error::EmptyVector { doc_id });
        }
        let mut counts: Vec<(String, u32)> = merged.into_iter().collect();
        counts.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let sum_sq = counts
            .iter()
            .map(|&(_, c)| u64::from(c) * u64::from(c))
            .sum::<u64>();
        Ok(BowVector {
            doc_id,
            counts,
            sum_sq,
            norm: (sum_sq as f64).sqrt(),
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn counts(&self) -> &[(String, u32)] {
        &self.counts
    }

    pub fn get(&self, term: &str) -> u32 {
        self.counts
            .binary_search_by(|(t, _)| t.as_str().cmp(term))
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Sum of squared counts (the squared norm, exact).
    pub fn sum_sq(&self) -> u64 {
        self.sum_sq
    }

    /// Total number of term occurrences.
    pub fn n_terms(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| u64::from(c)).sum()
    }
}

pub fn vectorize(
    doc_id: impl Into<String>,
    text: &str,
    analyzer: &AnalyzerConfig,
) -> Result<BowVector> {
    BowVector::from_terms(doc_id, analyzer.terms(text))
}

fn dot(a: &BowVector, b: &BowVector) -> u64 {
    let (mut i, mut j, mut acc) = (0, 0, 0u64);
    let (x, y) = (&a.counts, &b.counts);
    while i < x.len() && j < y.len() {
        match x[i].0.cmp(&y[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += u64::from(x[i].1) * u64::from(y[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// `dot / sqrt(sum_sq_a * sum_sq_b)`, evaluated identically by every caller.
/// Parallel vectors give exactly 1.0 and the result is symmetric.
fn cosine_from_parts(dot: u64, sum_sq_a: u64, sum_sq_b: u64) -> f64 {
    let denom = ((u128::from(sum_sq_a) * u128::from(sum_sq_b)) as f64).sqrt();
    (dot as f64 / denom).min(1.0)
}

pub fn cosine_similarity(a: &BowVector, b: &BowVector) -> Result<f64> {
    for v in [a, b] {
        if v.sum_sq == 0 {
            return Err(Error::ZeroNorm {
                doc_id: v.doc_id.clone(),
            });
        }
    }
    Ok(cosine_from_parts(dot(a, b), a.sum_sq, b.sum_sq))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// Duplicate iff similarity > threshold.
    #[default]
    StrictGreater,
    /// Duplicate iff similarity >= threshold.
    GreaterOrEqual,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupMode {
    /// Keep the first document of each group of near-duplicates.
    #[default]
    Representative,
    /// Drop every document that has any near-duplicate.
    LiteralDrop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub threshold: f64,
    pub comparison: Comparison,
    pub mode: DedupMode,
    /// Only documents with at most this many term occurrences take part;
    /// longer ones are kept unexamined.
    pub max_doc_words: Option<u64>,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            threshold: 0.75,
            comparison: Comparison::StrictGreater,
            mode: DedupMode::Representative,
            max_doc_words: Some(128),
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "threshold {} not in (0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }

    pub fn is_duplicate(&self, similarity: f64) -> bool {
        match self.comparison {
            Comparison::StrictGreater => similarity > self.threshold,
            Comparison::GreaterOrEqual => similarity >= self.threshold,
        }
    }

    fn eligible(&self, v: &BowVector) -> bool {
        self.max_doc_words.is_none_or(|max| v.n_terms() <= max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub representative: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub mode: DedupMode,
    pub threshold: f64,
    pub comparison: Comparison,
    pub n_input: usize,
    pub n_kept: usize,
    pub n_removed: usize,
    /// Kept document ids in input order.
    pub kept: Vec<String>,
    pub clusters: Vec<Cluster>,
    /// Number of cosine verifications performed.
    pub pairs_examined: u64,
}

impl DedupReport {
    /// Equality ignoring `pairs_examined`, which depends on the algorithm.
    pub fn same_outcome(&self, other: &DedupReport) -> bool {
        let mut a = self.clone();
        a.pairs_examined = other.pairs_examined;
        a == *other
    }
}

/// Either an assignment per document (representative mode) or the duplicate
/// pairs (literal mode), turned into a report.
enum Outcome {
    Representative { assigned: Vec<Option<usize>> },
    Literal { pairs: Vec<(usize, usize)> },
}

fn build_report(
    vectors: &[BowVector],
    cfg: &DedupConfig,
    outcome: Outcome,
    pairs_examined: u64,
) -> DedupReport {
    let n = vectors.len();
    let mut removed = vec![false; n];
    let mut clusters = Vec::new();
    match outcome {
        Outcome::Representative { assigned } => {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (i, rep) in assigned.iter().enumerate() {
                if let Some(rep) = rep {
                    members[*rep].push(i);
                    removed[i] = true;
                }
            }
            for (rep, m) in members.into_iter().enumerate() {
                if !m.is_empty() {
                    clusters.push(Cluster {
                        representative: vectors[rep].doc_id.clone(),
                        members: m.into_iter().map(|i| vectors[i].doc_id.clone()).collect(),
                    });
                }
            }
        }
        Outcome::Literal { pairs } => {
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(p: &mut [usize], mut x: usize) -> usize {
                while p[x] != x {
                    p[x] = p[p[x]];
                    x = p[x];
                }
                x
            }
            for (a, b) in pairs {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                    parent[hi] = lo;
                }
            }
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
            for i in 0..n {
                let r = find(&mut parent, i);
                groups[r].push(i);
            }
            for g in groups.into_iter().filter(|g| g.len() > 1) {
                for &i in &g {
                    removed[i] = true;
                }
                clusters.push(Cluster {
                    representative: vectors[g[0]].doc_id.clone(),
                    members: g[1..].iter().map(|&i| vectors[i].doc_id.clone()).collect(),
                });
            }
        }
    }
    let kept: Vec<String> = vectors
        .iter()
        .zip(&removed)
        .filter(|(_, r)| !**r)
        .map(|(v, _)| v.doc_id.clone())
        .collect();
    DedupReport {
        mode: cfg.mode,
        threshold: cfg.threshold,
        comparison: cfg.comparison,
        n_input: n,
        n_kept: kept.len(),
        n_removed: n - kept.len(),
        kept,
        clusters,
        pairs_examined,
    }
}

/// Quadratic reference implementation.
///
/// Representative mode scans in input order and keeps a document iff no
/// already-kept document is a near-duplicate of it; otherwise it joins the
/// cluster of the first such kept document. Literal mode removes every
/// document with any near-duplicate.
pub fn dedup_exact(vectors: &[BowVector], cfg: &DedupConfig) -> Result<DedupReport> {
    cfg.validate()?;
    let eligible: Vec<bool> = vectors.iter().map(|v| cfg.eligible(v)).collect();
    let mut pairs_examined = 0u64;
    let outcome = match cfg.mode {
        DedupMode::Representative => {
            let mut kept: Vec<usize> = Vec::new();
            let mut assigned = vec![None; vectors.len()];
            for (i, v) in vectors.iter().enumerate() {
                if !eligible[i] {
                    continue;
                }
                let mut rep = None;
                for &k in &kept {
                    pairs_examined += 1;
                    if cfg.is_duplicate(cosine_similarity(v, &vectors[k])?) {
                        rep = Some(k);
                        break;
                    }
                }
                match rep {
                    Some(k) => assigned[i] = Some(k),
                    None => kept.push(i),
                }
            }
            Outcome::Representative { assigned }
        }
        DedupMode::LiteralDrop => {
            let mut pairs = Vec::new();
            for i in 0..vectors.len() {
                if !eligible[i] {
                    continue;
                }
                for j in (0..i).filter(|&j| eligible[j]) {
                    pairs_examined += 1;
                    if cfg.is_duplicate(cosine_similarity(&vectors[i], &vectors[j])?) {
                        pairs.push((j, i));
                    }
                }
            }
            Outcome::Literal { pairs }
        }
    };
    Ok(build_report(vectors, cfg, outcome, pairs_examined))
}

/// A vector re-keyed by global term rank (0 = most frequent term).
struct RankedVector {
    /// Sorted by rank.
    terms: Vec<(u32, u32)>,
    /// Number of leading terms left out of the index.
    prefix_len: usize,
}

fn ranked_dot(a: &RankedVector, b: &RankedVector) -> u64 {
    let (mut i, mut j, mut acc) = (0, 0, 0u64);
    let (x, y) = (&a.terms, &b.terms);
    while i < x.len() && j < y.len() {
        match x[i].0.cmp(&y[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += u64::from(x[i].1) * u64::from(y[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

fn rank_vectors(
    vectors: &[BowVector],
    eligible: &[bool],
    threshold: f64,
) -> Vec<Option<RankedVector>> {
    let mut df: HashMap<&str, u32> = HashMap::new();
    for (v, _) in vectors.iter().zip(eligible).filter(|(_, e)| **e) {
        for (t, _) in &v.counts {
            *df.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut order: Vec<(&str, u32)> = df.into_iter().collect();
    order.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let rank: HashMap<&str, u32> = order
        .iter()
        .enumerate()
        .map(|(r, (t, _))| (*t, r as u32))
        .collect();

    // Shrinking the bound slightly only enlarges the indexed suffix.
    let bound = threshold * threshold * (1.0 - 1e-9);
    vectors
        .iter()
        .zip(eligible)
        .map(|(v, &e)| {
            if !e {
                return None;
            }
            let mut terms: Vec<(u32, u32)> = v
                .counts
                .iter()
                .map(|(t, c)| (rank[t.as_str()], *c))
                .collect();
            terms.sort_unstable();
            let limit = bound * v.sum_sq as f64;
            let mut acc = 0u64;
            let mut prefix_len = 0;
            for &(_, c) in &terms {
                let next = acc + u64::from(c) * u64::from(c);
                if (next as f64) < limit {
                    acc = next;
                    prefix_len += 1;
                } else {
                    break;
                }
            }
            Some(RankedVector { terms, prefix_len })
        })
        .collect()
}

struct PrefixIndex {
    postings: HashMap<u32, Vec<u32>>,
    stamp: Vec<u32>,
    generation: u32,
}

impl PrefixIndex {
    fn new(n: usize) -> Self {
        PrefixIndex {
            postings: HashMap::new(),
            stamp: vec![0; n],
            generation: 0,
        }
    }

    fn insert(&mut self, doc: usize, v: &RankedVector) {
        for &(t, _) in &v.terms[v.prefix_len..] {
            self.postings.entry(t).or_default().push(doc as u32);
        }
    }

    /// Indexed documents sharing an indexed term with the indexed part of
    /// `v`, ascending. Two vectors above the threshold always share a term
    /// beyond both prefixes: below the later of the two prefix boundaries the
    /// dot product is bounded by that vector's prefix norm.
    fn candidates(&mut self, v: &RankedVector) -> Vec<usize> {
        self.generation += 1;
        let mut out = Vec::new();
        for (t, _) in &v.terms[v.prefix_len..] {
            if let Some(list) = self.postings.get(t) {
                for &d in list {
                    let d = d as usize;
                    if self.stamp[d] != self.generation {
                        self.stamp[d] = self.generation;
                        out.push(d);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Index-accelerated deduplication with output identical to [`dedup_exact`]
/// (up to `pairs_examined`).
pub fn dedup_indexed(vectors: &[BowVector], cfg: &DedupConfig) -> Result<DedupReport> {
    cfg.validate()?;
    let eligible: Vec<bool> = vectors.iter().map(|v| cfg.eligible(v)).collect();
    let ranked = rank_vectors(vectors, &eligible, cfg.threshold);
    let mut index = PrefixIndex::new(vectors.len());
    let mut pairs_examined = 0u64;
    let similar = |i: usize, j: usize, a: &RankedVector, b: &RankedVector| {
        let sim = cosine_from_parts(ranked_dot(a, b), vectors[i].sum_sq, vectors[j].sum_sq);
        cfg.is_duplicate(sim)
    };

    let outcome = match cfg.mode {
        DedupMode::Representative => {
            let mut assigned = vec![None; vectors.len()];
            for (i, rv) in ranked.iter().enumerate() {
                let Some(rv) = rv else { continue };
                let mut rep = None;
                for k in index.candidates(rv) {
                    pairs_examined += 1;
                    let other = ranked[k].as_ref().expect("indexed documents are eligible");
                    if similar(i, k, rv, other) {
                        rep = Some(k);
                        break;
                    }
                }
                match rep {
                    Some(k) => assigned[i] = Some(k),
                    None => index.insert(i, rv),
                }
            }
            Outcome::Representative { assigned }
        }
        DedupMode::LiteralDrop => {
            let mut pairs = Vec::new();
            for (i, rv) in ranked.iter().enumerate() {
                let Some(rv) = rv else { continue };
                for k in index.candidates(rv) {
                    pairs_examined += 1;
                    let other = ranked[k].as_ref().expect("indexed documents are eligible");
                    if similar(i, k, rv, other) {
                        pairs.push((k, i));
                    }
                }
                index.insert(i, rv);
            }
            Outcome::Literal { pairs }
        }
    };
    Ok(build_report(vectors, cfg, outcome, pairs_examined))
}

/// Deduplicates documents within each source separately with
/// [`dedup_indexed`]. Documents without any term are kept unexamined.
/// Returns the kept documents in input order and a report per source.
pub fn dedup_documents<D>(
    docs: Vec<D>,
    analyzer: &AnalyzerConfig,
    cfg: &DedupConfig,
) -> Result<(Vec<D>, BTreeMap<String, DedupReport>)>
where
    D: AsRef<RawDocument> + Send + Sync,
{
    cfg.validate()?;
    let vectors: Vec<Option<BowVector>> = docs
        .par_iter()
        .map(|d| {
            let d = d.as_ref();
            match vectorize(d.id.clone(), &d.text, analyzer) {
                Ok(v) => Ok(Some(v)),
                Err(Error::EmptyVector { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut by_source: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        by_source
            .entry(d.as_ref().source.as_str().to_string())
            .or_default()
            .push(i);
    }
    let mut removed = vec![false; docs.len()];
    let mut reports = BTreeMap::new();
    for (source, idx) in by_source {
        let members: Vec<usize> = idx.into_iter().filter(|&i| vectors[i].is_some()).collect();
        let group: Vec<BowVector> = members
            .iter()
            .map(|&i| vectors[i].clone().expect("filtered"))
            .collect();
        let report = dedup_indexed(&group, cfg)?;
        let kept: std::collections::HashSet<&str> =
            report.kept.iter().map(String::as_str).collect();
        for (&i, v) in members.iter().zip(&group) {
            removed[i] = !kept.contains(v.doc_id());
        }
        reports.insert(source, report);
    }
    let kept = docs
        .into_iter()
        .zip(removed)
        .filter(|(_, r)| !r)
        .map(|(d, _)| d)
        .collect();
    Ok((kept, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bow(id: &str, terms: &[(&str, u32)]) -> BowVector {
        BowVector::from_counts(id, terms.iter().map(|&(t, c)| (t, c))).unwrap()
    }

    #[test]
    fn vectorize_counts_and_norm() {
        let v = vectorize("d", "Herz Herz Lunge", &AnalyzerConfig::default()).unwrap();
        assert_eq!(v.get("herz"), 2);
        assert_eq!(v.get("lunge"), 1);
        assert_eq!(v.norm(), 5f64.sqrt());
        let v = vectorize("d", "A a", &AnalyzerConfig::default()).unwrap();
        assert_eq!(v.counts(), &[("a".to_string(), 2)]);
        assert!(matches!(
            vectorize("d", "!!!", &AnalyzerConfig::default()),
            Err(Error::EmptyVector { .. })
        ));
    }

    #[test]
    fn cosine_examples() {
        let a = bow("a", &[("a", 1), ("b", 1)]);
        let c = bow("c", &[("a", 1), ("c", 1)]);
        assert_eq!(cosine_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&a, &bow("x", &[("x", 3)])).unwrap(), 0.0);
        let expected = 1.0 / (2f64.sqrt() * 2f64.sqrt());
        assert!((cosine_similarity(&a, &c).unwrap() - expected).abs() < 1e-15);
        let scaled = bow("s", &[("a", 3), ("b", 3)]);
        assert_eq!(cosine_similarity(&a, &scaled).unwrap(), 1.0);
    }

    #[test]
    fn identical_documents_collapse_to_one() {
        let vs: Vec<_> = (0..5)
            .map(|i| bow(&format!("d{i}"), &[("x", 2), ("y", 1)]))
            .collect();
        let r = dedup_exact(&vs, &DedupConfig::default()).unwrap();
        assert_eq!(r.n_kept, 1);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].members.len(), 4);
        assert_eq!(
            dedup_indexed(&vs, &DedupConfig::default()).unwrap().kept,
            r.kept
        );
    }

    fn three_doc_fixture() -> Vec<BowVector> {
        // sim(A, A') = 9 / sqrt(10 * 9) ≈ 0.949, B disjoint from both.
        vec![
            bow("A", &[("a", 3), ("b", 1)]),
            bow("A'", &[("a", 3)]),
            bow("B", &[("c", 1), ("d", 1)]),
        ]
    }

    #[test]
    fn representative_keeps_first_of_pair() {
        let vs = three_doc_fixture();
        let r = dedup_exact(&vs, &DedupConfig::default()).unwrap();
        assert_eq!(r.kept, vec!["A", "B"]);
        assert_eq!(
            r.clusters,
            vec![Cluster {
                representative: "A".into(),
                members: vec!["A'".into()]
            }]
        );
        assert_eq!(r.n_input, r.n_kept + r.n_removed);
    }

    #[test]
    fn literal_drop_removes_both() {
        let vs = three_doc_fixture();
        let cfg = DedupConfig {
            mode: DedupMode::LiteralDrop,
            ..DedupConfig::default()
        };
        let r = dedup_exact(&vs, &cfg).unwrap();
        assert_eq!(r.kept, vec!["B"]);
        assert_eq!(r.n_removed, 2);
        assert!(dedup_indexed(&vs, &cfg).unwrap().same_outcome(&r));
    }

    #[test]
    fn comparison_boundary() {
        // cosine exactly 0.5
        let vs = vec![
            bow("a", &[("a", 1), ("b", 1)]),
            bow("c", &[("a", 1), ("c", 1)]),
        ];
        let strict = DedupConfig {
            threshold: 0.5,
            ..DedupConfig::default()
        };
        assert_eq!(dedup_exact(&vs, &strict).unwrap().n_removed, 0);
        let inclusive = DedupConfig {
            comparison: Comparison::GreaterOrEqual,
            ..strict
        };
        assert_eq!(dedup_exact(&vs, &inclusive).unwrap().n_removed, 1);
        assert_eq!(dedup_indexed(&vs, &inclusive).unwrap().n_removed, 1);
    }

    #[test]
    fn frequent_only_overlap_is_still_found() {
        // Overlap only through a term present in every document.
        let mut vs: Vec<_> = (0..6)
            .map(|i| bow(&format!("n{i}"), &[("der", 1), (&format!("u{i}"), 4)]))
            .collect();
        vs.push(bow("p", &[("der", 3), ("x", 1)]));
        vs.push(bow("q", &[("der", 3), ("y", 1)]));
        for mode in [DedupMode::Representative, DedupMode::LiteralDrop] {
            let cfg = DedupConfig {
                mode,
                ..DedupConfig::default()
            };
            let exact = dedup_exact(&vs, &cfg).unwrap();
            assert_eq!(
                exact.n_removed,
                if mode == DedupMode::Representative {
                    1
                } else {
                    2
                }
            );
            assert!(dedup_indexed(&vs, &cfg).unwrap().same_outcome(&exact));
        }
    }

    #[test]
    fn disjoint_vocabularies_examine_nothing() {
        let vs: Vec<_> = (0..20)
            .map(|i| {
                bow(
                    &format!("d{i}"),
                    &[(&format!("t{i}"), 1), (&format!("s{i}"), 2)],
                )
            })
            .collect();
        let r = dedup_indexed(&vs, &DedupConfig::default()).unwrap();
        assert_eq!(r.n_removed, 0);
        assert_eq!(r.pairs_examined, 0);
    }

    #[test]
    fn long_documents_bypass_dedup() {
        let long: Vec<(String, u32)> = (0..200).map(|i| (format!("w{i}"), 1)).collect();
        let vs = vec![
            BowVector::from_counts("l1", long.clone()).unwrap(),
            BowVector::from_counts("l2", long).unwrap(),
        ];
        let r = dedup_exact(&vs, &DedupConfig::default()).unwrap();
        assert_eq!(r.n_kept, 2);
        let ungated = DedupConfig {
            max_doc_words: None,
            ..DedupConfig::default()
        };
        assert_eq!(dedup_exact(&vs, &ungated).unwrap().n_kept, 1);
    }

    #[test]
    fn invalid_threshold() {
        let cfg = DedupConfig {
            threshold: 0.0,
            ..DedupConfig::default()
        };
        assert!(dedup_exact(&[], &cfg).is_err());
        assert!(dedup_indexed(&[], &cfg).is_err());
    }

    fn corpus() -> impl Strategy<Value = Vec<BowVector>> {
        let doc = prop::collection::vec((0u8..12, 1u32..4), 1..6);
        prop::collection::vec(doc, 0..40).prop_map(|docs| {
            docs.into_iter()
                .enumerate()
                .map(|(i, terms)| {
                    BowVector::from_counts(
                        format!("d{i}"),
                        terms.into_iter().map(|(t, c)| (format!("t{t}"), c)),
                    )
                    .unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn indexed_matches_exact(vs in corpus(), threshold in 0.05f64..=1.0, strict in any::<bool>(), literal in any::<bool>()) {
            let cfg = DedupConfig {
                threshold,
                comparison: if strict { Comparison::StrictGreater } else { Comparison::GreaterOrEqual },
                mode: if literal { DedupMode::LiteralDrop } else { DedupMode::Representative },
                max_doc_words: Some(8),
            };
            let exact = dedup_exact(&vs, &cfg).unwrap();
            let indexed = dedup_indexed(&vs, &cfg).unwrap();
            prop_assert!(indexed.same_outcome(&exact), "{:?} vs {:?}", indexed, exact);
        }

        #[test]
        fn cosine_symmetric_and_bounded(vs in corpus()) {
            for a in &vs {
                for b in &vs {
                    let ab = cosine_similarity(a, b).unwrap();
                    prop_assert_eq!(ab.to_bits(), cosine_similarity(b, a).unwrap().to_bits());
                    prop_assert!((0.0..=1.0).contains(&ab));
                }
                prop_assert!((a.norm() * a.norm() - a.sum_sq() as f64).abs() <= 1e-9 * a.sum_sq() as f64);
            }
        }

        #[test]
        fn retention_holds_for_every_order(mut vs in corpus(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            vs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let cfg = DedupConfig { max_doc_words: None, ..DedupConfig::default() };
            let r = dedup_indexed(&vs, &cfg).unwrap();
            let kept: Vec<&BowVector> = vs.iter().filter(|v| r.kept.iter().any(|k| k == v.doc_id())).collect();
            for (i, a) in kept.iter().enumerate() {
                for b in &kept[i + 1..] {
                    prop_assert!(!cfg.is_duplicate(cosine_similarity(a, b).unwrap()));
                }
            }
        }
    }
}
