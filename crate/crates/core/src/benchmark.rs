//! Benchmark construction: code assignment, label selection by test-set
//! support, iterative multi-label stratified splitting and task export.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RawDocument;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeSystem {
    Icd10,
    Ops,
}

impl std::str::FromStr for CodeSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "icd10" | "icd-10" | "icd" => Ok(CodeSystem::Icd10),
            "ops" => Ok(CodeSystem::Ops),
            other => Err(Error::InvalidInput(format!(
                "unknown code system `{other}`"
            ))),
        }
    }
}

/// A diagnosis (ICD-10) or procedure (OPS) code recorded for a patient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRecord {
    pub patient_ref: String,
    pub code: String,
    pub system: CodeSystem,
    #[serde(rename = "date")]
    pub code_date: NaiveDate,
}

impl CodeRecord {
    pub fn new(
        patient_ref: impl Into<String>,
        code: impl Into<String>,
        system: CodeSystem,
        code_date: NaiveDate,
    ) -> Result<Self> {
        let rec = CodeRecord {
            patient_ref: patient_ref.into(),
            code: code.into(),
            system,
            code_date,
        };
        rec.validate()?;
        Ok(rec)
    }

    /// ICD codes start with a letter and two digits ("Z11", "C34.1");
    /// OPS codes with a digit, a dash and a digit ("5-984", "8-930").
    pub fn validate(&self) -> Result<()> {
        let b = self.code.as_bytes();
        let ok = match self.system {
            CodeSystem::Icd10 => {
                b.len() >= 3
                    && b[0].is_ascii_uppercase()
                    && b[1].is_ascii_digit()
                    && b[2].is_ascii_digit()
            }
            CodeSystem::Ops => {
                b.len() >= 3 && b[0].is_ascii_digit() && b[1] == b'-' && b[2].is_ascii_digit()
            }
        };
        if self.patient_ref.is_empty() {
            return Err(Error::InvalidInput(format!(
                "code `{}` has no patient",
                self.code
            )));
        }
        if !ok {
            return Err(Error::InvalidInput(format!(
                "`{}` is not a valid {:?} code",
                self.code, self.system
            )));
        }
        Ok(())
    }

    /// The code as used for labels: ICD codes cut to the 3-character
    /// category when `icd_category_level` is set.
    pub fn label(&self, icd_category_level: bool) -> &str {
        match self.system {
            CodeSystem::Icd10 if icd_category_level => &self.code[..3],
            _ => &self.code,
        }
    }
}

/// Reads a `patient_ref,code,system,date` CSV with a header row.
pub fn read_codes_csv(path: impl AsRef<Path>) -> Result<Vec<CodeRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_codes_csv(file)
}

pub fn parse_codes_csv<R: std::io::Read>(reader: R) -> Result<Vec<CodeRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CodeRecord>().enumerate() {
        let rec = row?;
        rec.validate()
            .map_err(|e| Error::InvalidInput(format!("codes row {}: {e}", i + 2)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_codes_csv(path: impl AsRef<Path>, codes: &[CodeRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for c in codes {
        w.serialize(c)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignPolicy {
    /// Codes of the same patient dated on the document date.
    #[default]
    DateMatched,
    /// Every code of the patient.
    PatientAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignConfig {
    pub policy: AssignPolicy,
    /// Keep only labels starting with this prefix ("5-" for surgery).
    pub chapter_filter: Option<String>,
    /// Keep only codes of this system.
    pub system: Option<CodeSystem>,
    pub icd_category_level: bool,
}

impl Default for AssignConfig {
    fn default() -> Self {
        AssignConfig {
            policy: AssignPolicy::DateMatched,
            chapter_filter: None,
            system: None,
            icd_category_level: true,
        }
    }
}

impl AssignConfig {
    pub fn surgery() -> Self {
        AssignConfig {
            policy: AssignPolicy::DateMatched,
            chapter_filter: Some("5-".into()),
            system: Some(CodeSystem::Ops),
            icd_category_level: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub text: String,
    pub labels: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignOutcome {
    pub examples: Vec<LabeledExample>,
    /// Ids of documents left without labels.
    pub dropped: Vec<String>,
}

/// Attaches code labels to documents.
pub fn assign_codes<D: AsRef<RawDocument>>(
    docs: &[D],
    codes: &[CodeRecord],
    cfg: &AssignConfig,
) -> Result<AssignOutcome> {
    let mut by_patient: HashMap<&str, Vec<&CodeRecord>> = HashMap::new();
    for c in codes {
        by_patient
            .entry(c.patient_ref.as_str())
            .or_default()
            .push(c);
    }
    let mut examples = Vec::new();
    let mut dropped = Vec::new();
    for d in docs {
        let d = d.as_ref();
        let patient = d
            .patient_ref
            .as_deref()
            .ok_or_else(|| Error::MissingPatient {
                doc_id: d.id.clone(),
            })?;
        let date = match cfg.policy {
            AssignPolicy::DateMatched => Some(d.doc_date.ok_or_else(|| Error::MissingDate {
                doc_id: d.id.clone(),
            })?),
            AssignPolicy::PatientAll => None,
        };
        let labels: BTreeSet<String> = by_patient
            .get(patient)
            .into_iter()
            .flatten()
            .filter(|c| cfg.system.is_none_or(|s| s == c.system))
            .filter(|c| date.is_none_or(|dt| dt == c.code_date))
            .map(|c| c.label(cfg.icd_category_level))
            .filter(|l| {
                cfg.chapter_filter
                    .as_deref()
                    .is_none_or(|p| l.starts_with(p))
            })
            .map(String::from)
            .collect();
        if labels.is_empty() {
            dropped.push(d.id.clone());
        } else {
            examples.push(LabeledExample {
                doc_id: d.id.clone(),
                text: d.text.clone(),
                labels,
                patient_ref: Some(patient.to_string()),
            });
        }
    }
    Ok(AssignOutcome { examples, dropped })
}

/// Entity class of a BIO tag: `None` for `O`, `X` for `B-X` and `I-X`.
pub fn bio_class(tag: &str) -> Result<Option<&str>> {
    if tag == "O" {
        return Ok(None);
    }
    match tag.strip_prefix("B-").or_else(|| tag.strip_prefix("I-")) {
        Some(class) if !class.is_empty() => Ok(Some(class)),
        _ => Err(Error::InvalidInput(format!("`{tag}` is not a BIO tag"))),
    }
}

/// Checks tag syntax and that every `I-X` continues a `B-X`/`I-X`.
pub fn validate_bio(tags: &[String]) -> Result<()> {
    let mut prev: Option<&str> = None;
    for (i, tag) in tags.iter().enumerate() {
        let class = bio_class(tag)?;
        if tag.starts_with("I-") && prev != class {
            return Err(Error::InvalidInput(format!(
                "tag {i} `{tag}` does not continue an entity"
            )));
        }
        prev = class;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLabeledExample {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_ref: Option<String>,
}

impl TokenLabeledExample {
    pub fn new(doc_id: impl Into<String>, tokens: Vec<String>, tags: Vec<String>) -> Result<Self> {
        let ex = TokenLabeledExample {
            doc_id: doc_id.into(),
            tokens,
            tags,
            patient_ref: None,
        };
        ex.validate()?;
        Ok(ex)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.tags.len() {
            return Err(Error::LengthMismatch(format!(
                "`{}`: {} tokens vs {} tags",
                self.doc_id,
                self.tokens.len(),
                self.tags.len()
            )));
        }
        validate_bio(&self.tags).map_err(|e| Error::InvalidInput(format!("`{}`: {e}", self.doc_id)))
    }

    /// Number of entities (B- tags) per class.
    pub fn entity_counts(&self) -> BTreeMap<&str, u64> {
        let mut out = BTreeMap::new();
        for t in &self.tags {
            if let Some(class) = t.strip_prefix("B-") {
                *out.entry(class).or_default() += 1;
            }
        }
        out
    }
}

/// Anything that can be stratified: a label set and an optional group key.
pub trait Stratifiable {
    fn id(&self) -> &str;
    fn label_set(&self) -> BTreeSet<&str>;
    fn group(&self) -> Option<&str>;
}

impl Stratifiable for LabeledExample {
    fn id(&self) -> &str {
        &self.doc_id
    }

    fn label_set(&self) -> BTreeSet<&str> {
        self.labels.iter().map(String::as_str).collect()
    }

    fn group(&self) -> Option<&str> {
        self.patient_ref.as_deref()
    }
}

impl Stratifiable for TokenLabeledExample {
    fn id(&self) -> &str {
        &self.doc_id
    }

    fn label_set(&self) -> BTreeSet<&str> {
        self.entity_counts().into_keys().collect()
    }

    fn group(&self) -> Option<&str> {
        self.patient_ref.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
    pub min_test_support: usize,
    /// Keep all documents of a patient in one split.
    pub group_by_patient: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            n_train: 1000,
            n_valid: 500,
            n_test: 500,
            seed: 0,
            min_test_support: 10,
            group_by_patient: true,
        }
    }
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.n_train + self.n_valid + self.n_test
    }

    pub fn validate(&self, corpus_size: usize) -> Result<()> {
        if self.n_train == 0 || self.n_valid == 0 || self.n_test == 0 {
            return Err(Error::Config("split sizes must be positive".into()));
        }
        if self.total() > corpus_size {
            return Err(Error::InfeasibleSplit(format!(
                "{} examples requested, {corpus_size} available",
                self.total()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Valid, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

/// Indices into the input, per split, in ascending order. `pool` holds the
/// examples left out of all three splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub pool: Vec<usize>,
}

impl SplitIndices {
    pub fn get(&self, name: SplitName) -> &[usize] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Valid => &self.valid,
            SplitName::Test => &self.test,
        }
    }
}

struct Unit {
    members: Vec<usize>,
    labels: BTreeMap<usize, u64>,
}

/// Iterative multi-label stratification over patient groups (or single
/// examples). Units are placed rarest-label first into the fold with the
/// largest remaining demand for that label; ties go to the fold with more
/// free capacity, then to a seeded random choice. The unsplit pool takes
/// part as a fourth fold so split sizes are exact.
pub fn stratified_split<T: Stratifiable>(examples: &[T], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate(examples.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut label_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in examples {
        for l in ex.label_set() {
            let next = label_ids.len();
            label_ids.entry(l).or_insert(next);
        }
    }
    let n_labels = label_ids.len();

    let mut units: Vec<Unit> = Vec::new();
    let mut unit_of_group: HashMap<&str, usize> = HashMap::new();
    for (i, ex) in examples.iter().enumerate() {
        let u = match ex.group().filter(|_| spec.group_by_patient) {
            Some(g) => *unit_of_group.entry(g).or_insert_with(|| {
                units.push(Unit {
                    members: Vec::new(),
                    labels: BTreeMap::new(),
                });
                units.len() - 1
            }),
            None => {
                units.push(Unit {
                    members: Vec::new(),
                    labels: BTreeMap::new(),
                });
                units.len() - 1
            }
        };
        units[u].members.push(i);
        for l in ex.label_set() {
            *units[u].labels.entry(label_ids[l]).or_default() += 1;
        }
    }

    let n = examples.len() as f64;
    let capacity: [i64; 4] = [
        spec.n_train as i64,
        spec.n_valid as i64,
        spec.n_test as i64,
        (examples.len() - spec.total()) as i64,
    ];
    let mut label_total = vec![0u64; n_labels];
    for u in &units {
        for (&l, &c) in &u.labels {
            label_total[l] += c;
        }
    }
    let mut st = FoldState {
        demand: label_total
            .iter()
            .map(|&t| capacity.map(|c| t as f64 * c as f64 / n))
            .collect(),
        capacity,
        remaining: label_total,
        assigned: vec![None; units.len()],
        fold_units: Default::default(),
    };
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.shuffle(&mut rng);

    loop {
        let rarest = (0..n_labels)
            .filter(|&l| st.remaining[l] > 0)
            .min_by_key(|&l| (st.remaining[l], l));
        let Some(label) = rarest else { break };
        let batch: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&u| st.assigned[u].is_none() && units[u].labels.contains_key(&label))
            .collect();
        for u in batch {
            let fold = st.pick_fold(units[u].members.len() as i64, Some(label), &mut rng);
            st.place(&units[u], u, fold);
        }
    }
    for &u in &order {
        if st.assigned[u].is_none() {
            let fold = st.pick_fold(units[u].members.len() as i64, None, &mut rng);
            st.place(&units[u], u, fold);
        }
    }

    repair_capacity(&units, &mut st.fold_units, &mut st.capacity)?;

    let mut folds: [Vec<usize>; 4] = Default::default();
    for (f, us) in st.fold_units.iter().enumerate() {
        folds[f] = us
            .iter()
            .flat_map(|&u| units[u].members.iter().copied())
            .collect();
        folds[f].sort_unstable();
    }
    let [train, valid, test, pool] = folds;
    Ok(SplitIndices {
        train,
        valid,
        test,
        pool,
    })
}

struct FoldState {
    capacity: [i64; 4],
    demand: Vec<[f64; 4]>,
    remaining: Vec<u64>,
    assigned: Vec<Option<usize>>,
    fold_units: [Vec<usize>; 4],
}

impl FoldState {
    fn pick_fold(&self, size: i64, label: Option<usize>, rng: &mut ChaCha8Rng) -> usize {
        let fits: Vec<usize> = (0..4).filter(|&f| self.capacity[f] >= size).collect();
        let candidates: Vec<usize> = if fits.is_empty() {
            (0..4).collect()
        } else {
            fits
        };
        let score = |f: usize| (label.map_or(0.0, |l| self.demand[l][f]), self.capacity[f]);
        let best =
            candidates
                .iter()
                .map(|&f| score(f))
                .fold((f64::NEG_INFINITY, i64::MIN), |a, b| {
                    if b.0 > a.0 || (b.0 == a.0 && b.1 > a.1) {
                        b
                    } else {
                        a
                    }
                });
        let tied: Vec<usize> = candidates
            .into_iter()
            .filter(|&f| score(f) == best)
            .collect();
        tied[rng.gen_range(0..tied.len())]
    }

    fn place(&mut self, unit: &Unit, u: usize, fold: usize) {
        self.assigned[u] = Some(fold);
        self.fold_units[fold].push(u);
        self.capacity[fold] -= unit.members.len() as i64;
        for (&l, &c) in &unit.labels {
            self.demand[l][fold] -= c as f64;
            self.remaining[l] -= c;
        }
    }
}

/// Moves units out of over-full folds until every fold has its exact size.
fn repair_capacity(
    units: &[Unit],
    fold_units: &mut [Vec<usize>; 4],
    capacity: &mut [i64; 4],
) -> Result<()> {
    for _ in 0..units.len() + 1 {
        let Some(over) = (0..4).find(|&f| capacity[f] < 0) else {
            return Ok(());
        };
        let mut moved = false;
        'search: for under in (0..4).filter(|&f| capacity[f] > 0) {
            let limit = (-capacity[over]).min(capacity[under]);
            for pos in (0..fold_units[over].len()).rev() {
                let u = fold_units[over][pos];
                let size = units[u].members.len() as i64;
                if size <= limit {
                    fold_units[over].remove(pos);
                    fold_units[under].push(u);
                    capacity[over] += size;
                    capacity[under] -= size;
                    moved = true;
                    break 'search;
                }
            }
        }
        if !moved {
            return Err(Error::InfeasibleSplit(
                "patient groups cannot be packed into the requested split sizes".into(),
            ));
        }
    }
    if capacity.iter().all(|&c| c == 0) {
        Ok(())
    } else {
        Err(Error::InfeasibleSplit(
            "split repair did not converge".into(),
        ))
    }
}

/// Labels whose test-split count reaches `min_test_support`, ordered by
/// global frequency (descending, then by name).
pub fn select_labels(
    examples: &[LabeledExample],
    test: &[usize],
    min_test_support: usize,
) -> Result<Vec<String>> {
    let mut global: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in examples {
        for l in &ex.labels {
            *global.entry(l).or_default() += 1;
        }
    }
    let mut in_test: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in test {
        for l in &examples[i].labels {
            *in_test.entry(l).or_default() += 1;
        }
    }
    let mut selected: Vec<(&str, usize)> = global
        .into_iter()
        .filter(|(l, _)| in_test.get(l).copied().unwrap_or(0) >= min_test_support)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyTask { min_test_support });
    }
    selected.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(selected.into_iter().map(|(l, _)| l.to_string()).collect())
}

/// Restricts labels to `selected`; returns the kept examples and the ids of
/// those left without labels.
pub fn apply_label_selection(
    examples: Vec<LabeledExample>,
    selected: &[String],
) -> (Vec<LabeledExample>, Vec<String>) {
    let keep: BTreeSet<&str> = selected.iter().map(String::as_str).collect();
    let mut kept = Vec::with_capacity(examples.len());
    let mut dropped = Vec::new();
    for mut ex in examples {
        ex.labels.retain(|l| keep.contains(l.as_str()));
        if ex.labels.is_empty() {
            dropped.push(ex.doc_id);
        } else {
            kept.push(ex);
        }
    }
    (kept, dropped)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Splits<T> {
    pub fn get(&self, name: SplitName) -> &[T] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Valid => &self.valid,
            SplitName::Test => &self.test,
        }
    }
}

impl<T: Clone> Splits<T> {
    pub fn from_indices(examples: &[T], idx: &SplitIndices) -> Self {
        let take = |ix: &[usize]| ix.iter().map(|&i| examples[i].clone()).collect();
        Splits {
            train: take(&idx.train),
            valid: take(&idx.valid),
            test: take(&idx.test),
        }
    }
}

/// Label counts per split, laid out as Class / Train / Valid / Test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    pub rows: Vec<(String, [u64; 3])>,
}

impl Distribution {
    pub fn total(&self) -> [u64; 3] {
        let mut t = [0; 3];
        for (_, c) in &self.rows {
            for k in 0..3 {
                t[k] += c[k];
            }
        }
        t
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("Class\tTrain\tValid\tTest\n");
        for (class, c) in &self.rows {
            let _ = writeln!(out, "{class}\t{}\t{}\t{}", c[0], c[1], c[2]);
        }
        let t = self.total();
        let _ = writeln!(out, "Total\t{}\t{}\t{}", t[0], t[1], t[2]);
        out
    }
}

/// Label occurrences (documents per label) per split, in `labels` order.
pub fn label_distribution(splits: &Splits<LabeledExample>, labels: &[String]) -> Distribution {
    let rows = labels
        .iter()
        .map(|l| {
            let counts = SplitName::ALL.map(|s| {
                splits
                    .get(s)
                    .iter()
                    .filter(|e| e.labels.contains(l))
                    .count() as u64
            });
            (l.clone(), counts)
        })
        .collect();
    Distribution { rows }
}

/// Entity counts (B- tags) per class and split, classes sorted by name.
pub fn entity_distribution(splits: &Splits<TokenLabeledExample>) -> Distribution {
    let mut counts: BTreeMap<String, [u64; 3]> = BTreeMap::new();
    for (k, s) in SplitName::ALL.into_iter().enumerate() {
        for ex in splits.get(s) {
            for (class, n) in ex.entity_counts() {
                counts.entry(class.to_string()).or_default()[k] += n;
            }
        }
    }
    Distribution {
        rows: counts.into_iter().collect(),
    }
}

/// A finished multi-label classification task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationTask {
    /// Selected labels, most frequent first.
    pub labels: Vec<String>,
    pub splits: Splits<LabeledExample>,
    /// Ids dropped because label selection left them without labels.
    pub dropped: Vec<String>,
    pub iterations: usize,
}

const MAX_SELECTION_ROUNDS: usize = 10;

/// Splits, selects labels against the test split, drops label-less
/// examples and re-splits until nothing changes.
pub fn build_classification_task(
    examples: Vec<LabeledExample>,
    spec: &SplitSpec,
) -> Result<ClassificationTask> {
    let mut current = examples;
    let mut dropped_all = Vec::new();
    for round in 1..=MAX_SELECTION_ROUNDS {
        let idx = stratified_split(&current, spec)?;
        let labels = select_labels(&current, &idx.test, spec.min_test_support)?;
        let n_labels_before = current
            .iter()
            .flat_map(|e| e.labels.iter())
            .collect::<BTreeSet<_>>()
            .len();
        if labels.len() == n_labels_before {
            return Ok(ClassificationTask {
                labels,
                splits: Splits::from_indices(&current, &idx),
                dropped: dropped_all,
                iterations: round,
            });
        }
        let (kept, dropped) = apply_label_selection(current, &labels);
        dropped_all.extend(dropped);
        current = kept;
    }
    Err(Error::InfeasibleSplit(format!(
        "label selection did not settle within {MAX_SELECTION_ROUNDS} rounds"
    )))
}

impl ClassificationTask {
    pub fn distribution(&self) -> Distribution {
        label_distribution(&self.splits, &self.labels)
    }

    /// Writes `{train,valid,test}.jsonl`, `labels.txt` and `distribution.tsv`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        #[derive(Serialize)]
        struct Row<'a> {
            id: &'a str,
            text: &'a str,
            labels: &'a BTreeSet<String>,
        }
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for s in SplitName::ALL {
            let mut body = Vec::new();
            for ex in self.splits.get(s) {
                serde_json::to_writer(
                    &mut body,
                    &Row {
                        id: &ex.doc_id,
                        text: &ex.text,
                        labels: &ex.labels,
                    },
                )?;
                body.push(b'\n');
            }
            let name = format!("{}.jsonl", s.as_str());
            write_file(&dir.join(&name), &body)?;
            written.push(name);
        }
        let labels: String = self.labels.iter().map(|l| format!("{l}\n")).collect();
        write_file(&dir.join("labels.txt"), labels.as_bytes())?;
        write_file(
            &dir.join("distribution.tsv"),
            self.distribution().to_tsv().as_bytes(),
        )?;
        written.extend(["labels.txt".to_string(), "distribution.tsv".to_string()]);
        Ok(written)
    }
}

/// Two-column CoNLL: `token<TAB>tag`, a blank line after each document.
pub fn to_conll(examples: &[TokenLabeledExample]) -> Result<String> {
    let mut out = String::new();
    for ex in examples {
        ex.validate()?;
        for (tok, tag) in ex.tokens.iter().zip(&ex.tags) {
            let _ = writeln!(out, "{tok}\t{tag}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses two-column CoNLL; documents get ids `doc<n>`.
pub fn parse_conll(text: &str) -> Result<Vec<TokenLabeledExample>> {
    let mut docs = Vec::new();
    let (mut tokens, mut tags) = (Vec::new(), Vec::new());
    let flush = |tokens: &mut Vec<String>,
                 tags: &mut Vec<String>,
                 docs: &mut Vec<TokenLabeledExample>|
     -> Result<()> {
        if !tokens.is_empty() {
            let id = format!("doc{}", docs.len());
            docs.push(TokenLabeledExample::new(
                id,
                std::mem::take(tokens),
                std::mem::take(tags),
            )?);
        }
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags, &mut docs)?;
            continue;
        }
        let (tok, tag) = line
            .split_once('\t')
            .ok_or_else(|| Error::InvalidInput(format!("CoNLL line {} has no tab", i + 1)))?;
        tokens.push(tok.to_string());
        tags.push(tag.trim().to_string());
    }
    flush(&mut tokens, &mut tags, &mut docs)?;
    Ok(docs)
}

/// Splits an NER corpus (stratified on entity classes) and writes
/// `{train,valid,test}.conll`, `labels.txt` and `distribution.tsv`.
pub fn export_ner_task(
    splits: &Splits<TokenLabeledExample>,
    dir: impl AsRef<Path>,
) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for s in SplitName::ALL {
        let name = format!("{}.conll", s.as_str());
        write_file(&dir.join(&name), to_conll(splits.get(s))?.as_bytes())?;
        written.push(name);
    }
    let dist = entity_distribution(splits);
    let labels: String = dist.rows.iter().map(|(l, _)| format!("{l}\n")).collect();
    write_file(&dir.join("labels.txt"), labels.as_bytes())?;
    write_file(&dir.join("distribution.tsv"), dist.to_tsv().as_bytes())?;
    written.extend(["labels.txt".to_string(), "distribution.tsv".to_string()]);
    Ok(written)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
