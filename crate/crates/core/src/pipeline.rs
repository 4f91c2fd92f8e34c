//! Staged corpus pipeline (ingest, clean, dedup, anonymize, stats) with a
//! hashed manifest, and the two-phase pretraining configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anonymize::{
    anonymize_corpus, Gazetteer, MatchPolicy, NameRecognizer, NoNames, Wildcards,
};
use crate::corpus::{
    clean_corpus, compute_corpus_stats, load_documents, write_documents, CleanPolicySet, MbUnit,
    RawDocument, SourceKind,
};
use crate::dedup::{dedup_documents, AnalyzerConfig, DedupConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Phase::One),
            "2" => Ok(Phase::Two),
            _ => Err(Error::InvalidInput(format!(
                "phase must be 1 or 2, got `{s}`"
            ))),
        }
    }
}

/// Masked-language-model pretraining hyperparameters for one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub phase: Phase,
    pub seq_len: u32,
    /// Peak learning rate; `None` when the published value is unreadable.
    pub learning_rate: Option<f64>,
    pub batch_size: u32,
    pub warmup_steps: u32,
    pub total_steps: u32,
    pub optimizer: String,
    pub lr_schedule: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn emit_pretrain_config(phase: Phase) -> PretrainConfig {
    match phase {
        Phase::One => PretrainConfig {
            phase,
            seq_len: 128,
            learning_rate: Some(6e-3),
            batch_size: 65_536,
            warmup_steps: 2_000,
            total_steps: 7_038,
            optimizer: "LAMB".into(),
            lr_schedule: "polynomial-decay".into(),
            warnings: Vec::new(),
        },
        Phase::Two => PretrainConfig {
            phase,
            seq_len: 512,
            learning_rate: None,
            batch_size: 32_768,
            warmup_steps: 200,
            total_steps: 1_563,
            optimizer: "LAMB".into(),
            lr_schedule: "polynomial-decay".into(),
            warnings: vec![
                "no phase-2 peak learning rate is set; 4e-3 and 4e-4 are both plausible. \
                 Set it explicitly."
                    .into(),
            ],
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    /// Source used for lines without a `source` field.
    pub source: SourceKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnonymizeStage {
    /// Gazetteer file, one name per line. Without one only dates are redacted.
    pub gazetteer: Option<PathBuf>,
    pub match_policy: MatchPolicy,
    pub wildcards: Wildcards,
}

/// Pipeline configuration file. Relative paths resolve against `base_dir`
/// (the directory of the config file when loaded with [`PipelineConfig::load`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub inputs: Vec<InputSpec>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub clean: CleanPolicySet,
    #[serde(default)]
    pub analyzer: AnalyzerConfig,
    #[serde(default)]
    pub dedup: DedupConfig,
    #[serde(default)]
    pub anonymize: AnonymizeStage,
    #[serde(default)]
    pub mb_unit: MbUnit,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub config_sha256: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputFile>,
    pub count_in: usize,
    pub count_out: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counters: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub stages: Vec<StageRecord>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PipelineManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(cfg)?))
}

struct Run<'a> {
    out_dir: &'a Path,
    manifest: PipelineManifest,
}

impl Run<'_> {
    fn write(&self, name: &str, bytes: &[u8]) -> Result<OutputFile> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        })
    }

    fn write_docs<'d>(
        &self,
        name: &str,
        docs: impl IntoIterator<Item = &'d RawDocument>,
    ) -> Result<OutputFile> {
        let path = self.out_dir.join(name);
        write_documents(&path, docs)?;
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
        })
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<OutputFile> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn save_manifest(&self) -> Result<()> {
        self.write_json(MANIFEST_FILE, &self.manifest).map(|_| ())
    }

    fn last_output(&self) -> Vec<String> {
        self.manifest
            .stages
            .last()
            .and_then(|s| s.outputs.first())
            .map(|o| vec![o.path.clone()])
            .unwrap_or_default()
    }
}

/// Runs every stage in order, writing stage outputs and `manifest.json`
/// into the output directory. On failure the manifest lists the finished
/// stages and the error, and the error names the failing stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineManifest> {
    let out_dir = cfg.resolve(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut run = Run {
        out_dir: &out_dir,
        manifest: PipelineManifest::default(),
    };
    match run_stages(cfg, &mut run) {
        Ok(()) => {
            run.manifest.complete = true;
            run.save_manifest()?;
            Ok(run.manifest)
        }
        Err((stage, e)) => {
            run.manifest.error = Some(format!("{stage}: {e}"));
            run.save_manifest()?;
            Err(Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            })
        }
    }
}

fn run_stages(
    cfg: &PipelineConfig,
    run: &mut Run<'_>,
) -> std::result::Result<(), (&'static str, Error)> {
    let stage = |name: &'static str| move |e: Error| (name, e);

    // ingest
    let mut docs: Vec<RawDocument> = Vec::new();
    let mut line_errors = BTreeMap::new();
    for input in &cfg.inputs {
        let report =
            load_documents(cfg.resolve(&input.path), &input.source).map_err(stage("ingest"))?;
        if !report.errors.is_empty() {
            line_errors.insert(input.path.display().to_string(), report.errors);
        }
        docs.extend(report.documents);
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(d) = docs.iter().find(|d| !seen.insert(d.id.as_str())) {
        return Err((
            "ingest",
            Error::InvalidInput(format!("duplicate document id `{}` across inputs", d.id)),
        ));
    }
    let outputs = vec![
        run.write_docs("01-ingest.jsonl", &docs)
            .map_err(stage("ingest"))?,
        run.write_json("01-ingest-errors.json", &line_errors)
            .map_err(stage("ingest"))?,
    ];
    let n_line_errors: usize = line_errors.values().map(Vec::len).sum();
    run.manifest.stages.push(StageRecord {
        stage: "ingest".into(),
        config_sha256: config_hash(&cfg.inputs).map_err(stage("ingest"))?,
        inputs: cfg
            .inputs
            .iter()
            .map(|i| i.path.display().to_string())
            .collect(),
        outputs,
        count_in: docs.len() + n_line_errors,
        count_out: docs.len(),
        counters: BTreeMap::from([("line_errors".into(), n_line_errors as u64)]),
    });
    run.save_manifest().map_err(stage("ingest"))?;

    // clean
    cfg.clean.validate().map_err(stage("clean"))?;
    let n_in = docs.len();
    let (kept, rejects) = clean_corpus(docs, &cfg.clean);
    let outputs = vec![
        run.write_docs("02-clean.jsonl", kept.iter().map(|d| &**d))
            .map_err(stage("clean"))?,
        run.write_json("02-clean-rejects.json", &rejects)
            .map_err(stage("clean"))?,
    ];
    let inputs = run.last_output();
    run.manifest.stages.push(StageRecord {
        stage: "clean".into(),
        config_sha256: config_hash(&cfg.clean).map_err(stage("clean"))?,
        inputs,
        outputs,
        count_in: n_in,
        count_out: kept.len(),
        counters: BTreeMap::from([("rejected".into(), rejects.len() as u64)]),
    });
    run.save_manifest().map_err(stage("clean"))?;

    // dedup
    let n_in = kept.len();
    let (kept, reports) =
        dedup_documents(kept, &cfg.analyzer, &cfg.dedup).map_err(stage("dedup"))?;
    let outputs = vec![
        run.write_docs("03-dedup.jsonl", kept.iter().map(|d| &**d))
            .map_err(stage("dedup"))?,
        run.write_json("03-dedup-report.json", &reports)
            .map_err(stage("dedup"))?,
    ];
    let inputs = run.last_output();
    run.manifest.stages.push(StageRecord {
        stage: "dedup".into(),
        config_sha256: config_hash(&(&cfg.analyzer, &cfg.dedup)).map_err(stage("dedup"))?,
        inputs,
        outputs,
        count_in: n_in,
        count_out: kept.len(),
        counters: BTreeMap::from([("removed".into(), (n_in - kept.len()) as u64)]),
    });
    run.save_manifest().map_err(stage("dedup"))?;

    // anonymize
    let gazetteer = match &cfg.anonymize.gazetteer {
        Some(p) => Some(
            Gazetteer::load(cfg.resolve(p), cfg.anonymize.match_policy)
                .map_err(stage("anonymize"))?,
        ),
        None => None,
    };
    let recognizer: &dyn NameRecognizer = match &gazetteer {
        Some(g) => g,
        None => &NoNames,
    };
    let n_in = kept.len();
    let (docs, report) =
        anonymize_corpus(kept, recognizer, &cfg.anonymize.wildcards).map_err(stage("anonymize"))?;
    let outputs = vec![
        run.write_docs("04-anonymize.jsonl", docs.iter().map(|d| &**d))
            .map_err(stage("anonymize"))?,
        run.write_json("04-anonymize-report.json", &report)
            .map_err(stage("anonymize"))?,
    ];
    let inputs = run.last_output();
    let gazetteer_hash = match &gazetteer {
        Some(g) => config_hash(g.entries()).map_err(stage("anonymize"))?,
        None => String::new(),
    };
    run.manifest.stages.push(StageRecord {
        stage: "anonymize".into(),
        config_sha256: config_hash(&(&cfg.anonymize, gazetteer_hash))
            .map_err(stage("anonymize"))?,
        inputs,
        outputs,
        count_in: n_in,
        count_out: docs.len(),
        counters: BTreeMap::from([
            (
                "redacted_documents".into(),
                report.n_redacted_documents() as u64,
            ),
            ("name_spans".into(), report.total_name_spans as u64),
            ("date_spans".into(), report.total_date_spans as u64),
            ("residuals".into(), report.residuals.len() as u64),
        ]),
    });
    run.save_manifest().map_err(stage("anonymize"))?;

    // stats
    let stats = compute_corpus_stats(&docs);
    let outputs = vec![
        run.write("05-stats.tsv", stats.to_tsv(cfg.mb_unit).as_bytes())
            .map_err(stage("stats"))?,
        run.write_json("05-stats.json", &stats)
            .map_err(stage("stats"))?,
    ];
    let inputs = run.last_output();
    run.manifest.stages.push(StageRecord {
        stage: "stats".into(),
        config_sha256: config_hash(&cfg.mb_unit).map_err(stage("stats"))?,
        inputs,
        outputs,
        count_in: docs.len(),
        count_out: docs.len(),
        counters: BTreeMap::from([
            ("sentences".into(), stats.total.n_sentences),
            ("words".into(), stats.total.n_words),
        ]),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pretrain_constants() {
        let p1 = emit_pretrain_config(Phase::One);
        assert_eq!(
            (
                p1.seq_len,
                p1.learning_rate,
                p1.batch_size,
                p1.warmup_steps,
                p1.total_steps
            ),
            (128, Some(6e-3), 65_536, 2_000, 7_038)
        );
        let p2 = emit_pretrain_config(Phase::Two);
        assert_eq!(
            (
                p2.seq_len,
                p2.learning_rate,
                p2.batch_size,
                p2.warmup_steps,
                p2.total_steps
            ),
            (512, None, 32_768, 200, 1_563)
        );
        let json = serde_json::to_value(&p2).unwrap();
        assert!(json["learning_rate"].is_null());
        assert_eq!(json["phase"], "2");
        assert!(!p2.warnings.is_empty());
    }

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn empty_corpus_gives_zero_counts() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "in.jsonl", "");
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"inputs":[{"path":"in.jsonl","source":"radiology-report"}],"out_dir":"out"}"#,
        )
        .unwrap();
        let cfg = PipelineConfig {
            base_dir: dir.path().to_path_buf(),
            ..cfg
        };
        let m = run_pipeline(&cfg).unwrap();
        assert!(m.complete);
        assert_eq!(m.stages.len(), 5);
        assert!(m.stages.iter().all(|s| s.count_in == 0 && s.count_out == 0));
    }

    #[test]
    fn failing_stage_leaves_partial_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "in.jsonl", "{\"text\":\"Kein Erguss.\"}\n");
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"inputs":[{"path":"in.jsonl","source":"wiki"}],"out_dir":"out","anonymize":{"gazetteer":"missing.txt"}}"#,
        )
        .unwrap();
        let cfg = PipelineConfig {
            base_dir: dir.path().to_path_buf(),
            ..cfg
        };
        match run_pipeline(&cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "anonymize"),
            other => panic!("expected stage error, got {other:?}"),
        }
        let text = std::fs::read_to_string(dir.path().join("out").join(MANIFEST_FILE)).unwrap();
        let m: PipelineManifest = serde_json::from_str(&text).unwrap();
        assert!(!m.complete);
        assert_eq!(m.stages.len(), 3);
        assert!(m.error.unwrap().starts_with("anonymize"));
    }
}
