use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use medcorpus::anonymize::{
    anonymize_corpus, Gazetteer, MatchPolicy, NameRecognizer, NoNames, Wildcards,
};
use medcorpus::benchmark::{
    assign_codes, build_classification_task, export_ner_task, parse_conll, read_codes_csv,
    stratified_split, AssignConfig, AssignPolicy, CodeSystem, LabeledExample, SplitSpec, Splits,
    TokenLabeledExample,
};
use medcorpus::corpus::{
    clean_corpus, compute_corpus_stats, load_documents, write_documents, CleanPolicySet, MbUnit,
    RawDocument, SourceKind,
};
use medcorpus::dedup::{dedup_documents, AnalyzerConfig, Comparison, DedupConfig, DedupMode};
use medcorpus::hpo::{
    run_study, CommandObjective, Direction, MedianPruner, RandomSampler, RunOptions, SearchSpace,
    Study,
};
use medcorpus::metrics::{
    multilabel_report, ner_token_report, read_jsonl, ClassificationPrediction, NerPrediction,
    ScoredPredictions,
};
use medcorpus::pipeline::{emit_pretrain_config, run_pipeline, Phase, PipelineConfig};
use medcorpus::tokenize::{build_vocab, measure_fertility, VocabConfig, Vocabulary};
use medcorpus::{Error, Result};

/// Clinical text corpus toolkit.
#[derive(Parser)]
#[command(name = "medcorpus", version)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load JSONL files and apply per-source cleaning.
    Ingest(IngestArgs),
    /// Per-source document, sentence, word and size counts.
    Stats(StatsArgs),
    /// Remove near-duplicate documents within each source.
    Dedup(DedupArgs),
    /// Replace names and dates with wildcards.
    Anonymize(AnonymizeArgs),
    /// Vocabulary construction.
    #[command(subcommand)]
    Vocab(VocabCmd),
    /// Tokenize documents with a vocabulary.
    Tokenize(TokenizeArgs),
    /// Average subwords per word.
    Fertility(FertilityArgs),
    /// Benchmark construction.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Evaluate predictions.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Hyperparameter search.
    #[command(subcommand)]
    Hpo(HpoCmd),
    /// Print the pretraining configuration of a phase as JSON.
    PretrainConfig {
        #[arg(long)]
        phase: Phase,
    },
    /// Run ingest, clean, dedup, anonymize and stats from a config file.
    Pipeline { config: PathBuf },
}

#[derive(Args)]
struct SourceArg {
    /// Source for lines without a `source` field.
    #[arg(long, default_value = "other")]
    source: SourceKind,
}

#[derive(Args)]
struct IngestArgs {
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    source: SourceArg,
    /// JSON cleaning policies (per source, with fallback).
    #[arg(long)]
    clean_config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Line errors and rejected documents as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Decimal,
    Binary,
}

#[derive(Args)]
struct StatsArgs {
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    source: SourceArg,
    #[arg(long, value_enum, default_value = "decimal")]
    mb_unit: UnitArg,
    /// Also write the statistics as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Representative,
    LiteralDrop,
}

#[derive(Args)]
struct DedupArgs {
    input: PathBuf,
    #[command(flatten)]
    source: SourceArg,
    /// JSON dedup config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Documents with more terms are kept unexamined; 0 disables the limit.
    #[arg(long)]
    max_words: Option<u64>,
    /// Count similarity equal to the threshold as duplicate.
    #[arg(long)]
    inclusive: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AnonymizeArgs {
    input: PathBuf,
    #[command(flatten)]
    source: SourceArg,
    /// Names to redact, one per line.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long)]
    case_insensitive: bool,
    /// Delete names instead of inserting a wildcard.
    #[arg(long)]
    delete_names: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VocabCmd {
    /// Build a vocabulary from JSONL documents.
    Build(VocabBuildArgs),
}

#[derive(Args)]
struct VocabBuildArgs {
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    source: SourceArg,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    min_char_freq: Option<u64>,
    #[arg(long)]
    min_word_freq: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TokenizeArgs {
    input: PathBuf,
    #[command(flatten)]
    source: SourceArg,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FertilityArgs {
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    source: SourceArg,
    #[arg(long)]
    vocab: PathBuf,
    /// Also write the report (with per-document counts) as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SplitArgs {
    /// JSON split spec; flags override it.
    #[arg(long)]
    split_config: Option<PathBuf>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_valid: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    min_test_support: Option<usize>,
    /// Allow documents of one patient to land in different splits.
    #[arg(long)]
    no_patient_grouping: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    DateMatched,
    PatientAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Icd10,
    Ops,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Attach codes to documents, select labels and split into a task.
    Build {
        #[arg(long)]
        docs: PathBuf,
        #[command(flatten)]
        source: SourceArg,
        #[arg(long)]
        codes: PathBuf,
        #[arg(long, value_enum, default_value = "date-matched")]
        policy: PolicyArg,
        /// Keep only labels with this prefix, e.g. `5-`.
        #[arg(long)]
        chapter: Option<String>,
        #[arg(long, value_enum)]
        system: Option<SystemArg>,
        /// Keep full ICD codes instead of 3-character categories.
        #[arg(long)]
        full_icd: bool,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split labeled JSONL (classification) or CoNLL (NER) examples.
    Split {
        input: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Multi-label classification: gold JSONL vs `{id, scores}` predictions.
    Clf {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Classes to report, one per line (default: all gold labels).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Token-level NER: gold CoNLL or JSONL vs `{id, tags}` predictions.
    Ner {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum HpoCmd {
    /// Run a study against an external objective command.
    Run {
        /// JSON search space (default ranges when omitted).
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        cmd: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        startup: usize,
        #[arg(long)]
        minimize: bool,
        /// Trials per parallel wave.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Study file; written after every trial and resumed if present.
        #[arg(long)]
        study: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match std::panic::catch_unwind(|| run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            match e {
                Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
        Err(_) => ExitCode::from(3),
    }
}

fn load_all(inputs: &[PathBuf], source: &SourceKind) -> Result<Vec<RawDocument>> {
    if inputs.is_empty() {
        return Err(Error::Config("no input files given".into()));
    }
    let mut docs = Vec::new();
    for p in inputs {
        let report = load_documents(p, source)?;
        for e in &report.errors {
            eprintln!("warning: {}:{}: {}", p.display(), e.line, e.message);
        }
        docs.extend(report.documents);
    }
    Ok(docs)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn split_spec(args: &SplitArgs) -> Result<SplitSpec> {
    let mut spec: SplitSpec = match &args.split_config {
        Some(p) => read_json(p)?,
        None => SplitSpec::default(),
    };
    spec.seed = args.seed;
    if let Some(n) = args.n_train {
        spec.n_train = n;
    }
    if let Some(n) = args.n_valid {
        spec.n_valid = n;
    }
    if let Some(n) = args.n_test {
        spec.n_test = n;
    }
    if let Some(n) = args.min_test_support {
        spec.min_test_support = n;
    }
    if args.no_patient_grouping {
        spec.group_by_patient = false;
    }
    Ok(spec)
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Ingest(a) => {
            let docs = load_all(&a.inputs, &a.source.source)?;
            let policies: CleanPolicySet = match &a.clean_config {
                Some(p) => read_json(p)?,
                None => CleanPolicySet::default(),
            };
            policies.validate()?;
            let (kept, rejects) = clean_corpus(docs, &policies);
            write_documents(&a.out, kept.iter().map(|d| &**d))?;
            if let Some(p) = &a.report {
                write_json(p, &rejects)?;
            }
            eprintln!("kept {}, rejected {}", kept.len(), rejects.len());
        }
        Cmd::Stats(a) => {
            let docs = load_all(&a.inputs, &a.source.source)?;
            let stats = compute_corpus_stats(&docs);
            let unit = match a.mb_unit {
                UnitArg::Decimal => MbUnit::Decimal,
                UnitArg::Binary => MbUnit::Binary,
            };
            print!("{}", stats.to_tsv(unit));
            if let Some(p) = &a.json {
                write_json(p, &stats)?;
            }
        }
        Cmd::Dedup(a) => {
            let docs = load_all(std::slice::from_ref(&a.input), &a.source.source)?;
            let mut cfg: DedupConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => DedupConfig::default(),
            };
            if let Some(t) = a.threshold {
                cfg.threshold = t;
            }
            if let Some(m) = a.mode {
                cfg.mode = match m {
                    ModeArg::Representative => DedupMode::Representative,
                    ModeArg::LiteralDrop => DedupMode::LiteralDrop,
                };
            }
            if let Some(w) = a.max_words {
                cfg.max_doc_words = (w > 0).then_some(w);
            }
            if a.inclusive {
                cfg.comparison = Comparison::GreaterOrEqual;
            }
            cfg.validate()?;
            let n_in = docs.len();
            let (kept, reports) = dedup_documents(docs, &AnalyzerConfig::default(), &cfg)?;
            write_documents(&a.out, &kept)?;
            if let Some(p) = &a.report {
                write_json(p, &reports)?;
            }
            eprintln!("kept {} of {n_in}", kept.len());
        }
        Cmd::Anonymize(a) => {
            let docs = load_all(std::slice::from_ref(&a.input), &a.source.source)?;
            let policy = if a.case_insensitive {
                MatchPolicy::CaseInsensitive
            } else {
                MatchPolicy::CaseSensitive
            };
            let gazetteer = a
                .gazetteer
                .as_ref()
                .map(|p| Gazetteer::load(p, policy))
                .transpose()?;
            let recognizer: &dyn NameRecognizer = match &gazetteer {
                Some(g) => g,
                None => &NoNames,
            };
            let wildcards = if a.delete_names {
                Wildcards::delete_names()
            } else {
                Wildcards::default()
            };
            let (docs, report) = anonymize_corpus(docs, recognizer, &wildcards)?;
            write_documents(&a.out, &docs)?;
            if let Some(p) = &a.report {
                write_json(p, &report)?;
            }
            eprintln!(
                "{} names and {} dates redacted in {} documents",
                report.total_name_spans,
                report.total_date_spans,
                report.n_redacted_documents()
            );
            if !report.passed() {
                eprintln!(
                    "warning: {} identifiers still detectable after redaction",
                    report.residuals.len()
                );
            }
        }
        Cmd::Vocab(VocabCmd::Build(a)) => {
            let docs = load_all(&a.inputs, &a.source.source)?;
            let mut cfg: VocabConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => VocabConfig::default(),
            };
            if let Some(v) = a.vocab_size {
                cfg.vocab_size = v;
            }
            if let Some(v) = a.min_char_freq {
                cfg.min_char_freq = v;
            }
            if let Some(v) = a.min_word_freq {
                cfg.min_word_freq = v;
            }
            let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
            let vocab = build_vocab(&texts, &cfg)?;
            vocab.save(&a.out)?;
            eprintln!("{} tokens", vocab.len());
        }
        Cmd::Tokenize(a) => {
            #[derive(Serialize)]
            struct Row<'a> {
                id: &'a str,
                tokens: Vec<&'a str>,
                ids: Vec<u32>,
            }
            let vocab = Vocabulary::load(&a.vocab)?;
            let docs = load_all(std::slice::from_ref(&a.input), &a.source.source)?;
            let file = std::fs::File::create(&a.out).map_err(|e| io_err(&a.out, e))?;
            let mut w = std::io::BufWriter::new(file);
            for d in &docs {
                let ids = vocab.tokenize(&d.text);
                let tokens = ids
                    .iter()
                    .map(|&i| vocab.token(i).unwrap_or_default())
                    .collect();
                serde_json::to_writer(
                    &mut w,
                    &Row {
                        id: &d.id,
                        tokens,
                        ids,
                    },
                )?;
                w.write_all(b"\n").map_err(|e| io_err(&a.out, e))?;
            }
            w.flush().map_err(|e| io_err(&a.out, e))?;
        }
        Cmd::Fertility(a) => {
            let vocab = Vocabulary::load(&a.vocab)?;
            let docs = load_all(&a.inputs, &a.source.source)?;
            let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
            let report = measure_fertility(&texts, &vocab)?;
            println!(
                "words\t{}\nsubwords\t{}\nfertility\t{:.4}",
                report.n_words, report.n_subwords, report.fertility
            );
            if let Some(p) = &a.json {
                write_json(p, &report)?;
            }
        }
        Cmd::Bench(BenchCmd::Build {
            docs,
            source,
            codes,
            policy,
            chapter,
            system,
            full_icd,
            split,
            out,
        }) => {
            let docs = load_all(std::slice::from_ref(&docs), &source.source)?;
            let codes = read_codes_csv(&codes)?;
            let cfg = AssignConfig {
                policy: match policy {
                    PolicyArg::DateMatched => AssignPolicy::DateMatched,
                    PolicyArg::PatientAll => AssignPolicy::PatientAll,
                },
                chapter_filter: chapter,
                system: system.map(|s| match s {
                    SystemArg::Icd10 => CodeSystem::Icd10,
                    SystemArg::Ops => CodeSystem::Ops,
                }),
                icd_category_level: !full_icd,
            };
            let assigned = assign_codes(&docs, &codes, &cfg)?;
            let task = build_classification_task(assigned.examples, &split_spec(&split)?)?;
            task.export(&out)?;
            eprintln!(
                "{} labels; {} documents without codes, {} without selected labels",
                task.labels.len(),
                assigned.dropped.len(),
                task.dropped.len()
            );
        }
        Cmd::Bench(BenchCmd::Split { input, split, out }) => {
            let spec = split_spec(&split)?;
            if input.extension().is_some_and(|e| e == "conll") {
                let text = std::fs::read_to_string(&input).map_err(|e| io_err(&input, e))?;
                let examples = parse_conll(&text)?;
                let idx = stratified_split(&examples, &spec)?;
                export_ner_task(&Splits::from_indices(&examples, &idx), &out)?;
            } else {
                let examples: Vec<LabeledExample> = read_jsonl(&input)?;
                let task = build_classification_task(examples, &spec)?;
                task.export(&out)?;
            }
        }
        Cmd::Eval(EvalCmd::Clf {
            gold,
            pred,
            labels,
            threshold,
            json,
        }) => {
            let gold: Vec<LabeledExample> = read_jsonl(&gold)?;
            let preds: Vec<ClassificationPrediction> = read_jsonl(&pred)?;
            let classes = match &labels {
                Some(p) => read_lines(p)?,
                None => gold
                    .iter()
                    .flat_map(|e| e.labels.iter().cloned())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
            };
            let scored = ScoredPredictions::from_examples(&classes, &gold, &preds)?;
            let report = multilabel_report(&scored, threshold)?;
            print!("{}", report.to_tsv());
            if let Some(p) = &json {
                write_json(p, &report)?;
            }
        }
        Cmd::Eval(EvalCmd::Ner {
            gold,
            pred,
            labels,
            json,
        }) => {
            let gold: Vec<TokenLabeledExample> = if gold.extension().is_some_and(|e| e == "conll") {
                parse_conll(&std::fs::read_to_string(&gold).map_err(|e| io_err(&gold, e))?)?
            } else {
                read_jsonl(&gold)?
            };
            let preds: Vec<NerPrediction> = read_jsonl(&pred)?;
            let by_id: std::collections::HashMap<&str, &NerPrediction> =
                preds.iter().map(|p| (p.id.as_str(), p)).collect();
            let mut predicted = Vec::with_capacity(gold.len());
            let mut scores = Vec::with_capacity(gold.len());
            for g in &gold {
                let p = by_id.get(g.doc_id.as_str()).ok_or_else(|| {
                    Error::InvalidInput(format!("no prediction for `{}`", g.doc_id))
                })?;
                predicted.push(TokenLabeledExample {
                    doc_id: g.doc_id.clone(),
                    tokens: g.tokens.clone(),
                    tags: p.tags.clone(),
                    patient_ref: None,
                });
                scores.push(p.scores.clone());
            }
            let token_scores: Option<Vec<_>> = scores.into_iter().collect();
            let classes = labels.as_deref().map(read_lines).transpose()?;
            let report = ner_token_report(
                &gold,
                &predicted,
                classes.as_deref(),
                token_scores.as_deref(),
            )?;
            print!("{}", report.to_tsv());
            if let Some(p) = &json {
                write_json(p, &report)?;
            }
        }
        Cmd::Hpo(HpoCmd::Run {
            space,
            cmd,
            trials,
            seed,
            startup,
            minimize,
            parallel,
            study,
        }) => {
            let mut s = if study.exists() {
                let s = Study::load(&study)?;
                eprintln!("resuming study with {} trials", s.trials.len());
                s
            } else {
                let space: SearchSpace = match &space {
                    Some(p) => read_json(p)?,
                    None => SearchSpace::default(),
                };
                let mut s = Study::new(space, trials, seed)?;
                s.n_startup_trials = startup;
                if minimize {
                    s.direction = Direction::Minimize;
                }
                s
            };
            s.n_trials = trials;
            let objective = CommandObjective { command: cmd };
            let pruner = MedianPruner {
                n_startup_trials: s.n_startup_trials,
            };
            let opts = RunOptions {
                parallelism: parallel,
                persist: Some(study.clone()),
            };
            let sampler = RandomSampler::new(s.seed);
            run_study(&mut s, &objective, &sampler, &pruner, &opts)?;
            s.save(&study)?;
            match medcorpus::hpo::best_trial(&s) {
                Ok(t) => println!("{}", serde_json::to_string_pretty(t)?),
                Err(e) => eprintln!("warning: {e}"),
            }
        }
        Cmd::PretrainConfig { phase } => {
            let cfg = emit_pretrain_config(phase);
            for w in &cfg.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        Cmd::Pipeline { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let manifest = run_pipeline(&cfg)?;
            for s in &manifest.stages {
                eprintln!("{:<10} {:>8} -> {:>8}", s.stage, s.count_in, s.count_out);
            }
        }
    }
    Ok(())
}
