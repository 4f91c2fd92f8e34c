//! Writes a small config and runs the whole ingest to stats pipeline, then
//! prints the pretraining configs of both phases.
//!
//! Run with `cargo run -p medcorpus --example run_pipeline`.

use medcorpus::corpus::write_documents;
use medcorpus::pipeline::{emit_pretrain_config, run_pipeline, Phase, PipelineConfig};
use medcorpus::synth::{name_date_corpus, near_duplicate_corpus};

fn main() -> medcorpus::Result<()> {
    let dir = std::env::temp_dir().join("medcorpus-pipeline-example");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).map_err(|e| medcorpus::Error::InvalidInput(e.to_string()))?;

    write_documents(
        dir.join("reports.jsonl"),
        &near_duplicate_corpus(2_000, 0.1, 1).docs,
    )?;
    let letters = name_date_corpus(200, 2);
    write_documents(dir.join("letters.jsonl"), &letters.docs)?;
    std::fs::write(dir.join("names.txt"), letters.gazetteer.join("\n"))
        .map_err(|e| medcorpus::Error::InvalidInput(e.to_string()))?;

    let config = serde_json::json!({
        "inputs": [
            {"path": "reports.jsonl", "source": "radiology-report"},
            {"path": "letters.jsonl", "source": "ehr"}
        ],
        "out_dir": "out",
        "anonymize": {"gazetteer": "names.txt"}
    });
    std::fs::write(dir.join("config.json"), config.to_string())
        .map_err(|e| medcorpus::Error::InvalidInput(e.to_string()))?;

    let cfg = PipelineConfig::load(dir.join("config.json"))?;
    let manifest = run_pipeline(&cfg)?;
    for stage in &manifest.stages {
        println!(
            "{:<10} {:>6} -> {:<6} {:?}",
            stage.stage, stage.count_in, stage.count_out, stage.counters
        );
    }
    print!(
        "{}",
        std::fs::read_to_string(dir.join("out/05-stats.tsv")).unwrap_or_default()
    );

    for phase in [Phase::One, Phase::Two] {
        println!("{}", serde_json::to_string(&emit_pretrain_config(phase))?);
    }
    Ok(())
}
