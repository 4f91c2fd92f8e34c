//! Attaches procedure codes to documents, keeps labels with enough test
//! support and writes a 1000/500/500 classification task.
//!
//! Run with `cargo run -p medcorpus --example benchmark_split [out-dir]`.

use medcorpus::benchmark::{assign_codes, build_classification_task, AssignConfig, SplitSpec};
use medcorpus::synth::coded_corpus;

fn main() -> medcorpus::Result<()> {
    let corpus = coded_corpus(2_000, 11);
    let assigned = assign_codes(&corpus.docs, &corpus.codes, &AssignConfig::surgery())?;
    println!(
        "{} documents labeled, {} without a matching code",
        assigned.examples.len(),
        assigned.dropped.len()
    );

    let spec = SplitSpec {
        seed: 7,
        ..SplitSpec::default()
    };
    let task = build_classification_task(assigned.examples, &spec)?;
    println!(
        "{} labels kept after {} selection rounds, {} documents left without labels",
        task.labels.len(),
        task.iterations,
        task.dropped.len()
    );
    print!("{}", task.distribution().to_tsv());

    if let Some(dir) = std::env::args().nth(1) {
        let files = task.export(&dir)?;
        println!("wrote {} to {dir}", files.join(", "));
    }
    Ok(())
}
