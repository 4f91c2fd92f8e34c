//! Builds an in-domain and an out-of-domain subword vocabulary and compares
//! their fertility on held-out in-domain text.
//!
//! Run with `cargo run --release -p medcorpus --example vocabulary_and_fertility`.

use medcorpus::synth::{clinical_corpus, general_corpus};
use medcorpus::tokenize::{build_vocab, measure_fertility, VocabConfig};

fn main() -> medcorpus::Result<()> {
    let cfg = VocabConfig {
        vocab_size: 800,
        ..VocabConfig::default()
    };
    let clinical = build_vocab(&clinical_corpus(5_000, 1), &cfg)?;
    let general = build_vocab(&general_corpus(5_000, 2), &cfg)?;

    let held_out = clinical_corpus(500, 3);
    let sample = &held_out[0];
    println!("{sample}");
    let pieces: Vec<&str> = clinical
        .tokenize(sample)
        .iter()
        .map(|&id| clinical.token(id).unwrap_or("?"))
        .collect();
    println!("{}\n", pieces.join(" "));

    for (name, vocab) in [("clinical", &clinical), ("general", &general)] {
        let report = measure_fertility(&held_out, vocab)?;
        println!(
            "{name:>8} vocabulary ({} tokens): {} words -> {} subwords, fertility {:.3}",
            vocab.len(),
            report.n_words,
            report.n_subwords,
            report.fertility
        );
    }
    Ok(())
}
