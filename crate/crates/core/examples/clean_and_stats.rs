//! Per-source cleaning and the corpus statistics table.
//!
//! Run with `cargo run -p medcorpus --example clean_and_stats`.

use medcorpus::corpus::{
    clean_corpus, compute_corpus_stats, CleanPolicySet, MbUnit, RawDocument, SourceKind,
};
use medcorpus::synth::ReportGenerator;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let reports = ReportGenerator::new(5_000, 1.0, 5..60, 1);
    let mut docs: Vec<RawDocument> = (0..200)
        .map(|i| {
            let text = medcorpus::synth::render_sentences(&reports.words(&mut rng), &mut rng);
            RawDocument::new(format!("rad-{i}"), SourceKind::RadiologyReport, text)
        })
        .collect();
    // a thesis of a few sentences, far below the page limit
    docs.push(RawDocument::new(
        "thesis-1",
        SourceKind::Thesis,
        "Die Arbeit untersucht den Verlauf der Erkrankung. Tabelle 3 12,4 17,9 22,1.",
    ));

    let (kept, rejects) = clean_corpus(docs, &CleanPolicySet::default());
    println!("kept {} documents, rejected {}", kept.len(), rejects.len());
    for r in rejects.iter().take(3) {
        println!(
            "  {} ({}, {} chars): {:?}",
            r.id, r.source, r.n_chars, r.reason
        );
    }

    let stats = compute_corpus_stats(&kept);
    print!("{}", stats.to_tsv(MbUnit::Decimal));
}
