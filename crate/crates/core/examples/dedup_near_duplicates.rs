//! Near-duplicate removal on a corpus with planted copies, checked against
//! the exhaustive reference on a small sample.
//!
//! Run with `cargo run --release -p medcorpus --example dedup_near_duplicates`.

use std::time::Instant;

use medcorpus::dedup::{
    dedup_documents, dedup_exact, dedup_indexed, vectorize, AnalyzerConfig, DedupConfig,
};
use medcorpus::synth::near_duplicate_corpus;

fn main() -> medcorpus::Result<()> {
    let analyzer = AnalyzerConfig::default();
    let cfg = DedupConfig::default();

    let small = near_duplicate_corpus(800, 0.2, 3);
    let vectors = small
        .docs
        .iter()
        .map(|d| vectorize(d.id.clone(), &d.text, &analyzer))
        .collect::<medcorpus::Result<Vec<_>>>()?;
    let exact = dedup_exact(&vectors, &cfg)?;
    let fast = dedup_indexed(&vectors, &cfg)?;
    println!(
        "800 docs: exact removed {} after {} comparisons, indexed removed {} after {}; same outcome: {}",
        exact.n_removed,
        exact.pairs_examined,
        fast.n_removed,
        fast.pairs_examined,
        exact.same_outcome(&fast)
    );

    let big = near_duplicate_corpus(20_000, 0.19, 4);
    let planted = big.n_planted;
    let start = Instant::now();
    let (kept, reports) = dedup_documents(big.docs, &analyzer, &cfg)?;
    println!(
        "20000 docs with {planted} planted copies: kept {} in {:.1?}",
        kept.len(),
        start.elapsed()
    );
    for (source, r) in &reports {
        println!(
            "  {source}: removed {} in {} clusters",
            r.n_removed,
            r.clusters.len()
        );
    }
    Ok(())
}
