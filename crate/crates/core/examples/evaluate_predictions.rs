//! Multi-label and token-level evaluation reports from noisy predictions.
//!
//! Run with `cargo run -p medcorpus --example evaluate_predictions`.

use medcorpus::benchmark::TokenLabeledExample;
use medcorpus::metrics::{multilabel_report, ner_token_report, ScoredPredictions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> medcorpus::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let classes: Vec<String> = ["Fraktur", "Erguss", "Pneumothorax", "Amputation"]
        .map(String::from)
        .to_vec();
    let prevalence = [0.3, 0.2, 0.05, 0.0];
    let n = 400;
    let mut scores = Vec::new();
    let mut truths = Vec::new();
    for &p in &prevalence {
        let t: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
        let s: Vec<f64> = t
            .iter()
            .map(|&y| (if y { 0.65 } else { 0.3 } + rng.gen_range(-0.3..0.3f64)).clamp(0.0, 1.0))
            .collect();
        scores.push(s);
        truths.push(t);
    }
    let report = multilabel_report(&ScoredPredictions::new(classes, scores, truths)?, 0.5)?;
    print!("{}", report.to_tsv());
    println!(
        "excluded from macro AUROC: {:?}\n",
        report.excluded_from_macro_auroc
    );

    let tokens = |n: usize| (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>();
    let tags = |t: &[&str]| t.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let gold = vec![
        TokenLabeledExample::new(
            "d1",
            tokens(6),
            tags(&["B-Diagnose", "I-Diagnose", "O", "B-Medikament", "O", "O"]),
        )?,
        TokenLabeledExample::new("d2", tokens(4), tags(&["O", "B-Diagnose", "O", "O"]))?,
    ];
    let predicted = vec![
        TokenLabeledExample::new(
            "d1",
            tokens(6),
            tags(&["B-Diagnose", "O", "O", "B-Medikament", "B-Medikament", "O"]),
        )?,
        TokenLabeledExample::new("d2", tokens(4), tags(&["O", "B-Diagnose", "O", "O"]))?,
    ];
    let ner = ner_token_report(&gold, &predicted, None, None)?;
    print!("{}", ner.to_tsv());
    Ok(())
}
