//! Name and date redaction with a gazetteer, followed by verification.
//!
//! Run with `cargo run -p medcorpus --example anonymize_reports`.

use medcorpus::anonymize::{anonymize_corpus, Gazetteer, MatchPolicy, Wildcards};
use medcorpus::synth::name_date_corpus;

fn main() -> medcorpus::Result<()> {
    let corpus = name_date_corpus(300, 8);
    let gazetteer = Gazetteer::new(corpus.gazetteer.iter().cloned(), MatchPolicy::CaseSensitive)?;
    let before: Vec<String> = corpus.docs.iter().take(3).map(|d| d.text.clone()).collect();

    let (docs, report) = anonymize_corpus(corpus.docs, &gazetteer, &Wildcards::default())?;
    for (old, new) in before.iter().zip(&docs) {
        println!("- {old}\n+ {}\n", new.text);
    }
    println!(
        "{} name spans and {} date spans in {} documents; residuals: {}",
        report.total_name_spans,
        report.total_date_spans,
        report.n_redacted_documents(),
        report.residuals.len()
    );

    // deleting names instead of inserting a wildcard
    let gazetteer = Gazetteer::new(["Müller"], MatchPolicy::CaseInsensitive)?;
    let doc = medcorpus::corpus::RawDocument::new(
        "x",
        medcorpus::corpus::SourceKind::Ehr,
        "Befund von Dr. MÜLLER vom 03.04.2020.",
    );
    let (docs, _) = anonymize_corpus(vec![doc], &gazetteer, &Wildcards::delete_names())?;
    println!("{}", docs[0].text);
    Ok(())
}
