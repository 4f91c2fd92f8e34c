//! Random search with median pruning over simulated training curves, run
//! in parallel waves and persisted to a study file.
//!
//! Run with `cargo run -p medcorpus --example hpo_median_pruning`.

use medcorpus::hpo::{
    best_trial, run_study, MedianPruner, Params, RandomSampler, RunOptions, SearchSpace, Study,
    TrialContext, TrialError, TrialState,
};
use medcorpus::synth::learning_curve;

/// Validation AUROC of an imaginary fine-tuning run: best near lr 3e-5 and
/// batch size 16, slower to converge with long warmup.
fn simulate(p: &Params, ctx: &mut TrialContext<'_>) -> Result<f64, TrialError> {
    let lr_penalty = (p.learning_rate.log10() - 3e-5f64.log10()).powi(2) * 0.05;
    let bs_penalty = ((p.batch_size as f64).log2() - 4.0).abs() * 0.01;
    let plateau = 0.95 - lr_penalty - bs_penalty;
    let rate = 1.0 / (1.0 + p.warmup_steps as f64 / 200.0);
    let mut last = 0.0;
    for (step, value) in learning_curve(plateau, rate, 10) {
        ctx.report(step, value)?;
        last = value;
    }
    Ok(last)
}

fn main() -> medcorpus::Result<()> {
    let dir = std::env::temp_dir().join("medcorpus-hpo-example");
    std::fs::create_dir_all(&dir).map_err(|e| medcorpus::Error::InvalidInput(e.to_string()))?;
    let path = dir.join("study.json");
    let _ = std::fs::remove_file(&path);

    let mut study = Study::new(SearchSpace::default(), 100, 42)?;
    let opts = RunOptions {
        parallelism: 4,
        persist: Some(path.clone()),
    };
    run_study(
        &mut study,
        &simulate,
        &RandomSampler::new(42),
        &MedianPruner::default(),
        &opts,
    )?;

    let pruned = study
        .trials
        .iter()
        .filter(|t| t.state == TrialState::Pruned)
        .count();
    let best = best_trial(&study)?;
    println!(
        "{} trials, {} completed, {pruned} pruned",
        study.trials.len(),
        study.completed().len()
    );
    println!(
        "best trial {}: lr {:.2e}, batch size {}, warmup {} -> {:.4}",
        best.id,
        best.params.learning_rate,
        best.params.batch_size,
        best.params.warmup_steps,
        best.final_value.unwrap_or(f64::NAN)
    );
    println!("study saved to {}", path.display());
    Ok(())
}
