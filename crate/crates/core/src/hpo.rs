//! Hyperparameter search: independent random sampling, median pruning on
//! intermediate values, and a study runner with JSON persistence.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    /// Log-uniform range.
    pub learning_rate: (f64, f64),
    pub batch_size: Vec<u32>,
    /// Inclusive integer range.
    pub warmup_steps: (u32, u32),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate: (1e-5, 1e-4),
            batch_size: vec![8, 16],
            warmup_steps: (0, 1000),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.learning_rate;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "bad learning-rate range [{lo}, {hi}]"
            )));
        }
        if self.batch_size.is_empty() {
            return Err(Error::Config("batch-size choices must not be empty".into()));
        }
        if self.warmup_steps.0 > self.warmup_steps.1 {
            return Err(Error::Config("warmup range is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub learning_rate: f64,
    pub batch_size: u32,
    pub warmup_steps: u32,
}

pub trait Sampler: Sync {
    /// Parameters for trial `trial_id`; must depend only on the sampler's
    /// state and the id, so resumed and parallel studies sample alike.
    fn sample(&self, space: &SearchSpace, trial_id: usize) -> Params;
}

/// Independent draws: log-uniform learning rate, uniform batch size and
/// warmup. Each trial reads its own ChaCha stream.
#[derive(Debug, Clone)]
pub struct RandomSampler {
    seed: u64,
}

impl RandomSampler {
    pub fn new(seed: u64) -> Self {
        RandomSampler { seed }
    }
}

impl Sampler for RandomSampler {
    fn sample(&self, space: &SearchSpace, trial_id: usize) -> Params {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial_id as u64);
        let (lo, hi) = space.learning_rate;
        let learning_rate = if lo == hi {
            lo
        } else {
            rng.gen_range(lo.ln()..hi.ln()).exp().clamp(lo, hi)
        };
        let batch_size = space.batch_size[rng.gen_range(0..space.batch_size.len())];
        let warmup_steps = rng.gen_range(space.warmup_steps.0..=space.warmup_steps.1);
        Params {
            learning_rate,
            batch_size,
            warmup_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

impl Direction {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialState {
    Running,
    Pruned,
    Complete,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub step: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: usize,
    pub params: Params,
    pub intermediate: Vec<Report>,
    pub state: TrialState,
    pub final_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    /// Best intermediate value reported at or before `step`.
    pub fn best_up_to(&self, step: u64, direction: Direction) -> Option<f64> {
        self.intermediate
            .iter()
            .take_while(|r| r.step <= step)
            .map(|r| r.value)
            .reduce(|a, b| if direction.better(b, a) { b } else { a })
    }
}

pub trait Pruner: Sync {
    /// `completed` holds the finished trials visible at decision time.
    fn should_prune(
        &self,
        completed: &[&Trial],
        trial: &Trial,
        step: u64,
        direction: Direction,
    ) -> bool;
}

/// Prunes a trial whose best value so far is strictly worse than the median
/// of the completed trials' best values up to the same step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedianPruner {
    pub n_startup_trials: usize,
}

impl Default for MedianPruner {
    fn default() -> Self {
        MedianPruner {
            n_startup_trials: 5,
        }
    }
}

impl Pruner for MedianPruner {
    fn should_prune(
        &self,
        completed: &[&Trial],
        trial: &Trial,
        step: u64,
        direction: Direction,
    ) -> bool {
        if completed.len() < self.n_startup_trials {
            return false;
        }
        let Some(current) = trial.best_up_to(step, direction) else {
            return false;
        };
        let mut bests: Vec<f64> = completed
            .iter()
            .filter_map(|t| t.best_up_to(step, direction))
            .collect();
        if bests.is_empty() {
            return false;
        }
        bests.sort_by(f64::total_cmp);
        let m = bests.len() / 2;
        let median = if bests.len() % 2 == 1 {
            bests[m]
        } else {
            (bests[m - 1] + bests[m]) / 2.0
        };
        direction.better(median, current)
    }
}

/// Why a trial ended early.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialError {
    Pruned,
    Failed(String),
}

/// Handed to the objective for reporting intermediate values.
pub struct TrialContext<'a> {
    trial: Trial,
    completed: &'a [&'a Trial],
    pruner: &'a dyn Pruner,
    direction: Direction,
}

impl TrialContext<'_> {
    pub fn trial_id(&self) -> usize {
        self.trial.id
    }

    /// Records a value; returns `Err(Pruned)` when the pruner stops the
    /// trial. Steps must strictly increase.
    pub fn report(&mut self, step: u64, value: f64) -> std::result::Result<(), TrialError> {
        if let Some(last) = self.trial.intermediate.last() {
            if step <= last.step {
                return Err(TrialError::Failed(format!(
                    "step {step} reported after step {}",
                    last.step
                )));
            }
        }
        if value.is_nan() {
            return Err(TrialError::Failed(format!("NaN reported at step {step}")));
        }
        self.trial.intermediate.push(Report { step, value });
        if self
            .pruner
            .should_prune(self.completed, &self.trial, step, self.direction)
        {
            return Err(TrialError::Pruned);
        }
        Ok(())
    }
}

pub trait Objective: Sync {
    fn run(
        &self,
        params: &Params,
        ctx: &mut TrialContext<'_>,
    ) -> std::result::Result<f64, TrialError>;
}

impl<F> Objective for F
where
    F: Fn(&Params, &mut TrialContext<'_>) -> std::result::Result<f64, TrialError> + Sync,
{
    fn run(
        &self,
        params: &Params,
        ctx: &mut TrialContext<'_>,
    ) -> std::result::Result<f64, TrialError> {
        self(params, ctx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub direction: Direction,
    pub n_trials: usize,
    pub n_startup_trials: usize,
    pub seed: u64,
    pub space: SearchSpace,
    pub trials: Vec<Trial>,
}

impl Study {
    pub fn new(space: SearchSpace, n_trials: usize, seed: u64) -> Result<Self> {
        space.validate()?;
        Ok(Study {
            direction: Direction::Maximize,
            n_trials,
            n_startup_trials: MedianPruner::default().n_startup_trials,
            seed,
            space,
            trials: Vec::new(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes the study as JSON through a temporary file and a rename.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn completed(&self) -> Vec<&Trial> {
        self.trials
            .iter()
            .filter(|t| t.state == TrialState::Complete)
            .collect()
    }

    pub fn pruned_ids(&self) -> Vec<usize> {
        self.trials
            .iter()
            .filter(|t| t.state == TrialState::Pruned)
            .map(|t| t.id)
            .collect()
    }
}

/// Complete trial with the best final value; ties go to the lowest id.
pub fn best_trial(study: &Study) -> Result<&Trial> {
    let mut best: Option<&Trial> = None;
    for t in study
        .trials
        .iter()
        .filter(|t| t.state == TrialState::Complete)
    {
        let v = t.final_value.expect("complete trials carry a final value");
        if best.is_none_or(|b| study.direction.better(v, b.final_value.unwrap())) {
            best = Some(t);
        }
    }
    best.ok_or(Error::NoCompleteTrial)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Trials run concurrently per wave; 0 and 1 both mean sequential.
    pub parallelism: usize,
    /// Save the study here after every trial.
    pub persist: Option<PathBuf>,
}

/// Runs trials until the study holds `study.n_trials` of them, resuming
/// after any trials already present.
///
/// With parallelism above one, trials run in waves and each wave's pruning
/// decisions only see trials completed before the wave started, so pruning
/// is less aggressive than in sequential mode and only sequential runs are
/// reproducible byte for byte.
pub fn run_study(
    study: &mut Study,
    objective: &dyn Objective,
    sampler: &dyn Sampler,
    pruner: &dyn Pruner,
    opts: &RunOptions,
) -> Result<()> {
    study.space.validate()?;
    let width = opts.parallelism.max(1);
    while study.trials.len() < study.n_trials {
        let first = study.trials.len();
        let ids: Vec<usize> = (first..study.n_trials.min(first + width)).collect();
        let finished: Vec<Trial> = {
            let completed = study.completed();
            let run_one = |id: usize| {
                run_trial(
                    id,
                    sampler.sample(&study.space, id),
                    objective,
                    pruner,
                    &completed,
                    study.direction,
                )
            };
            if ids.len() == 1 {
                vec![run_one(ids[0])]
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> =
                        ids.iter().map(|&id| s.spawn(move || run_one(id))).collect();
                    handles
                        .into_iter()
                        .zip(&ids)
                        .map(|(h, &id)| {
                            h.join().unwrap_or_else(|_| Trial {
                                id,
                                params: sampler.sample(&study.space, id),
                                intermediate: Vec::new(),
                                state: TrialState::Failed,
                                final_value: None,
                                error: Some("objective panicked".into()),
                            })
                        })
                        .collect()
                })
            }
        };
        for t in finished {
            study.trials.push(t);
            if let Some(path) = &opts.persist {
                study.save(path)?;
            }
        }
    }
    Ok(())
}

fn run_trial(
    id: usize,
    params: Params,
    objective: &dyn Objective,
    pruner: &dyn Pruner,
    completed: &[&Trial],
    direction: Direction,
) -> Trial {
    let mut ctx = TrialContext {
        trial: Trial {
            id,
            params: params.clone(),
            intermediate: Vec::new(),
            state: TrialState::Running,
            final_value: None,
            error: None,
        },
        completed,
        pruner,
        direction,
    };
    let outcome = objective.run(&params, &mut ctx);
    let mut trial = ctx.trial;
    match outcome {
        Ok(v) if v.is_finite() => {
            trial.state = TrialState::Complete;
            trial.final_value = Some(v);
        }
        Ok(v) => {
            trial.state = TrialState::Failed;
            trial.error = Some(format!("non-finite final value {v}"));
        }
        Err(TrialError::Pruned) => trial.state = TrialState::Pruned,
        Err(TrialError::Failed(msg)) => {
            trial.state = TrialState::Failed;
            trial.error = Some(msg);
        }
    }
    trial
}

/// Runs an external command per trial through `sh -c`.
///
/// Parameters are appended as `--learning-rate`, `--batch-size` and
/// `--warmup-steps` flags and exported as `HPO_LEARNING_RATE`,
/// `HPO_BATCH_SIZE`, `HPO_WARMUP_STEPS` and `HPO_TRIAL_ID`. The command
/// prints `step=<int> value=<float>` lines while training and must exit 0
/// after printing `final=<float>`. Pruned commands are killed.
#[derive(Debug, Clone)]
pub struct CommandObjective {
    pub command: String,
}

/// One parsed line of objective output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveLine {
    Step(u64, f64),
    Final(f64),
}

pub fn parse_objective_line(line: &str) -> Option<ObjectiveLine> {
    let line = line.trim();
    if let Some(v) = line.strip_prefix("final=") {
        return v.trim().parse().ok().map(ObjectiveLine::Final);
    }
    let rest = line.strip_prefix("step=")?;
    let (step, value) = rest.split_once(char::is_whitespace)?;
    let value = value.trim().strip_prefix("value=")?;
    Some(ObjectiveLine::Step(step.parse().ok()?, value.parse().ok()?))
}

impl Objective for CommandObjective {
    fn run(
        &self,
        params: &Params,
        ctx: &mut TrialContext<'_>,
    ) -> std::result::Result<f64, TrialError> {
        let script = format!(
            "{} --learning-rate {} --batch-size {} --warmup-steps {}",
            self.command, params.learning_rate, params.batch_size, params.warmup_steps
        );
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&script)
            .env("HPO_LEARNING_RATE", params.learning_rate.to_string())
            .env("HPO_BATCH_SIZE", params.batch_size.to_string())
            .env("HPO_WARMUP_STEPS", params.warmup_steps.to_string())
            .env("HPO_TRIAL_ID", ctx.trial_id().to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| TrialError::Failed(format!("cannot start objective: {e}")))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let mut final_value = None;
        for line in BufReader::new(stdout).lines() {
            let line = line.map_err(|e| TrialError::Failed(e.to_string()))?;
            match parse_objective_line(&line) {
                Some(ObjectiveLine::Step(step, value)) => {
                    if let Err(e) = ctx.report(step, value) {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(e);
                    }
                }
                Some(ObjectiveLine::Final(v)) => final_value = Some(v),
                None => {}
            }
        }
        let status = child
            .wait()
            .map_err(|e| TrialError::Failed(e.to_string()))?;
        if !status.success() {
            return Err(TrialError::Failed(format!(
                "objective exited with {status}"
            )));
        }
        final_value.ok_or_else(|| TrialError::Failed("objective printed no final= line".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn done(id: usize, values: &[(u64, f64)]) -> Trial {
        Trial {
            id,
            params: Params {
                learning_rate: 1e-5,
                batch_size: 8,
                warmup_steps: 0,
            },
            intermediate: values
                .iter()
                .map(|&(step, value)| Report { step, value })
                .collect(),
            state: TrialState::Complete,
            final_value: values.last().map(|v| v.1),
            error: None,
        }
    }

    #[test]
    fn median_examples() {
        let completed = [
            done(0, &[(1, 0.5)]),
            done(1, &[(1, 0.6)]),
            done(2, &[(1, 0.7)]),
        ];
        let refs: Vec<&Trial> = completed.iter().collect();
        let pruner = MedianPruner {
            n_startup_trials: 3,
        };
        let mut t = done(3, &[(1, 0.55)]);
        assert!(pruner.should_prune(&refs, &t, 1, Direction::Maximize));
        t.intermediate[0].value = 0.6;
        assert!(!pruner.should_prune(&refs, &t, 1, Direction::Maximize));
        let strict = MedianPruner::default();
        t.intermediate[0].value = 0.1;
        assert!(!strict.should_prune(&refs, &t, 1, Direction::Maximize));
    }

    #[test]
    fn median_uses_best_so_far_and_skips_missing_steps() {
        let completed = [
            done(0, &[(1, 0.9), (2, 0.1)]),
            done(1, &[(2, 0.5)]),
            done(2, &[(1, 0.2), (2, 0.3)]),
        ];
        let refs: Vec<&Trial> = completed.iter().collect();
        let pruner = MedianPruner {
            n_startup_trials: 1,
        };
        // bests at step 1: {0.9, 0.2} -> median 0.55
        assert!(pruner.should_prune(&refs, &done(9, &[(1, 0.5)]), 1, Direction::Maximize));
        // bests at step 2: {0.9, 0.5, 0.3} -> median 0.5
        assert!(!pruner.should_prune(
            &refs,
            &done(9, &[(1, 0.5), (2, 0.4)]),
            2,
            Direction::Maximize
        ));
    }

    #[test]
    fn sampler_is_deterministic_and_in_range() {
        let space = SearchSpace::default();
        let s = RandomSampler::new(7);
        assert_eq!(s.sample(&space, 3), RandomSampler::new(7).sample(&space, 3));
        assert_ne!(s.sample(&space, 3), s.sample(&space, 4));
        for i in 0..200 {
            let p = s.sample(&space, i);
            assert!((1e-5..=1e-4).contains(&p.learning_rate));
            assert!([8, 16].contains(&p.batch_size));
            assert!(p.warmup_steps <= 1000);
        }
        let point = SearchSpace {
            learning_rate: (3e-5, 3e-5),
            batch_size: vec![16],
            warmup_steps: (10, 10),
        };
        assert_eq!(
            s.sample(&point, 0),
            Params {
                learning_rate: 3e-5,
                batch_size: 16,
                warmup_steps: 10
            }
        );
    }

    #[test]
    fn log_uniform_ks() {
        let space = SearchSpace::default();
        let s = RandomSampler::new(1);
        let mut u: Vec<f64> = (0..10_000)
            .map(|i| s.sample(&space, i).learning_rate.log10() + 5.0)
            .collect();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS {ks}");
    }

    #[test]
    fn identity_objective_and_best() {
        let mut study = Study::new(SearchSpace::default(), 20, 3).unwrap();
        let obj = |p: &Params, _: &mut TrialContext<'_>| Ok(p.learning_rate);
        run_study(
            &mut study,
            &obj,
            &RandomSampler::new(3),
            &MedianPruner::default(),
            &RunOptions::default(),
        )
        .unwrap();
        let best = best_trial(&study).unwrap();
        let max = study
            .trials
            .iter()
            .map(|t| t.params.learning_rate)
            .fold(0.0, f64::max);
        assert_eq!(best.final_value, Some(max));

        let mut empty = Study::new(SearchSpace::default(), 0, 3).unwrap();
        run_study(
            &mut empty,
            &obj,
            &RandomSampler::new(3),
            &MedianPruner::default(),
            &RunOptions::default(),
        )
        .unwrap();
        assert!(matches!(best_trial(&empty), Err(Error::NoCompleteTrial)));
    }

    #[test]
    fn best_ties_go_to_lowest_id() {
        let mut study = Study::new(SearchSpace::default(), 3, 0).unwrap();
        study.trials = vec![
            done(0, &[(1, 0.8)]),
            done(1, &[(1, 0.9)]),
            done(2, &[(1, 0.9)]),
        ];
        assert_eq!(best_trial(&study).unwrap().id, 1);
    }

    #[test]
    fn failures_and_bad_steps_are_recorded() {
        let mut study = Study::new(SearchSpace::default(), 3, 0).unwrap();
        let obj = |_: &Params, ctx: &mut TrialContext<'_>| {
            if ctx.trial_id() == 1 {
                return Err(TrialError::Failed("boom".into()));
            }
            ctx.report(2, 0.5)?;
            ctx.report(2, 0.6)?;
            Ok(1.0)
        };
        run_study(
            &mut study,
            &obj,
            &RandomSampler::new(0),
            &MedianPruner::default(),
            &RunOptions::default(),
        )
        .unwrap();
        assert!(study.trials.iter().all(|t| t.state == TrialState::Failed));
        assert_eq!(study.trials[1].error.as_deref(), Some("boom"));
    }

    #[test]
    fn objective_lines() {
        assert_eq!(
            parse_objective_line("step=3 value=0.25"),
            Some(ObjectiveLine::Step(3, 0.25))
        );
        assert_eq!(
            parse_objective_line("final=0.9"),
            Some(ObjectiveLine::Final(0.9))
        );
        assert_eq!(parse_objective_line("loss 0.3"), None);
        assert_eq!(parse_objective_line("step=x value=1"), None);
    }

    #[test]
    fn command_objective_reports_and_prunes() {
        let mut study = Study::new(SearchSpace::default(), 7, 0).unwrap();
        let script = r#"if [ "$HPO_TRIAL_ID" -ge 5 ]; then v=0.1; else v=0.$HPO_TRIAL_ID; fi; for s in 1 2 3; do echo "step=$s value=$v"; done; echo "final=$v"; true"#;
        let obj = CommandObjective {
            command: format!("sh -c '{}' hpo", script.replace('\'', "'\\''")),
        };
        run_study(
            &mut study,
            &obj,
            &RandomSampler::new(0),
            &MedianPruner::default(),
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(study.completed().len(), 5);
        assert_eq!(study.pruned_ids(), vec![5, 6]);
        assert_eq!(study.trials[5].intermediate.len(), 1);
        assert_eq!(best_trial(&study).unwrap().final_value, Some(0.4));
    }

    proptest! {
        #[test]
        fn no_pruning_before_startup(n_startup in 1usize..8, values in prop::collection::vec(0.0f64..1.0, 1..15)) {
            let mut study = Study::new(SearchSpace::default(), values.len(), 0).unwrap();
            let obj = |_: &Params, ctx: &mut TrialContext<'_>| {
                let v = values[ctx.trial_id()];
                ctx.report(1, v)?;
                Ok(v)
            };
            let pruner = MedianPruner { n_startup_trials: n_startup };
            run_study(&mut study, &obj, &RandomSampler::new(0), &pruner, &RunOptions::default()).unwrap();
            for t in &study.trials {
                let done_before = study.trials[..t.id].iter().filter(|x| x.state == TrialState::Complete).count();
                if t.state == TrialState::Pruned {
                    prop_assert!(done_before >= n_startup);
                }
            }
        }

        #[test]
        fn dominating_trials_survive(values in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 6..15)) {
            let mut study = Study::new(SearchSpace::default(), values.len() + 1, 0).unwrap();
            let n = values.len();
            let obj = |_: &Params, ctx: &mut TrialContext<'_>| {
                let curve = if ctx.trial_id() == n { vec![1.0; 3] } else { values[ctx.trial_id()].clone() };
                for (s, v) in curve.iter().enumerate() {
                    ctx.report(s as u64, *v)?;
                }
                Ok(*curve.last().unwrap())
            };
            run_study(&mut study, &obj, &RandomSampler::new(0), &MedianPruner::default(), &RunOptions::default()).unwrap();
            prop_assert_eq!(study.trials[n].state, TrialState::Complete);
        }
    }
}
