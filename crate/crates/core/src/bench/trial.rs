use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::BenchError;
use crate::assets;
use crate::dcg::TrainConfig;
use crate::language::Grammar;
use crate::perception::Mode;
use crate::policy::{Executive, Models, PolicyError, RunConfig};
use crate::semantic_map::{marginal_map, MarginalMap, Pose2};
use crate::simworld::{Scenario, WorldObject};
use crate::symbols::Vocabulary;

/// Vocabulary, grammar and trained heads shared by every trial.
#[derive(Clone)]
pub struct Pipeline {
    pub vocab: Vocabulary,
    pub grammar: Grammar,
    pub models: Arc<Models>,
}

impl Pipeline {
    /// Shipped vocabulary and grammar with heads trained on the shipped
    /// corpus.
    pub fn shipped() -> Result<Self, BenchError> {
        let vocab = assets::vocabulary()?;
        let grammar = assets::grammar(&vocab)?;
        let corpus = assets::corpus(&vocab)?;
        let models = Models::train(&corpus, &vocab, &TrainConfig::default())?;
        Ok(Self {
            vocab,
            grammar,
            models: Arc::new(models),
        })
    }

    /// Shipped vocabulary and grammar with heads loaded from `dir`.
    pub fn with_models(dir: &Path) -> Result<Self, BenchError> {
        let vocab = assets::vocabulary()?;
        let grammar = assets::grammar(&vocab)?;
        Ok(Self {
            vocab,
            grammar,
            models: Arc::new(Models::load(dir)?),
        })
    }

    pub fn executive(
        &self,
        scenario: &Scenario,
        overrides: &serde_json::Value,
        mode: Mode,
        seed: u64,
    ) -> Result<Executive, BenchError> {
        let config = RunConfig::layered(&[&scenario.config, overrides])?;
        Ok(Executive::new(
            scenario.clone(),
            config,
            mode,
            seed,
            self.vocab.clone(),
            self.grammar.clone(),
            self.models.clone(),
        )?)
    }
}

/// One row of `metrics.csv`. Times are simulated seconds except
/// `wall_clock_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub avg_behavior_inf_time_per_world_s: f64,
    pub avg_perception_loop_period_s: f64,
    pub replay_time_s: f64,
    pub task1_time_s: Option<f64>,
    pub task2_time_s: Option<f64>,
    pub total_detected_objects: usize,
    pub cycles: u64,
    pub success: bool,
    pub wall_clock_s: f64,
}

impl TrialMetrics {
    pub fn from_executive(exec: &Executive, success: bool, wall_clock_s: f64) -> Self {
        let a = &exec.acct;
        let task = |k: usize| exec.tasks.get(k).and_then(|t| t.duration);
        Self {
            scenario: exec.scenario.name.clone(),
            mode: exec.mode,
            seed: exec.seed,
            avg_behavior_inf_time_per_world_s: if a.inference_worlds == 0 {
                0.0
            } else {
                a.inference_time / a.inference_worlds as f64
            },
            avg_perception_loop_period_s: if exec.cycle == 0 {
                0.0
            } else {
                a.perception_time / exec.cycle as f64
            },
            replay_time_s: a.replay_time,
            task1_time_s: task(0),
            task2_time_s: task(1),
            total_detected_objects: a.detected.len(),
            cycles: exec.cycle,
            success,
            wall_clock_s,
        }
    }

    pub fn label(&self) -> String {
        format!("{}_{}_{}", self.scenario, self.mode, self.seed)
    }
}

/// Everything a finished trial leaves behind.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    /// Set when the trial stopped early (cycle cap or pipeline error).
    pub error: Option<String>,
    pub path: Vec<Pose2>,
    pub objects: Vec<WorldObject>,
    pub final_map: MarginalMap,
    /// Containers inspected, in order, with the cycle of first approach.
    pub inspections: Vec<(u64, String)>,
    /// Ground-truth object each completed task ended on.
    pub task_objects: Vec<Option<String>>,
    pub perception_time_s: f64,
}

impl TrialOutcome {
    fn from_executive(exec: &Executive, error: Option<String>, wall: f64) -> Self {
        let success = error.is_none() && exec.is_finished();
        Self {
            metrics: TrialMetrics::from_executive(exec, success, wall),
            error,
            path: exec.path.clone(),
            objects: exec.scenario.env.objects.clone(),
            final_map: marginal_map(&exec.set),
            inspections: exec.acct.inspections.clone(),
            task_objects: exec.tasks.iter().map(|t| t.object.clone()).collect(),
            perception_time_s: exec.acct.perception_time,
        }
    }
}

/// Runs the scenario script to completion or the cycle cap. A capped run is
/// still reported, as a failed trial.
pub fn run_trial(
    pipeline: &Pipeline,
    scenario: &Scenario,
    overrides: &serde_json::Value,
    mode: Mode,
    seed: u64,
) -> Result<TrialOutcome, BenchError> {
    let t0 = Instant::now();
    let mut exec = pipeline.executive(scenario, overrides, mode, seed)?;
    let error = match exec.run() {
        Ok(()) => None,
        Err(e @ PolicyError::CycleCapExceeded(_)) => Some(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    Ok(TrialOutcome::from_executive(&exec, error, t0.elapsed().as_secs_f64()))
}
