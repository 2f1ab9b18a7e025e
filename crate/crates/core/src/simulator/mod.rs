//! Synthetic cohorts run through the execution engine.
//!
//! Trial `t` of a run draws all its randomness from
//! [`SplitMix64::for_trial`]`(seed, t)`, so results do not depend on thread
//! count or scheduling. Aggregates are exact integer sums until the final
//! division.

mod analytic;
mod model;
mod rng;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    Engine, EngineConfig, EngineError, NextAssignment, SessionMeta, SessionStatus,
};
use crate::fragment::{LearningFragment, Modality, NodeId};

pub use analytic::analytic_expected_steps;
pub use model::{AnswerDistribution, StudentModel};
pub use rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid student model: {0}")]
    InvalidModel(String),
    #[error("node `{0}` is abstract; refine the fragment first")]
    Unrefined(NodeId),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("absorption is not certain: from `{0}` the session can never complete")]
    NotAbsorbing(NodeId),
    #[error("traversal is not a Markov chain: {0}")]
    NotMarkov(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub trials: u64,
    pub seed: u64,
    pub completed: u64,
    pub completion_rate: f64,
    /// Submissions per trial.
    pub mean_steps: f64,
    pub steps_stderr: f64,
    /// Total submissions made at each node over all trials.
    pub visits: BTreeMap<NodeId, u64>,
    /// Nodes off the all-pass path.
    pub remediation_nodes: BTreeSet<NodeId>,
    pub remediation_rate: f64,
    /// Trials that did not complete, by reason.
    pub failures: BTreeMap<String, u64>,
}

impl Metrics {
    /// Canonical bytes: two-space indented JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("metrics always serialize");
        bytes.push(b'\n');
        bytes
    }
}

#[derive(Debug, Clone, Default)]
struct Totals {
    completed: u64,
    steps: u64,
    steps_sq: u128,
    visits: BTreeMap<NodeId, u64>,
    remediated: u64,
    failures: BTreeMap<String, u64>,
}

impl Totals {
    fn merge(mut self, other: Totals) -> Totals {
        self.completed += other.completed;
        self.steps += other.steps;
        self.steps_sq += other.steps_sq;
        self.remediated += other.remediated;
        for (k, v) in other.visits {
            *self.visits.entry(k).or_default() += v;
        }
        for (k, v) in other.failures {
            *self.failures.entry(k).or_default() += v;
        }
        self
    }
}

/// Nodes visited when every submission passes, in order.
pub fn all_pass_path(engine: &Engine) -> Result<Vec<NodeId>, SimulationError> {
    let caps: BTreeSet<Modality> = Modality::ALL.into();
    let mut session = engine.start_session("all-pass", &caps, trial_meta(0))?;
    let model = StudentModel::uniform(1.0);
    let mut rng = SplitMix64::new(0);
    let mut path = Vec::new();
    while session.status == SessionStatus::Active {
        let node = &engine.fragment().nodes[&session.current];
        path.push(node.id.clone());
        let submission = model.sample(node, engine.config().output_grader, &mut rng)?;
        engine.submit(&mut session, submission)?;
    }
    Ok(path)
}

fn trial_meta(t: u64) -> SessionMeta {
    SessionMeta {
        id: format!("trial-{t}"),
        created_at: String::new(),
    }
}

fn run_trial(
    engine: &Engine,
    model: &StudentModel,
    seed: u64,
    t: u64,
    remediation: &BTreeSet<NodeId>,
) -> Totals {
    let caps: BTreeSet<Modality> = Modality::ALL.into();
    let mut totals = Totals::default();
    let mut rng = SplitMix64::for_trial(seed, t);
    let fail = |totals: &mut Totals, reason: &str| {
        *totals.failures.entry(reason.to_string()).or_default() += 1;
    };
    let mut session = match engine.start_session("synthetic", &caps, trial_meta(t)) {
        Ok(s) => s,
        Err(_) => {
            fail(&mut totals, "EngineError");
            return totals;
        }
    };
    let mut remediated = false;
    loop {
        let node = &engine.fragment().nodes[&session.current];
        *totals.visits.entry(node.id.clone()).or_default() += 1;
        remediated |= remediation.contains(&node.id);
        let step = model
            .sample(node, engine.config().output_grader, &mut rng)
            .map_err(|_| ())
            .and_then(|s| engine.submit(&mut session, s).map_err(|_| ()));
        match step {
            Err(()) => {
                fail(&mut totals, "EngineError");
                break;
            }
            Ok(r) => match r.next {
                NextAssignment::Completed => {
                    totals.completed += 1;
                    break;
                }
                NextAssignment::Failed { reason } => {
                    fail(&mut totals, reason.as_str());
                    break;
                }
                NextAssignment::Move { .. } | NextAssignment::Stay => {}
            },
        }
    }
    let steps = u64::from(session.steps);
    totals.steps = steps;
    totals.steps_sq = u128::from(steps) * u128::from(steps);
    totals.remediated = u64::from(remediated);
    totals
}

/// Runs `trials` synthetic learners through `fragment`.
pub fn simulate(
    fragment: &LearningFragment,
    model: &StudentModel,
    trials: u64,
    seed: u64,
    config: EngineConfig,
) -> Result<Metrics, SimulationError> {
    if trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    model.validate()?;
    if let Some(node) = fragment.abstract_nodes().next() {
        return Err(SimulationError::Unrefined(node.id.clone()));
    }
    let engine = Engine::new(fragment.clone(), Vec::new(), config)?;
    let on_path: BTreeSet<NodeId> = all_pass_path(&engine)?.into_iter().collect();
    let remediation: BTreeSet<NodeId> = fragment
        .nodes
        .keys()
        .filter(|id| !on_path.contains(*id))
        .cloned()
        .collect();

    let totals = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(&engine, model, seed, t, &remediation))
        .reduce(Totals::default, Totals::merge);

    let n = trials as f64;
    let mean_steps = totals.steps as f64 / n;
    // Sample variance from exact sums: (n·Σx² − (Σx)²) / (n(n−1)).
    let steps_stderr = if trials > 1 {
        let sum = u128::from(totals.steps);
        let numerator = u128::from(trials) * totals.steps_sq - sum * sum;
        let variance = numerator as f64 / (n * (n - 1.0));
        (variance / n).sqrt()
    } else {
        0.0
    };
    Ok(Metrics {
        trials,
        seed,
        completed: totals.completed,
        completion_rate: totals.completed as f64 / n,
        mean_steps,
        steps_stderr,
        visits: totals.visits,
        remediation_nodes: remediation,
        remediation_rate: totals.remediated as f64 / n,
        failures: totals.failures,
    })
}

/// The failure reason with the most trials, if any trial failed.
pub fn dominant_failure(metrics: &Metrics) -> Option<&str> {
    metrics
        .failures
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(k, _)| k.as_str())
}
