use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};

use super::{SimulationError, StudentModel};
use crate::condition::{variables, EvaluationContext};
use crate::engine::{Engine, EngineConfig};
use crate::fragment::{LearningFragment, NodeId};

/// Expected number of submissions from the entry until completion.
///
/// With unlimited attempts and conditions that ignore `attempts`, each
/// submission depends only on the current node, so traversal is an absorbing
/// Markov chain over nodes. Every outcome class of the model is graded with
/// the real grader and routed with the engine's own edge selection; the
/// result is the entry row sum of the fundamental matrix `(I − Q)⁻¹`.
pub fn analytic_expected_steps(
    fragment: &LearningFragment,
    model: &StudentModel,
) -> Result<f64, SimulationError> {
    model.validate()?;
    if let Some(node) = fragment.abstract_nodes().next() {
        return Err(SimulationError::Unrefined(node.id.clone()));
    }
    if let Some(node) = fragment.nodes.values().find(|n| n.max_attempts.is_some()) {
        return Err(SimulationError::NotMarkov(format!(
            "node `{}` limits attempts",
            node.id
        )));
    }
    for edge in &fragment.edges {
        let condition = edge.condition.compile().map_err(|source| {
            SimulationError::Engine(crate::engine::EngineError::Condition {
                edge: edge.id.clone(),
                source,
            })
        })?;
        if variables(&condition).contains("attempts") {
            return Err(SimulationError::NotMarkov(format!(
                "edge `{}` depends on attempts",
                edge.id
            )));
        }
    }
    let config = EngineConfig::default();
    let engine = Engine::new(fragment.clone(), Vec::new(), config.clone())?;

    // Per node: successor probabilities and the probability of completing.
    let mut moves: BTreeMap<&NodeId, BTreeMap<NodeId, f64>> = BTreeMap::new();
    let mut completes: BTreeMap<&NodeId, f64> = BTreeMap::new();
    for (id, node) in &fragment.nodes {
        let out = moves.entry(id).or_default();
        for (p, submission) in model.distribution(node, config.output_grader)? {
            if p <= 0.0 {
                continue;
            }
            let outcome = engine.grade(id, &submission)?;
            let ctx = EvaluationContext {
                passed: outcome.passed,
                score: outcome.score,
                answer: outcome.answer.clone(),
                label: outcome.label.clone(),
                attempts: 1,
                kind: node.kind.as_str().to_string(),
            };
            match engine.select_edge(id, &ctx)? {
                Some((_, target)) => *out.entry(target.clone()).or_default() += p,
                None if outcome.passed && fragment.is_exit(id) => {
                    *completes.entry(id).or_default() += p
                }
                None => *out.entry(id.clone()).or_default() += p,
            }
        }
    }

    // Transient states: nodes reachable from the entry.
    let mut states: Vec<&NodeId> = Vec::new();
    let mut seen = BTreeSet::from([&fragment.entry]);
    let mut queue = VecDeque::from([&fragment.entry]);
    while let Some(id) = queue.pop_front() {
        states.push(id);
        for next in moves[id].keys() {
            let next = fragment.nodes.get_key_value(next).expect("edge targets exist").0;
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }

    // Every transient state must be able to reach completion.
    let mut can_finish: BTreeSet<&NodeId> = states
        .iter()
        .copied()
        .filter(|id| completes.get(id).copied().unwrap_or(0.0) > 0.0)
        .collect();
    loop {
        let before = can_finish.len();
        for id in &states {
            if moves[*id].keys().any(|n| can_finish.contains(n)) {
                can_finish.insert(id);
            }
        }
        if can_finish.len() == before {
            break;
        }
    }
    if let Some(stuck) = states.iter().find(|id| !can_finish.contains(*id)) {
        return Err(SimulationError::NotAbsorbing((*stuck).clone()));
    }

    let index: BTreeMap<&NodeId, usize> = states.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = states.len();
    let mut i_minus_q = DMatrix::<f64>::identity(n, n);
    for (i, id) in states.iter().enumerate() {
        for (target, p) in &moves[*id] {
            i_minus_q[(i, index[target])] -= p;
        }
    }
    let steps = i_minus_q
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or_else(|| SimulationError::NotAbsorbing(fragment.entry.clone()))?;
    Ok(steps[0])
}
