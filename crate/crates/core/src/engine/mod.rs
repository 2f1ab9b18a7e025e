//! Session execution.
//!
//! An [`Engine`] wraps one refined, validated fragment together with the
//! gamification rules attached to it. Sessions are plain values; every
//! operation is a transition `Session × input → Session′ × output`, and a
//! rejected input leaves the session untouched.
//!
//! Lifecycle per activity: the current node is rendered for the session's
//! modalities ([`Engine::current_activity`]), a submission is graded by the
//! node kind's grader, the outgoing edges are evaluated in priority order
//! against the outcome, and the result is reported back together with the
//! next assignment ([`Engine::submit`]).

mod grading;
mod negotiate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition::{evaluate_condition, Condition, ConditionError, EvaluationContext};
use crate::fragment::{
    default_context_vars, validate_fragment, ActivityKind, EdgeId, KindData, LearningFragment,
    Modality, NodeId, ValidationReport,
};
use crate::gamification::{process_event, ActivityEvent, AwardRecord, GamificationState, Rule};

pub use grading::{
    complexity_estimate, count_keyword, grade_close_ended, grade_coding, grade_lesson,
    grade_quiz, OutputGrader, ValidationOutcome, OUTPUT_MARKER,
};
pub use negotiate::{negotiate, NegotiationReport, NodeNegotiation};

pub const DEFAULT_STEP_CAP: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Maximum number of submissions per session.
    pub step_cap: u32,
    pub output_grader: OutputGrader,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            step_cap: DEFAULT_STEP_CAP,
            output_grader: OutputGrader::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    AttemptsExhausted,
    StepCapExceeded,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::AttemptsExhausted => "AttemptsExhausted",
            FailureReason::StepCapExceeded => "StepCapExceeded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Submission {
    Lesson,
    CloseEnded { answer: String },
    Quiz { choices: Vec<usize> },
    Coding { source: String },
}

impl Submission {
    pub fn kind(&self) -> ActivityKind {
        match self {
            Submission::Lesson => ActivityKind::Lesson,
            Submission::CloseEnded { .. } => ActivityKind::CloseEnded,
            Submission::Quiz { .. } => ActivityKind::Quiz,
            Submission::Coding { .. } => ActivityKind::Coding,
        }
    }
}

/// What the learner does next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NextAssignment {
    Move { edge: EdgeId, target: NodeId },
    Stay,
    Completed,
    Failed { reason: FailureReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u32,
    pub node: NodeId,
    pub submission: Submission,
    pub outcome: ValidationOutcome,
    pub chosen_edge: Option<EdgeId>,
    pub event: ActivityEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub fragment_id: String,
    pub fragment_version: u32,
    pub learner_id: String,
    pub capabilities: BTreeSet<Modality>,
    pub current: NodeId,
    /// Submissions per node; never reset when a node is re-entered.
    pub attempts: BTreeMap<NodeId, u32>,
    pub steps: u32,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<FailureReason>,
    pub transcript: Vec<TranscriptEntry>,
    pub gamification: GamificationState,
    pub created_at: String,
}

impl Session {
    pub fn events(&self) -> impl Iterator<Item = &ActivityEvent> {
        self.transcript.iter().map(|t| &t.event)
    }
}

/// Accepted submission shape for the current activity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubmissionSchema {
    Lesson,
    CloseEnded,
    /// One index per item; `choices[i]` is the number of options of item `i`.
    Quiz { choices: Vec<usize> },
    Coding { output_marker: Option<String>, outputs: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedActivity {
    pub node: NodeId,
    pub kind: ActivityKind,
    pub title: String,
    pub modality: Modality,
    pub payload: String,
    pub submission_schema: SubmissionSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResult {
    pub outcome: ValidationOutcome,
    pub next: NextAssignment,
    pub awards: Vec<AwardRecord>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("fragment failed validation with {} error(s)", .0.errors.len())]
    InvalidFragment(ValidationReport),
    #[error("fragment still contains abstract nodes: {0:?}")]
    UnrefinedFragment(Vec<NodeId>),
    #[error("capabilities cannot render {}", describe_mismatch(.0))]
    CapabilityMismatch(BTreeMap<NodeId, BTreeSet<Modality>>),
    #[error("session is not active")]
    SessionNotActive,
    #[error("submission of kind {found} does not fit {expected} activity")]
    KindMismatch {
        expected: ActivityKind,
        found: ActivityKind,
    },
    #[error("submission shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("session belongs to fragment {found}, engine runs {expected}")]
    WrongFragment { expected: String, found: String },
    #[error("condition on edge `{edge}` failed: {source}")]
    Condition {
        edge: EdgeId,
        source: ConditionError,
    },
}

fn describe_mismatch(missing: &BTreeMap<NodeId, BTreeSet<Modality>>) -> String {
    missing
        .iter()
        .map(|(node, modalities)| {
            let m: Vec<_> = modalities.iter().map(|m| m.as_str()).collect();
            format!("{node} (needs one of {})", m.join("/"))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Identity and timestamp for a new session, minted by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionMeta {
    pub id: String,
    pub created_at: String,
}

#[derive(Debug, Clone)]
pub struct Engine {
    fragment: LearningFragment,
    rules: Vec<Rule>,
    config: EngineConfig,
    /// Compiled outgoing edges per node, in priority order.
    routes: BTreeMap<NodeId, Vec<(EdgeId, NodeId, Condition)>>,
}

impl Engine {
    /// Fails unless the fragment validates cleanly.
    pub fn new(
        fragment: LearningFragment,
        rules: Vec<Rule>,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        let report = validate_fragment(&fragment, &default_context_vars());
        if !report.is_publishable() {
            return Err(EngineError::InvalidFragment(report));
        }
        let mut routes: BTreeMap<NodeId, Vec<_>> = BTreeMap::new();
        for edge in &fragment.edges {
            let condition = edge.condition.compile().map_err(|source| EngineError::Condition {
                edge: edge.id.clone(),
                source,
            })?;
            routes
                .entry(edge.source.clone())
                .or_default()
                .push((edge.id.clone(), edge.target.clone(), condition));
        }
        Ok(Engine {
            fragment,
            rules,
            config,
            routes,
        })
    }

    pub fn fragment(&self) -> &LearningFragment {
        &self.fragment
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn start_session(
        &self,
        learner_id: &str,
        capabilities: &BTreeSet<Modality>,
        meta: SessionMeta,
    ) -> Result<Session, EngineError> {
        let unrefined: Vec<NodeId> = self.fragment.abstract_nodes().map(|n| n.id.clone()).collect();
        if !unrefined.is_empty() {
            return Err(EngineError::UnrefinedFragment(unrefined));
        }
        let report = negotiate(capabilities, &self.fragment);
        let missing = report.missing();
        if !missing.is_empty() {
            return Err(EngineError::CapabilityMismatch(missing));
        }
        Ok(Session {
            id: meta.id,
            fragment_id: self.fragment.id.clone(),
            fragment_version: self.fragment.version,
            learner_id: learner_id.to_string(),
            capabilities: capabilities.clone(),
            current: self.fragment.entry.clone(),
            attempts: BTreeMap::new(),
            steps: 0,
            status: SessionStatus::Active,
            failure_reason: None,
            transcript: Vec::new(),
            gamification: GamificationState::default(),
            created_at: meta.created_at,
        })
    }

    fn check_session(&self, session: &Session) -> Result<(), EngineError> {
        if session.fragment_id != self.fragment.id || session.fragment_version != self.fragment.version {
            return Err(EngineError::WrongFragment {
                expected: format!("{}@{}", self.fragment.id, self.fragment.version),
                found: format!("{}@{}", session.fragment_id, session.fragment_version),
            });
        }
        if session.status != SessionStatus::Active {
            return Err(EngineError::SessionNotActive);
        }
        Ok(())
    }

    /// Renders the current node in the first declared representation the
    /// session can display.
    pub fn current_activity(&self, session: &Session) -> Result<RenderedActivity, EngineError> {
        self.check_session(session)?;
        let node = &self.fragment.nodes[&session.current];
        let (modality, payload) = node
            .representations
            .iter()
            .find(|(m, _)| session.capabilities.contains(m))
            .ok_or_else(|| {
                EngineError::CapabilityMismatch(BTreeMap::from([(
                    node.id.clone(),
                    node.representations.keys().copied().collect(),
                )]))
            })?;
        let submission_schema = match &node.kind_data {
            KindData::Lesson(_) | KindData::Abstract(_) => SubmissionSchema::Lesson,
            KindData::CloseEnded(_) => SubmissionSchema::CloseEnded,
            KindData::Quiz(q) => SubmissionSchema::Quiz {
                choices: q.items.iter().map(|i| i.choices.len()).collect(),
            },
            KindData::Coding(c) => {
                let echo = self.config.output_grader == OutputGrader::Echo
                    && !c.grader.test_vectors.is_empty();
                SubmissionSchema::Coding {
                    output_marker: echo.then(|| OUTPUT_MARKER.to_string()),
                    outputs: if echo { c.grader.test_vectors.len() } else { 0 },
                }
            }
        };
        Ok(RenderedActivity {
            node: node.id.clone(),
            kind: node.kind,
            title: node.title.clone(),
            modality: *modality,
            payload: payload.clone(),
            submission_schema,
        })
    }

    /// Grades a submission against a node without touching any session.
    pub fn grade(&self, node: &str, submission: &Submission) -> Result<ValidationOutcome, EngineError> {
        let node = &self.fragment.nodes[node];
        if submission.kind() != node.kind {
            return Err(EngineError::KindMismatch {
                expected: node.kind,
                found: submission.kind(),
            });
        }
        match (&node.kind_data, submission) {
            (KindData::Lesson(_), Submission::Lesson) => Ok(grade_lesson()),
            (KindData::CloseEnded(data), Submission::CloseEnded { answer }) => {
                Ok(grade_close_ended(data, answer))
            }
            (KindData::Quiz(data), Submission::Quiz { choices }) => grade_quiz(data, choices),
            (KindData::Coding(data), Submission::Coding { source }) => {
                Ok(grade_coding(data, source, self.config.output_grader))
            }
            _ => Err(EngineError::KindMismatch {
                expected: node.kind,
                found: submission.kind(),
            }),
        }
    }

    /// First outgoing edge (in priority order) whose condition holds.
    pub fn select_edge(
        &self,
        node: &str,
        ctx: &EvaluationContext,
    ) -> Result<Option<(&EdgeId, &NodeId)>, EngineError> {
        for (edge, target, condition) in self.routes.get(node).map(Vec::as_slice).unwrap_or(&[]) {
            let fires = evaluate_condition(condition, ctx).map_err(|source| EngineError::Condition {
                edge: edge.clone(),
                source,
            })?;
            if fires {
                return Ok(Some((edge, target)));
            }
        }
        Ok(None)
    }

    pub fn submit(
        &self,
        session: &mut Session,
        submission: Submission,
    ) -> Result<SubmitResult, EngineError> {
        self.check_session(session)?;
        let node_id = session.current.clone();
        let node = &self.fragment.nodes[&node_id];
        let outcome = self.grade(&node_id, &submission)?;

        let attempts = session.attempts.get(&node_id).copied().unwrap_or(0) + 1;
        let ctx = EvaluationContext {
            passed: outcome.passed,
            score: outcome.score,
            answer: outcome.answer.clone(),
            label: outcome.label.clone(),
            attempts,
            kind: node.kind.as_str().to_string(),
        };
        let chosen = self
            .select_edge(&node_id, &ctx)?
            .map(|(edge, target)| (edge.clone(), target.clone()));

        // Everything fallible is done; commit the transition.
        session.attempts.insert(node_id.clone(), attempts);
        session.steps += 1;
        let mut next = match &chosen {
            Some((edge, target)) => {
                session.current = target.clone();
                NextAssignment::Move {
                    edge: edge.clone(),
                    target: target.clone(),
                }
            }
            None if outcome.passed && self.fragment.is_exit(&node_id) => {
                session.status = SessionStatus::Completed;
                NextAssignment::Completed
            }
            None if node.max_attempts.is_some_and(|max| attempts >= max) => {
                session.status = SessionStatus::Failed;
                session.failure_reason = Some(FailureReason::AttemptsExhausted);
                NextAssignment::Failed {
                    reason: FailureReason::AttemptsExhausted,
                }
            }
            None => NextAssignment::Stay,
        };
        if session.status == SessionStatus::Active && session.steps >= self.config.step_cap {
            session.status = SessionStatus::Failed;
            session.failure_reason = Some(FailureReason::StepCapExceeded);
            next = NextAssignment::Failed {
                reason: FailureReason::StepCapExceeded,
            };
        }

        let event = ActivityEvent {
            node: node_id.clone(),
            kind: node.kind,
            passed: outcome.passed,
            first_attempt: attempts == 1,
            session_completed: session.status == SessionStatus::Completed,
        };
        let (gamification, awards) = process_event(&session.gamification, &event, &self.rules);
        session.gamification = gamification;
        session.transcript.push(TranscriptEntry {
            seq: session.steps,
            node: node_id,
            submission,
            outcome: outcome.clone(),
            chosen_edge: chosen.map(|(edge, _)| edge),
            event,
        });
        Ok(SubmitResult {
            outcome,
            next,
            awards,
        })
    }
}
