//! Learning fragments: directed graphs of typed activities joined by ordered,
//! condition-guarded edges.

mod answer;
mod io;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition::{builtin_condition, parse_condition, Condition, ConditionError};

pub use answer::{answers_match, normalize_answer, parse_decimal, DEFAULT_TOLERANCE};
pub use io::{load_fragment, serialize_fragment};
pub use validate::{
    default_context_vars, validate_fragment, Issue, ValidationCode, ValidationReport,
};

pub type NodeId = String;
pub type EdgeId = String;
pub type ConceptId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Lesson,
    CloseEnded,
    Quiz,
    Coding,
    Abstract,
}

impl ActivityKind {
    pub const CONCRETE: [ActivityKind; 4] = [
        ActivityKind::Lesson,
        ActivityKind::CloseEnded,
        ActivityKind::Quiz,
        ActivityKind::Coding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityKind::Lesson => "lesson",
            ActivityKind::CloseEnded => "close_ended",
            ActivityKind::Quiz => "quiz",
            ActivityKind::Coding => "coding",
            ActivityKind::Abstract => "abstract",
        }
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Delivery channel a frontend can present. Declaration order is the
/// preference order used when several representations are acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Rich,
    Code,
    Audio,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Text, Modality::Rich, Modality::Code, Modality::Audio];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Rich => "rich",
            Modality::Code => "code",
            Modality::Audio => "audio",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Serializes through the canonical document form (see [`serialize_fragment`]).
#[derive(Debug, Clone, PartialEq)]
pub struct LearningFragment {
    pub id: String,
    pub title: String,
    pub version: u32,
    pub entry: NodeId,
    pub provides: BTreeSet<ConceptId>,
    pub requires: BTreeSet<ConceptId>,
    pub cost: f64,
    pub nodes: BTreeMap<NodeId, ActivityNode>,
    pub edges: Vec<Edge>,
    /// Editor-only data (layout and the like). Opaque to the engine.
    pub ui_metadata: BTreeMap<String, serde_json::Value>,
}

impl LearningFragment {
    pub fn node(&self, id: &str) -> Option<&ActivityNode> {
        self.nodes.get(id)
    }

    /// Edges leaving `node`, in priority order.
    pub fn outgoing_edges(&self, node: &str) -> Result<Vec<&Edge>, FragmentError> {
        if !self.nodes.contains_key(node) {
            return Err(FragmentError::UnknownNode(node.to_string()));
        }
        Ok(self.edges.iter().filter(|e| e.source == node).collect())
    }

    pub fn is_exit(&self, node: &str) -> bool {
        !self.edges.iter().any(|e| e.source == node)
    }

    /// Exit nodes, sorted by id.
    pub fn exits(&self) -> Vec<&NodeId> {
        self.nodes.keys().filter(|id| self.is_exit(id)).collect()
    }

    pub fn abstract_nodes(&self) -> impl Iterator<Item = &ActivityNode> {
        self.nodes
            .values()
            .filter(|n| n.kind == ActivityKind::Abstract)
    }

    pub fn kinds_present(&self) -> BTreeSet<ActivityKind> {
        self.nodes.values().map(|n| n.kind).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityNode {
    pub id: NodeId,
    pub kind: ActivityKind,
    pub title: String,
    /// Payload per modality, in the author's declared order.
    pub representations: IndexMap<Modality, String>,
    /// `None` means unlimited.
    pub max_attempts: Option<u32>,
    pub kind_data: KindData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum KindData {
    Lesson(LessonData),
    CloseEnded(CloseEndedData),
    Quiz(QuizData),
    Coding(CodingData),
    Abstract(AbstractData),
}

impl KindData {
    pub fn kind(&self) -> ActivityKind {
        match self {
            KindData::Lesson(_) => ActivityKind::Lesson,
            KindData::CloseEnded(_) => ActivityKind::CloseEnded,
            KindData::Quiz(_) => ActivityKind::Quiz,
            KindData::Coding(_) => ActivityKind::Coding,
            KindData::Abstract(_) => ActivityKind::Abstract,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LessonData {}

/// Expected answer: literal text, or a number with an absolute tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerSpec {
    Text(String),
    Number {
        number: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloseEndedData {
    pub prompt: String,
    pub expected: AnswerSpec,
    /// Wrong answer → label routed on by edge conditions.
    #[serde(default)]
    pub distractors: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuizItem {
    pub stem: String,
    pub choices: Vec<String>,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuizData {
    pub items: Vec<QuizItem>,
    #[serde(default = "default_pass_threshold")]
    pub pass_threshold: f64,
}

fn default_pass_threshold() -> f64 {
    0.6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestVector {
    pub input: String,
    pub expected_output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraderSpec {
    #[serde(default)]
    pub required_tokens: Vec<String>,
    #[serde(default)]
    pub forbidden_tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity_max: Option<u32>,
    #[serde(default = "default_branch_keywords")]
    pub branch_keywords: Vec<String>,
    #[serde(default)]
    pub test_vectors: Vec<TestVector>,
}

impl Default for GraderSpec {
    fn default() -> Self {
        GraderSpec {
            required_tokens: Vec::new(),
            forbidden_tokens: Vec::new(),
            complexity_max: None,
            branch_keywords: default_branch_keywords(),
            test_vectors: Vec::new(),
        }
    }
}

pub fn default_branch_keywords() -> Vec<String> {
    ["if", "else", "for", "while", "case", "&&", "||", "catch"]
        .map(String::from)
        .to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodingData {
    pub statement: String,
    pub grader: GraderSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractConstraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_kinds: Option<BTreeSet<ActivityKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_modality: Option<Modality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractData {
    pub goal: BTreeSet<ConceptId>,
    #[serde(default)]
    pub constraints: AbstractConstraints,
}

/// Either a builtin abbreviation (`{"builtin": "pass"}`) or expression source
/// (`{"expr": "score >= 0.8"}`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConditionSpec {
    Builtin { builtin: String },
    Expr { expr: String },
}

impl ConditionSpec {
    pub fn builtin(name: impl Into<String>) -> Self {
        ConditionSpec::Builtin {
            builtin: name.into(),
        }
    }

    pub fn expr(source: impl Into<String>) -> Self {
        ConditionSpec::Expr {
            expr: source.into(),
        }
    }

    pub fn compile(&self) -> Result<Condition, ConditionError> {
        match self {
            ConditionSpec::Builtin { builtin } => builtin_condition(builtin),
            ConditionSpec::Expr { expr } => parse_condition(expr),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub source: NodeId,
    pub target: NodeId,
    pub condition: ConditionSpec,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FragmentError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    MalformedDocument {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
}
