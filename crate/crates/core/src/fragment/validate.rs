//! Structural validation of fragments.
//!
//! Every check produces issues with a stable code so that editors and API
//! clients can key on them. A fragment is publishable iff it has no errors.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{answers_match, normalize_answer, AnswerSpec, KindData, LearningFragment, DEFAULT_TOLERANCE};
use crate::condition::{
    check_types, check_variables, context_type, ConditionError, CONTEXT_VARIABLES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidationCode {
    InvalidVersion,
    InvalidCost,
    MissingEntry,
    NodeIdMismatch,
    DuplicateEdgeId,
    DanglingEdge,
    UnreachableNode,
    NoReachableExit,
    CycleWithoutExit,
    MissingRepresentation,
    AbstractWithRepresentation,
    KindDataMismatch,
    InvalidMaxAttempts,
    NegativeTolerance,
    DistractorConflict,
    EmptyQuiz,
    EmptyChoices,
    QuizCorrectOutOfRange,
    InvalidPassThreshold,
    InvalidComplexityMax,
    EmptyGoal,
    ConditionSyntax,
    UnknownBuiltin,
    UnknownVariable,
    ConditionTypeMismatch,
    /// Warning: an edge can never fire because an earlier edge from the same
    /// source is unconditional.
    ShadowedEdge,
}

impl ValidationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationCode::InvalidVersion => "INVALID_VERSION",
            ValidationCode::InvalidCost => "INVALID_COST",
            ValidationCode::MissingEntry => "MISSING_ENTRY",
            ValidationCode::NodeIdMismatch => "NODE_ID_MISMATCH",
            ValidationCode::DuplicateEdgeId => "DUPLICATE_EDGE_ID",
            ValidationCode::DanglingEdge => "DANGLING_EDGE",
            ValidationCode::UnreachableNode => "UNREACHABLE_NODE",
            ValidationCode::NoReachableExit => "NO_REACHABLE_EXIT",
            ValidationCode::CycleWithoutExit => "CYCLE_WITHOUT_EXIT",
            ValidationCode::MissingRepresentation => "MISSING_REPRESENTATION",
            ValidationCode::AbstractWithRepresentation => "ABSTRACT_WITH_REPRESENTATION",
            ValidationCode::KindDataMismatch => "KIND_DATA_MISMATCH",
            ValidationCode::InvalidMaxAttempts => "INVALID_MAX_ATTEMPTS",
            ValidationCode::NegativeTolerance => "NEGATIVE_TOLERANCE",
            ValidationCode::DistractorConflict => "DISTRACTOR_CONFLICT",
            ValidationCode::EmptyQuiz => "EMPTY_QUIZ",
            ValidationCode::EmptyChoices => "EMPTY_CHOICES",
            ValidationCode::QuizCorrectOutOfRange => "QUIZ_CORRECT_OUT_OF_RANGE",
            ValidationCode::InvalidPassThreshold => "INVALID_PASS_THRESHOLD",
            ValidationCode::InvalidComplexityMax => "INVALID_COMPLEXITY_MAX",
            ValidationCode::EmptyGoal => "EMPTY_GOAL",
            ValidationCode::ConditionSyntax => "CONDITION_SYNTAX",
            ValidationCode::UnknownBuiltin => "UNKNOWN_BUILTIN",
            ValidationCode::UnknownVariable => "UNKNOWN_VARIABLE",
            ValidationCode::ConditionTypeMismatch => "CONDITION_TYPE_MISMATCH",
            ValidationCode::ShadowedEdge => "SHADOWED_EDGE",
        }
    }
}

impl fmt::Display for ValidationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: ValidationCode,
    /// Offending node or edge id, when the issue is local to one element.
    pub element: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_publishable(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: ValidationCode) -> bool {
        self.errors.iter().any(|i| i.code == code)
    }

    pub fn error_codes(&self) -> BTreeSet<ValidationCode> {
        self.errors.iter().map(|i| i.code).collect()
    }

    fn error(&mut self, code: ValidationCode, element: Option<&str>, message: impl Into<String>) {
        self.errors.push(Issue {
            code,
            element: element.map(str::to_string),
            message: message.into(),
        });
    }

    fn warning(&mut self, code: ValidationCode, element: Option<&str>, message: impl Into<String>) {
        self.warnings.push(Issue {
            code,
            element: element.map(str::to_string),
            message: message.into(),
        });
    }
}

/// The six standard evaluation-context variables.
pub fn default_context_vars() -> BTreeSet<String> {
    CONTEXT_VARIABLES.iter().map(|(n, _)| n.to_string()).collect()
}

pub fn validate_fragment(
    fragment: &LearningFragment,
    context_vars: &BTreeSet<String>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    use ValidationCode as C;

    if fragment.version < 1 {
        report.error(C::InvalidVersion, None, "version must be at least 1");
    }
    if !(fragment.cost.is_finite() && fragment.cost > 0.0) {
        report.error(C::InvalidCost, None, format!("cost {} is not a positive number", fragment.cost));
    }
    if !fragment.nodes.contains_key(&fragment.entry) {
        report.error(
            C::MissingEntry,
            Some(&fragment.entry),
            format!("entry `{}` is not a node", fragment.entry),
        );
    }

    for (key, node) in &fragment.nodes {
        validate_node(key, node, &mut report);
    }
    validate_edges(fragment, context_vars, &mut report);
    validate_graph(fragment, &mut report);
    report
}

fn validate_node(key: &str, node: &super::ActivityNode, report: &mut ValidationReport) {
    use ValidationCode as C;
    let at = Some(key);
    if node.id != key {
        report.error(C::NodeIdMismatch, at, format!("node stored under `{key}` has id `{}`", node.id));
    }
    if node.kind_data.kind() != node.kind {
        report.error(
            C::KindDataMismatch,
            at,
            format!("{} node carries {} data", node.kind, node.kind_data.kind()),
        );
    }
    let is_abstract = node.kind == super::ActivityKind::Abstract;
    if is_abstract && !node.representations.is_empty() {
        report.error(C::AbstractWithRepresentation, at, "abstract nodes have no representations");
    }
    if !is_abstract && node.representations.is_empty() {
        report.error(C::MissingRepresentation, at, "concrete nodes need at least one representation");
    }
    if node.max_attempts == Some(0) {
        report.error(C::InvalidMaxAttempts, at, "max_attempts must be at least 1");
    }

    match &node.kind_data {
        KindData::Lesson(_) => {}
        KindData::CloseEnded(data) => {
            let (expected, tolerance) = match &data.expected {
                AnswerSpec::Text(text) => (normalize_answer(text), DEFAULT_TOLERANCE),
                AnswerSpec::Number { number, tolerance } => {
                    if !(*tolerance >= 0.0) {
                        report.error(C::NegativeTolerance, at, "tolerance must be non-negative");
                    }
                    (number.to_string(), tolerance.max(0.0))
                }
            };
            let mut seen: Vec<String> = Vec::new();
            for answer in data.distractors.keys() {
                let normalized = normalize_answer(answer);
                if answers_match(&normalized, &expected, tolerance) {
                    report.error(
                        C::DistractorConflict,
                        at,
                        format!("distractor `{answer}` equals the expected answer"),
                    );
                }
                if seen.iter().any(|s| answers_match(s, &normalized, DEFAULT_TOLERANCE)) {
                    report.error(
                        C::DistractorConflict,
                        at,
                        format!("distractor `{answer}` duplicates another after normalization"),
                    );
                }
                seen.push(normalized);
            }
        }
        KindData::Quiz(data) => {
            if data.items.is_empty() {
                report.error(C::EmptyQuiz, at, "quiz needs at least one item");
            }
            for (i, item) in data.items.iter().enumerate() {
                if item.choices.is_empty() {
                    report.error(C::EmptyChoices, at, format!("item {i} has no choices"));
                } else if item.correct >= item.choices.len() {
                    report.error(
                        C::QuizCorrectOutOfRange,
                        at,
                        format!("item {i}: correct index {} out of range", item.correct),
                    );
                }
            }
            if !(0.0..=1.0).contains(&data.pass_threshold) {
                report.error(
                    C::InvalidPassThreshold,
                    at,
                    format!("pass_threshold {} outside [0, 1]", data.pass_threshold),
                );
            }
        }
        KindData::Coding(data) => {
            if data.grader.complexity_max == Some(0) {
                report.error(C::InvalidComplexityMax, at, "complexity_max must be at least 1");
            }
        }
        KindData::Abstract(data) => {
            if data.goal.is_empty() {
                report.error(C::EmptyGoal, at, "abstract node needs a non-empty goal");
            }
        }
    }
}

fn validate_edges(
    fragment: &LearningFragment,
    context_vars: &BTreeSet<String>,
    report: &mut ValidationReport,
) {
    use ValidationCode as C;
    let mut edge_ids = BTreeSet::new();
    let mut unconditional: BTreeMap<&str, &str> = BTreeMap::new();
    for edge in &fragment.edges {
        let at = Some(edge.id.as_str());
        if !edge_ids.insert(edge.id.as_str()) {
            report.error(C::DuplicateEdgeId, at, format!("edge id `{}` is used twice", edge.id));
        }
        for end in [&edge.source, &edge.target] {
            if !fragment.nodes.contains_key(end) {
                report.error(
                    C::DanglingEdge,
                    at,
                    format!("edge `{}` references missing node `{end}`", edge.id),
                );
            }
        }
        if let Some(first) = unconditional.get(edge.source.as_str()) {
            report.warning(
                C::ShadowedEdge,
                at,
                format!("edge `{}` never fires: `{first}` before it always does", edge.id),
            );
        }
        match edge.condition.compile() {
            Err(ConditionError::UnknownBuiltin(name)) => {
                report.error(C::UnknownBuiltin, at, format!("unknown builtin `{name}`"))
            }
            Err(e) => report.error(C::ConditionSyntax, at, e.to_string()),
            Ok(condition) => {
                if let Err(e) = check_variables(&condition, context_vars) {
                    report.error(C::UnknownVariable, at, e.to_string());
                } else if let Err(e) = check_types(&condition, &context_type) {
                    report.error(C::ConditionTypeMismatch, at, e.to_string());
                }
                if condition.is_always() {
                    unconditional.entry(edge.source.as_str()).or_insert(edge.id.as_str());
                }
            }
        }
    }
}

fn validate_graph(fragment: &LearningFragment, report: &mut ValidationReport) {
    use ValidationCode as C;
    let mut graph = DiGraph::<&str, ()>::new();
    let index: BTreeMap<&str, _> = fragment
        .nodes
        .keys()
        .map(|id| (id.as_str(), graph.add_node(id.as_str())))
        .collect();
    for edge in &fragment.edges {
        if let (Some(&s), Some(&t)) = (index.get(edge.source.as_str()), index.get(edge.target.as_str())) {
            graph.add_edge(s, t, ());
        }
    }

    if let Some(&entry) = index.get(fragment.entry.as_str()) {
        let mut seen = BTreeSet::from([entry]);
        let mut queue = VecDeque::from([entry]);
        while let Some(n) = queue.pop_front() {
            for next in graph.neighbors(n) {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        for (id, ix) in &index {
            if !seen.contains(ix) {
                report.error(C::UnreachableNode, Some(id), format!("`{id}` is unreachable from the entry"));
            }
        }
        let exit_reachable = seen.iter().any(|&n| graph.neighbors(n).next().is_none());
        if !exit_reachable {
            report.error(C::NoReachableExit, None, "no exit node is reachable from the entry");
        }
    }

    // A strongly connected component with an edge leaving it gives every
    // cycle inside it a way out; one without traps learners forever.
    for component in tarjan_scc(&graph) {
        let members: BTreeSet<_> = component.iter().copied().collect();
        let cyclic = members.len() > 1
            || graph.contains_edge(component[0], component[0]);
        if !cyclic {
            continue;
        }
        let escapes = members
            .iter()
            .any(|&n| graph.neighbors(n).any(|m| !members.contains(&m)));
        if !escapes {
            let mut names: Vec<&str> = members.iter().map(|&n| graph[n]).collect();
            names.sort_unstable();
            report.error(
                C::CycleWithoutExit,
                Some(names[0]),
                format!("cycle through {} has no outgoing edge", names.join(", ")),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::fixtures::demo_fixture;

    fn codes(f: &LearningFragment) -> BTreeSet<ValidationCode> {
        validate_fragment(f, &default_context_vars()).error_codes()
    }

    #[test]
    fn demo_fixture_is_clean() {
        let report = validate_fragment(&demo_fixture(), &default_context_vars());
        assert_eq!(report, ValidationReport::default());
        assert!(report.is_publishable());
    }

    #[test]
    fn dangling_edge() {
        let mut f = demo_fixture();
        f.edges[0].target = "X9".into();
        assert!(codes(&f).contains(&ValidationCode::DanglingEdge));
    }

    #[test]
    fn unreachable_exit() {
        let f = fragment(
            "u",
            vec![lesson("A"), lesson("B"), lesson("Z")],
            vec![edge("ab", "A", "B", "pass"), edge("ba", "B", "A", "pass")],
        );
        let found = codes(&f);
        assert!(found.contains(&ValidationCode::NoReachableExit));
        assert!(found.contains(&ValidationCode::UnreachableNode));
        assert!(found.contains(&ValidationCode::CycleWithoutExit));
    }

    #[test]
    fn self_loop_with_escape_is_fine() {
        let f = fragment(
            "s",
            vec![lesson("A"), lesson("B")],
            vec![edge("aa", "A", "A", "fail"), edge("ab", "A", "B", "pass")],
        );
        assert!(codes(&f).is_empty());
        let trapped = fragment(
            "t",
            vec![lesson("A"), lesson("B")],
            vec![edge("ab", "A", "B", "pass"), edge("bb", "B", "B", "fail")],
        );
        assert_eq!(
            codes(&trapped),
            BTreeSet::from([ValidationCode::CycleWithoutExit, ValidationCode::NoReachableExit])
        );
    }

    #[test]
    fn shadowed_edges_warn() {
        let f = fragment(
            "w",
            vec![lesson("A"), lesson("B"), lesson("C")],
            vec![edge("ab", "A", "B", "always"), edge("ac", "A", "C", "pass")],
        );
        let report = validate_fragment(&f, &default_context_vars());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].code, ValidationCode::ShadowedEdge);
    }

    #[test]
    fn custom_context_vars_restrict_conditions() {
        let f = demo_fixture();
        let only_passed: BTreeSet<String> = ["passed".to_string()].into();
        let report = validate_fragment(&f, &only_passed);
        assert_eq!(report.error_codes(), BTreeSet::from([ValidationCode::UnknownVariable]));
    }

    #[test]
    fn validation_is_pure() {
        let mut f = demo_fixture();
        f.edges[3].target = "nowhere".into();
        let a = validate_fragment(&f, &default_context_vars());
        let b = validate_fragment(&f, &default_context_vars());
        assert_eq!(a, b);
    }
}
